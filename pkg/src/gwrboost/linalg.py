"""Weighted least squares on the sqrt(w)-scaled design, with hat-matrix rows.

Every fit in the package (OLS, GWR, each boosting stage) goes through
:func:`local_operator`, which factors the scaled design by QR and never forms
or inverts ``X'WX``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatchError, SingularSystemError
from .weights import SpatialWeightScheme, weight_matrix

COND_THRESHOLD = 1e12
JITTER = 1e-8


def design_matrix(covariates, intercept=True) -> np.ndarray:
    """Prepend a column of ones to the covariates."""
    Z = np.asarray(covariates, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if not intercept:
        return Z
    return np.column_stack([np.ones(len(Z)), Z])


def check_design(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError(f"design matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite entries")
    if not np.all(X[:, 0] == 1.0):
        raise ValueError("first design column must be the intercept (all ones)")
    if X.shape[0] < X.shape[1]:
        raise DimensionMismatchError(f"need N >= p+1 rows, got {X.shape}")
    return X


@dataclass(frozen=True)
class LocalSolution:
    beta: np.ndarray
    hat_row: np.ndarray
    condition_estimate: float


def local_operator(X, w, x_target, *, location=None, cond_threshold=COND_THRESHOLD, jitter=False):
    """Linear map from the response to the local coefficients.

    Returns ``(C, support, cond)`` where ``C`` has shape ``(p+1, len(support))``
    and ``beta = C @ y[support]``. Zero-weight rows are excluded from the
    factorization.
    """
    n, q = X.shape
    support = np.flatnonzero(w > 0)
    if len(support) < q and not jitter:
        raise SingularSystemError(
            f"only {len(support)} positively weighted observations for {q} parameters",
            condition=float("inf"), location=location)
    sw = np.sqrt(w[support])
    A = X[support] * sw[:, None]
    if jitter:
        A = np.vstack([A, np.sqrt(JITTER) * np.eye(q)])
    Q, R = np.linalg.qr(A)
    sv = np.linalg.svd(R, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if not cond <= cond_threshold:
        raise SingularSystemError("local weighted system is rank deficient or ill conditioned",
                                  condition=cond, location=location)
    C = solve_triangular(R, Q[: len(support)].T) * sw
    return C, support, cond


def wls_solve(X, y, w, target_row, *, cond_threshold=COND_THRESHOLD, jitter=False) -> LocalSolution:
    """Weighted least squares fit, evaluated at one target row of ``X``.

    Parameters
    ----------
    X : (N, p+1) ndarray
        Design matrix with a leading intercept column.
    y : (N,) ndarray
    w : (N,) ndarray
        Nonnegative observation weights.
    target_row : int
        Row of ``X`` whose fitted value the returned ``hat_row`` reproduces.
    cond_threshold : float
        Largest acceptable condition number of the scaled design.
    jitter : bool
        Add a small ridge (1e-8) to the normal-matrix diagonal instead of
        failing on near-singular systems.

    Returns
    -------
    LocalSolution
        ``beta`` solves ``min sum w_i (y_i - x_i beta)^2``; ``hat_row @ y``
        equals the fitted value at ``target_row`` and is exactly zero on
        zero-weight observations.

    Raises
    ------
    SingularSystemError
        If fewer than p+1 weights are positive or the condition estimate
        exceeds ``cond_threshold``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (X.shape[0] == len(y) == len(w)):
        raise DimensionMismatchError(f"X has {X.shape[0]} rows, y {len(y)}, w {len(w)}")
    C, support, cond = local_operator(X, w, X[target_row], location=target_row,
                                      cond_threshold=cond_threshold, jitter=jitter)
    beta = C @ y[support]
    hat_row = np.zeros(X.shape[0])
    hat_row[support] = X[target_row] @ C
    return LocalSolution(beta=beta, hat_row=hat_row, condition_estimate=cond)


@dataclass(frozen=True)
class LocalOperators:
    """Per-location coefficient operators for one weighting scheme.

    ``coef_op[i] @ y`` is the coefficient row at location i and ``hat[i]`` is
    the matching hat-matrix row.
    """

    coef_op: np.ndarray  # (N, p+1, N)
    hat: np.ndarray  # (N, N)
    conditions: np.ndarray  # (N,)

    def coefficients(self, y) -> np.ndarray:
        return np.einsum("ikn,n->ik", self.coef_op, np.asarray(y, dtype=float))


def local_operators(X, W, *, cond_threshold=COND_THRESHOLD, jitter=False, threads=1) -> LocalOperators:
    """Solve every local system for the weight rows of ``W``.

    Rows are independent and written to preassigned slots, so the result does
    not depend on ``threads``.
    """
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    n, q = X.shape
    if W.shape != (n, n):
        raise DimensionMismatchError(f"weight matrix shape {W.shape} does not match N={n}")
    coef_op = np.zeros((n, q, n))
    hat = np.zeros((n, n))
    conds = np.empty(n)

    def solve_rows(rows):
        for i in rows:
            C, support, cond = local_operator(X, W[i], X[i], location=i,
                                              cond_threshold=cond_threshold, jitter=jitter)
            coef_op[i][:, support] = C
            hat[i, support] = X[i] @ C
            conds[i] = cond

    if threads is None or threads <= 1:
        solve_rows(range(n))
    else:
        chunks = np.array_split(np.arange(n), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for fut in [pool.submit(solve_rows, c) for c in chunks]:
                fut.result()
    return LocalOperators(coef_op=coef_op, hat=hat, conditions=conds)


def global_hat_matrix(X, coords, scheme: SpatialWeightScheme, **kwargs) -> np.ndarray:
    """N x N smoother whose row i is the hat row of the fit at location i."""
    W = weight_matrix(coords, scheme)
    return local_operators(check_design(X), W, **kwargs).hat
