"""Ordinary least squares and classic GWR, plus bandwidth selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import InvalidBandwidthError, SearchFailureError, SingularSystemError
from .linalg import COND_THRESHOLD, LocalOperators, local_operator, local_operators, wls_solve
from .metrics import Diagnostics, aicc_score, diagnose
from .weights import SpatialWeightScheme, distance_matrix, weight_matrix


@dataclass
class GwrModel:
    """A fitted local (or global) linear model.

    ``coefficients`` has one row per observation, intercept first.
    """

    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    hat_trace: float
    hat_matrix: np.ndarray
    scheme: Optional[SpatialWeightScheme]
    operators: Optional[LocalOperators] = field(default=None, repr=False)
    name: str = "gwr"

    def diagnostics(self, data: Dataset, likelihood="profile", moran_weights=None) -> Diagnostics:
        return diagnose(data.y, self.fitted, self.hat_trace, coords=data.coords,
                        moran_weights=moran_weights, likelihood=likelihood)


def _check_adaptive(scheme: SpatialWeightScheme, n: int, q: int):
    if scheme.is_adaptive and not q + 1 <= scheme.neighbors <= n - 1:
        raise InvalidBandwidthError(
            f"adaptive neighbor count must lie in [{q + 1}, {n - 1}], got {scheme.neighbors}")


def gwr_operators(data: Dataset, scheme: SpatialWeightScheme, *, threads=1, jitter=False,
                  cond_threshold=COND_THRESHOLD, dist=None) -> LocalOperators:
    X = data.design
    _check_adaptive(scheme, data.n, X.shape[1])
    W = weight_matrix(data.coords, scheme, dist=dist)
    return local_operators(X, W, threads=threads, jitter=jitter, cond_threshold=cond_threshold)


def model_from_operators(ops: LocalOperators, y, scheme, name="gwr") -> GwrModel:
    y = np.asarray(y, dtype=float)
    coefficients = ops.coefficients(y)
    fitted = ops.hat @ y
    return GwrModel(coefficients=coefficients, fitted=fitted, residuals=y - fitted,
                    hat_trace=float(np.trace(ops.hat)), hat_matrix=ops.hat,
                    scheme=scheme, operators=ops, name=name)


def fit_gwr(data: Dataset, scheme: SpatialWeightScheme, *, threads=1, jitter=False,
            cond_threshold=COND_THRESHOLD) -> GwrModel:
    """Fit one weighted linear regression at every observation.

    Raises
    ------
    SingularSystemError
        Naming the first location whose local system is unsolvable.
    InvalidBandwidthError
        If the scheme cannot be realised on this dataset.
    """
    ops = gwr_operators(data, scheme, threads=threads, jitter=jitter, cond_threshold=cond_threshold)
    return model_from_operators(ops, data.y, scheme)


def fit_ols(data: Dataset) -> GwrModel:
    """Global least squares, i.e. GWR with every weight equal to one."""
    X = data.design
    C, _, _ = local_operator(X, np.ones(data.n), X[0])
    beta = C @ data.y
    hat = X @ C
    fitted = hat @ data.y
    return GwrModel(coefficients=np.tile(beta, (data.n, 1)), fitted=fitted, residuals=data.y - fitted,
                    hat_trace=float(np.trace(hat)), hat_matrix=hat, scheme=None, name="ols")


# -- bandwidth selection -----------------------------------------------------

CRITERIA = ("aicc", "loocv")
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class BandwidthSearch:
    scheme: SpatialWeightScheme
    score: float
    criterion: str
    evaluated: list  # (bandwidth, score) in evaluation order

    @property
    def bandwidth(self):
        return self.scheme.value


def bandwidth_score(data: Dataset, scheme: SpatialWeightScheme, criterion="aicc", *,
                    likelihood="profile", dist=None, threads=1) -> float:
    """Selection criterion for one candidate; ``inf`` if any local fit fails."""
    try:
        ops = gwr_operators(data, scheme, dist=dist, threads=threads)
    except SingularSystemError:
        return math.inf
    H = ops.hat
    y = data.y
    fitted = H @ y
    if criterion == "aicc":
        score = aicc_score(y, fitted, float(np.trace(H)), likelihood)
        return math.inf if math.isnan(score) else score
    if criterion == "loocv":
        # deleting observation i from its own weighted fit; exact for WLS
        lev = np.diag(H)
        if np.any(lev >= 1.0 - 1e-12):
            return math.inf
        deleted = (y - fitted) / (1.0 - lev)
        return float(deleted @ deleted)
    raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")


def loocv_brute_force(data: Dataset, scheme: SpatialWeightScheme) -> float:
    """LOOCV score by refitting each location with its own weight set to 0."""
    X, y = data.design, data.y
    W = weight_matrix(data.coords, scheme)
    total = 0.0
    for i in range(data.n):
        w = W[i].copy()
        w[i] = 0.0
        sol = wls_solve(X, y, w, i)
        total += (y[i] - X[i] @ sol.beta) ** 2
    return total


def fixed_search_interval(data: Dataset):
    """Smallest bandwidth giving every location p+1 other neighbours, and the
    largest pairwise distance."""
    dist = distance_matrix(data.coords)
    q = data.design.shape[1]
    lo = float(np.sort(dist, axis=1)[:, q].max())
    hi = float(dist.max())
    return lo * (1.0 + 1e-6), hi, dist


def _golden_min(f, a, b, tol):
    """Golden-section minimisation of ``f`` on [a, b]."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            # ties move toward the larger bandwidth
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)


def search_bandwidth(data: Dataset, kernel="bisquare", mode="fixed", criterion="aicc", *,
                     bounds=None, likelihood="profile", threads=1) -> BandwidthSearch:
    """Choose the bandwidth minimising AICc or the leave-one-out CV score.

    Fixed bandwidths are searched by golden section on a log scale between
    ``bounds`` (default: the smallest solvable bandwidth and the largest
    pairwise distance). Adaptive neighbour counts are searched by integer
    golden section over ``[p+2, N-1]`` with an exhaustive finish.

    Returns
    -------
    BandwidthSearch
        The argmin over every evaluated candidate (ties go to the larger
        bandwidth) and the full list of evaluations.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    evaluated = {}

    if mode == "fixed":
        lo, hi, dist = fixed_search_interval(data)
        if bounds is not None:
            lo, hi = map(float, bounds)
        if not 0 < lo < hi:
            raise SearchFailureError(f"invalid search interval [{lo}, {hi}]")

        def f(log_h):
            h = float(math.exp(log_h))
            if h not in evaluated:
                evaluated[h] = bandwidth_score(data, SpatialWeightScheme.fixed(h, kernel), criterion,
                                               likelihood=likelihood, dist=dist, threads=threads)
            return evaluated[h]

        a, b = math.log(lo), math.log(hi)
        f(a), f(b)
        _golden_min(f, a, b, 1e-2 * (b - a))
        make = lambda h: SpatialWeightScheme.fixed(h, kernel)
    elif mode == "adaptive":
        q = data.design.shape[1]
        lo, hi = (q + 1, data.n - 1) if bounds is None else map(int, bounds)
        if not 1 <= lo <= hi <= data.n - 1:
            raise SearchFailureError(f"invalid neighbour interval [{lo}, {hi}]")
        dist = distance_matrix(data.coords)

        def g(k):
            k = int(round(k))
            if k not in evaluated:
                evaluated[k] = bandwidth_score(data, SpatialWeightScheme.adaptive(k, kernel), criterion,
                                               likelihood=likelihood, dist=dist, threads=threads)
            return evaluated[k]

        a, b = lo, hi
        while b - a > 4:
            c = int(round(b - _GOLDEN * (b - a)))
            d = int(round(a + _GOLDEN * (b - a)))
            if c >= d:
                break
            if g(c) < g(d):
                b = d
            else:
                a = c
        for k in range(a, b + 1):
            g(k)
        make = lambda k: SpatialWeightScheme.adaptive(k, kernel)
    else:
        raise ValueError(f"unknown bandwidth mode {mode!r}")

    finite = [(bw, s) for bw, s in evaluated.items() if math.isfinite(s)]
    if not finite:
        raise SearchFailureError("no bandwidth in the search interval gave solvable local fits")
    best_bw, best_score = min(finite, key=lambda t: (t[1], -t[0]))
    return BandwidthSearch(scheme=make(best_bw), score=best_score, criterion=criterion,
                           evaluated=list(evaluated.items()))
