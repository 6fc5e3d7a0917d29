"""Goodness-of-fit, information criteria and residual autocorrelation.

All functions take plain arrays (observed, fitted, effective parameter count,
sample size) so OLS, GWR and boosted fits are scored identically.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, UndefinedVarianceError
from .weights import distance_matrix

LIKELIHOODS = ("profile", "precision")


def rss(y, fitted) -> float:
    y = np.asarray(y, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    if y.shape != fitted.shape:
        raise DimensionMismatchError(f"y {y.shape} vs fitted {fitted.shape}")
    r = y - fitted
    return float(r @ r)


def r2_and_adjusted(y, fitted, k, n=None):
    """Coefficient of determination and its degrees-of-freedom adjustment.

    The adjusted value is NaN when ``n <= k + 1``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y) if n is None else n
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise UndefinedVarianceError("response has zero total variance")
    r2 = 1.0 - rss(y, fitted) / tss
    if n - k - 1 <= 0:
        return r2, math.nan
    return r2, 1.0 - (n - 1) * (1.0 - r2) / (n - k - 1)


def gaussian_log_likelihood(rss_value, n, form="profile") -> float:
    """Maximised Gaussian log likelihood given the residual sum of squares.

    ``form='profile'`` is the usual concentrated likelihood with the error
    variance at its MLE ``rss/n``. ``form='precision'`` maximises
    ``(n/2) ln s - (n/2) ln 2pi - s * rss`` over the precision ``s``, which
    gives ``s = n / (2 rss)``; it sits ``(n/2) ln 2`` below the profile form.

    A perfect fit (``rss == 0``) returns ``+inf``.
    """
    if rss_value < 0:
        raise ValueError(f"rss must be nonnegative, got {rss_value}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if rss_value == 0:
        return math.inf
    if form == "profile":
        return -0.5 * n * (math.log(rss_value / n) + 1.0 + math.log(2.0 * math.pi))
    if form == "precision":
        s = n / (2.0 * rss_value)
        return 0.5 * n * math.log(s) - 0.5 * n * math.log(2.0 * math.pi) - s * rss_value
    raise ValueError(f"unknown likelihood form {form!r}; expected one of {LIKELIHOODS}")


def aic_aicc(log_likelihood, k, n):
    """AIC and small-sample corrected AICc.

    AICc is NaN (overparameterised) when ``n <= k + 1``.
    """
    aic = -2.0 * log_likelihood + 2.0 * k
    denom = n - k - 1
    if denom <= 0:
        return aic, math.nan
    return aic, aic + 2.0 * k * (k + 1.0) / denom


def aicc_score(y, fitted, k, form="profile") -> float:
    """AICc straight from a fit; used as a selection criterion."""
    n = len(y)
    ll = gaussian_log_likelihood(rss(y, fitted), n, form)
    return aic_aicc(ll, k, n)[1]


# -- Moran's I ---------------------------------------------------------------


@dataclass(frozen=True)
class MoranWeights:
    matrix: np.ndarray
    row_standardized: bool = True

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"Moran weights must be square, got {m.shape}")
        if np.any(np.diag(m) != 0):
            raise ValueError("Moran weights must have a zero diagonal")
        if np.any(m < 0):
            raise ValueError("Moran weights must be nonnegative")

    @classmethod
    def from_matrix(cls, matrix, row_standardize=True) -> "MoranWeights":
        m = np.array(matrix, dtype=float)
        np.fill_diagonal(m, 0.0)
        if row_standardize:
            sums = m.sum(axis=1, keepdims=True)
            m = np.divide(m, sums, out=np.zeros_like(m), where=sums > 0)
        return cls(m, row_standardize)


def rook_weights(coords, row_standardize=True) -> MoranWeights:
    """Rook contiguity: cells at unit grid distance are neighbours."""
    d = distance_matrix(coords)
    return MoranWeights.from_matrix(np.isclose(d, 1.0).astype(float), row_standardize)


def knn_weights(coords, k=8, row_standardize=True) -> MoranWeights:
    d = distance_matrix(coords)
    n = len(d)
    k = min(k, n - 1)
    m = np.zeros_like(d)
    order = np.argsort(d + np.diag(np.full(n, np.inf)), axis=1, kind="stable")[:, :k]
    np.put_along_axis(m, order, 1.0, axis=1)
    return MoranWeights.from_matrix(m, row_standardize)


def is_regular_grid(coords) -> bool:
    """True when the points fill a rectangular lattice of integer cells."""
    c = np.asarray(coords, dtype=float)
    if not np.all(c == np.round(c)):
        return False
    us, vs = np.unique(c[:, 0]), np.unique(c[:, 1])
    if len(us) * len(vs) != len(c) or len({tuple(r) for r in c}) != len(c):
        return False
    return bool(np.all(np.diff(us) == 1) and np.all(np.diff(vs) == 1))


def default_moran_weights(coords) -> MoranWeights:
    """Rook contiguity on full grids, 8 nearest neighbours otherwise."""
    if is_regular_grid(coords):
        return rook_weights(coords)
    return knn_weights(coords, k=8)


def morans_i(values, weights) -> float:
    x = np.asarray(values, dtype=float)
    w = weights.matrix if isinstance(weights, MoranWeights) else np.asarray(weights, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("Moran's I needs at least two values")
    if w.shape != (n, n):
        raise DimensionMismatchError(f"weights {w.shape} do not match {n} values")
    z = x - x.mean()
    ss = float(z @ z)
    scale = float(np.abs(x).max())
    if ss == 0.0 or ss <= n * (1e-12 * scale) ** 2:
        raise UndefinedVarianceError("Moran's I is undefined for constant values")
    total = float(w.sum())
    if total <= 0:
        raise ValueError("Moran weights sum to zero")
    return float(n * (z @ w @ z) / (total * ss))


def moran_permutation_test(values, weights, permutations=999, seed=0):
    """Moran's I with its permutation mean and standard deviation.

    Returns ``(I, perm_mean, perm_sd, pseudo_p)`` with a two-sided pseudo
    p-value.
    """
    x = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    observed = morans_i(x, weights)
    sims = np.array([morans_i(rng.permutation(x), weights) for _ in range(permutations)])
    mean, sd = float(sims.mean()), float(sims.std(ddof=1))
    extreme = np.sum(np.abs(sims - mean) >= abs(observed - mean))
    return observed, mean, sd, float((extreme + 1) / (permutations + 1))


def coefficient_rmse(true_field, estimated_field, j=None):
    """Root mean squared error of local coefficient estimates.

    With ``j`` given, the RMSE of column j; otherwise one value per column.
    """
    a = np.asarray(true_field, dtype=float)
    b = np.asarray(estimated_field, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"fields have shapes {a.shape} and {b.shape}")
    if a.ndim == 1:
        return float(np.sqrt(np.mean((a - b) ** 2)))
    per = np.sqrt(np.mean((a - b) ** 2, axis=0))
    return float(per[j]) if j is not None else per


# -- aggregate record --------------------------------------------------------


@dataclass
class Diagnostics:
    rss: float
    r2: float
    adjusted_r2: float
    aic: float
    aicc: float
    moran_i: float
    effective_params: float
    log_likelihood: float
    n: int
    likelihood: str = "profile"
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def diagnose(y, fitted, k, coords=None, moran_weights: Optional[MoranWeights] = None,
             likelihood="profile") -> Diagnostics:
    """Compute the full metric set for one fitted model."""
    y = np.asarray(y, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    n = len(y)
    flags = []
    value = rss(y, fitted)
    r2, adj = r2_and_adjusted(y, fitted, k, n)
    ll = gaussian_log_likelihood(value, n, likelihood)
    if math.isinf(ll):
        flags.append("perfect_fit")
    aic, aicc = aic_aicc(ll, k, n)
    if math.isnan(aicc):
        flags.append("overparameterized")
    moran = math.nan
    if moran_weights is None and coords is not None:
        moran_weights = default_moran_weights(coords)
    if moran_weights is not None:
        try:
            moran = morans_i(y - fitted, moran_weights)
        except UndefinedVarianceError:
            flags.append("constant_residuals")
    return Diagnostics(rss=value, r2=r2, adjusted_r2=adj, aic=aic, aicc=aicc, moran_i=moran,
                       effective_params=float(k), log_likelihood=ll, n=n,
                       likelihood=likelihood, flags=flags)
