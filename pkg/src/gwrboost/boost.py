"""Geographically weighted gradient boosting.

Each stage fits a GWR (same weights, same design) to the learning-rate scaled
residual of the running model and adds its coefficient rows to the running
field, so the final model is still one linear predictor per location.

Two smoothers are involved when counting effective parameters:

* :func:`stagewise_hat_matrix` is the operator this fitting loop actually
  applies to ``y``: ``S_1 = H`` and ``S_m = S_{m-1} + lr * H (I - S_{m-1})``.
* :func:`boosted_hat_matrix` is ``H * sum_m [lr (I - H)]^(m-1)``, the operator
  of the recursion where each stage target is ``lr`` times the previous
  stage's own residual, ``y_m = lr (I - H) y_{m-1}``. It coincides with the
  stage-wise operator only when ``lr == 1``.

``BoostConfig.dof`` picks which trace enters AIC/AICc.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import DimensionMismatchError, InvalidConfigError, SingularSystemError
from .gwr import gwr_operators
from .linalg import COND_THRESHOLD
from .metrics import gaussian_log_likelihood, aic_aicc, r2_and_adjusted, rss
from .weights import SpatialWeightScheme

EARLY_STOP = ("aicc", "r2", "none")
DOF_MODES = ("pipeline", "closed-form")


@dataclass(frozen=True)
class BoostConfig:
    max_stages: int = 100
    learning_rate: float = 0.1
    bandwidth_factor: float = 1.2
    early_stop: str = "aicc"
    dof: str = "pipeline"
    likelihood: str = "profile"

    def __post_init__(self):
        if int(self.max_stages) != self.max_stages or self.max_stages < 1:
            raise InvalidConfigError(f"max_stages must be a positive integer, got {self.max_stages!r}")
        if not 0 < self.learning_rate <= 1:
            raise InvalidConfigError(f"learning_rate must lie in (0, 1], got {self.learning_rate!r}")
        if not self.bandwidth_factor > 0:
            raise InvalidConfigError(f"bandwidth_factor must be > 0, got {self.bandwidth_factor!r}")
        if self.early_stop not in EARLY_STOP:
            raise InvalidConfigError(f"early_stop must be one of {EARLY_STOP}, got {self.early_stop!r}")
        if self.dof not in DOF_MODES:
            raise InvalidConfigError(f"dof must be one of {DOF_MODES}, got {self.dof!r}")
        if self.likelihood not in ("profile", "precision"):
            raise InvalidConfigError(f"likelihood must be 'profile' or 'precision', got {self.likelihood!r}")


@dataclass(frozen=True)
class StageRecord:
    stage: int
    coefficients: np.ndarray
    fitted: np.ndarray
    rss: float
    r2: float
    aicc: float
    hat_trace: float


@dataclass
class BoostTrace:
    records: list = field(default_factory=list)
    stopped_at: int = 0
    trace_decreased_at: Optional[int] = None

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def record(self, stage) -> StageRecord:
        return self.records[stage - 1]


@dataclass
class GwrBoostModel:
    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    hat_trace: float
    hat_matrix: np.ndarray
    trace: BoostTrace
    scheme: SpatialWeightScheme
    config: BoostConfig
    name: str = "gwrboost"

    @property
    def stopped_at(self) -> int:
        return self.trace.stopped_at

    def diagnostics(self, data: Dataset, likelihood=None, moran_weights=None):
        from .metrics import diagnose

        return diagnose(data.y, self.fitted, self.hat_trace, coords=data.coords,
                        moran_weights=moran_weights, likelihood=likelihood or self.config.likelihood)


def _check_square(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatchError(f"hat matrix must be square, got shape {H.shape}")
    return H


def boosted_hat_matrix(H, learning_rate, stages) -> np.ndarray:
    """``H @ sum_{m=1..M} [lr (I - H)]^(m-1)`` accumulated term by term."""
    H = _check_square(H)
    if stages < 1:
        raise InvalidConfigError(f"stages must be >= 1, got {stages}")
    n = len(H)
    step = learning_rate * (np.eye(n) - H)
    term = np.eye(n)
    total = np.eye(n)
    for _ in range(stages - 1):
        term = step @ term
        total += term
    return H @ total


def stagewise_hat_matrix(H, learning_rate, stages) -> np.ndarray:
    """Operator mapping ``y`` to the boosted fit after ``stages`` stages."""
    H = _check_square(H)
    if stages < 1:
        raise InvalidConfigError(f"stages must be >= 1, got {stages}")
    S = H.copy()
    for _ in range(stages - 1):
        S = S + learning_rate * (H - H @ S)
    return S


def aggregate_coefficients(fields) -> np.ndarray:
    """Sum per-stage coefficient fields into one field."""
    fields = [np.asarray(f, dtype=float) for f in fields]
    if not fields:
        raise DimensionMismatchError("no coefficient fields to aggregate")
    shape = fields[0].shape
    for f in fields[1:]:
        if f.shape != shape:
            raise DimensionMismatchError(f"coefficient fields differ in shape: {shape} vs {f.shape}")
    return np.sum(fields, axis=0)


def early_stop_check(scores, criterion="aicc") -> Optional[int]:
    """Decide whether the latest stage made things worse.

    ``scores`` is a :class:`BoostTrace` or the sequence of per-stage AICc
    (or R^2) values so far. Returns ``None`` to continue or the stage number
    (1-based) whose snapshot should be returned.
    """
    if criterion == "none":
        return None
    if isinstance(scores, BoostTrace):
        scores = scores.column("aicc" if criterion == "aicc" else "r2")
    scores = list(scores)
    if len(scores) < 2:
        return None
    last, prev = scores[-1], scores[-2]
    if criterion == "aicc":
        worse = last > prev or (math.isnan(last) and not math.isnan(prev))
    elif criterion == "r2":
        worse = last < prev
    else:
        raise InvalidConfigError(f"unknown early-stop criterion {criterion!r}")
    return len(scores) - 1 if worse else None


def _aicc(y, fitted, k, likelihood):
    n = len(y)
    return aic_aicc(gaussian_log_likelihood(rss(y, fitted), n, likelihood), k, n)[1]


def fit_gwrboost(data: Dataset, scheme: SpatialWeightScheme, config: BoostConfig = BoostConfig(), *,
                 threads=1, jitter=False, cond_threshold=COND_THRESHOLD) -> GwrBoostModel:
    """Boost GWR fits at a fixed weighting scheme.

    ``scheme`` is used as given; scale a reference bandwidth by
    ``config.bandwidth_factor`` beforehand or call
    :func:`fit_gwrboost_from_reference`.

    Raises
    ------
    SingularSystemError
        With ``stage=1`` and the failing location; the local systems are
        solved once and reused by every stage.
    """
    try:
        ops = gwr_operators(data, scheme, threads=threads, jitter=jitter, cond_threshold=cond_threshold)
    except SingularSystemError as exc:
        exc.stage = 1
        raise
    y = data.y
    H = ops.hat
    n = data.n
    lr = config.learning_rate
    eye = np.eye(n)

    coef = ops.coefficients(y)
    fitted = H @ y
    # S is the operator whose trace is reported as the effective parameters
    S = H.copy()
    term = eye
    partial = eye.copy()
    step = lr * (eye - H) if config.dof == "closed-form" else None

    trace = BoostTrace()
    snapshots = {}

    def record(m):
        k = float(np.trace(S))
        r = rss(y, fitted)
        r2 = r2_and_adjusted(y, fitted, k, n)[0]
        trace.records.append(StageRecord(m, coef.copy(), fitted.copy(), r, r2,
                                         _aicc(y, fitted, k, config.likelihood), k))

    record(1)
    snapshots[1] = S
    stopped_at = 1
    for m in range(2, config.max_stages + 1):
        target = lr * (y - fitted)
        coef = coef + ops.coefficients(target)
        fitted = fitted + H @ target
        if config.dof == "pipeline":
            S = S + lr * (H - H @ S)
        else:
            term = step @ term
            partial = partial + term
            S = H @ partial
        record(m)
        snapshots = {m - 1: snapshots[m - 1], m: S}
        if trace.trace_decreased_at is None and trace.records[-1].hat_trace < trace.records[-2].hat_trace - 1e-9:
            trace.trace_decreased_at = m
            warnings.warn(f"effective parameters decreased at stage {m}", RuntimeWarning, stacklevel=2)
        stop = early_stop_check(trace, config.early_stop)
        if stop is not None:
            stopped_at = stop
            break
        stopped_at = m
    trace.stopped_at = stopped_at
    final = trace.record(stopped_at)
    return GwrBoostModel(coefficients=final.coefficients, fitted=final.fitted, residuals=y - final.fitted,
                         hat_trace=final.hat_trace, hat_matrix=snapshots[stopped_at], trace=trace,
                         scheme=scheme, config=config)


def fit_gwrboost_from_reference(data: Dataset, reference: SpatialWeightScheme,
                                config: BoostConfig = BoostConfig(), **kwargs) -> GwrBoostModel:
    """Scale a reference (e.g. GWR-optimal) bandwidth by the configured factor and boost."""
    return fit_gwrboost(data, reference.scaled(config.bandwidth_factor), config, **kwargs)
