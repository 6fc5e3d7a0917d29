"""Synthetic 25 x 25 grid experiment with four coefficient surfaces."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Dataset

SURFACES = ("stationary", "low", "medium", "high")
RNG_NAME = "numpy PCG64, SeedSequence([base_seed, rep])"


def surface_value(kind, u, v):
    """Coefficient surface evaluated at grid position (u, v)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if kind == "stationary":
        out = np.full(np.broadcast(u, v).shape, 2.0)
    elif kind == "low":
        out = (u + v) / 8.0 - 2.0
    elif kind == "medium":
        out = 3.0 * np.cos(np.pi * np.exp(u / 25.0)) * np.sin(np.pi * np.exp(v / 25.0)) + 1.0
    elif kind == "high":
        out = (36.0 - (6.0 - u / 2.0) ** 2) * (36.0 - (6.0 - v / 2.0) ** 2) / 216.0 - 2.0
    else:
        raise ValueError(f"unknown surface {kind!r}; expected one of {SURFACES}")
    return float(out) if out.ndim == 0 else out


def grid_coords(extent=25) -> np.ndarray:
    """Cell centres (u, v) in 1..extent, u varying fastest."""
    if extent < 2:
        raise ValueError(f"grid extent must be >= 2, got {extent}")
    v, u = np.meshgrid(np.arange(1, extent + 1), np.arange(1, extent + 1), indexing="ij")
    return np.column_stack([u.ravel(), v.ravel()]).astype(float)


def true_coefficients(coords) -> np.ndarray:
    """N x 4 field: stationary intercept, then low, medium, high slopes."""
    u, v = coords[:, 0], coords[:, 1]
    return np.column_stack([surface_value(k, u, v) for k in SURFACES])


def rep_rng(base_seed: int, rep: int = 0) -> np.random.Generator:
    """Independent stream for one replication, fixed by (base_seed, rep) alone."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(base_seed), int(rep)])))


@dataclass(frozen=True)
class SimulatedDataset:
    data: Dataset
    true_coefficients: np.ndarray
    noise: np.ndarray
    seed: int
    rep: int = 0


def generate_dataset(seed=0, extent=25, noise_sd=0.5, covariates="normal", rep=0) -> SimulatedDataset:
    """Draw covariates and noise and synthesise the response.

    Covariates are i.i.d. standard normal (``covariates='uniform'`` draws
    U(0, 1) instead); noise is N(0, noise_sd^2).
    """
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    coords = grid_coords(extent)
    n = len(coords)
    rng = rep_rng(seed, rep)
    if covariates == "normal":
        Z = rng.standard_normal((n, 3))
    elif covariates == "uniform":
        Z = rng.random((n, 3))
    else:
        raise ValueError(f"unknown covariate distribution {covariates!r}")
    eps = rng.standard_normal(n) * noise_sd
    beta = true_coefficients(coords)
    y = beta[:, 0] + np.einsum("ij,ij->i", beta[:, 1:], Z) + eps
    ids = tuple(f"{int(u)}_{int(v)}" for u, v in coords)
    data = Dataset(coords, Z, y, ("x1", "x2", "x3"), "y", ids)
    return SimulatedDataset(data, beta, eps, seed, rep)


def surface_range(kind, extent=25):
    coords = grid_coords(extent)
    vals = surface_value(kind, coords[:, 0], coords[:, 1])
    return float(np.min(vals)), float(np.max(vals))



# -- replication study -------------------------------------------------------

TABLE_METRICS = ("rss", "aic", "aicc", "r2", "adjusted_r2", "moran_i", "coef_rmse")
MODELS = ("ols", "gwr", "gwrboost")


@dataclass
class RepResult:
    rep: int
    metrics: dict  # model -> {metric: value}
    models: Optional[dict] = None


def replicate_one(rep, base_seed=0, models=MODELS, config=None, *, kernel="bisquare", mode="fixed",
                  criterion="aicc", noise_sd=0.5, covariates="normal", extent=25,
                  reference=None, keep_models=False) -> RepResult:
    """Generate one dataset and score every requested model on it.

    GWR uses ``reference`` when given, otherwise the bandwidth minimising
    ``criterion`` on this replication; GWRBoost scales that bandwidth by
    ``config.bandwidth_factor``.
    """
    from .boost import BoostConfig, fit_gwrboost_from_reference
    from .gwr import fit_gwr, fit_ols, search_bandwidth
    from .metrics import coefficient_rmse, default_moran_weights

    config = config or BoostConfig()
    sim = generate_dataset(base_seed, extent, noise_sd, covariates, rep=rep)
    data = sim.data
    moran_w = default_moran_weights(data.coords)
    out, kept = {}, {}
    search = None
    for name in models:
        try:
            if name == "ols":
                model = fit_ols(data)
                extra = {}
            elif name in ("gwr", "gwrboost"):
                if reference is None and search is None:
                    search = search_bandwidth(data, kernel, mode, criterion, likelihood=config.likelihood)
                scheme = reference if reference is not None else search.scheme
                if name == "gwr":
                    model = fit_gwr(data, scheme)
                    extra = {"bandwidth": float(scheme.value)}
                else:
                    model = fit_gwrboost_from_reference(data, scheme, config)
                    extra = {"bandwidth": float(model.scheme.value), "stopped_at": float(model.stopped_at)}
            else:
                raise ValueError(f"unknown model {name!r}; expected one of {MODELS}")
        except Exception as exc:
            raise type(exc)(f"replication {rep}, model {name}: {exc}") from exc
        diag = model.diagnostics(data, likelihood=config.likelihood, moran_weights=moran_w)
        per_coef = coefficient_rmse(sim.true_coefficients, model.coefficients)
        metrics = {
            "rss": diag.rss, "aic": diag.aic, "aicc": diag.aicc, "r2": diag.r2,
            "adjusted_r2": diag.adjusted_r2, "moran_i": diag.moran_i,
            "coef_rmse": float(np.mean(per_coef)),
            "effective_params": diag.effective_params,
            **{f"rmse_b{j}": float(v) for j, v in enumerate(per_coef)},
            **extra,
        }
        out[name] = metrics
        if keep_models:
            kept[name] = model
    if keep_models:
        kept["simulated"] = sim
        kept["search"] = search
    return RepResult(rep, out, kept if keep_models else None)


@dataclass
class ReplicationReport:
    results: list
    base_seed: int
    settings: dict

    @property
    def reps(self) -> int:
        return len(self.results)

    def values(self, model, metric) -> np.ndarray:
        return np.array([r.metrics[model][metric] for r in self.results])

    def rows(self):
        for r in self.results:
            for model, metrics in r.metrics.items():
                for metric, value in metrics.items():
                    yield r.rep, model, metric, value

    def aggregate(self) -> dict:
        models = list(self.results[0].metrics)
        agg = {}
        for model in models:
            agg[model] = {}
            for metric in self.results[0].metrics[model]:
                v = self.values(model, metric)
                agg[model][metric] = {"mean": float(np.mean(v)),
                                      "sd": float(np.std(v, ddof=1)) if len(v) > 1 else 0.0}
        return agg

    def header(self) -> dict:
        return {"rng": RNG_NAME, "base_seed": self.base_seed, "reps": self.reps, **self.settings}

    def to_csv(self, path):
        from .data import fmt

        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rep", "model", "metric", "value"])
            for rep, model, metric, value in self.rows():
                w.writerow([rep, model, metric, fmt(value)])
        return path

    def to_json(self, path):
        from .data import dump_json

        return dump_json({"header": self.header(), "metrics": list(TABLE_METRICS),
                          "aggregate": self.aggregate()}, path)


def run_replications(reps=100, base_seed=0, models=MODELS, config=None, *, threads=1, progress=None,
                     keep_models=False, **settings) -> ReplicationReport:
    """Fit every model on ``reps`` independently generated datasets.

    Replication i depends only on ``(base_seed, i)``, so running with several
    worker processes gives the same report as running serially. Any failure
    aborts the run with the replication index in the message.
    """
    from .boost import BoostConfig

    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    config = config or BoostConfig()
    job = partial(replicate_one, base_seed=base_seed, models=tuple(models), config=config,
                  keep_models=keep_models, **settings)
    results = [None] * reps
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(job, i): i for i in range(reps)}
            for done, fut in enumerate(as_completed(futures), 1):
                results[futures[fut]] = fut.result()
                if progress:
                    progress(done, reps)
    else:
        for i in range(reps):
            results[i] = job(i)
            if progress:
                progress(i + 1, reps)
    meta = {"models": list(models), "config": asdict(config),
            **{k: (v.describe() if hasattr(v, "describe") else v) for k, v in settings.items()}}
    return ReplicationReport(results, base_seed, meta)
