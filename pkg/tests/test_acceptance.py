"""Exit criteria for the package, one test per criterion (or sub-criterion).

The replication criteria (1, 2, 3, 7) share one 100-replication run of the
default protocol, computed once per session.
"""
import time

import numpy as np
import pytest

from gwrboost.boost import BoostConfig, boosted_hat_matrix, fit_gwrboost
from gwrboost.cli import main
from gwrboost.errors import UndefinedVarianceError
from gwrboost.gwr import fit_gwr, fit_ols
from gwrboost.linalg import global_hat_matrix, wls_solve
from gwrboost.metrics import (aic_aicc, coefficient_rmse, gaussian_log_likelihood, morans_i, r2_and_adjusted,
                              rook_weights, rss)
from gwrboost.simulation import replicate_one
from gwrboost.weights import SpatialWeightScheme

from conftest import grid_dataset, record_criterion

REPS = 100
BASE_SEED = 0
N = 625


@pytest.fixture(scope="session")
def protocol():
    """Default protocol over 100 replications, plus a no-early-stop run of
    GWRBoost (M = 100) on every replication."""
    config = BoostConfig()
    metrics, curves, elapsed = [], [], 0.0
    for rep in range(REPS):
        start = time.perf_counter()
        result = replicate_one(rep, BASE_SEED, config=config, keep_models=True)
        elapsed += time.perf_counter() - start
        metrics.append(result.metrics)
        boosted = result.models["gwrboost"]
        full = fit_gwrboost(result.models["simulated"].data, boosted.scheme,
                            BoostConfig(max_stages=100, early_stop="none"))
        aicc = full.trace.column("aicc")
        best = int(np.argmin(aicc)) + 1
        curves.append({
            "best": best,
            "interior": 1 < best < 100,
            "stopped_at": boosted.stopped_at,
            "snapshot_equal": bool(np.array_equal(boosted.coefficients, full.trace.record(best).coefficients)
                                   and np.array_equal(boosted.fitted, full.trace.record(best).fitted)),
        })

    def values(model, metric):
        return np.array([m[model][metric] for m in metrics])

    return {"values": values, "curves": curves, "elapsed": elapsed}


def mean(protocol, model, metric):
    return float(protocol["values"](model, metric).mean())


# -- criterion 1: orderings ---------------------------------------------------


def test_c1_rss_ordering(protocol):
    o, g, b = (mean(protocol, m, "rss") for m in ("ols", "gwr", "gwrboost"))
    ok = o > g > b
    record_criterion("1a", ok, f"mean RSS ols {o:.1f} > gwr {g:.1f} > gwrboost {b:.1f}")
    assert ok


def test_c1_aicc_ordering(protocol):
    o, g, b = (mean(protocol, m, "aicc") for m in ("ols", "gwr", "gwrboost"))
    ok = o > g > b
    record_criterion("1b", ok, f"mean AICc ols {o:.1f} > gwr {g:.1f} > gwrboost {b:.1f}")
    assert ok


def test_c1_r2_ordering(protocol):
    o, g, b = (mean(protocol, m, "r2") for m in ("ols", "gwr", "gwrboost"))
    ok = o < g < b
    record_criterion("1c", ok, f"mean R2 ols {o:.4f} < gwr {g:.4f} < gwrboost {b:.4f}")
    assert ok


def test_c1_moran_ordering(protocol):
    expected = -1.0 / (N - 1)
    o, g, b = (float(np.mean(np.abs(protocol["values"](m, "moran_i") - expected)))
               for m in ("ols", "gwr", "gwrboost"))
    ok = o > g > b
    record_criterion("1d", ok, f"mean |I - E[I]| ols {o:.4f} > gwr {g:.4f} > gwrboost {b:.4f}")
    assert ok


def test_c1_runtime(protocol):
    ok = protocol["elapsed"] <= 600
    record_criterion("1e", ok, f"default protocol, 100 replications, in {protocol['elapsed']:.0f} s <= 600 s")
    assert ok


# -- criterion 2: magnitudes ---------------------------------------------------


def test_c2_gwr_r2_band(protocol):
    v = mean(protocol, "gwr", "r2")
    ok = 0.93 <= v <= 0.97
    record_criterion("2a", ok, f"mean GWR R2 {v:.4f} in [0.93, 0.97]")
    assert ok


def test_c2_gwrboost_r2_band(protocol):
    v = mean(protocol, "gwrboost", "r2")
    ok = 0.965 <= v <= 0.99
    record_criterion("2b", ok, f"mean GWRBoost R2 {v:.4f} in [0.965, 0.99]")
    assert ok


def test_c2_gwrboost_moran_band(protocol):
    v = mean(protocol, "gwrboost", "moran_i")
    ok = -0.12 <= v <= 0.02
    record_criterion("2c", ok, f"mean GWRBoost residual Moran's I {v:.4f} in [-0.12, 0.02]")
    assert ok


def test_c2_gwr_moran_positive(protocol):
    v = mean(protocol, "gwr", "moran_i")
    ok = v > 0.12
    record_criterion("2d", ok, f"mean GWR residual Moran's I {v:.4f} > 0.12")
    assert ok


# -- criterion 3: headline improvements -----------------------------------------


def test_c3_coefficient_rmse(protocol):
    g, b = mean(protocol, "gwr", "coef_rmse"), mean(protocol, "gwrboost", "coef_rmse")
    reduction = 1 - b / g
    ok = reduction >= 0.10
    record_criterion("3a", ok, f"coefficient RMSE gwr {g:.4f} -> gwrboost {b:.4f} ({100 * reduction:.1f}% lower, need >= 10%)")
    assert ok


def test_c3_aicc_reduction(protocol):
    g, b = mean(protocol, "gwr", "aicc"), mean(protocol, "gwrboost", "aicc")
    reduction = 1 - b / g
    ok = reduction >= 0.40
    record_criterion("3b", ok, f"mean AICc gwr {g:.1f} -> gwrboost {b:.1f} ({100 * reduction:.1f}% lower, need >= 40%)")
    assert ok


# -- criterion 4: boosted hat matrix vs impulse response ------------------------


def impulse_operator(H, lr, stages):
    n = len(H)
    out = np.zeros((n, n))
    for j in range(n):
        target = np.zeros(n)
        target[j] = 1.0
        total = np.zeros(n)
        for _ in range(stages):
            fit = H @ target
            total += fit
            target = lr * (target - fit)
        out[:, j] = total
    return out


def random_smoother(index, r):
    n = int(r.integers(5, 101))
    if index % 2:
        A = r.uniform(0, 1, (n, n))
        return A / A.sum(axis=1, keepdims=True)
    coords = r.uniform(0, 10, (n, 2))
    X = np.column_stack([np.ones(n), r.standard_normal((n, 1))])
    return global_hat_matrix(X, coords, SpatialWeightScheme.adaptive(min(n - 1, max(4, n // 3)), "gaussian"))


def test_c4_boosted_hat_matrix_oracle():
    r = np.random.default_rng(2024)
    worst, single_exact = 0.0, True
    for index in range(50):
        H = random_smoother(index, r)
        single_exact &= bool(np.array_equal(boosted_hat_matrix(H, float(r.uniform(0.05, 1)), 1), H))
        for lr in (0.1, 0.5, 1.0):
            for stages in (2, 4, 7):
                diff = np.abs(boosted_hat_matrix(H, lr, stages) - impulse_operator(H, lr, stages)).max()
                worst = max(worst, float(diff))
    ok = worst <= 1e-10 and single_exact
    record_criterion("4", ok, f"50 smoothers x 9 (lr, M) cells, max entry error {worst:.2e} <= 1e-10; M=1 exact: {single_exact}")
    assert ok


# -- criterion 5: WLS against normal equations ---------------------------------


def test_c5_wls_oracle():
    r = np.random.default_rng(5)
    worst_rel, worst_orth = 0.0, 0.0
    for _ in range(200):
        p = int(r.integers(1, 4))
        n = int(r.integers(p + 2, 31))
        X = np.column_stack([np.ones(n), r.standard_normal((n, p))])
        y = r.standard_normal(n)
        w = r.uniform(1e-3, 1.0, n)
        beta = wls_solve(X, y, w, int(r.integers(n))).beta
        XtW = X.T * w
        ref = np.linalg.inv(XtW @ X) @ XtW @ y
        worst_rel = max(worst_rel, float(np.linalg.norm(beta - ref) / np.linalg.norm(ref)))
        worst_orth = max(worst_orth, float(np.abs(XtW @ (y - X @ beta)).max()))
    ok = worst_rel < 1e-8 and worst_orth < 1e-8
    record_criterion("5", ok, f"200 systems, max relative error {worst_rel:.2e}, max weighted-residual orthogonality {worst_orth:.2e}")
    assert ok


# -- criterion 6: reductions ------------------------------------------------------


def test_c6_reductions():
    start = time.perf_counter()
    data = grid_dataset(15, np.random.default_rng(6), p=3, noise=0.3)
    scheme = SpatialWeightScheme.fixed(3.5)
    boosted = fit_gwrboost(data, scheme, BoostConfig(max_stages=1))
    plain = fit_gwr(data, scheme)
    d1 = float(np.abs(boosted.coefficients - plain.coefficients).max())
    wide = fit_gwr(data, SpatialWeightScheme.fixed(1e9))
    d2 = float(np.abs(wide.coefficients - fit_ols(data).coefficients).max())
    elapsed = time.perf_counter() - start
    ok = d1 <= 1e-12 and d2 <= 1e-6 and elapsed < 5
    record_criterion("6", ok, f"M=1 vs GWR {d1:.1e} <= 1e-12; bandwidth 1e9 vs OLS {d2:.1e} <= 1e-6; {elapsed:.2f} s < 5 s")
    assert ok


# -- criterion 7: early stopping ---------------------------------------------------


def test_c7_early_stopping(protocol):
    curves = protocol["curves"]
    good = sum(c["interior"] and c["stopped_at"] == c["best"] and c["snapshot_equal"] for c in curves)
    interior = sum(c["interior"] for c in curves)
    ok = good >= 90
    record_criterion("7", ok, f"{good}/100 reps with an interior AICc minimum returned exactly by early stopping "
                              f"({interior} interior minima), need >= 90")
    assert ok


# -- criterion 8: metric unit examples ---------------------------------------------


def test_c8_metric_examples():
    checks = {}
    checks["rss equal"] = rss([1.0, 2.0], [1.0, 2.0]) == 0
    checks["rss hand sum"] = rss([1.0, 2.0], [0.0, 0.0]) == 5
    y = np.array([1.0, 4.0, 2.0, 8.0])
    checks["r2 perfect"] = r2_and_adjusted(y, y, 1) == (1.0, 1.0)
    checks["r2 mean"] = abs(r2_and_adjusted(y, np.full(4, y.mean()), 1)[0]) < 1e-15
    checks["loglik plug-in"] = abs(gaussian_log_likelihood(0.5, 1, "precision") - (-1.4189385332046727)) < 1e-12
    checks["loglik perfect"] = gaussian_log_likelihood(0.0, 5) == np.inf
    checks["loglik monotone"] = gaussian_log_likelihood(2.0, 5) < gaussian_log_likelihood(1.0, 5)
    checks["aic zero"] = aic_aicc(0.0, 0, 7) == (0.0, 0.0)
    checks["aicc boundary flagged"] = bool(np.isnan(aic_aicc(-3.0, 6, 7)[1]))
    u, v = np.meshgrid(np.arange(4.0), np.arange(4.0))
    coords = np.column_stack([u.ravel(), v.ravel()])
    board = (coords.sum(axis=1) % 2).astype(float)
    checks["checkerboard"] = abs(morans_i(board, rook_weights(coords)) + 1.0) <= 1e-10
    try:
        morans_i(np.full(16, 2.0), rook_weights(coords))
        checks["constant moran error"] = False
    except UndefinedVarianceError:
        checks["constant moran error"] = True
    x = np.random.default_rng(8).standard_normal(16)
    checks["affine invariance"] = abs(morans_i(-3.0 * x + 7.0, rook_weights(coords)) - morans_i(x, rook_weights(coords))) < 1e-10
    F = np.random.default_rng(9).standard_normal((16, 3))
    checks["rmse identical"] = coefficient_rmse(F, F, 0) == 0
    checks["rmse shift"] = abs(coefficient_rmse(F, F + 0.7, 2) - 0.7) < 1e-12
    failed = [k for k, v in checks.items() if not v]
    record_criterion("8", not failed, f"{len(checks) - len(failed)}/{len(checks)} metric examples" +
                     (f"; failed: {', '.join(failed)}" if failed else ""))
    assert not failed


# -- criterion 9: determinism across thread counts -----------------------------------


def test_c9_simulate_determinism(tmp_path):
    outputs = {}
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        assert main(["simulate", "--reps", "3", "--seed", "11", "--threads", str(threads),
                     "--quiet", "--out", str(out)]) == 0
        outputs[threads] = {p.relative_to(out).as_posix(): p.read_bytes()
                            for p in sorted(out.rglob("*")) if p.is_file() and p.name != "manifest.json"}
    same = outputs[1] == outputs[4]
    record_criterion("9", same, f"simulate at 1 and 4 workers: {len(outputs[1])} files byte-identical: {same}")
    assert same
