"""Command line interface: simulate, fit, search, sweep, report."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import numpy as np

from .boost import EARLY_STOP, BoostConfig, fit_gwrboost
from .data import (DatasetSchema, coefficient_summary, dump_json, fmt, load_csv, write_coefficients,
                   write_dataset, write_diagnostics, zscore)
from .errors import GwrError
from .gwr import CRITERIA, fit_gwr, fit_ols, search_bandwidth
from .metrics import LIKELIHOODS, default_moran_weights
from .simulation import MODELS, RNG_NAME, generate_dataset, run_replications
from .weights import KERNELS, SpatialWeightScheme

ENV_THREADS = "GWRBOOST_THREADS"
ENV_OUTDIR = "GWRBOOST_OUTPUT_DIR"

REPORT_ROWS = (
    ("rss", "RSS"),
    ("aic", "AIC"),
    ("aicc", "AICc"),
    ("r2", "R2"),
    ("adjusted_r2", "Adjusted R2"),
    ("moran_i", "Moran's I"),
)


def _version() -> str:
    try:
        return metadata.version("gwrboost")
    except metadata.PackageNotFoundError:
        return "unknown"


def _default_threads() -> int:
    env = os.environ.get(ENV_THREADS)
    if env:
        return int(env)
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _default_outdir() -> str:
    return os.environ.get(ENV_OUTDIR, "gwrboost-out")


# -- argument types ----------------------------------------------------------


def _ranged(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {kind.__name__}, got {text!r}") from None
        if isinstance(value, float) and not math.isfinite(value):
            raise argparse.ArgumentTypeError(f"{text!r} is not finite")
        if lo is not None and (value < lo or (lo_open and value == lo)):
            raise argparse.ArgumentTypeError(f"{value} must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            raise argparse.ArgumentTypeError(f"{value} must be {'<' if hi_open else '<='} {hi}")
        return value

    return parse


positive_int = _ranged(int, 1)
nonneg_int = _ranged(int, 0)
positive_float = _ranged(float, 0, lo_open=True)
nonneg_float = _ranged(float, 0)
learning_rate = _ranged(float, 0, 1, lo_open=True)


def _list_of(parse):
    def inner(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return [parse(t) for t in items]

    return inner


def _models(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in MODELS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"models must be drawn from {','.join(MODELS)}, got {text!r}")
    return items


# -- shared flag groups ------------------------------------------------------


def _add_common(p):
    p.add_argument("--out", default=None, help=f"output directory (default ${ENV_OUTDIR} or ./gwrboost-out)")
    p.add_argument("--threads", type=positive_int, default=None,
                   help=f"worker count (default ${ENV_THREADS} or available CPUs); never changes results")
    p.add_argument("--likelihood", choices=LIKELIHOODS, default="profile")


def _add_bandwidth(p, search_default=None):
    p.add_argument("--kernel", choices=KERNELS, default="bisquare")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bandwidth", type=positive_float, help="fixed distance bandwidth")
    g.add_argument("--adaptive", type=positive_int, help="adaptive bandwidth: nearest-neighbour count")
    g.add_argument("--bw-search", choices=CRITERIA, default=search_default,
                   help="select the bandwidth by this criterion")
    p.add_argument("--bw-mode", choices=("fixed", "adaptive"), default="fixed",
                   help="bandwidth family searched by --bw-search")


def _add_boost(p, early_stop_default="aicc"):
    d = BoostConfig()
    p.add_argument("--bw-factor", type=positive_float, default=d.bandwidth_factor)
    p.add_argument("--learning-rate", type=learning_rate, default=d.learning_rate)
    p.add_argument("--max-stages", type=positive_int, default=d.max_stages)
    p.add_argument("--early-stop", choices=EARLY_STOP, default=early_stop_default)
    p.add_argument("--dof", choices=("pipeline", "closed-form"), default=d.dof,
                   help="effective-parameter count: trace of the applied operator or of the closed-form boosted hat matrix")


def _add_dataset(p):
    p.add_argument("--input", required=True, type=Path, help="CSV file with a header row")
    p.add_argument("--u", default="u")
    p.add_argument("--v", default="v")
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", required=True, type=_list_of(str), help="comma-separated column names")
    p.add_argument("--id", default=None)
    p.add_argument("--no-standardize", action="store_true", help="skip z-scoring")


# -- helpers -----------------------------------------------------------------


def _outdir(args) -> Path:
    out = Path(args.out or _default_outdir())
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args) -> int:
    return args.threads or _default_threads()


def _write_manifest(out: Path, command: str, config: dict, inputs=(), outputs=(), seeds=None, threads=None):
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": sorted(str(Path(p).name) for p in outputs),
        "tool": "gwrboost",
        "version": _version(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "runtime": {"threads": threads},
    }
    return dump_json(manifest, out / "manifest.json")


def _progress(done, total):
    print(f"\r{done}/{total}", end="" if done < total else "\n", file=sys.stderr, flush=True)


def _load(args):
    schema = DatasetSchema(u=args.u, v=args.v, response=args.response, covariates=tuple(args.covariates), id=args.id)
    data = load_csv(args.input, schema)
    record = None
    if not args.no_standardize:
        data, record = zscore(data)
    return data, record


def _resolve_scheme(args, data, likelihood):
    """Reference scheme from explicit flags or a search; returns (scheme, search)."""
    if args.bandwidth is not None:
        return SpatialWeightScheme.fixed(args.bandwidth, args.kernel), None
    if args.adaptive is not None:
        return SpatialWeightScheme.adaptive(args.adaptive, args.kernel), None
    criterion = args.bw_search or "aicc"
    search = search_bandwidth(data, args.kernel, args.bw_mode, criterion, likelihood=likelihood)
    return search.scheme, search


def _boost_config(args) -> BoostConfig:
    return BoostConfig(max_stages=args.max_stages, learning_rate=args.learning_rate,
                       bandwidth_factor=args.bw_factor, early_stop=args.early_stop,
                       dof=args.dof, likelihood=args.likelihood)


def _write_trace(trace, path, extra=None):
    extra = extra or {}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*extra, "stage", "rss", "r2", "aicc", "hat_trace"])
        for r in trace.records:
            w.writerow([*extra.values(), r.stage, fmt(r.rss), fmt(r.r2), fmt(r.aicc), fmt(r.hat_trace)])
    return path


# -- commands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    out = _outdir(args)
    threads = _threads(args)
    outputs = []
    ds_dir = out / "datasets"
    if not args.no_datasets:
        ds_dir.mkdir(exist_ok=True)
        for rep in range(args.reps):
            sim = generate_dataset(args.seed, args.extent, args.noise_sd, args.covariates, rep=rep)
            extras = {f"true_b{j}": sim.true_coefficients[:, j] for j in range(sim.true_coefficients.shape[1])}
            outputs.append(write_dataset(sim.data, ds_dir / f"rep_{rep:03d}.csv", extras))
    config = BoostConfig(max_stages=args.max_stages, learning_rate=args.learning_rate,
                         bandwidth_factor=args.bw_factor, early_stop=args.early_stop,
                         dof=args.dof, likelihood=args.likelihood)
    settings = dict(kernel=args.kernel, mode=args.bw_mode, criterion=args.bw_search or "aicc",
                    noise_sd=args.noise_sd, covariates=args.covariates, extent=args.extent)
    reference = None
    if args.bandwidth is not None:
        reference = SpatialWeightScheme.fixed(args.bandwidth, args.kernel)
    elif args.adaptive is not None:
        reference = SpatialWeightScheme.adaptive(args.adaptive, args.kernel)
    if args.models:
        report = run_replications(args.reps, args.seed, args.models, config, threads=threads,
                                  progress=None if args.quiet else _progress, reference=reference, **settings)
        outputs.append(report.to_csv(out / "replications.csv"))
        outputs.append(report.to_json(out / "aggregate.json"))
    resolved = {"reps": args.reps, "models": args.models or [], "boost": asdict(config), **settings,
                "reference_bandwidth": reference.describe() if reference else None,
                "rng": RNG_NAME, "datasets": not args.no_datasets}
    _write_manifest(out, "simulate", resolved, outputs=outputs, seeds={"base_seed": args.seed}, threads=threads)
    return 0


def cmd_fit(args) -> int:
    out = _outdir(args)
    threads = _threads(args)
    data, record = _load(args)
    config = _boost_config(args)
    resolved = {"model": args.model, "kernel": args.kernel, "likelihood": args.likelihood,
                "standardized": record is not None, "original_units": args.original_units}
    outputs = []
    if args.model == "ols":
        model = fit_ols(data)
    else:
        scheme, search = _resolve_scheme(args, data, args.likelihood)
        resolved["reference_bandwidth"] = scheme.describe()
        if search is not None:
            resolved["bw_search"] = {"criterion": search.criterion, "score": search.score}
        if args.model == "gwr":
            model = fit_gwr(data, scheme, threads=threads)
        else:
            scheme = scheme.scaled(config.bandwidth_factor)
            model = fit_gwrboost(data, scheme, config, threads=threads)
            resolved.update({"learning_rate": config.learning_rate, "max_stages": config.max_stages,
                             "bandwidth_factor": config.bandwidth_factor, "early_stop": config.early_stop,
                             "dof": config.dof, "stopped_at": model.stopped_at})
            outputs.append(_write_trace(model.trace, out / "trace.csv"))
        resolved["bandwidth"] = scheme.describe()
    diag = model.diagnostics(data, likelihood=args.likelihood, moran_weights=default_moran_weights(data.coords))
    coefficients = model.coefficients
    if args.original_units:
        if record is None:
            raise GwrError("--original-units needs standardized fitting (drop --no-standardize)")
        coefficients = record.original_units(coefficients)
    outputs.append(write_coefficients(model, data, out / "coefficients.csv", coefficients))
    outputs.append(write_diagnostics(diag, out / "diagnostics.json", resolved, data.fingerprint()))
    summary = coefficient_summary(coefficients, data.coefficient_names)
    outputs.append(_write_summary(summary, out / "coefficient_summary.csv"))
    if record is not None:
        outputs.append(dump_json(record.as_dict(data.covariate_names), out / "standardization.json"))
    _write_manifest(out, "fit", resolved, inputs=[args.input], outputs=outputs, threads=threads)
    return 0


def _write_summary(summary, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "mean", "min", "max", "std"])
        for row in summary:
            w.writerow([row["variable"], *(fmt(row[k]) for k in ("mean", "min", "max", "std"))])
    return path


def cmd_search(args) -> int:
    out = _outdir(args)
    data, _ = _load(args)
    search = search_bandwidth(data, args.kernel, args.bw_mode, args.criterion, likelihood=args.likelihood)
    path = out / "search.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bandwidth", "score"])
        for bw, score in sorted(search.evaluated):
            w.writerow([fmt(bw), fmt(score)])
    best = dump_json({"criterion": args.criterion, **search.scheme.describe(), "score": search.score},
                     out / "bandwidth.json")
    _write_manifest(out, "search", {"kernel": args.kernel, "mode": args.bw_mode, "criterion": args.criterion},
                    inputs=[args.input], outputs=[path, best], threads=_threads(args))
    return 0


def cmd_sweep(args) -> int:
    out = _outdir(args)
    threads = _threads(args)
    if args.input is not None:
        if not args.response or not args.covariates:
            raise GwrError("--input needs --response and --covariates")
        data, _ = _load(args)
        inputs = [args.input]
    else:
        data = generate_dataset(args.seed, args.extent, args.noise_sd, args.covariates_dist).data
        inputs = []
    reference, search = _resolve_scheme(args, data, args.likelihood)
    path = out / "curves.csv"
    summary = []
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["learning_rate", "bandwidth_factor", "stage", "rss", "r2", "aicc", "hat_trace"])
        for factor in args.factors:
            for lr in args.learning_rates:
                config = BoostConfig(max_stages=args.max_stages, learning_rate=lr, bandwidth_factor=factor,
                                     early_stop="none", dof=args.dof, likelihood=args.likelihood)
                model = fit_gwrboost(data, reference.scaled(factor), config, threads=threads)
                for r in model.trace.records:
                    w.writerow([fmt(lr), fmt(factor), r.stage, fmt(r.rss), fmt(r.r2), fmt(r.aicc), fmt(r.hat_trace)])
                aicc = model.trace.column("aicc")
                best = int(np.nanargmin(aicc)) + 1
                summary.append({"learning_rate": lr, "bandwidth_factor": factor, "best_stage": best,
                                "best_aicc": float(aicc[best - 1])})
    best_path = dump_json({"reference": reference.describe(), "cells": summary}, out / "sweep_summary.json")
    resolved = {"learning_rates": args.learning_rates, "factors": args.factors, "max_stages": args.max_stages,
                "reference_bandwidth": reference.describe(), "dof": args.dof, "likelihood": args.likelihood}
    if args.input is None:
        resolved.update({"seed": args.seed, "extent": args.extent, "noise_sd": args.noise_sd})
    _write_manifest(out, "sweep", resolved, inputs=inputs, outputs=[path, best_path],
                    seeds={"seed": args.seed} if args.input is None else None, threads=threads)
    return 0


def _report_columns(path):
    """Yield (column name, metric dict, dataset hash) from a diagnostics or aggregate JSON."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "aggregate" in obj:
        agg = obj["aggregate"]
        for model in sorted(agg, key=lambda m: (MODELS.index(m) if m in MODELS else len(MODELS), m)):
            yield model, agg[model], None
        return
    name = obj.get("config", {}).get("model") or Path(path).stem
    yield name, obj, obj.get("dataset_hash")


def _cell(value):
    if isinstance(value, dict):
        return f"{value['mean']:.3f} ± {value['sd']:.3f}"
    if value is None:
        return "nan"
    if isinstance(value, str):
        return value
    return f"{value:.3f}"


def cmd_report(args) -> int:
    out = _outdir(args)
    columns, hashes = [], set()
    for path in args.inputs:
        for name, metrics, digest in _report_columns(path):
            missing = [key for key, _ in REPORT_ROWS if key not in metrics]
            if missing:
                raise GwrError(f"{path} ({name}) lacks metrics: {', '.join(missing)}")
            columns.append((name, metrics))
            if digest:
                hashes.add(digest)
    if len(hashes) > 1:
        print(f"warning: inputs come from different datasets ({', '.join(sorted(hashes))})", file=sys.stderr)
    names = [n for n, _ in columns]
    table = [[label, *(_cell(m[key]) for _, m in columns)] for key, label in REPORT_ROWS]
    csv_path = out / "comparison.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", *names])
        w.writerows(table)
    widths = [max(len(str(r[i])) for r in [["Model", *names], *table]) for i in range(len(names) + 1)]
    lines = ["  ".join(str(c).ljust(widths[0]) if i == 0 else str(c).rjust(widths[i])
                       for i, c in enumerate(row)) for row in [["Model", *names], *table]]
    txt_path = out / "comparison.txt"
    txt_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not args.quiet:
        print("\n".join(lines))
    _write_manifest(out, "report", {"columns": names}, inputs=args.inputs, outputs=[csv_path, txt_path])
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwrboost", description="Geographically weighted gradient boosting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate grid datasets and run the replication study")
    _add_common(p)
    _add_bandwidth(p, search_default="aicc")
    _add_boost(p)
    p.add_argument("--reps", type=positive_int, default=100)
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--extent", type=_ranged(int, 2), default=25)
    p.add_argument("--noise-sd", type=nonneg_float, default=0.5)
    p.add_argument("--covariates", choices=("normal", "uniform"), default="normal")
    p.add_argument("--models", type=_models, default=list(MODELS),
                   help="comma-separated subset of ols,gwr,gwrboost")
    p.add_argument("--no-models", dest="models", action="store_const", const=[],
                   help="only write the datasets")
    p.add_argument("--no-datasets", action="store_true", help="skip writing per-replication dataset files")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit OLS, GWR or GWRBoost to a CSV dataset")
    _add_common(p)
    _add_dataset(p)
    _add_bandwidth(p)
    _add_boost(p)
    p.add_argument("--model", choices=MODELS, default="gwrboost")
    p.add_argument("--original-units", action="store_true", help="back-transform coefficients to input units")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("search", help="select a GWR bandwidth")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--kernel", choices=KERNELS, default="bisquare")
    p.add_argument("--bw-mode", choices=("fixed", "adaptive"), default="fixed")
    p.add_argument("--criterion", choices=CRITERIA, default="aicc")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="per-stage GWRBoost curves over learning rates and bandwidth factors")
    _add_common(p)
    _add_bandwidth(p)
    p.add_argument("--input", type=Path, default=None, help="CSV dataset (default: a simulated grid)")
    p.add_argument("--u", default="u")
    p.add_argument("--v", default="v")
    p.add_argument("--response", default=None)
    p.add_argument("--covariates", type=_list_of(str), default=None)
    p.add_argument("--id", default=None)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--extent", type=_ranged(int, 2), default=25)
    p.add_argument("--noise-sd", type=nonneg_float, default=0.5)
    p.add_argument("--covariates-dist", choices=("normal", "uniform"), default="normal")
    p.add_argument("--learning-rates", type=_list_of(learning_rate), default=[0.1])
    p.add_argument("--factors", type=_list_of(positive_float), default=[1.0])
    p.add_argument("--max-stages", type=positive_int, default=100)
    p.add_argument("--dof", choices=("pipeline", "closed-form"), default="pipeline")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="merge diagnostics JSON files into a comparison table")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--out", default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GwrError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
