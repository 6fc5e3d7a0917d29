"""Datasets: CSV ingestion, z-scoring and result serialisation."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import SchemaError

FLOAT_FMT = ".17g"


def fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


@dataclass(frozen=True)
class Dataset:
    """N located observations.

    ``covariates`` excludes the intercept; :attr:`design` adds it.
    """

    coords: np.ndarray
    covariates: np.ndarray
    y: np.ndarray
    covariate_names: tuple = ()
    response_name: str = "y"
    ids: Optional[tuple] = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        Z = np.asarray(self.covariates, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if not (len(coords) == len(Z) == len(y)):
            raise SchemaError(f"coords {len(coords)}, covariates {len(Z)} and response {len(y)} lengths differ")
        for name, arr in (("coords", coords), ("covariates", Z), ("response", y)):
            if not np.all(np.isfinite(arr)):
                raise SchemaError(f"{name} contain non-finite values")
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(Z.shape[1]))
        if len(names) != Z.shape[1]:
            raise SchemaError(f"{len(names)} covariate names for {Z.shape[1]} columns")
        ids = tuple(self.ids) if self.ids is not None else tuple(str(i) for i in range(len(y)))
        for attr, val in (("coords", coords), ("covariates", Z), ("y", y)):
            val.setflags(write=False)
            object.__setattr__(self, attr, val)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def design(self) -> np.ndarray:
        return np.column_stack([np.ones(self.n), self.covariates])

    @property
    def coefficient_names(self) -> tuple:
        return ("intercept",) + self.covariate_names

    def with_response(self, y) -> "Dataset":
        return Dataset(self.coords, self.covariates, y, self.covariate_names, self.response_name, self.ids)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.coords, self.covariates, self.y):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class DatasetSchema:
    u: str
    v: str
    response: str
    covariates: tuple
    id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.covariates:
            raise SchemaError("at least one covariate column is required")
        named = [c for c in (self.id, self.u, self.v, self.response, *self.covariates) if c is not None]
        if len(set(named)) != len(named):
            raise SchemaError(f"schema columns must be distinct: {named}")


def load_csv(path, schema: DatasetSchema) -> Dataset:
    """Read a dataset from a headed, comma-separated file.

    Raises
    ------
    SchemaError
        On a missing column, an unparsable or non-finite cell (row and column
        reported; row 1 is the header) or duplicate ids.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        cols = {}
        for name in (schema.id, schema.u, schema.v, schema.response, *schema.covariates):
            if name is None:
                continue
            if name not in header:
                raise SchemaError(f"{path}: missing column {name!r}")
            cols[name] = header.index(name)
        numeric = [schema.u, schema.v, schema.response, *schema.covariates]
        rows, ids = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            values = []
            for name in numeric:
                idx = cols[name]
                cell = row[idx].strip() if idx < len(row) else ""
                try:
                    x = float(cell)
                except ValueError:
                    raise SchemaError(f"{path}: row {lineno}, column {name!r}: cannot parse {cell!r}") from None
                if not math.isfinite(x):
                    raise SchemaError(f"{path}: row {lineno}, column {name!r}: non-finite value {cell!r}")
                values.append(x)
            rows.append(values)
            if schema.id is not None:
                ids.append(row[cols[schema.id]].strip())
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    if schema.id is not None:
        seen = set()
        for i, ident in enumerate(ids):
            if ident in seen:
                raise SchemaError(f"{path}: duplicate id {ident!r} at row {i + 2}")
            seen.add(ident)
    arr = np.array(rows)
    return Dataset(coords=arr[:, :2], covariates=arr[:, 3:], y=arr[:, 2],
                   covariate_names=schema.covariates, response_name=schema.response,
                   ids=tuple(ids) if schema.id is not None else None)


def write_dataset(data: Dataset, path, extra_columns: Optional[dict] = None) -> Path:
    """Write a dataset with columns id, u, v, response, covariates[, extras]."""
    path = Path(path)
    extra_columns = extra_columns or {}
    header = ["id", "u", "v", data.response_name, *data.covariate_names, *extra_columns]
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(data.n):
                w.writerow([data.ids[i], fmt(data.coords[i, 0]), fmt(data.coords[i, 1]), fmt(data.y[i]),
                            *(fmt(x) for x in data.covariates[i]),
                            *(fmt(col[i]) for col in extra_columns.values())])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def dataset_schema_for(data: Dataset) -> DatasetSchema:
    """Schema matching the layout produced by :func:`write_dataset`."""
    return DatasetSchema(id="id", u="u", v="v", response=data.response_name, covariates=data.covariate_names)


# -- standardisation ---------------------------------------------------------


@dataclass(frozen=True)
class StandardizationRecord:
    """Means and population standard deviations used for z-scoring."""

    covariate_mean: np.ndarray
    covariate_sd: np.ndarray
    response_mean: float
    response_sd: float
    applied_to_response: bool = True
    ddof: int = 0

    def inverse(self, data: Dataset) -> Dataset:
        Z = data.covariates * self.covariate_sd + self.covariate_mean
        y = data.y * self.response_sd + self.response_mean if self.applied_to_response else data.y
        return Dataset(data.coords, Z, y, data.covariate_names, data.response_name, data.ids)

    def original_units(self, coefficients) -> np.ndarray:
        """Back-transform standardised local coefficients (intercept first)."""
        B = np.asarray(coefficients, dtype=float)
        sy = self.response_sd if self.applied_to_response else 1.0
        my = self.response_mean if self.applied_to_response else 0.0
        slopes = B[:, 1:] * sy / self.covariate_sd
        intercept = B[:, 0] * sy + my - slopes @ self.covariate_mean
        return np.column_stack([intercept, slopes])

    def as_dict(self, names=()) -> dict:
        return {
            "ddof": self.ddof,
            "applied_to_response": self.applied_to_response,
            "response": {"mean": self.response_mean, "sd": self.response_sd},
            "covariates": {
                (names[j] if j < len(names) else f"x{j + 1}"): {"mean": float(m), "sd": float(s)}
                for j, (m, s) in enumerate(zip(self.covariate_mean, self.covariate_sd))
            },
        }


def zscore(data: Dataset, standardize_response=True):
    """Transform covariates (and the response) to mean 0, population sd 1.

    Raises
    ------
    SchemaError
        Naming the first zero-variance column.
    """
    Z = data.covariates
    mean = Z.mean(axis=0)
    sd = Z.std(axis=0)
    for j, s in enumerate(sd):
        if not s > 0:
            raise SchemaError(f"column {data.covariate_names[j]!r} has zero variance")
    ym, ys = float(data.y.mean()), float(data.y.std())
    if standardize_response and not ys > 0:
        raise SchemaError(f"column {data.response_name!r} has zero variance")
    y = (data.y - ym) / ys if standardize_response else data.y
    record = StandardizationRecord(mean, sd, ym, ys, standardize_response)
    out = Dataset(data.coords, (Z - mean) / sd, y, data.covariate_names, data.response_name, data.ids)
    return out, record


# -- model outputs -----------------------------------------------------------


def write_coefficients(model, data: Dataset, path, coefficients=None) -> Path:
    """One row per observation: id, u, v, coefficients, fitted, residual."""
    B = model.coefficients if coefficients is None else coefficients
    names = list(data.coefficient_names)
    extra = {name: B[:, j] for j, name in enumerate(names)}
    path = Path(path)
    header = ["id", "u", "v", *names, "fitted", "residual"]
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(data.n):
                w.writerow([data.ids[i], fmt(data.coords[i, 0]), fmt(data.coords[i, 1]),
                            *(fmt(extra[name][i]) for name in names),
                            fmt(model.fitted[i]), fmt(model.residuals[i])])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_coefficients(path):
    """Load a coefficient CSV back into ``(ids, coords, coefficients, fitted, residuals, names)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    names = header[3:-2]
    ids = tuple(r[0] for r in rows)
    arr = np.array([[float(c) for c in r[1:]] for r in rows])
    return ids, arr[:, :2], arr[:, 2:-2], arr[:, -2], arr[:, -1], tuple(names)


def coefficient_summary(coefficients, names: Sequence[str]) -> list:
    """Mean, min, max and std of each coefficient column."""
    B = np.asarray(coefficients, dtype=float)
    return [
        {"variable": name, "mean": float(B[:, j].mean()), "min": float(B[:, j].min()),
         "max": float(B[:, j].max()), "std": float(B[:, j].std())}
        for j, name in enumerate(names)
    ]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dump_json(obj, path) -> Path:
    path = Path(path)
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_diagnostics(diagnostics, path, config: Optional[dict] = None, dataset_hash: Optional[str] = None) -> Path:
    """Flat JSON record of the metrics plus an echo of the fitting config."""
    record = dict(diagnostics.as_dict())
    record["flags"] = list(record.get("flags", []))
    record["config"] = dict(config or {})
    if dataset_hash is not None:
        record["dataset_hash"] = dataset_hash
    return dump_json(record, path)
