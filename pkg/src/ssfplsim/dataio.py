"""Datasets on disk: CSV ingestion, spectral preprocessing, covariate expansion
and JSON run reports.

A dataset CSV has a header row; a schema (flat ``key = value`` text) names the
response column, the scalar covariates and the first and last columns of the
contiguous block of curve values::

    response = fat
    covariates = protein, moisture
    curve_first = a1
    curve_last = a100
    domain = 850, 1050

The curve abscissae ``domain`` are mapped affinely onto ``[0, 1]``.
"""
from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import interpolate

from .exceptions import DataError, SingularDesign
from .functional import FunctionalSample, Grid

__all__ = [
    "Schema",
    "Dataset",
    "RunReport",
    "read_key_values",
    "read_schema",
    "write_schema",
    "read_dataset",
    "write_dataset",
    "second_derivative",
    "expand_covariates",
    "split",
    "msep",
    "to_jsonable",
]

ROOT_SECTION = "__root__"


def read_key_values(path) -> configparser.ConfigParser:
    """Parse a ``key = value`` file; keys before the first ``[section]`` land in
    the section ``"__root__"``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(f"[{ROOT_SECTION}]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise DataError(f"{path}: {exc}".replace("\n", " ")) from exc
    return cp


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


@dataclass(frozen=True)
class Schema:
    response: str | None
    covariates: tuple[str, ...]
    curve_first: str
    curve_last: str
    domain: tuple[float, float] | None = None

    @classmethod
    def from_mapping(cls, m) -> "Schema":
        try:
            first, last = m["curve_first"], m["curve_last"]
        except KeyError as exc:
            raise DataError(f"schema is missing key {exc.args[0]!r}") from None
        dom = None
        if m.get("domain"):
            parts = _split_list(m["domain"])
            try:
                dom = (float(parts[0]), float(parts[1]))
            except (ValueError, IndexError):
                raise DataError(f"schema domain must be 'low, high', got {m['domain']!r}") from None
            if not dom[1] > dom[0]:
                raise DataError("schema domain must be increasing")
        return cls(m.get("response") or None, tuple(_split_list(m.get("covariates", ""))),
                   first, last, dom)

    def to_mapping(self) -> dict:
        out = {"response": self.response or "", "covariates": ", ".join(self.covariates),
               "curve_first": self.curve_first, "curve_last": self.curve_last}
        if self.domain is not None:
            out["domain"] = f"{self.domain[0]!r}, {self.domain[1]!r}"
        return out


def read_schema(path) -> Schema:
    cp = read_key_values(path)
    return Schema.from_mapping(dict(cp[ROOT_SECTION]))


def write_schema(schema: Schema, path) -> None:
    lines = [f"{k} = {v}" for k, v in schema.to_mapping().items()]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response (``None`` if the file has none), named scalar covariates and curves."""

    y: np.ndarray | None
    x: np.ndarray
    x_names: tuple[str, ...]
    curves: FunctionalSample
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != self.curves.n or (self.y is not None and len(self.y) != self.curves.n):
            raise DataError("y, x and curves must have the same number of rows")
        if x.shape[1] != len(self.x_names):
            raise DataError("one name per covariate column is required")
        object.__setattr__(self, "x", x)
        if self.y is not None:
            object.__setattr__(self, "y", np.asarray(self.y, dtype=float))

    @property
    def n(self) -> int:
        return self.curves.n

    def rows(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(None if self.y is None else self.y[idx], self.x[idx], self.x_names,
                       FunctionalSample(self.curves.values[idx], self.curves.grid), dict(self.meta))


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {col!r}: non-finite value {cell!r}")
    return v


def read_dataset(path, schema: Schema, require_response: bool = True) -> Dataset:
    """Parse a CSV laid out as described by ``schema``.

    Errors name the offending row (1-based, header is row 1) and column.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    pos = {name: i for i, name in enumerate(header)}
    needed = list(schema.covariates) + [schema.curve_first, schema.curve_last]
    has_y = schema.response is not None and schema.response in pos
    if schema.response is not None and not has_y and require_response:
        needed.append(schema.response)
    missing = [c for c in needed if c not in pos]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    c0, c1 = pos[schema.curve_first], pos[schema.curve_last]
    if c1 - c0 + 1 < 4:
        raise DataError(f"{path}: curve block needs at least 4 columns")
    ncol = len(header)
    y = np.empty(len(body)) if has_y else None
    x = np.empty((len(body), len(schema.covariates)))
    curves = np.empty((len(body), c1 - c0 + 1))
    cov_idx = [pos[c] for c in schema.covariates]
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != ncol:
            raise DataError(f"row {line}: expected {ncol} fields, found {len(row)}")
        if has_y:
            y[r] = _parse_float(row[pos[schema.response]], line, schema.response)
        for j, ci in enumerate(cov_idx):
            x[r, j] = _parse_float(row[ci], line, header[ci])
        for j in range(c0, c1 + 1):
            curves[r, j - c0] = _parse_float(row[j], line, header[j])
    m = curves.shape[1]
    grid = Grid.uniform(0.0, 1.0, m)
    meta = {
        "source": str(path),
        "columns": header,
        "curve_columns": header[c0:c1 + 1],
        "domain": list(schema.domain) if schema.domain else [0.0, 1.0],
        "grid": {"start": 0.0, "stop": 1.0, "size": m},
    }
    return Dataset(y, x, tuple(schema.covariates), FunctionalSample(curves, grid), meta)


def write_dataset(ds: Dataset, path, response_name: str = "y", curve_prefix: str = "t") -> Schema:
    """Write ``ds`` as CSV (shortest round-trip floats) and return its schema."""
    m = ds.curves.grid.size
    curve_names = [f"{curve_prefix}{k + 1}" for k in range(m)]
    header = ([response_name] if ds.y is not None else []) + list(ds.x_names) + curve_names
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [] if ds.y is None else [repr(float(ds.y[i]))]
            row += [repr(float(v)) for v in ds.x[i]]
            row += [repr(float(v)) for v in ds.curves.values[i]]
            w.writerow(row)
    span = ds.curves.grid.span
    return Schema(response_name if ds.y is not None else None, tuple(ds.x_names),
                  curve_names[0], curve_names[-1], (span[0], span[1]))


# --------------------------------------------------------------------------
# preprocessing


def second_derivative(sample: FunctionalSample, basis_size: int = 20) -> FunctionalSample:
    """Least-squares cubic spline fit with ``basis_size`` functions, differentiated twice.

    The interior knots are equally spaced, so the operator is linear in the curves.
    """
    t = sample.grid.points
    if basis_size < 6 or basis_size >= t.size:
        raise ValueError("basis_size must be at least 6 and smaller than the grid size")
    k = 3
    inner = np.linspace(t[0], t[-1], basis_size - k + 1)
    knots = np.concatenate([np.full(k, t[0]), inner, np.full(k, t[-1])])
    try:
        spl = interpolate.make_lsq_spline(t, sample.values.T, knots, k=k, axis=0)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularDesign(f"spline projection failed: {exc}") from exc
    vals = spl.derivative(2)(t).T
    if not np.all(np.isfinite(vals)):
        raise SingularDesign("spline projection produced non-finite values")
    return FunctionalSample(vals, sample.grid)


def expand_covariates(x1, x2, q: int, interaction: bool = True, names=("X1", "X2")):
    """Powers ``x1^j, x2^j`` for ``j = 1..q`` (interleaved) plus ``x1 * x2``.

    Returns ``(matrix, names)``.
    """
    if q < 1:
        raise ValueError("degree must be at least 1")
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    cols, labels = [], []
    for j in range(1, q + 1):
        suffix = "" if j == 1 else f"^{j}"
        cols += [x1 ** j, x2 ** j]
        labels += [names[0] + suffix, names[1] + suffix]
    if interaction:
        cols.append(x1 * x2)
        labels.append(f"{names[0]}*{names[1]}")
    return np.column_stack(cols), tuple(labels)


def split(ds: Dataset, n_train: int):
    """Order-preserving split into the first ``n_train`` rows and the rest."""
    if not 0 < n_train < ds.n:
        raise ValueError(f"n_train must lie in (0, {ds.n}), got {n_train}")
    return ds.rows(np.arange(n_train)), ds.rows(np.arange(n_train, ds.n))


def msep(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size == 0:
        raise ValueError("msep needs at least one observation")
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in shape")
    return float(np.mean((y_true - y_pred) ** 2))


# --------------------------------------------------------------------------
# JSON


def to_jsonable(obj):
    """Recursively convert numpy values to plain Python (floats stay exact)."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=1, sort_keys=True, allow_nan=False) + "\n")


@dataclass
class RunReport:
    """Everything needed to inspect a fit and to predict from it.

    ``model`` holds the direction coefficients, basis layout, bandwidth, the
    training index values and partial residuals; ``preprocess`` the covariate
    expansion and derivative settings applied before fitting.
    """

    names: list
    beta_hat: list
    selected: list
    h_hat: float
    lambda_hat: float
    bic: float
    knots: int
    theta_coefficients: list
    theta_grid: list
    theta_values: list
    link_u: list
    link_m: list
    model: dict
    preprocess: dict
    schema: dict
    predictions: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    msep: float | None = None
    baseline_msep: float | None = None
    knot_search: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unexpected report fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunReport":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot load report {path}: {exc}") from exc
        try:
            return cls.from_dict(d)
        except TypeError as exc:
            raise DataError(f"malformed report {path}: {exc}") from exc
