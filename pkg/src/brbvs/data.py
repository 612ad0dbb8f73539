"""Bivariate censored survival data: container, CSV I/O, subsampling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


class DataError(ValueError):
    pass


class CensorCode(str, enum.Enum):
    UNCENSORED = "U"
    RIGHT = "R"
    INTERVAL = "I"


_CODES = frozenset(c.value for c in CensorCode)


@dataclass(frozen=True)
class ColumnSchema:
    t11: str = "t11"
    t12: str = "t12"
    t21: str = "t21"
    t22: str = "t22"
    cens1: str = "cens1"
    cens2: str = "cens2"
    covariates: tuple[str, ...] | None = None  # None: every remaining column

    @property
    def time_columns(self) -> tuple[str, ...]:
        return (self.t11, self.t12, self.t21, self.t22, self.cens1, self.cens2)


def _validate_margin(lower, upper, codes, margin: int) -> None:
    bad = ~np.isin(codes, list(_CODES))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(f"unknown censor code {codes[i]!r} in margin {margin}, row {i}")
    if np.any(~np.isfinite(lower)) or np.any(lower < 0):
        i = int(np.flatnonzero(~np.isfinite(lower) | (lower < 0))[0])
        raise DataError(f"margin {margin} lower time must be finite and >= 0 (row {i})")
    interval = codes == "I"
    ok = np.isfinite(upper) & (upper > lower)
    if np.any(interval & ~ok):
        i = int(np.flatnonzero(interval & ~ok)[0])
        raise DataError(
            f"interval row {i} in margin {margin} needs an upper bound greater than the lower bound"
        )
    if np.any(~interval & ~np.isnan(upper)):
        i = int(np.flatnonzero(~interval & ~np.isnan(upper))[0])
        raise DataError(f"row {i} in margin {margin} is not interval-censored but has an upper bound")


@dataclass(frozen=True, eq=False)
class Dataset:
    t1_lower: np.ndarray
    t1_upper: np.ndarray  # NaN where absent
    t2_lower: np.ndarray
    t2_upper: np.ndarray
    cens1: np.ndarray  # array of "U" / "R" / "I"
    cens2: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arrays = {}
        for name in ("t1_lower", "t1_upper", "t2_lower", "t2_upper"):
            arrays[name] = np.asarray(getattr(self, name), dtype=float)
        for name in ("cens1", "cens2"):
            arrays[name] = np.asarray(getattr(self, name)).astype("<U1")
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 0) if X.size == 0 else X[:, None]
        arrays["X"] = X
        for k, v in arrays.items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)
        n = arrays["t1_lower"].shape[0]
        if any(a.shape[0] != n for a in arrays.values()):
            raise DataError("all columns must have the same number of rows")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError("one label per covariate column is required")
        if len(set(names)) != len(names):
            raise DataError("covariate labels must be unique")
        object.__setattr__(self, "names", names)
        if np.any(~np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"missing or non-finite covariate at row {i}, column {names[j]!r}")
        _validate_margin(arrays["t1_lower"], arrays["t1_upper"], arrays["cens1"], 1)
        _validate_margin(arrays["t2_lower"], arrays["t2_upper"], arrays["cens2"], 2)

    @property
    def n(self) -> int:
        return self.t1_lower.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def combined_codes(self) -> np.ndarray:
        return np.char.add(self.cens1, self.cens2)

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown covariate {name!r}") from None

    def columns(self, names) -> np.ndarray:
        idx = [self.column_index(nm) for nm in names]
        return self.X[:, idx]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            self.t1_lower[idx], self.t1_upper[idx], self.t2_lower[idx], self.t2_upper[idx],
            self.cens1[idx], self.cens2[idx], self.X[idx], self.names,
        )

    def with_covariates(self, X, names) -> "Dataset":
        return Dataset(
            self.t1_lower, self.t1_upper, self.t2_lower, self.t2_upper,
            self.cens1, self.cens2, X, tuple(names),
        )

    def margin_times(self, margin: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if margin == 1:
            return self.t1_lower, self.t1_upper, self.cens1
        if margin == 2:
            return self.t2_lower, self.t2_upper, self.cens2
        raise ValueError("margin must be 1 or 2")

    def equals(self, other: "Dataset") -> bool:
        return (
            self.names == other.names
            and all(
                np.array_equal(getattr(self, k), getattr(other, k), equal_nan=True)
                for k in ("t1_lower", "t1_upper", "t2_lower", "t2_upper", "X")
            )
            and np.array_equal(self.cens1, other.cens1)
            and np.array_equal(self.cens2, other.cens2)
        )


# ---------------------------------------------------------------------------
# CSV


def _numeric(series: pd.Series, column: str, allow_missing: bool) -> np.ndarray:
    out = np.empty(len(series))
    for i, raw in enumerate(series.tolist()):
        text = "" if raw is None else str(raw).strip()
        if text in ("", "NA", "nan", "NaN"):
            if not allow_missing:
                raise DataError(f"missing value at row {i}, column {column!r}")
            out[i] = np.nan
            continue
        try:
            out[i] = float(text)
        except ValueError:
            raise DataError(f"non-numeric value {text!r} at row {i}, column {column!r}") from None
    return out


def _codes(series: pd.Series, column: str) -> np.ndarray:
    codes = series.fillna("").astype(str).str.strip().to_numpy()
    for i, c in enumerate(codes):
        if c not in _CODES:
            raise DataError(f"unknown censor code {c!r} at row {i}, column {column!r}")
    return codes.astype("<U1")


def parse_dataset(path, schema: ColumnSchema | None = None) -> Dataset:
    schema = schema or ColumnSchema()
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in schema.time_columns if c not in frame.columns]
    if missing:
        raise DataError(f"missing column(s) in {path}: {', '.join(missing)}")
    if schema.covariates is None:
        covs = [c for c in frame.columns if c not in schema.time_columns]
    else:
        covs = list(schema.covariates)
        absent = [c for c in covs if c not in frame.columns]
        if absent:
            raise DataError(f"missing covariate column(s) in {path}: {', '.join(absent)}")
    cens1 = _codes(frame[schema.cens1], schema.cens1)
    cens2 = _codes(frame[schema.cens2], schema.cens2)
    t11 = _numeric(frame[schema.t11], schema.t11, allow_missing=False)
    t12 = _numeric(frame[schema.t12], schema.t12, allow_missing=True)
    t21 = _numeric(frame[schema.t21], schema.t21, allow_missing=False)
    t22 = _numeric(frame[schema.t22], schema.t22, allow_missing=True)
    for upper, codes, col in ((t12, cens1, schema.t12), (t22, cens2, schema.t22)):
        need = (codes == "I") & np.isnan(upper)
        if need.any():
            i = int(np.flatnonzero(need)[0])
            raise DataError(f"interval row {i} is missing its upper bound in column {col!r}")
        # upper bounds of non-interval rows are not part of the observation
        upper[codes != "I"] = np.nan
    X = np.column_stack([_numeric(frame[c], c, allow_missing=False) for c in covs]) if covs else np.zeros((len(frame), 0))
    return Dataset(t11, t12, t21, t22, cens1, cens2, X, tuple(covs))


def _fmt(v: float) -> str:
    return "NA" if math.isnan(v) else repr(float(v))


def write_dataset(d: Dataset, path, schema: ColumnSchema | None = None) -> None:
    schema = schema or ColumnSchema()
    header = list(schema.time_columns) + list(d.names)
    lines = [",".join(header)]
    for i in range(d.n):
        row = [
            _fmt(d.t1_lower[i]), _fmt(d.t1_upper[i]), _fmt(d.t2_lower[i]), _fmt(d.t2_upper[i]),
            d.cens1[i], d.cens2[i],
        ] + [repr(float(v)) for v in d.X[i]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# transforms


def standardize(d: Dataset, columns=None) -> Dataset:
    """Center and scale the listed columns to sample mean 0 and sd 1 (ddof=1)."""
    columns = d.names if columns is None else tuple(columns)
    X = d.X.copy()
    for name in columns:
        j = d.column_index(name)
        col = X[:, j]
        sd = col.std(ddof=1) if col.size > 1 else 0.0
        if not sd > 0:
            raise DataError(f"column {name!r} has zero variance and cannot be standardized")
        X[:, j] = (col - col.mean()) / sd
    return d.with_covariates(X, d.names)


@dataclass(frozen=True)
class SubsampleIndex:
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def draw_subsamples(d: Dataset | int, m: int, rng: np.random.Generator) -> list[SubsampleIndex]:
    """floor(n/m) disjoint subsamples of size m from one random permutation."""
    n = d if isinstance(d, (int, np.integer)) else d.n
    if not 1 <= m <= n:
        raise DataError(f"subsample size m={m} must satisfy 1 <= m <= n={n}")
    perm = rng.permutation(n)
    r = n // m
    return [SubsampleIndex(perm[q * m:(q + 1) * m]) for q in range(r)]
