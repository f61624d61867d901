"""Datasets: typed response/covariate bundles, CSV I/O and simulators."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .randist import make_rng

log = logging.getLogger(__name__)

BINARY = "binary"
CONTINUOUS = "continuous"
_TYPE_CODES = {BINARY: 0, CONTINUOUS: 1}


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    y: np.ndarray
    X: np.ndarray
    column_types: list
    column_names: list = None
    response_name: str = "y"
    dropped_rows: int = 0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(self.y.size, 0)
        self.X = X
        if self.X.shape[0] != self.y.size:
            raise DatasetError(f"X has {self.X.shape[0]} rows but y has {self.y.size}")
        D = self.X.shape[1]
        if self.column_names is None:
            self.column_names = [f"x{d + 1}" for d in range(D)]
        self.column_types = list(self.column_types)
        self.column_names = list(self.column_names)
        if len(self.column_types) != D or len(self.column_names) != D:
            raise DatasetError("column_types and column_names must have one entry per column")
        for d, t in enumerate(self.column_types):
            if t not in _TYPE_CODES:
                raise DatasetError(f"unknown column type {t!r} for {self.column_names[d]}")
            if t == BINARY:
                col = self.X[:, d]
                bad = np.flatnonzero((col != 0) & (col != 1))
                if bad.size:
                    raise DatasetError(
                        f"binary column {self.column_names[d]!r} has value {col[bad[0]]:g} "
                        f"at row {bad[0] + 1}"
                    )
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.X))):
            raise DatasetError("dataset contains non-finite values")

    @property
    def n(self):
        return self.y.size

    @property
    def D(self):
        return self.X.shape[1]

    def type_codes(self):
        return np.array([_TYPE_CODES[t] for t in self.column_types], dtype=np.int64)

    def column_stats(self):
        """Column means, precisions (1/variance) and binary frequencies of 1."""
        if self.n == 0:
            z = np.zeros(self.D)
            return z, np.ones(self.D), z
        mean = self.X.mean(axis=0)
        var = self.X.var(axis=0)
        prec = 1.0 / np.maximum(var, 1e-8)
        return mean, prec, mean.copy()

    def design(self, intercept=False):
        """Regression design matrix, optionally with a leading column of ones."""
        if intercept:
            return np.column_stack([np.ones(self.n), self.X])
        return self.X.copy()

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.y[rows], self.X[rows], self.column_types, self.column_names, self.response_name)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _parse_discretize(rules):
    """``"income:25000,75000;age:40"`` -> {"income": [25000.0, 75000.0], "age": [40.0]}."""
    out = {}
    if not rules:
        return out
    if isinstance(rules, dict):
        return {k: sorted(float(c) for c in v) for k, v in rules.items()}
    for chunk in rules.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, _, cuts = chunk.partition(":")
        try:
            out[name.strip()] = sorted(float(c) for c in cuts.split(","))
        except ValueError:
            raise DatasetError(f"bad discretization rule {chunk!r}") from None
    return out


def load_dataset(
    path,
    response="y",
    binary_columns=None,
    continuous_columns=None,
    discretize=None,
) -> Dataset:
    """Read a comma-separated file with a header row into a typed Dataset.

    Rows with any empty cell are dropped (count stored in ``dropped_rows``).
    Columns not declared binary or continuous are typed by inspection: 0/1
    columns are binary, everything else continuous.  ``discretize`` maps a
    column to cut points; the column is replaced by one indicator per interval
    above the first cut.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise DatasetError(f"duplicate columns: {dupes}")
    if response not in header:
        raise DatasetError(f"response column {response!r} not found")
    binary_columns = list(binary_columns or [])
    continuous_columns = list(continuous_columns or [])
    rules = _parse_discretize(discretize)
    for name in binary_columns + continuous_columns + list(rules):
        if name not in header:
            raise DatasetError(f"declared column {name!r} not found")

    kept, dropped = [], 0
    for r_i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DatasetError(f"row {r_i}: expected {len(header)} cells, got {len(row)}")
        if any(c.strip() == "" for c in row):
            dropped += 1
            continue
        vals = []
        for c_i, cell in enumerate(row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise DatasetError(
                    f"row {r_i}, column {header[c_i]!r}: non-numeric value {cell!r}"
                ) from None
        kept.append(vals)
    if dropped:
        log.info("%s: %d dropped (incomplete rows)", path, dropped)
    table = np.array(kept, dtype=float).reshape(len(kept), len(header))

    y = table[:, header.index(response)]
    names, types, cols = [], [], []
    for c_i, name in enumerate(header):
        if name == response:
            continue
        col = table[:, c_i]
        if name in rules:
            cuts = rules[name]
            edges = cuts + [math.inf]
            for lo, hi in zip(edges[:-1], edges[1:]):
                names.append(f"{name}[{lo:g},{hi:g})")
                types.append(BINARY)
                cols.append(((col >= lo) & (col < hi)).astype(float))
            continue
        if name in binary_columns:
            bad = np.flatnonzero((col != 0) & (col != 1))
            if bad.size:
                raise DatasetError(
                    f"binary column {name!r} has value {col[bad[0]]:g} at row {bad[0] + 1}"
                )
            t = BINARY
        elif name in continuous_columns:
            t = CONTINUOUS
        else:
            t = BINARY if np.all((col == 0) | (col == 1)) else CONTINUOUS
        names.append(name)
        types.append(t)
        cols.append(col)
    X = np.column_stack(cols) if cols else np.zeros((y.size, 0))
    return Dataset(y, X, types, names, response_name=response, dropped_rows=dropped)


def save_dataset(ds: Dataset, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ds.response_name] + ds.column_names)
        for i in range(ds.n):
            w.writerow([format(ds.y[i], ".17g")] + [format(v, ".17g") for v in ds.X[i]])


def save_truth(truth: dict, path):
    import json

    def conv(v):
        return v.tolist() if isinstance(v, np.ndarray) else v

    Path(path).write_text(json.dumps({k: conv(v) for k, v in truth.items()}, indent=1) + "\n")


# --------------------------------------------------------------------------
# simulators
# --------------------------------------------------------------------------

# per-cluster coefficients on (x1, x2, x1*x2)
SCENARIO1_THETA = np.array([[3.0, 5.0, 9.0], [0.0, 5.0, 0.0]])


def simulate_scenario1(seed, n_per_cluster=100):
    """Two binary covariates, two equal clusters, interaction in cluster 1 only.

    Returns
    -------
    dataset : Dataset
    truth : dict
        ``assign`` (0-based true cluster), ``theta`` (2 x 3 coefficients on
        x1, x2, x1*x2) and ``sizes``.
    """
    rng = make_rng(seed, 0)
    n = 2 * n_per_cluster
    X = (rng.random((n, 2)) < 0.5).astype(float)
    assign = np.repeat([0, 1], n_per_cluster)
    th = SCENARIO1_THETA[assign]
    mean = X[:, 0] * th[:, 0] + X[:, 1] * th[:, 1] + X[:, 0] * X[:, 1] * th[:, 2]
    y = mean + rng.standard_normal(n)
    ds = Dataset(y, X, [BINARY, BINARY], ["x1", "x2"])
    return ds, {"assign": assign, "theta": SCENARIO1_THETA.copy(), "sizes": [n_per_cluster] * 2}


def scenario1_true_mean(profile):
    """E[y | x] under the scenario-1 process (equal mixture of the two clusters)."""
    x1, x2 = float(profile[0]), float(profile[1])
    feats = np.array([x1, x2, x1 * x2])
    return float(0.5 * SCENARIO1_THETA[0] @ feats + 0.5 * SCENARIO1_THETA[1] @ feats)


def scenario1_true_density(profile, grid):
    x1, x2 = float(profile[0]), float(profile[1])
    feats = np.array([x1, x2, x1 * x2])
    out = np.zeros_like(np.asarray(grid, dtype=float))
    for th in SCENARIO1_THETA:
        m = th @ feats
        out += 0.5 * np.exp(-0.5 * (grid - m) ** 2) / math.sqrt(2 * math.pi)
    return out


MIXED_IRRELEVANT = "b5"


def simulate_mixed(seed, n=500):
    """Mixed-type dataset: 5 binary (b1..b5) and 5 continuous (c1..c5) covariates.

    Two latent clusters with different regressions.  ``b3`` and ``c3`` shift
    with cluster membership; ``b5`` is independent noise with no effect on
    the response or the clustering.
    """
    rng = make_rng(seed, 0)
    z = (rng.random(n) < 0.5).astype(int)
    B = np.empty((n, 5))
    B[:, 0] = rng.random(n) < 0.5
    B[:, 1] = rng.random(n) < 0.5
    B[:, 2] = rng.random(n) < np.where(z == 0, 0.85, 0.15)
    B[:, 3] = rng.random(n) < 0.3
    B[:, 4] = rng.random(n) < 0.5
    C = rng.standard_normal((n, 5))
    C[:, 2] += np.where(z == 0, -1.0, 1.0)
    coef = np.zeros((2, 10))
    coef[0, [0, 5, 6]] = [3.0, 2.0, -1.5]
    coef[1, [0, 1, 5]] = [-2.0, 4.0, 1.0]
    X = np.column_stack([B, C])
    y = np.einsum("ij,ij->i", X, coef[z]) + 0.5 * rng.standard_normal(n)
    names = [f"b{i}" for i in range(1, 6)] + [f"c{i}" for i in range(1, 6)]
    ds = Dataset(y, X, [BINARY] * 5 + [CONTINUOUS] * 5, names)
    return ds, {"assign": z, "coef": coef, "irrelevant": MIXED_IRRELEVANT}
