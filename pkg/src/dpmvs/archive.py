"""Per-iteration draw records and their columnar text format.

One CSV file per chain.  Its first line holds the column names and every
further line is one retained iteration; model name and metadata live in a
JSON sidecar with the same stem (``chain_0.csv`` / ``chain_0.json``).
Vector and matrix fields are stored as space-separated values inside a
single comma-separated field (matrices row-major, row width recorded in the
sidecar).  Floats are written
with 17 significant digits so a reload is bit-exact.  Allocation labels are
written 1-based.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("int", "float", "ivec", "fvec", "fmat")
# label columns shifted to 1-based on disk
ONE_BASED = ("assign", "alloc")


def _fmt(x):
    return format(float(x), ".17g")


@dataclass
class DrawArchive:
    """Append-only store of retained MCMC draws.

    ``fields`` maps column name to kind (one of ``KINDS``); ``widths`` gives
    the row width of every ``fmat`` column.  The assign column, when present,
    is named ``assign`` and holds 0-based labels in memory.
    """

    model: str
    n: int
    fields: dict
    widths: dict = field(default_factory=dict)
    iterations: int = 0
    burn_in: int = 0
    thinning: int = 1
    meta: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def append(self, rec):
        missing = set(self.fields) - set(rec)
        if missing:
            raise KeyError(f"record lacks fields {sorted(missing)}")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def expected_retained(self):
        return (self.iterations - self.burn_in) // self.thinning

    def require_nonempty(self):
        if not self.records:
            raise ValueError("draw archive is empty")

    def column(self, name):
        kind = self.fields[name]
        if kind in ("int", "float"):
            return np.array([r[name] for r in self.records], dtype=float if kind == "float" else np.int64)
        if kind == "fmat":
            return [np.asarray(r[name], dtype=float) for r in self.records]
        return np.array([np.asarray(r[name]) for r in self.records])

    def assigns(self):
        return np.array([r["assign"] for r in self.records], dtype=np.int64).reshape(len(self), -1)

    # ------------------------------------------------------------------ io

    def save(self, path):
        path = Path(path)
        names = list(self.fields)
        header = {
            "model": self.model,
            "n": self.n,
            "columns": names,
            "fields": self.fields,
            "widths": self.widths,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "meta": self.meta,
        }
        path.with_suffix(".json").write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for rec in self.records:
                w.writerow([_encode(rec[nm], self.fields[nm], nm in ONE_BASED) for nm in names])

    @classmethod
    def load(cls, path):
        path = Path(path)
        side = path.with_suffix(".json")
        if not side.exists():
            raise ValueError(f"{path}: missing metadata sidecar {side.name}")
        header = json.loads(side.read_text(encoding="utf-8"))
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            names = next(reader)
            if header.get("columns", list(header["fields"])) != names:
                raise ValueError(f"{path}: column names do not match header")
            fields_ = {nm: header["fields"][nm] for nm in names}
            arc = cls(
                model=header["model"],
                n=header["n"],
                fields=fields_,
                widths=header.get("widths", {}),
                iterations=header["iterations"],
                burn_in=header["burn_in"],
                thinning=header["thinning"],
                meta=header.get("meta", {}),
            )
            for row in reader:
                rec = {}
                for nm, cell in zip(names, row):
                    rec[nm] = _decode(cell, fields_[nm], arc.widths.get(nm), nm in ONE_BASED)
                arc.records.append(rec)
        return arc


def _encode(value, kind, one_based):
    if kind == "int":
        return str(int(value))
    if kind == "float":
        return _fmt(value)
    arr = np.asarray(value)
    if kind == "ivec":
        flat = arr.astype(np.int64).ravel() + (1 if one_based else 0)
        return " ".join(str(v) for v in flat)
    return " ".join(_fmt(v) for v in arr.ravel())


def _decode(cell, kind, width, one_based):
    if kind == "int":
        return int(cell)
    if kind == "float":
        return float(cell)
    parts = cell.split()
    if kind == "ivec":
        arr = np.array([int(p) for p in parts], dtype=np.int64)
        return arr - 1 if one_based else arr
    arr = np.array([float(p) for p in parts], dtype=float)
    if kind == "fmat":
        return arr.reshape(-1, int(width))
    return arr


def load_archives(directory):
    """All ``chain_*.csv`` archives in a run directory, in chain order."""
    directory = Path(directory)
    paths = sorted(directory.glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not paths:
        raise FileNotFoundError(f"no chain archives in {directory}")
    return [DrawArchive.load(p) for p in paths]


def merge(archives):
    """Concatenate same-model archives (e.g. several chains) into one."""
    if not archives:
        raise ValueError("nothing to merge")
    first = archives[0]
    out = DrawArchive(
        model=first.model,
        n=first.n,
        fields=dict(first.fields),
        widths=dict(first.widths),
        iterations=first.iterations,
        burn_in=first.burn_in,
        thinning=first.thinning,
        meta=dict(first.meta),
    )
    for a in archives:
        if a.model != first.model or a.fields != first.fields:
            raise ValueError("cannot merge archives of different models")
        out.records.extend(a.records)
    return out
