"""Datasets of (outcome, features, optional human decision) rows and CSV I/O.

A :class:`Dataset` is stored column-wise as numpy arrays. Optional columns
(``d``, ``maker_id``, ``split``) are ``None`` when absent from the source, and
individual missing cells are ``nan`` (or ``""`` for ``maker_id``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import _rng
from .errors import DegenerateSplitError, ParseError, SchemaError, UndefinedRateError

RESERVED = ("y", "d", "maker_id", "split")


@dataclass(frozen=True)
class Observation:
    y: int
    x: tuple[float, ...]
    d: int | None = None
    maker_id: str | None = None
    split: int | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    y: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...]
    d: np.ndarray | None = None
    maker_id: np.ndarray | None = None
    split: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if y.ndim != 1 or len(y) == 0:
            raise ValueError("dataset must be nonempty with a 1-D outcome")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("y must be binary {0,1}")
        if X.shape[0] != len(y):
            raise ValueError("X and y have different lengths")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match X columns")
        object.__setattr__(self, "y", y.astype(np.int8))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        for name in ("d", "split"):
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float)
            ok = np.isnan(col) | np.isin(col, (0.0, 1.0))
            if col.shape != y.shape or not ok.all():
                raise ValueError(f"{name} must be binary {{0,1}} (nan = missing)")
            object.__setattr__(self, name, col)
        if self.maker_id is not None:
            object.__setattr__(self, "maker_id", np.asarray(self.maker_id, dtype=object))
        for arr in (self.y, self.X, self.d, self.split, self.maker_id):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def n_pos(self) -> int:
        return int(self.y.sum())

    @property
    def n_neg(self) -> int:
        return self.n - self.n_pos

    def has_both_classes(self) -> bool:
        return 0 < self.n_pos < self.n

    def require_both_classes(self, what="this operation"):
        if not self.has_both_classes():
            raise UndefinedRateError(f"{what} needs at least one y=1 and one y=0 row")

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]
        return Dataset(self.y[idx], self.X[idx], self.feature_names, pick(self.d),
                       pick(self.maker_id), pick(self.split))

    def with_split(self, flags) -> "Dataset":
        return Dataset(self.y, self.X, self.feature_names, self.d, self.maker_id,
                       np.asarray(flags, dtype=float))

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise KeyError(f"no feature named {name!r}") from None

    def __len__(self):
        return self.n

    def __iter__(self) -> Iterator[Observation]:
        for i in range(self.n):
            yield self.observation(i)

    def observation(self, i: int) -> Observation:
        opt = lambda a: None if a is None or np.isnan(a[i]) else int(a[i])
        mid = None if self.maker_id is None or self.maker_id[i] == "" else self.maker_id[i]
        return Observation(int(self.y[i]), tuple(self.X[i].tolist()), opt(self.d), mid,
                           opt(self.split))

    @classmethod
    def from_observations(cls, rows: Sequence[Observation], feature_names=None) -> "Dataset":
        if not rows:
            raise ValueError("dataset must be nonempty")
        k = len(rows[0].x)
        if any(len(r.x) != k for r in rows):
            raise ValueError("all observations must share feature dimension")
        names = tuple(feature_names or (f"x{j + 1}" for j in range(k)))

        def col(attr):
            vals = [getattr(r, attr) for r in rows]
            if all(v is None for v in vals):
                return None
            return np.array([np.nan if v is None else v for v in vals], dtype=float)

        makers = [r.maker_id for r in rows]
        makers = None if all(m is None for m in makers) else np.array(
            ["" if m is None else m for m in makers], dtype=object)
        return cls(np.array([r.y for r in rows]), np.array([r.x for r in rows], dtype=float),
                   names, col("d"), makers, col("split"))


def prevalence(data: Dataset) -> float:
    """Share of positive labels."""
    return float(np.mean(data.y))


def _parse_binary(cell, row, col, optional):
    cell = cell.strip()
    if cell == "" and optional:
        return np.nan
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"column {col!r}: {cell!r} is not a number", row) from None
    if v not in (0.0, 1.0):
        raise ParseError(f"column {col!r}: {cell!r} is outside {{0,1}}", row)
    return v


def load_csv(path, schema: dict | None = None) -> Dataset:
    """Read a dataset from CSV.

    ``schema`` maps the roles ``y``, ``d``, ``maker_id``, ``split`` to column
    names and may list ``features`` explicitly; by default the reserved column
    names are used and every other column is a feature in header order.
    Row numbers in errors count the header as row 1.
    """
    schema = dict(schema or {})
    roles = {r: schema.get(r, r) for r in RESERVED}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if roles["y"] not in header:
            raise SchemaError(f"outcome column {roles['y']!r} not in header {header}")
        role_cols = {r: header.index(c) for r, c in roles.items() if c in header}
        if "features" in schema:
            missing = [f for f in schema["features"] if f not in header]
            if missing:
                raise SchemaError(f"feature columns {missing} not in header")
            feat_cols = [header.index(f) for f in schema["features"]]
        else:
            taken = set(role_cols.values())
            feat_cols = [j for j in range(len(header)) if j not in taken]
        ys, xs, ds, makers, splits = [], [], [], [], []
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} cells, got {len(row)}", rowno)
            ys.append(_parse_binary(row[role_cols["y"]], rowno, roles["y"], optional=False))
            feats = []
            for j in feat_cols:
                try:
                    feats.append(float(row[j]))
                except ValueError:
                    raise ParseError(f"feature {header[j]!r}: {row[j]!r} is not numeric",
                                     rowno) from None
            xs.append(feats)
            if "d" in role_cols:
                ds.append(_parse_binary(row[role_cols["d"]], rowno, roles["d"], optional=True))
            if "split" in role_cols:
                splits.append(_parse_binary(row[role_cols["split"]], rowno, roles["split"],
                                            optional=True))
            if "maker_id" in role_cols:
                makers.append(row[role_cols["maker_id"]].strip())
    if not ys:
        raise SchemaError(f"{path}: no data rows")
    X = np.array(xs, dtype=float).reshape(len(ys), len(feat_cols))
    return Dataset(
        np.array(ys).astype(np.int8), X, tuple(header[j] for j in feat_cols),
        np.array(ds) if "d" in role_cols else None,
        np.array(makers, dtype=object) if "maker_id" in role_cols else None,
        np.array(splits) if "split" in role_cols else None,
    )


def save_csv(data: Dataset, path) -> None:
    """Write ``data`` in the schema read by :func:`load_csv`.

    Floats are written with ``repr`` so a round trip is bit-exact.
    """
    header = ["y"]
    if data.d is not None:
        header.append("d")
    if data.maker_id is not None:
        header.append("maker_id")
    if data.split is not None:
        header.append("split")
    header += list(data.feature_names)

    def fmt01(v):
        return "" if np.isnan(v) else str(int(v))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            row = [str(int(data.y[i]))]
            if data.d is not None:
                row.append(fmt01(data.d[i]))
            if data.maker_id is not None:
                row.append(data.maker_id[i])
            if data.split is not None:
                row.append(fmt01(data.split[i]))
            row += [repr(float(v)) for v in data.X[i]]
            w.writerow(row)


def split_indices(n_pos_mask: np.ndarray, ratio: float, seed: int, max_tries: int = 100):
    """Index arrays ``(first, second)`` of a seeded permutation split.

    Both parts are guaranteed to contain both label classes.
    """
    y = np.asarray(n_pos_mask)
    n = len(y)
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    n_first = int(np.floor(ratio * n + 0.5))
    n_pos = int(y.sum())
    if (n_first < 2 or n - n_first < 2 or n_pos < 2 or n - n_pos < 2):
        raise DegenerateSplitError(
            f"cannot split n={n} ({n_pos} positives) so both parts hold both classes")
    for attempt in range(max_tries):
        perm = _rng.stream(seed, attempt).permutation(n)
        a, b = perm[:n_first], perm[n_first:]
        if 0 < y[a].sum() < len(a) and 0 < y[b].sum() < len(b):
            return np.sort(a), np.sort(b)
    raise DegenerateSplitError(f"no valid split found in {max_tries} permutations")


def split(data: Dataset, ratio: float = 0.5, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Partition into (estimation part, evaluation part) of sizes round(ratio*n) and rest."""
    a, b = split_indices(data.y, ratio, seed)
    return data.subset(a), data.subset(b)


def flag_split(data: Dataset, ratio: float = 0.5, seed: int = 0) -> Dataset:
    """Return ``data`` with a split column: 1 marks the estimation part, 0 the evaluation part."""
    a, _ = split_indices(data.y, ratio, seed)
    flags = np.zeros(data.n)
    flags[a] = 1.0
    return data.with_split(flags)
