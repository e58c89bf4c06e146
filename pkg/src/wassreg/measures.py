"""Discrete probability measures, datasets of measures and pair sampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .sampling import SeedSpec

WEIGHT_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i w_i delta_{x_i}`` in ``R^d``.

    Parameters
    ----------
    supports : array_like, shape (n, d)
        Atom locations. A 1-D array is read as ``n`` points on the line.
    weights : array_like, shape (n,), optional
        Nonnegative masses summing to one (within ``1e-6``; renormalized).
        Uniform when omitted. Use :meth:`from_masses` for arbitrary positive
        masses.
    """

    supports: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.array(self.supports, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"supports must be an (n, d) array with n, d >= 1, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("supports contain NaN or Inf")
        n = x.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.array(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise DataError(f"{w.shape[0]} weights for {n} support points")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise DataError("weights must be finite and nonnegative")
            s = w.sum()
            if s <= 0 or abs(s - 1.0) > WEIGHT_SUM_TOL:
                raise DataError(f"weights sum to {s!r}; expected 1 within {WEIGHT_SUM_TOL}")
            w = w / s
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "supports", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_masses(cls, supports, masses) -> "DiscreteMeasure":
        """Build a measure from positive, not necessarily normalized, masses."""
        m = np.asarray(masses, dtype=float).reshape(-1)
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise DataError("masses must be finite and nonnegative")
        s = m.sum()
        if s <= 0:
            raise DataError(f"masses sum to {s!r}; must be positive")
        return cls(supports, m / s)

    @property
    def n(self) -> int:
        return self.supports.shape[0]

    @property
    def dim(self) -> int:
        return self.supports.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.supports * c, self.weights)

    def same_as(self, other: "DiscreteMeasure") -> bool:
        """Bit-level equality of supports and weights."""
        return (
            self.supports.shape == other.supports.shape
            and np.array_equal(self.supports, other.supports)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n={self.n}, d={self.dim})"


@dataclass(frozen=True)
class PairIndex:
    i: int
    j: int

    @property
    def key(self) -> int:
        """Stream id used to seed per-pair randomness."""
        return (self.i << 32) | self.j


@dataclass(frozen=True, eq=False)
class MeasureDataset:
    measures: tuple
    labels: tuple | None = None

    def __post_init__(self):
        measures = tuple(self.measures)
        if not measures:
            raise DataError("dataset is empty")
        d = measures[0].dim
        for k, m in enumerate(measures):
            if m.dim != d:
                raise DataError(f"measure {k} has dimension {m.dim}, expected {d}")
        object.__setattr__(self, "measures", measures)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(measures):
                raise DataError(f"{len(labels)} labels for {len(measures)} measures")
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.measures[0].dim

    def __len__(self) -> int:
        return len(self.measures)

    def __getitem__(self, k: int) -> DiscreteMeasure:
        return self.measures[k]

    def check_pairs(self, pairs: Sequence[PairIndex], allow_self: bool = True) -> None:
        size = len(self)
        for p in pairs:
            if not (0 <= p.i < size and 0 <= p.j < size):
                raise DataError(f"pair ({p.i}, {p.j}) out of range for dataset of size {size}")
            if not allow_self and p.i == p.j:
                raise DataError(f"self pair ({p.i}, {p.j}) not allowed")


def _read_matrix(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: ragged rows with widths {sorted(widths)}")
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite value")
    return arr


def load_measure(path: str | Path) -> DiscreteMeasure:
    """Read a headerless point-cloud CSV and its optional ``.w`` weights file."""
    path = Path(path)
    x = _read_matrix(path)
    wpath = Path(str(path) + ".w")
    if not wpath.exists():
        return DiscreteMeasure(x)
    w = _read_matrix(wpath)
    if w.shape[1] != 1:
        raise DataError(f"{wpath}: weights file must have a single column")
    w = w[:, 0]
    if w.shape[0] != x.shape[0]:
        raise DataError(f"{wpath}: {w.shape[0]} weights for {x.shape[0]} points")
    if np.any(w < 0):
        raise DataError(f"{wpath}: negative weight")
    if w.sum() <= 0:
        raise DataError(f"{wpath}: weights sum to {w.sum()!r}")
    return DiscreteMeasure.from_masses(x, w)


def load_dataset(manifest_path: str | Path) -> MeasureDataset:
    """Load a dataset from a ``path,label`` manifest CSV.

    Paths are resolved relative to the manifest's directory. Every cloud must
    share the dimension of the first one.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"missing manifest: {manifest_path}")
    base = manifest_path.parent
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "path" not in reader.fieldnames:
            raise DataError(f"{manifest_path}: header must be 'path,label'")
        entries = [(row["path"].strip(), (row.get("label") or "").strip()) for row in reader]
    if not entries:
        raise DataError(f"{manifest_path}: no entries")
    measures = []
    d = None
    for rel, _ in entries:
        m = load_measure(base / rel)
        if d is None:
            d = m.dim
        elif m.dim != d:
            raise DataError(f"{rel}: dimension {m.dim} does not match {d}")
        measures.append(m)
    labels = [lab for _, lab in entries]
    has_labels = any(labels)
    return MeasureDataset(tuple(measures), tuple(labels) if has_labels else None)


def write_dataset(dataset: MeasureDataset, directory: str | Path, prefix: str = "cloud") -> Path:
    """Write a dataset as a manifest plus one CSV per measure; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(dataset))))
    rows = []
    for k, m in enumerate(dataset.measures):
        name = f"{prefix}_{k:0{width}d}.csv"
        np.savetxt(directory / name, m.supports, delimiter=",", fmt="%.17g")
        if not m.is_uniform:
            np.savetxt(directory / (name + ".w"), m.weights, fmt="%.17g")
        label = dataset.labels[k] if dataset.labels is not None else ""
        rows.append((name, label))
    manifest = directory / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "label"])
        w.writerows(rows)
    return manifest


def sample_pairs(
    dataset: MeasureDataset | int,
    m: int,
    seed: int | SeedSpec,
    mode: str = "all-unordered",
) -> list[PairIndex]:
    """Draw index pairs from a dataset.

    ``all-unordered`` draws ``m`` distinct measures and returns all
    ``m (m - 1) / 2`` unordered pairs among them. ``uniform-random`` returns
    ``m`` distinct unordered pairs drawn uniformly from all ``N (N - 1) / 2``.
    """
    size = dataset if isinstance(dataset, int) else len(dataset)
    if m <= 0:
        raise DataError(f"m must be positive, got {m}")
    spec = seed if isinstance(seed, SeedSpec) else SeedSpec(seed, 0)
    rng = spec.generator()
    if mode == "all-unordered":
        if m > size:
            raise DataError(f"cannot draw {m} measures from a dataset of {size}")
        chosen = np.sort(rng.choice(size, size=m, replace=False))
        return [PairIndex(int(a), int(b)) for a, b in combinations(chosen, 2)]
    if mode == "uniform-random":
        total = size * (size - 1) // 2
        if m > total:
            raise DataError(f"cannot draw {m} distinct pairs from {total}")
        flat = rng.choice(total, size=m, replace=False)
        return [PairIndex(*_unrank_pair(int(r), size)) for r in flat]
    raise DataError(f"unknown pair sampling mode {mode!r}")


def _unrank_pair(r: int, size: int) -> tuple[int, int]:
    # row-major enumeration of (i, j) with i < j
    i = 0
    row = size - 1
    while r >= row:
        r -= row
        i += 1
        row -= 1
    return i, i + 1 + r


def read_pairs(path: str | Path) -> list[PairIndex]:
    """Read an ``i,j`` CSV (extra columns ignored, ``#`` comments skipped)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing pairs file: {path}")
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"i", "j"} <= set(reader.fieldnames):
        raise DataError(f"{path}: header must start with 'i,j'")
    out = []
    for row in reader:
        try:
            out.append(PairIndex(int(row["i"]), int(row["j"])))
        except (TypeError, ValueError):
            raise DataError(f"{path}: bad pair row {row!r}") from None
    if not out:
        raise DataError(f"{path}: no pairs")
    return out

