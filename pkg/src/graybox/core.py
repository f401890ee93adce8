"""Feature spaces, samples, datasets, and the normalized distance metric.

Configurations are plain numeric vectors over a :class:`FeatureSpace`.
Every coordinate is mapped affinely to [0,1] by its dimension's bounds,
and distances are Euclidean in that unit cube, divided by the cube
diagonal, so any two in-bounds points are at distance <= 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

SYNTHETIC = "synthetic"
REAL = "real"
PROVENANCES = (SYNTHETIC, REAL)


class GrayboxError(Exception):
    """Base class for errors raised by this package."""


class InvalidConfig(GrayboxError):
    """A configuration vector does not fit its feature space."""


class SpaceMismatch(GrayboxError):
    """Datasets over different feature spaces were combined."""


@dataclass(frozen=True)
class Dimension:
    """One named axis of a feature space.

    Continuous dimensions carry (lo, hi) bounds. Discrete dimensions carry
    an ordered tuple of numeric levels; they are embedded as their numeric
    values and normalized by (min level, max level) like continuous ones,
    which keeps cut-off radii meaningful across mixed spaces.
    """

    name: str
    lo: float
    hi: float
    levels: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise InvalidConfig("dimension name must be non-empty")
        if self.levels is not None:
            if len(set(self.levels)) < 2:
                raise InvalidConfig(
                    f"discrete dimension {self.name!r} needs >= 2 distinct levels"
                )
        if not (self.lo < self.hi):
            raise InvalidConfig(
                f"dimension {self.name!r}: lo={self.lo} must be < hi={self.hi}"
            )

    @classmethod
    def continuous(cls, name: str, lo: float, hi: float) -> "Dimension":
        return cls(name, float(lo), float(hi))

    @classmethod
    def discrete(cls, name: str, levels: Sequence[float]) -> "Dimension":
        lv = tuple(float(v) for v in levels)
        return cls(name, min(lv), max(lv), levels=lv)

    @property
    def is_discrete(self) -> bool:
        return self.levels is not None

    def contains(self, value: float) -> bool:
        if self.levels is not None:
            return value in self.levels
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class FeatureSpace:
    """Ordered, uniquely named dimensions; defines normalization and distance."""

    dims: tuple[Dimension, ...]

    def __post_init__(self):
        if isinstance(self.dims, list):
            object.__setattr__(self, "dims", tuple(self.dims))
        if len(self.dims) < 1:
            raise InvalidConfig("feature space needs at least one dimension")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise InvalidConfig(f"dimension names must be unique, got {names}")

    @property
    def n_dims(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    @property
    def lows(self) -> np.ndarray:
        return np.array([d.lo for d in self.dims])

    @property
    def spans(self) -> np.ndarray:
        return np.array([d.hi - d.lo for d in self.dims])

    @property
    def max_distance(self) -> float:
        """Length of the unit-hypercube diagonal."""
        return math.sqrt(self.n_dims)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidConfig(f"no dimension named {name!r}") from None

    def validate_config(self, values: Sequence[float]) -> np.ndarray:
        c = np.asarray(values, dtype=float)
        if c.shape != (self.n_dims,):
            raise InvalidConfig(
                f"config has {c.shape} values, space has {self.n_dims} dimensions"
            )
        for dim, v in zip(self.dims, c):
            if not dim.contains(v):
                raise InvalidConfig(
                    f"value {v!r} out of bounds for dimension {dim.name!r}"
                )
        return c

    def validate_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_dims:
            raise InvalidConfig(
                f"config matrix shape {X.shape} does not match {self.n_dims} dims"
            )
        for j, dim in enumerate(self.dims):
            col = X[:, j]
            if dim.levels is not None:
                ok = np.isin(col, dim.levels)
            else:
                ok = (col >= dim.lo) & (col <= dim.hi)
            if not ok.all():
                bad = col[~ok][0]
                raise InvalidConfig(
                    f"value {bad!r} out of bounds for dimension {dim.name!r}"
                )
        return X

    def normalize_matrix(self, X: np.ndarray) -> np.ndarray:
        """Affinely map each column to [0,1]; no bounds check."""
        return (np.asarray(X, dtype=float) - self.lows) / self.spans


def normalize(config: Sequence[float], space: FeatureSpace) -> np.ndarray:
    """Map an in-bounds config to the unit hypercube, coordinate-wise."""
    c = space.validate_config(config)
    return (c - space.lows) / space.spans


def distance(a: Sequence[float], b: Sequence[float], space: FeatureSpace) -> float:
    """Euclidean distance between normalized configs, scaled to [0,1] by the diagonal."""
    na = normalize(a, space)
    nb = normalize(b, space)
    return float(np.linalg.norm(na - nb) / space.max_distance)


@dataclass(frozen=True)
class Sample:
    """One observation: a config, its target KPI, a fit weight, and provenance."""

    config: tuple[float, ...]
    target: float
    weight: float = 1.0
    provenance: str = SYNTHETIC

    def __post_init__(self):
        object.__setattr__(self, "config", tuple(float(v) for v in self.config))
        if not self.weight > 0:
            raise GrayboxError(f"sample weight must be > 0, got {self.weight}")
        if not math.isfinite(self.target):
            raise GrayboxError(f"sample target must be finite, got {self.target}")
        if self.provenance not in PROVENANCES:
            raise GrayboxError(f"unknown provenance {self.provenance!r}")

    @property
    def is_real(self) -> bool:
        return self.provenance == REAL


class Dataset:
    """Ordered multiset of samples over one feature space.

    Stored column-wise as numpy arrays; immutable by convention (all update
    operations build new datasets). ``meta`` carries free-form tags such as
    the generating seed and is not serialized to CSV.
    """

    def __init__(
        self,
        space: FeatureSpace,
        X: np.ndarray,
        y: np.ndarray,
        w: np.ndarray | None = None,
        real: np.ndarray | None = None,
        meta: dict | None = None,
        validate: bool = True,
    ):
        self.space = space
        n = len(y)
        self.X = np.asarray(X, dtype=float).reshape(n, space.n_dims)
        self.y = np.asarray(y, dtype=float)
        self.w = np.ones(n) if w is None else np.asarray(w, dtype=float)
        self.real = (
            np.zeros(n, dtype=bool) if real is None else np.asarray(real, dtype=bool)
        )
        self.meta = dict(meta) if meta else {}
        if validate:
            space.validate_matrix(self.X)
            if not np.isfinite(self.y).all():
                raise GrayboxError("targets must be finite")
            if not (self.w > 0).all():
                raise GrayboxError("weights must be > 0")
        self._normalized: np.ndarray | None = None

    @classmethod
    def from_samples(
        cls, space: FeatureSpace, samples: Iterable[Sample], meta: dict | None = None
    ) -> "Dataset":
        rows = list(samples)
        X = np.array([s.config for s in rows], dtype=float).reshape(-1, space.n_dims)
        y = np.array([s.target for s in rows])
        w = np.array([s.weight for s in rows])
        real = np.array([s.is_real for s in rows], dtype=bool)
        return cls(space, X, y, w, real, meta=meta)

    @classmethod
    def empty(cls, space: FeatureSpace, meta: dict | None = None) -> "Dataset":
        return cls(
            space,
            np.empty((0, space.n_dims)),
            np.empty(0),
            np.empty(0),
            np.empty(0, dtype=bool),
            meta=meta,
        )

    def __len__(self) -> int:
        return len(self.y)

    def __iter__(self) -> Iterator[Sample]:
        return (self.sample(i) for i in range(len(self)))

    def sample(self, i: int) -> Sample:
        return Sample(
            config=tuple(self.X[i]),
            target=float(self.y[i]),
            weight=float(self.w[i]),
            provenance=REAL if self.real[i] else SYNTHETIC,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.space == other.space
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.real, other.real)
        )

    __hash__ = None  # mutable arrays inside

    @property
    def n_real(self) -> int:
        return int(self.real.sum())

    @property
    def n_synthetic(self) -> int:
        return len(self) - self.n_real

    @property
    def normalized(self) -> np.ndarray:
        """Config matrix mapped to the unit hypercube (cached)."""
        if self._normalized is None:
            self._normalized = self.space.normalize_matrix(self.X)
        return self._normalized

    def subset(self, idx) -> "Dataset":
        return Dataset(
            self.space,
            self.X[idx],
            self.y[idx],
            self.w[idx],
            self.real[idx],
            meta=self.meta,
            validate=False,
        )

    def replace(self, **cols) -> "Dataset":
        """New dataset with some columns swapped out; order preserved."""
        return Dataset(
            self.space,
            cols.get("X", self.X),
            cols.get("y", self.y),
            cols.get("w", self.w),
            cols.get("real", self.real),
            meta=cols.get("meta", self.meta),
            validate=False,
        )


def partition(d: Dataset) -> tuple[Dataset, Dataset]:
    """Split by provenance into (synthetic, real); both preserve order."""
    return d.subset(~d.real), d.subset(d.real)


def space_to_dict(space: FeatureSpace) -> dict:
    dims = []
    for d in space.dims:
        if d.is_discrete:
            dims.append({"name": d.name, "levels": list(d.levels)})
        else:
            dims.append({"name": d.name, "lo": d.lo, "hi": d.hi})
    return {"dims": dims}


def space_from_dict(data: dict) -> FeatureSpace:
    dims = []
    for d in data["dims"]:
        if "levels" in d:
            dims.append(Dimension.discrete(d["name"], d["levels"]))
        else:
            dims.append(Dimension.continuous(d["name"], d["lo"], d["hi"]))
    return FeatureSpace(tuple(dims))


def write_csv(d: Dataset, path) -> None:
    """Write `<dim names...>,target,weight,provenance` with full-precision floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(d.space.names + ["target", "weight", "provenance"])
        for i in range(len(d)):
            row = [repr(float(v)) for v in d.X[i]]
            row += [
                repr(float(d.y[i])),
                repr(float(d.w[i])),
                REAL if d.real[i] else SYNTHETIC,
            ]
            writer.writerow(row)


def read_csv(path, space: FeatureSpace) -> Dataset:
    """Read a dataset written by :func:`write_csv`; header must match the space."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = space.names + ["target", "weight", "provenance"]
        if header != expected:
            raise GrayboxError(f"CSV header {header} does not match {expected}")
        X, y, w, real = [], [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(expected):
                raise GrayboxError(f"CSV row has {len(row)} fields, want {len(expected)}")
            X.append([float(v) for v in row[: space.n_dims]])
            y.append(float(row[space.n_dims]))
            w.append(float(row[space.n_dims + 1]))
            prov = row[space.n_dims + 2]
            if prov not in PROVENANCES:
                raise GrayboxError(f"unknown provenance {prov!r} in CSV")
            real.append(prov == REAL)
    if not y:
        return Dataset.empty(space)
    return Dataset(space, np.array(X), np.array(y), np.array(w), np.array(real, dtype=bool))
