"""Simulated operational systems.

An oracle system wraps a ground-truth performance function plus
multiplicative lognormal measurement noise, and produces real-provenance
samples. Noise is keyed by (system seed, salt, config), so measuring the
same configs in any order yields the same values.

The two built-in case studies mirror how deployed systems differ from
their analytical models: the sequencer truth is the same queueing formula
with its own (correct) calibration constants, while the store truth adds a
contention penalty at high node counts and write fractions that the
analytical formula does not know about. Store measurements also follow a
non-uniform configuration distribution (small clusters are far more
common), unlike the uniformly sampled synthetic sets.
"""

from __future__ import annotations

import numpy as np

from .analytic import KvsModel, KvsParams, Saturated, kvs_space
from .core import REAL, Dataset, GrayboxError, Sample


class KvsTruthModel:
    """Store ground truth: the analytical surface degraded by an extra
    write-contention penalty in large, write-heavy deployments."""

    case = "kvs"

    def __init__(self, params: KvsParams | None = None,
                 penalty_coeff: float = 1.5, penalty_knee: float = 70.0):
        self.base = KvsModel(params)
        self.space = kvs_space()
        self.penalty_coeff = penalty_coeff
        self.penalty_knee = penalty_knee

    def query_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        y, ok = self.base.query_many(X)
        nodes, wfrac = X[:, 0], X[:, 4]
        hi = self.space.dims[0].hi
        excess = np.maximum(0.0, (nodes - self.penalty_knee) / (hi - self.penalty_knee))
        return y / (1.0 + self.penalty_coeff * excess * wfrac), ok

    def query(self, config) -> float:
        y, _ = self.query_many(np.asarray(config, dtype=float).reshape(1, -1))
        return float(y[0])


class OracleSystem:
    """A measurable system: truth function plus lognormal noise of a given
    coefficient of variation."""

    def __init__(self, truth, noise_cv: float = 0.0, seed: int = 0):
        if noise_cv < 0:
            raise GrayboxError(f"noise_cv must be >= 0, got {noise_cv}")
        self.truth = truth
        self.noise_cv = float(noise_cv)
        self.seed = int(seed)

    @property
    def space(self):
        return self.truth.space

    def _noise(self, config: np.ndarray, salt: int) -> float:
        if self.noise_cv == 0.0:
            return 1.0
        bits = np.asarray(config, dtype=float).view(np.uint64)
        ss = np.random.SeedSequence([self.seed, salt, *(int(b) for b in bits)])
        rng = np.random.default_rng(ss)
        sigma2 = np.log1p(self.noise_cv**2)
        return float(np.exp(rng.normal(-sigma2 / 2.0, np.sqrt(sigma2))))


def measure(sys: OracleSystem, config, salt: int = 0) -> Sample:
    """One noisy real-provenance measurement; saturation propagates."""
    X = np.asarray(config, dtype=float).reshape(1, -1)
    y, ok = sys.truth.query_many(X)
    if not ok[0]:
        raise Saturated(f"system saturated at config {list(config)}")
    return Sample(
        config=tuple(X[0]),
        target=float(y[0]) * sys._noise(X[0], salt),
        weight=1.0,
        provenance=REAL,
    )


def build_dataset(sys: OracleSystem, configs, seed: int = 0) -> tuple[Dataset, int]:
    """Measure every feasible config; returns (dataset, saturated-skip count).

    The dataset is tagged with the generating seed in its meta.
    """
    X = np.asarray(configs, dtype=float)
    if len(X) == 0:
        return Dataset.empty(sys.space, meta={"seed": seed, "skipped": 0}), 0
    y, ok = sys.truth.query_many(X)
    skipped = int((~ok).sum())
    keep = X[ok]
    noise = np.array([sys._noise(row, seed) for row in keep])
    ds = Dataset(
        sys.space,
        keep,
        y[ok] * noise,
        np.ones(len(keep)),
        np.ones(len(keep), dtype=bool),
        meta={"seed": seed, "skipped": skipped},
        validate=False,
    )
    return ds, skipped


def kvs_real_configs(n: int, seed: int) -> np.ndarray:
    """Typical-deployment store configs, unlike the uniform synthetic draw.

    Node counts are integers with density proportional to 1/N (small
    clusters dominate), replication degree is one of {1, 2, 3, N/2, N},
    and operation counts are integers; the remaining dimensions are uniform.
    """
    rng = np.random.default_rng(seed)
    space = kvs_space()
    n_lo, n_hi = int(space.dims[0].lo), int(space.dims[0].hi)
    counts = np.arange(n_lo, n_hi + 1)
    p = 1.0 / counts
    nodes = rng.choice(counts, size=n, p=p / p.sum()).astype(float)
    repl_pick = rng.integers(0, 5, size=n)
    repl_levels = np.column_stack(
        [np.ones(n), np.full(n, 2.0), np.full(n, 3.0), nodes / 2.0, nodes]
    )
    repl = repl_levels[np.arange(n), repl_pick]
    reads = rng.integers(1, 6, size=n).astype(float)
    writes = rng.integers(1, 6, size=n).astype(float)
    wfrac = rng.uniform(0.0, 1.0, size=n)
    think = rng.uniform(1e-4, 1e-2, size=n)
    skew = rng.uniform(0.0, 1.0, size=n)
    return np.column_stack([nodes, repl, reads, writes, wfrac, think, skew])
