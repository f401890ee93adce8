"""Synthetic knowledge-base initialization and the train/update/retrain loop.

The knowledge base starts as analytical-model predictions at configurations
drawn uniformly from the feature space; its size can be fixed or chosen by
growing until k-fold cross-validation error against the model's own outputs
drops under a threshold. Afterwards each incoming batch of measured samples
is weighted, folded in by an update policy, and the learner is retrained.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import Dataset, FeatureSpace, GrayboxError
from .update import UpdateConfig, apply_update

_DEDUP_RETRIES = 16


def derive_seed(*parts: int) -> int:
    """Stable child seed from integer parts (order-sensitive)."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SizingConfig:
    """Growth schedule for the cross-validation sizing search."""

    epsilon: float = 0.10
    start_n: int = 100
    growth: float = 2.0
    cap_n: int = 16384
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise GrayboxError(f"epsilon must be > 0, got {self.epsilon}")
        if not 1 <= self.start_n <= self.cap_n:
            raise GrayboxError("need 1 <= start_n <= cap_n")
        if not self.growth > 1:
            raise GrayboxError(f"growth must be > 1, got {self.growth}")
        if self.folds < 2:
            raise GrayboxError(f"folds must be >= 2, got {self.folds}")

    def schedule(self) -> list[int]:
        ns = []
        n = self.start_n
        while n < self.cap_n:
            ns.append(n)
            n = int(np.ceil(n * self.growth))
        ns.append(self.cap_n)
        return ns


def sample_config_space(space: FeatureSpace, n: int, seed: int) -> np.ndarray:
    """n configs drawn uniformly per dimension (continuous range or levels).

    Exact duplicate rows are redrawn a bounded number of times, then kept
    (a small discrete space may not have n distinct points).
    """
    if n < 1:
        raise GrayboxError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)

    def draw(count):
        cols = []
        for dim in space.dims:
            if dim.is_discrete:
                cols.append(rng.choice(dim.levels, size=count))
            else:
                cols.append(rng.uniform(dim.lo, dim.hi, size=count))
        return np.column_stack(cols)

    X = draw(n)
    for _ in range(_DEDUP_RETRIES):
        _, first = np.unique(X, axis=0, return_index=True)
        dup = np.ones(n, dtype=bool)
        dup[first] = False
        if not dup.any():
            break
        X[dup] = draw(int(dup.sum()))
    return X


def generate_synthetic(am, configs: np.ndarray) -> tuple[Dataset, int]:
    """One synthetic sample (weight 1) per config the model can answer.

    Configs where the model is undefined (saturation) are skipped; the skip
    count is returned alongside and recorded in the dataset's meta.
    """
    X = np.asarray(configs, dtype=float)
    if len(X) == 0:
        return Dataset.empty(am.space, meta={"skipped": 0}), 0
    y, ok = am.query_many(X)
    skipped = int((~ok).sum())
    ds = Dataset(
        am.space,
        X[ok],
        y[ok],
        np.ones(int(ok.sum())),
        np.zeros(int(ok.sum()), dtype=bool),
        meta={"skipped": skipped},
        validate=False,
    )
    return ds, skipped


def size_by_cv(am, space: FeatureSpace, learner, sz: SizingConfig) -> tuple[int, float]:
    """Grow the synthetic set until CV error against the model's outputs is
    at most epsilon; returns (chosen n, achieved CV error).

    Every size is drawn fresh (no fold leakage between iterations); falls
    back to (cap_n, its error) when the threshold is never met.
    """
    from .evaluation import kfold_cv

    cv = float("inf")
    ns = sz.schedule()
    for n in ns:
        configs = sample_config_space(space, n, derive_seed(sz.seed, n, 1))
        ds, _ = generate_synthetic(am, configs)
        cv = kfold_cv(learner, ds, sz.folds, derive_seed(sz.seed, n, 2))
        if cv <= sz.epsilon:
            return n, cv
    return ns[-1], cv


@dataclass
class Snapshot:
    """State after one loop round: the trained model plus set statistics."""

    round: int
    model: object
    st: Dataset
    train_seconds: float

    @property
    def n_synthetic(self) -> int:
        return self.st.n_synthetic

    @property
    def n_real(self) -> int:
        return self.st.n_real


def bootstrap_loop(
    am,
    learner,
    update_cfg: UpdateConfig,
    batches: Iterable[Dataset],
    init_n: int,
    seed: int,
) -> list[Snapshot]:
    """Initialize from the analytical model, then fold in each batch and retrain.

    Emits one snapshot for the initial purely synthetic model and one per
    batch. With no batches this is exactly initialization plus one training.
    """
    if init_n < 1:
        raise GrayboxError(f"init_n must be >= 1, got {init_n}")
    configs = sample_config_space(am.space, init_n, seed)
    st, _ = generate_synthetic(am, configs)
    snapshots = []
    t0 = time.perf_counter()
    model = learner.train(st)
    snapshots.append(Snapshot(0, model, st, time.perf_counter() - t0))
    for rnd, batch in enumerate(batches, start=1):
        st = apply_update(st, batch, update_cfg)
        t0 = time.perf_counter()
        model = learner.train(st)
        snapshots.append(Snapshot(rnd, model, st, time.perf_counter() - t0))
    return snapshots


def write_snapshot_stats(snapshots, path, measure_time: bool = False) -> None:
    """CSV `round,n_synthetic,n_real,train_seconds`.

    Timings are left empty unless requested: they are the one inherently
    non-reproducible value, and default outputs stay byte-identical per seed.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("round,n_synthetic,n_real,train_seconds\n")
        for s in snapshots:
            t = repr(s.train_seconds) if measure_time else ""
            fh.write(f"{s.round},{s.n_synthetic},{s.n_real},{t}\n")
