"""Knowledge-base update policies.

Four ways to fold a batch of measured samples ``D`` into the training set
``ST``: plain concatenation (merge), nearest-neighbor replacement (rnn),
radius eviction of synthetic neighbors (rnr), and in-place target rewrite
of synthetic neighbors (rnr2). All are pure functions returning new
datasets; incoming batches get a uniform weight first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, GrayboxError, SpaceMismatch

POLICIES = ("merge", "rnn", "rnr", "rnr2")


class InvalidWeight(GrayboxError):
    """Sample weights must be positive."""


class EmptyKnowledgeBase(GrayboxError):
    """rnn needs at least one sample to evict."""


@dataclass(frozen=True)
class UpdateConfig:
    """Policy choice plus the weight given to incoming real samples and the
    normalized cut-off radius used by rnr/rnr2."""

    policy: str
    weight: float = 1.0
    cutoff: float = 0.0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise GrayboxError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not self.weight > 0:
            raise InvalidWeight(f"weight must be > 0, got {self.weight}")
        if not 0.0 <= self.cutoff <= 1.0:
            raise GrayboxError(f"cutoff must be in [0,1], got {self.cutoff}")


def set_weight(d: Dataset, w: float) -> Dataset:
    """Every sample's weight set to w; provenance untouched."""
    if not w > 0:
        raise InvalidWeight(f"weight must be > 0, got {w}")
    return d.replace(w=np.full(len(d), float(w)))


def _check_spaces(st: Dataset, d: Dataset) -> None:
    if st.space != d.space:
        raise SpaceMismatch("datasets live in different feature spaces")


def _concat(st: Dataset, d: Dataset) -> Dataset:
    return Dataset(
        st.space,
        np.concatenate([st.X, d.X]),
        np.concatenate([st.y, d.y]),
        np.concatenate([st.w, d.w]),
        np.concatenate([st.real, d.real]),
        meta=st.meta,
        validate=False,
    )


def _cross_distances(a_norm: np.ndarray, b_norm: np.ndarray, block: int = 64) -> np.ndarray:
    """Pairwise Euclidean distances between normalized point sets.

    Computed by direct differencing (not the expanded dot-product form) so
    identical points come out at exactly 0, which radius-0 cut-offs rely on.
    """
    out = np.empty((len(a_norm), len(b_norm)))
    for s in range(0, len(b_norm), block):
        diff = a_norm[:, None, :] - b_norm[None, s : s + block, :]
        out[:, s : s + block] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def merge(st: Dataset, d: Dataset) -> Dataset:
    """Concatenate; contradicting neighbors may co-exist, weights arbitrate."""
    _check_spaces(st, d)
    return _concat(st, d)


def rnn(st: Dataset, d: Dataset) -> Dataset:
    """Replace-nearest-neighbor: each incoming sample evicts its closest
    current sample (any provenance, earlier samples win ties) and is appended.

    Samples inserted earlier in the same batch are themselves eligible for
    eviction. Cardinality is preserved.
    """
    _check_spaces(st, d)
    if len(st) == 0:
        raise EmptyKnowledgeBase("rnn needs a non-empty knowledge base")
    X, y, w, real = st.X, st.y, st.w, st.real
    norm = st.normalized.copy()
    d_norm = d.normalized
    for i in range(len(d)):
        dist = np.linalg.norm(norm - d_norm[i], axis=1)
        j = int(np.argmin(dist))
        keep = np.arange(len(y)) != j
        X = np.concatenate([X[keep], d.X[i : i + 1]])
        y = np.concatenate([y[keep], d.y[i : i + 1]])
        w = np.concatenate([w[keep], d.w[i : i + 1]])
        real = np.concatenate([real[keep], d.real[i : i + 1]])
        norm = np.concatenate([norm[keep], d_norm[i : i + 1]])
    return Dataset(st.space, X, y, w, real, meta=st.meta, validate=False)


def rnr(st: Dataset, d: Dataset, c: float) -> Dataset:
    """Replace-nearest-region: evict every synthetic sample within cut-off c
    of some incoming sample, then append the whole batch once.

    Real samples already in the knowledge base are never evicted.
    """
    _check_spaces(st, d)
    if not 0.0 <= c <= 1.0:
        raise GrayboxError(f"cutoff must be in [0,1], got {c}")
    if len(d) == 0:
        return st
    if len(st) == 0:
        return _concat(st, d)
    dist = _cross_distances(st.normalized, d.normalized) / st.space.max_distance
    evict = (~st.real) & (dist.min(axis=1) <= c)
    return _concat(st.subset(~evict), d)


def rnr2(st: Dataset, d: Dataset, c: float) -> Dataset:
    """Rewrite-nearest-region: each synthetic sample whose nearest incoming
    sample lies within cut-off c takes over that sample's target and weight
    (config kept, provenance becomes real); incoming samples matched nowhere
    are appended. Density of the knowledge base is preserved.
    """
    _check_spaces(st, d)
    if not 0.0 <= c <= 1.0:
        raise GrayboxError(f"cutoff must be in [0,1], got {c}")
    if len(d) == 0:
        return st
    syn = np.flatnonzero(~st.real)
    if len(syn) == 0:
        return _concat(st, d)
    dist = (
        _cross_distances(st.normalized[syn], d.normalized) / st.space.max_distance
    )
    nn = np.argmin(dist, axis=1)  # first minimum: earliest batch sample wins ties
    hit = dist[np.arange(len(syn)), nn] <= c
    rows, src = syn[hit], nn[hit]
    y, w, real = st.y.copy(), st.w.copy(), st.real.copy()
    y[rows] = d.y[src]
    w[rows] = d.w[src]
    real[rows] = True
    matched = np.zeros(len(d), dtype=bool)
    matched[src] = True
    rewritten = st.replace(y=y, w=w, real=real)
    return _concat(rewritten, d.subset(~matched))


def apply_update(st: Dataset, d: Dataset, cfg: UpdateConfig) -> Dataset:
    """Weight the incoming batch, then apply the configured policy."""
    d = set_weight(d, cfg.weight)
    if cfg.policy == "merge":
        return merge(st, d)
    if cfg.policy == "rnn":
        return rnn(st, d)
    if cfg.policy == "rnr":
        return rnr(st, d, cfg.cutoff)
    return rnr2(st, d, cfg.cutoff)
