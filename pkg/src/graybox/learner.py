"""Weighted regression learners behind a uniform train/query contract.

``TreeRegressor`` grows a binary regression tree by exhaustive weighted
variance-reduction split search, with optional weighted-least-squares
linear models in the leaves (piecewise-linear behavior). ``KnnRegressor``
is a deliberately simple weighted nearest-neighbor predictor used as a
cross-check.

Training canonicalizes the sample order (lexicographic) and aggregates
exact duplicate (config, target) rows by summing their weights. This makes
training invariant under dataset permutation and makes an integer-weight
sample bit-identical to the same sample repeated that many times.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset, FeatureSpace, GrayboxError, normalize

# Node variance below this fraction of the weighted second moment is
# treated as numerically pure (no further splits).
_PURITY_EPS = 1e-12


class EmptyTrainingSet(GrayboxError):
    """Training or querying requires at least one sample."""


class _Node:
    __slots__ = ("dim", "threshold", "left", "right", "mean", "intercept", "coef")

    def __init__(self):
        self.dim = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.mean = 0.0
        self.intercept = 0.0
        self.coef = None  # ndarray (d,) for linear leaves, None for constant

    @property
    def is_leaf(self):
        return self.dim < 0


def _canonicalize(X, y, w):
    """Sort rows lexicographically and merge exact (config, target) duplicates."""
    keys = (y,) + tuple(X[:, j] for j in reversed(range(X.shape[1])))
    order = np.lexsort(keys)
    X, y, w = X[order], y[order], w[order]
    if len(y) > 1:
        same = np.all(X[1:] == X[:-1], axis=1) & (y[1:] == y[:-1])
        if same.any():
            starts = np.flatnonzero(np.r_[True, ~same])
            w = np.add.reduceat(w, starts)
            X, y = X[starts], y[starts]
    return X, y, w


def _best_split(X, y, w, min_leaf_weight):
    """Exhaustive scan over (dimension, midpoint-threshold) candidates.

    Returns (dim, threshold) maximizing weighted SSE reduction, or None.
    Ties break to the lowest dimension index, then the lowest threshold.
    """
    m, d = X.shape
    if m < 2:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    ws = w[order]
    wys = ws * ys
    cw = np.cumsum(ws, axis=0)
    cwy = np.cumsum(wys, axis=0)
    cwyy = np.cumsum(wys * ys, axis=0)
    tw, twy, twyy = cw[-1], cwy[-1], cwyy[-1]
    parent_sse = twyy - twy * twy / tw
    if parent_sse.max() <= _PURITY_EPS * max(float(np.abs(twyy).max()), 1e-300):
        return None
    lw, lwy, lwyy = cw[:-1], cwy[:-1], cwyy[:-1]
    rw, rwy, rwyy = tw - lw, twy - lwy, twyy - lwyy
    sse = (lwyy - lwy * lwy / lw) + (rwyy - rwy * rwy / rw)
    gains = parent_sse - sse
    valid = (
        (np.diff(xs, axis=0) > 0)
        & (lw >= min_leaf_weight)
        & (rw >= min_leaf_weight)
    )
    gains[~valid] = -np.inf
    flat = gains.ravel(order="F")  # dimension-major: ties pick lowest dim first
    k = int(np.argmax(flat))
    if not flat[k] > 0.0:
        return None
    dim, pos = divmod(k, m - 1)
    a, b = xs[pos, dim], xs[pos + 1, dim]
    threshold = (a + b) / 2.0
    if threshold >= b:  # midpoint rounded up to the right value
        threshold = a
    return dim, float(threshold)


def _fit_leaf(node, X, y, w, leaf_kind):
    node.mean = float(np.dot(w, y) / w.sum())
    if leaf_kind != "linear" or len(y) < 2:
        return
    # Drop columns constant within the leaf; they are not identifiable.
    varying = np.flatnonzero(X.max(axis=0) > X.min(axis=0))
    A = np.hstack([np.ones((len(y), 1)), X[:, varying]])
    sw = np.sqrt(w)
    beta, _, rank, _ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    if rank < A.shape[1]:
        return  # rank-deficient design: keep the weighted mean
    node.intercept = float(beta[0])
    coef = np.zeros(X.shape[1])
    coef[varying] = beta[1:]
    node.coef = coef


class TreeModel:
    """A trained regression tree; immutable and safe for concurrent queries."""

    def __init__(self, space: FeatureSpace, root: _Node, y_lo: float, y_hi: float):
        self.space = space
        self.root = root
        self.y_lo = y_lo
        self.y_hi = y_hi

    def query(self, config) -> float:
        c = self.space.validate_config(config)
        return float(self.predict(c.reshape(1, -1))[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Vectorized prediction; clamps to the training target range."""
        X = np.asarray(X, dtype=float)
        out = np.empty(len(X))
        self._predict_into(self.root, X, np.arange(len(X)), out)
        return np.clip(out, self.y_lo, self.y_hi)

    def _predict_into(self, node, X, idx, out):
        if node.is_leaf:
            if node.coef is None:
                out[idx] = node.mean
            else:
                out[idx] = node.intercept + X[idx] @ node.coef
            return
        left = X[idx, node.dim] <= node.threshold
        if left.any():
            self._predict_into(node.left, X, idx[left], out)
        if not left.all():
            self._predict_into(node.right, X, idx[~left], out)

    def dump(self) -> str:
        """Human-readable tree, one node per line, indentation = depth."""
        lines = []

        def walk(node, depth):
            pad = "  " * depth
            if node.is_leaf:
                if node.coef is None:
                    lines.append(f"{pad}leaf mean={node.mean!r}")
                else:
                    terms = " ".join(
                        f"{c:+.6g}*{name}"
                        for c, name in zip(node.coef, self.space.names)
                        if c != 0.0
                    )
                    lines.append(f"{pad}leaf {node.intercept:.6g} {terms}")
            else:
                name = self.space.names[node.dim]
                lines.append(f"{pad}[{name} <= {node.threshold!r}]")
                walk(node.left, depth + 1)
                walk(node.right, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)

    def n_leaves(self) -> int:
        def count(node):
            return 1 if node.is_leaf else count(node.left) + count(node.right)

        return count(self.root)

    def to_dict(self) -> dict:
        def enc(node):
            if node.is_leaf:
                d = {"mean": node.mean}
                if node.coef is not None:
                    d["intercept"] = node.intercept
                    d["coef"] = [float(c) for c in node.coef]
                return d
            return {
                "dim": node.dim,
                "threshold": node.threshold,
                "left": enc(node.left),
                "right": enc(node.right),
            }

        return {"clamp": [self.y_lo, self.y_hi], "root": enc(self.root)}

    @classmethod
    def from_dict(cls, space: FeatureSpace, data: dict) -> "TreeModel":
        def dec(d):
            node = _Node()
            if "dim" in d:
                node.dim = int(d["dim"])
                node.threshold = float(d["threshold"])
                node.left = dec(d["left"])
                node.right = dec(d["right"])
            else:
                node.mean = float(d["mean"])
                if "coef" in d:
                    node.intercept = float(d["intercept"])
                    node.coef = np.asarray(d["coef"], dtype=float)
            return node

        lo, hi = data["clamp"]
        return cls(space, dec(data["root"]), float(lo), float(hi))


class TreeRegressor:
    """Deterministic weighted regression tree with constant or linear leaves."""

    def __init__(self, max_depth: int = 12, min_leaf_weight: float = 4.0,
                 leaf_kind: str = "linear"):
        if leaf_kind not in ("constant", "linear"):
            raise GrayboxError(f"leaf_kind must be constant|linear, got {leaf_kind!r}")
        if max_depth < 0 or min_leaf_weight <= 0:
            raise GrayboxError("max_depth must be >= 0 and min_leaf_weight > 0")
        self.max_depth = max_depth
        self.min_leaf_weight = float(min_leaf_weight)
        self.leaf_kind = leaf_kind

    def train(self, d: Dataset) -> TreeModel:
        if len(d) == 0:
            raise EmptyTrainingSet("cannot train on an empty dataset")
        X, y, w = _canonicalize(d.X, d.y, d.w)
        root = self._build(X, y, w, depth=0)
        return TreeModel(d.space, root, float(d.y.min()), float(d.y.max()))

    def _build(self, X, y, w, depth):
        node = _Node()
        split = None
        if depth < self.max_depth:
            split = _best_split(X, y, w, self.min_leaf_weight)
        if split is None:
            _fit_leaf(node, X, y, w, self.leaf_kind)
            return node
        node.dim, node.threshold = split
        left = X[:, node.dim] <= node.threshold
        node.left = self._build(X[left], y[left], w[left], depth + 1)
        node.right = self._build(X[~left], y[~left], w[~left], depth + 1)
        return node


def knn_query(d: Dataset, config, k: int) -> float:
    """Weight-weighted mean target of the k nearest samples.

    Distance is the normalized metric of :mod:`graybox.core`; ties break by
    dataset order. k larger than the dataset uses every sample.
    """
    if len(d) == 0:
        raise EmptyTrainingSet("knn query needs a non-empty dataset")
    if k < 1:
        raise GrayboxError(f"k must be >= 1, got {k}")
    nc = normalize(config, d.space)
    dist = np.linalg.norm(d.normalized - nc, axis=1)
    order = np.argsort(dist, kind="stable")[: min(k, len(d))]
    ww = d.w[order]
    return float(np.dot(ww, d.y[order]) / ww.sum())


class KnnModel:
    def __init__(self, d: Dataset, k: int):
        self.dataset = d
        self.k = k

    def query(self, config) -> float:
        return knn_query(self.dataset, config, self.k)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.query(c) for c in np.asarray(X, dtype=float)])


class KnnRegressor:
    """Nearest-neighbor regressor used as a simple cross-check learner."""

    def __init__(self, k: int = 3):
        if k < 1:
            raise GrayboxError(f"k must be >= 1, got {k}")
        self.k = k

    def train(self, d: Dataset) -> KnnModel:
        if len(d) == 0:
            raise EmptyTrainingSet("cannot train on an empty dataset")
        return KnnModel(d, self.k)
