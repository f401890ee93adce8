"""Accuracy metrics, cross-validation, splitting, and error heat maps.

The error metric throughout is mean(|real - pred| / pred): the denominator
is the prediction, not the measurement. That convention is asymmetric
(over-predictions score milder than under-predictions of the same size),
so treat comparisons against |real - pred| / real numbers with care.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, FeatureSpace, GrayboxError


class LengthMismatch(GrayboxError):
    """Prediction and reference vectors must have equal nonzero length."""


class TooFewSamples(GrayboxError):
    """k-fold CV needs at least k samples."""


def mape(pred, real) -> float:
    """Mean of |real - pred| / pred. Raises ZeroDivisionError on any pred == 0."""
    pred = np.asarray(pred, dtype=float)
    real = np.asarray(real, dtype=float)
    if pred.shape != real.shape or pred.ndim != 1 or len(pred) == 0:
        raise LengthMismatch(
            f"need equal nonzero lengths, got {pred.shape} and {real.shape}"
        )
    if (pred == 0.0).any():
        raise ZeroDivisionError("a prediction is exactly 0")
    return float(np.mean(np.abs(real - pred) / pred))


def kfold_cv(learner, d: Dataset, k: int, seed: int) -> float:
    """Mean held-out error over a seeded k-way partition (bin sizes differ
    by at most one)."""
    if k < 2:
        raise GrayboxError(f"k must be >= 2, got {k}")
    if len(d) < k:
        raise TooFewSamples(f"{len(d)} samples cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(len(d))
    folds = np.array_split(perm, k)
    errors = []
    for i, fold in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        model = learner.train(d.subset(train_idx))
        pred = model.predict(d.X[fold])
        errors.append(mape(pred, d.y[fold]))
    return float(np.mean(errors))


def split_real(d: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle with the seed; first floor(fraction*n) samples train, rest test."""
    if not 0.0 < fraction < 1.0:
        raise GrayboxError(f"fraction must be in (0,1), got {fraction}")
    perm = np.random.default_rng(seed).permutation(len(d))
    n_train = int(np.floor(fraction * len(d)))
    return d.subset(perm[:n_train]), d.subset(perm[n_train:])


@dataclass
class HeatMap:
    """Mean absolute-percentage-error grid over two dimensions.

    ``mean`` holds NaN for cells no test sample fell into; centers are in
    the dimensions' original units.
    """

    dim_x: str
    dim_y: str
    x_centers: np.ndarray
    y_centers: np.ndarray
    mean: np.ndarray  # (bins_x, bins_y)
    count: np.ndarray


def heatmap(model, test: Dataset, dim_x, dim_y, bins_x: int = 20,
            bins_y: int = 20) -> HeatMap:
    """Project per-sample APE onto a 2-D grid of the normalized config."""
    if bins_x < 1 or bins_y < 1:
        raise GrayboxError("bins must be >= 1")
    space = test.space
    jx = space.index_of(dim_x) if isinstance(dim_x, str) else int(dim_x)
    jy = space.index_of(dim_y) if isinstance(dim_y, str) else int(dim_y)
    pred = model.predict(test.X)
    ape = np.abs(test.y - pred) / pred
    norm = test.normalized
    ix = np.minimum((norm[:, jx] * bins_x).astype(int), bins_x - 1)
    iy = np.minimum((norm[:, jy] * bins_y).astype(int), bins_y - 1)
    total = np.zeros((bins_x, bins_y))
    count = np.zeros((bins_x, bins_y), dtype=int)
    np.add.at(total, (ix, iy), ape)
    np.add.at(count, (ix, iy), 1)
    with np.errstate(invalid="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    dx, dy = space.dims[jx], space.dims[jy]
    x_centers = dx.lo + (np.arange(bins_x) + 0.5) / bins_x * (dx.hi - dx.lo)
    y_centers = dy.lo + (np.arange(bins_y) + 0.5) / bins_y * (dy.hi - dy.lo)
    return HeatMap(
        space.names[jx], space.names[jy], x_centers, y_centers, mean, count
    )


def write_heatmap(hm: HeatMap, path) -> None:
    """Occupied cells as `x_center y_center mean_ape` triples, one per line,
    with a blank line between x-groups (plot-tool friendly)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for i, xc in enumerate(hm.x_centers):
            wrote = False
            for j, yc in enumerate(hm.y_centers):
                if hm.count[i, j] > 0:
                    fh.write(f"{xc!r} {yc!r} {hm.mean[i, j]!r}\n")
                    wrote = True
            if wrote and i < len(hm.x_centers) - 1:
                fh.write("\n")
