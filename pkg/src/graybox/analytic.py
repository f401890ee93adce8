"""White-box analytical models.

Two case studies are built in:

* a sequencer latency model — the sequencer is a single exponential server
  whose jobs are batches of ``b`` messages, so self-delivery latency is the
  batch-fill wait plus the queue response time;
* a synthetic 7-dimensional key-value-store throughput surface with
  saturation in node count and degradation in write fraction.

Both expose ``query`` / ``query_many`` plus named calibration parameters
that can be perturbed multiplicatively to emulate mis-calibrated models.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Dimension, FeatureSpace, GrayboxError


class Saturated(GrayboxError):
    """Offered load at or beyond capacity; the queueing model is undefined there."""


class InvalidFactor(GrayboxError):
    """Perturbation factors must be positive and name real parameters."""


# --------------------------------------------------------------------------
# Sequencer (total-order broadcast) latency model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TobParams:
    """CPU demand constants of the sequencer.

    ``c0`` is the fixed cost to sequence one batch, ``c1`` the incremental
    cost per message in the batch, both in seconds. Defaults keep the model
    stable for batching levels 1-24 and arrival rates up to 13K msgs/sec at
    the top batching level.
    """

    c0: float = 1e-4
    c1: float = 5e-5

    def __post_init__(self):
        if not self.c0 > 0:
            raise GrayboxError(f"c0 must be > 0, got {self.c0}")
        if self.c1 < 0:
            raise GrayboxError(f"c1 must be >= 0, got {self.c1}")


def tob_space() -> FeatureSpace:
    """Arrival rate (msgs/sec) x batching level (messages per round)."""
    return FeatureSpace(
        (
            Dimension.continuous("arrival_rate", 1.0, 13000.0),
            Dimension.discrete("batching", tuple(float(b) for b in range(1, 25))),
        )
    )


def tob_query(config: Sequence[float], params: TobParams) -> float:
    """Mean message self-delivery latency, in seconds.

    A batch of ``b`` messages is one job: service time S(b) = c0 + c1*b,
    batch arrival rate lam/b, utilization rho = (lam/b)*S(b). Latency is
    the mean batch-fill wait (b-1)/(2*lam) plus the single-server
    exponential-queue response time S(b)/(1-rho). Raises
    :class:`Saturated` when rho >= 1.
    """
    lam, b = float(config[0]), float(config[1])
    service = params.c0 + params.c1 * b
    rho = (lam / b) * service
    if rho >= 1.0:
        raise Saturated(f"rho={rho:.4g} >= 1 at arrival_rate={lam}, batching={b}")
    wait = (b - 1.0) / (2.0 * lam)
    return wait + service / (1.0 - rho)


class TobModel:
    """Analytical latency predictor over the sequencer feature space."""

    case = "tob"

    def __init__(self, params: TobParams | None = None):
        self.params = params or TobParams()
        self.space = tob_space()

    def query(self, config: Sequence[float]) -> float:
        self.space.validate_config(config)
        return tob_query(config, self.params)

    def query_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized query; returns (values, ok). Saturated rows get ok=False."""
        X = np.asarray(X, dtype=float)
        lam, b = X[:, 0], X[:, 1]
        service = self.params.c0 + self.params.c1 * b
        rho = (lam / b) * service
        ok = rho < 1.0
        out = np.empty(len(X))
        out[~ok] = np.nan
        out[ok] = (b[ok] - 1.0) / (2.0 * lam[ok]) + service[ok] / (1.0 - rho[ok])
        return out, ok

    def perturbed(self, factors) -> "TobModel":
        return TobModel(perturb(self.params, factors))


# --------------------------------------------------------------------------
# Synthetic key-value-store throughput model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KvsParams:
    """Coefficients of the synthetic store throughput formula.

    ``clients_per_node``   closed-loop clients colocated with each node
    ``cpu_op_cost``        CPU seconds per elementary read/write operation
    ``repl_write_amp``     write amplification per replica contacted
    ``net_repl_cost``      network seconds per replication degree unit
    ``contention_cost``    seconds of conflict stall per (write*skew*node) unit
    """

    clients_per_node: float = 8.0
    cpu_op_cost: float = 1e-4
    repl_write_amp: float = 2.0
    net_repl_cost: float = 3e-4
    contention_cost: float = 2e-6

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise GrayboxError(f"{f.name} must be > 0, got {v}")


def kvs_space() -> FeatureSpace:
    """7-D store configuration/workload space.

    Replication degree is embedded numerically: real deployments use
    {1, 2, 3, N/2, N} but the axis itself is the continuous range [1, 140].
    """
    return FeatureSpace(
        (
            Dimension.continuous("nodes", 2.0, 140.0),
            Dimension.continuous("replication", 1.0, 140.0),
            Dimension.continuous("reads_per_op", 1.0, 5.0),
            Dimension.continuous("writes_per_op", 1.0, 5.0),
            Dimension.continuous("write_fraction", 0.0, 1.0),
            Dimension.continuous("think_time", 1e-4, 1e-2),
            Dimension.continuous("skew", 0.0, 1.0),
        )
    )


def kvs_query(config: Sequence[float], params: KvsParams) -> float:
    """Closed-loop throughput in ops/sec; smooth, positive, saturating in nodes."""
    X = np.asarray(config, dtype=float).reshape(1, 7)
    return float(_kvs_eval(X, params)[0])


def _kvs_eval(X: np.ndarray, p: KvsParams) -> np.ndarray:
    n, repl, reads, writes, wfrac, think, skew = (X[:, j] for j in range(7))
    cpu = p.cpu_op_cost * (reads + wfrac * writes * (1.0 + p.repl_write_amp * repl / n))
    net = p.net_repl_cost * repl
    conflict = p.contention_cost * wfrac * writes * skew * n
    return n * p.clients_per_node / (think + cpu + net + conflict)


class KvsModel:
    """Analytical throughput predictor over the store feature space."""

    case = "kvs"

    def __init__(self, params: KvsParams | None = None):
        self.params = params or KvsParams()
        self.space = kvs_space()

    def query(self, config: Sequence[float]) -> float:
        self.space.validate_config(config)
        return kvs_query(config, self.params)

    def query_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        return _kvs_eval(X, self.params), np.ones(len(X), dtype=bool)

    def perturbed(self, factors) -> "KvsModel":
        return KvsModel(perturb(self.params, factors))


# --------------------------------------------------------------------------
# Parameter perturbation and degradation calibration
# --------------------------------------------------------------------------

def perturb(params, factors):
    """Multiply named parameters by positive factors; returns new params.

    ``factors`` is either a single positive number (applied to every field)
    or a mapping {field name: factor}; omitted fields keep their value.
    """
    names = [f.name for f in dataclasses.fields(params)]
    if isinstance(factors, (int, float)):
        factors = {name: float(factors) for name in names}
    updates = {}
    for name, factor in factors.items():
        if name not in names:
            raise InvalidFactor(f"unknown parameter {name!r}, have {names}")
        if not factor > 0:
            raise InvalidFactor(f"factor for {name!r} must be > 0, got {factor}")
        updates[name] = getattr(params, name) * factor
    return dataclasses.replace(params, **updates)


def calibrate_degradation(model, truth_dataset, target_mape: float, search_grid):
    """Pick the grid factors whose perturbed model lands closest to a target error.

    Error is mean(|real - pred| / pred) of the perturbed model against the
    truth dataset's targets; rows where the perturbed model saturates are
    skipped (a grid point with no valid rows scores infinitely far). Ties go
    to the earliest grid entry. Returns (factors, achieved_mape).
    """
    if len(truth_dataset) == 0:
        raise GrayboxError("truth dataset must be non-empty")
    grid = list(search_grid)
    if not grid:
        raise GrayboxError("search grid must be non-empty")
    best = None
    for factors in grid:
        pm = model.perturbed(factors)
        pred, ok = pm.query_many(truth_dataset.X)
        if not ok.any():
            achieved = float("inf")
        else:
            achieved = float(
                np.mean(np.abs(truth_dataset.y[ok] - pred[ok]) / pred[ok])
            )
        gap = abs(achieved - target_mape)
        if best is None or gap < best[0]:
            best = (gap, factors, achieved)
    return best[1], best[2]
