"""Deterministic experiment sweeps over the gray-box design space.

One row per (case, init size, policy, weight, cutoff, real fraction,
degradation target, seed): the gray-box model's error on the held-out
split, next to two baselines on the same split — the (degraded) analytical
model alone and the plain learner trained only on the real training split.

Every random draw is keyed by semantic seeds derived from the replication
seed and the combination coordinates, so results are byte-identical across
reruns and independent of worker count. Timing is the one non-reproducible
column and stays empty unless explicitly requested.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import KvsModel, TobModel, calibrate_degradation
from .bootstrap import derive_seed, generate_synthetic, sample_config_space
from .core import Dataset, GrayboxError
from .evaluation import HeatMap, heatmap, mape, split_real
from .learner import TreeRegressor
from .oracle import KvsTruthModel, OracleSystem, build_dataset, kvs_real_configs
from .update import POLICIES, UpdateConfig, apply_update

CASES = ("tob", "kvs")

RESULT_COLUMNS = (
    "case,init_size,policy,weight,cutoff,fraction,am_mape_target,seed,"
    "gray_mape,am_mape,ml_mape,n_synth_final,n_real_final,wall_seconds"
)

# Calibration grids: which knob emulates a mis-calibrated model, per case.
_TOB_FACTOR_GRID = [
    {"c0": round(f, 4), "c1": round(f, 4)} for f in np.arange(0.20, 1.0001, 0.0125)
]
_KVS_FACTOR_GRID = [
    {"clients_per_node": round(f, 4)} for f in np.arange(0.25, 1.2501, 0.0125)
]


@dataclass(frozen=True)
class HeatmapRequest:
    """A single error heat map: which predictor, at which operating point."""

    case: str
    predictor: str  # "am", "ml", or an update policy
    weight: float = 100.0
    cutoff: float = 0.01
    fraction: float = 0.7
    degradation: float = 0.35
    seed: int = 1
    init_size: int = 10000
    dims: tuple[str, str] | None = None
    bins: tuple[int, int] = (20, 20)

    def __post_init__(self):
        if self.case not in CASES:
            raise GrayboxError(f"unknown case {self.case!r}")
        if self.predictor not in ("am", "ml") + POLICIES:
            raise GrayboxError(f"unknown heat-map predictor {self.predictor!r}")


_DEFAULT_HEATMAP_DIMS = {
    "tob": ("arrival_rate", "batching"),
    "kvs": ("nodes", "write_fraction"),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """Full sweep grid; defaults reproduce the standard evaluation layout."""

    cases: tuple = CASES
    init_sizes: tuple = (1000, 10000)
    policies: tuple = POLICIES
    weights: tuple = (1.0, 3.0, 10.0, 30.0, 100.0, 300.0)
    cutoffs: tuple = (0.01, 0.3)
    fractions: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    degradation_targets: tuple = (0.35, 0.7)
    seeds: tuple = (1, 2, 3)
    oracle_n: dict = field(default_factory=lambda: {"tob": 500, "kvs": 900})
    noise_cv: dict = field(default_factory=lambda: {"tob": 0.05, "kvs": 0.05})
    learner: dict = field(
        default_factory=lambda: {
            "max_depth": 12,
            "min_leaf_weight": 4.0,
            "leaf_kind": "linear",
        }
    )
    heatmaps: tuple = ()

    def __post_init__(self):
        for case in self.cases:
            if case not in CASES:
                raise GrayboxError(f"unknown case {case!r}")
        for p in self.policies:
            if p not in POLICIES:
                raise GrayboxError(f"unknown policy {p!r}")
        for f in self.fractions:
            if not 0.0 < f < 1.0:
                raise GrayboxError(f"fraction {f} not in (0,1)")
        for c in self.cutoffs:
            if not 0.0 <= c <= 1.0:
                raise GrayboxError(f"cutoff {c} not in [0,1]")
        for w in self.weights:
            if not w > 0:
                raise GrayboxError(f"weight {w} not > 0")
        if len(self.seeds) < 1:
            raise GrayboxError("need at least one replication seed")


@dataclass(frozen=True)
class Combo:
    case: str
    target: float
    seed: int
    init_size: int
    fraction: float
    policy: str
    weight: float
    cutoff: float | None


def enumerate_combos(spec: ExperimentSpec) -> list[Combo]:
    out = []
    for case in spec.cases:
        for target in spec.degradation_targets:
            for seed in spec.seeds:
                for init in spec.init_sizes:
                    for frac in spec.fractions:
                        for policy in spec.policies:
                            for w in spec.weights:
                                cuts = (
                                    spec.cutoffs
                                    if policy in ("rnr", "rnr2")
                                    else (None,)
                                )
                                for c in cuts:
                                    out.append(
                                        Combo(case, target, seed, init, frac,
                                              policy, w, c)
                                    )
    return out


def _fkey(fraction: float) -> int:
    return int(round(fraction * 1_000_000))


def _tkey(target: float) -> int:
    return int(round(target * 1_000_000))


class Runner:
    """Executes combinations with memoized shared stages (oracle data,
    splits, calibrated models, synthetic sets, baselines)."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self._cache = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def _learner(self) -> TreeRegressor:
        return TreeRegressor(**self.spec.learner)

    def truth_system(self, case: str, seed: int) -> OracleSystem:
        truth = TobModel() if case == "tob" else KvsTruthModel()
        noise_seed = derive_seed(seed, CASES.index(case), 13)
        return OracleSystem(truth, self.spec.noise_cv[case], seed=noise_seed)

    def oracle_dataset(self, case: str, seed: int) -> Dataset:
        def build():
            n = self.spec.oracle_n[case]
            cfg_seed = derive_seed(seed, CASES.index(case), 11)
            if case == "tob":
                configs = sample_config_space(TobModel().space, n, cfg_seed)
            else:
                configs = kvs_real_configs(n, cfg_seed)
            ds, _ = build_dataset(self.truth_system(case, seed), configs, seed=seed)
            return ds

        return self._memo(("oracle", case, seed), build)

    def degraded_am(self, case: str, target: float, seed: int):
        def build():
            base = TobModel() if case == "tob" else KvsModel()
            grid = _TOB_FACTOR_GRID if case == "tob" else _KVS_FACTOR_GRID
            truth = self.oracle_dataset(case, seed)
            factors, achieved = calibrate_degradation(base, truth, target, grid)
            return base.perturbed(factors), achieved

        return self._memo(("am", case, _tkey(target), seed), build)

    def split(self, case: str, seed: int, fraction: float):
        def build():
            ds = self.oracle_dataset(case, seed)
            s = derive_seed(seed, CASES.index(case), 17, _fkey(fraction))
            return split_real(ds, fraction, s)

        return self._memo(("split", case, seed, _fkey(fraction)), build)

    def init_st(self, case: str, target: float, seed: int, init_size: int) -> Dataset:
        def build():
            am, _ = self.degraded_am(case, target, seed)
            s = derive_seed(seed, CASES.index(case), 19, init_size)
            configs = sample_config_space(am.space, init_size, s)
            st, _ = generate_synthetic(am, configs)
            return st

        return self._memo(("st", case, _tkey(target), seed, init_size), build)

    def am_baseline(self, case: str, target: float, seed: int, fraction: float) -> float:
        def build():
            am, _ = self.degraded_am(case, target, seed)
            _, test = self.split(case, seed, fraction)
            pred, ok = am.query_many(test.X)
            if not ok.any():
                raise GrayboxError("analytical model undefined on entire test split")
            return mape(pred[ok], test.y[ok])

        return self._memo(("amb", case, _tkey(target), seed, _fkey(fraction)), build)

    def ml_baseline_model(self, case: str, seed: int, fraction: float):
        def build():
            train, _ = self.split(case, seed, fraction)
            return self._learner().train(train)

        return self._memo(("mlm", case, seed, _fkey(fraction)), build)

    def ml_baseline(self, case: str, seed: int, fraction: float) -> float:
        def build():
            model = self.ml_baseline_model(case, seed, fraction)
            _, test = self.split(case, seed, fraction)
            return mape(model.predict(test.X), test.y)

        return self._memo(("mlb", case, seed, _fkey(fraction)), build)

    def gray_model(self, combo: Combo):
        """Final knowledge base and model for one combination."""
        st0 = self.init_st(combo.case, combo.target, combo.seed, combo.init_size)
        train, _ = self.split(combo.case, combo.seed, combo.fraction)
        ucfg = UpdateConfig(combo.policy, combo.weight, combo.cutoff or 0.0)
        st = apply_update(st0, train, ucfg)
        return self._learner().train(st), st

    def run_combo(self, combo: Combo, measure_time: bool = False) -> dict:
        t0 = time.perf_counter()
        row = {
            "case": combo.case,
            "init_size": combo.init_size,
            "policy": combo.policy,
            "weight": combo.weight,
            "cutoff": combo.cutoff,
            "fraction": combo.fraction,
            "am_mape_target": combo.target,
            "seed": combo.seed,
            "gray_mape": "",
            "am_mape": "",
            "ml_mape": "",
            "n_synth_final": "",
            "n_real_final": "",
            "wall_seconds": "",
        }
        try:
            model, st = self.gray_model(combo)
            _, test = self.split(combo.case, combo.seed, combo.fraction)
            row["gray_mape"] = mape(model.predict(test.X), test.y)
            row["am_mape"] = self.am_baseline(
                combo.case, combo.target, combo.seed, combo.fraction
            )
            row["ml_mape"] = self.ml_baseline(combo.case, combo.seed, combo.fraction)
            row["n_synth_final"] = st.n_synthetic
            row["n_real_final"] = st.n_real
        except (GrayboxError, ZeroDivisionError) as exc:
            row["gray_mape"] = f"error:{type(exc).__name__}"
        if measure_time:
            row["wall_seconds"] = time.perf_counter() - t0
        return row


_WORKER_RUNNER: Runner | None = None


def _worker_init(spec: ExperimentSpec) -> None:
    global _WORKER_RUNNER
    _WORKER_RUNNER = Runner(spec)


def _worker_run(args) -> tuple[int, dict]:
    idx, combo, measure_time = args
    return idx, _WORKER_RUNNER.run_combo(combo, measure_time)


def run_experiment(spec: ExperimentSpec, jobs: int = 1,
                   measure_time: bool = False) -> list[dict]:
    """All combinations, in enumeration order, independent of worker count."""
    combos = enumerate_combos(spec)
    if jobs <= 1:
        runner = Runner(spec)
        return [runner.run_combo(c, measure_time) for c in combos]
    tasks = [(i, c, measure_time) for i, c in enumerate(combos)]
    results: list = [None] * len(tasks)
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_worker_init, initargs=(spec,)
    ) as pool:
        for idx, row in pool.map(_worker_run, tasks, chunksize=8):
            results[idx] = row
    return results


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(rows: list[dict], path) -> None:
    """Results CSV with full-precision, locale-independent number formatting."""
    cols = RESULT_COLUMNS.split(",")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(RESULT_COLUMNS + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def run_heatmaps(spec: ExperimentSpec) -> list[tuple[str, HeatMap]]:
    """Materialize every requested heat map; names are unique and stable."""
    runner = Runner(spec)
    out = []
    for i, req in enumerate(spec.heatmaps):
        train, test = runner.split(req.case, req.seed, req.fraction)
        dims = req.dims or _DEFAULT_HEATMAP_DIMS[req.case]
        if req.predictor == "am":
            am, _ = runner.degraded_am(req.case, req.degradation, req.seed)
            pred, ok = am.query_many(test.X)
            test = test.subset(ok)  # APE undefined where the model saturates

            class _AmAdapter:
                def predict(self, X, _am=am):
                    return _am.query_many(X)[0]

            model = _AmAdapter()
        elif req.predictor == "ml":
            model = runner.ml_baseline_model(req.case, req.seed, req.fraction)
        else:
            combo = Combo(
                req.case, req.degradation, req.seed, req.init_size,
                req.fraction, req.predictor, req.weight,
                req.cutoff if req.predictor in ("rnr", "rnr2") else None,
            )
            model, _ = runner.gray_model(combo)
        hm = heatmap(model, test, dims[0], dims[1], req.bins[0], req.bins[1])
        out.append((f"{i:02d}_{req.case}_{req.predictor}", hm))
    return out
