"""Gray-box performance prediction toolkit.

Analytical queueing/throughput models seed a weighted regression tree with
synthetic training data; measured samples then correct it through pluggable
knowledge-base update policies (merge, rnn, rnr, rnr2).
"""

from .analytic import (
    InvalidFactor,
    KvsModel,
    KvsParams,
    Saturated,
    TobModel,
    TobParams,
    calibrate_degradation,
    kvs_query,
    kvs_space,
    perturb,
    tob_query,
    tob_space,
)
from .bootstrap import (
    SizingConfig,
    Snapshot,
    bootstrap_loop,
    generate_synthetic,
    sample_config_space,
    size_by_cv,
)
from .core import (
    Dataset,
    Dimension,
    FeatureSpace,
    GrayboxError,
    InvalidConfig,
    Sample,
    SpaceMismatch,
    distance,
    normalize,
    partition,
    read_csv,
    write_csv,
)
from .evaluation import heatmap, kfold_cv, mape, split_real
from .experiment import ExperimentSpec, HeatmapRequest, run_experiment
from .learner import EmptyTrainingSet, KnnRegressor, TreeModel, TreeRegressor, knn_query
from .oracle import KvsTruthModel, OracleSystem, build_dataset, measure
from .update import (
    EmptyKnowledgeBase,
    InvalidWeight,
    UpdateConfig,
    apply_update,
    merge,
    rnn,
    rnr,
    rnr2,
    set_weight,
)

__version__ = "0.1.0"
