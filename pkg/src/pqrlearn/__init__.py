"""Sparse online quadratic regression with frequency-shared interactions.

The model keeps a full interaction weight for every pair of high-frequency
features, one shared interaction weight per high-frequency feature against
everything low-frequency, and nothing else, which keeps it convex and keeps
the parameter count at ``d + k(k+1)/2 + 1``. Training is per-coordinate
FTRL-Proximal over a deterministic sparse expansion of each incoming vector.
"""

from .exceptions import (
    ConvergenceError,
    NumericError,
    ParseError,
    PqrError,
    UndefinedMetricError,
)
from .expansion import PqrIndexMap, build_index_map, expand
from .estimators import PQRClassifier, PQRExpander, PQRRegressor
from .ftrl import (
    CLASSIFICATION,
    REGRESSION,
    FtrlParams,
    FtrlState,
    evaluate_stream,
    ftrl_weight,
    load_model,
    logistic_loss,
    loss,
    save_model,
    sigmoid,
    squared_loss,
    train_stream,
)
from .io import (
    DatasetSplit,
    LabeledInstance,
    format_line,
    parse_line,
    split,
    stream,
    write_instances,
)
from .metrics import (
    EvalReport,
    RegretSeries,
    auc,
    batch_oracle,
    expand_dataset,
    logloss,
    regret_series,
    rmse,
    write_regret_csv,
    write_report_csv,
)
from .oracle import PqrMatrix, assemble_matrix, decompose_projection, predict_quadratic_form
from .separation import (
    FeatureCounts,
    FeatureSeparation,
    count_features,
    load_separation,
    save_counts,
    save_separation,
    select_top_k,
)

__version__ = "0.1.0"

__all__ = [
    "CLASSIFICATION",
    "REGRESSION",
    "ConvergenceError",
    "DatasetSplit",
    "EvalReport",
    "FeatureCounts",
    "FeatureSeparation",
    "FtrlParams",
    "FtrlState",
    "LabeledInstance",
    "NumericError",
    "PQRClassifier",
    "PQRExpander",
    "PQRRegressor",
    "ParseError",
    "PqrError",
    "PqrIndexMap",
    "PqrMatrix",
    "RegretSeries",
    "UndefinedMetricError",
    "assemble_matrix",
    "auc",
    "batch_oracle",
    "build_index_map",
    "count_features",
    "decompose_projection",
    "evaluate_stream",
    "expand",
    "expand_dataset",
    "format_line",
    "ftrl_weight",
    "load_model",
    "load_separation",
    "logistic_loss",
    "logloss",
    "loss",
    "parse_line",
    "predict_quadratic_form",
    "regret_series",
    "rmse",
    "save_counts",
    "save_model",
    "save_separation",
    "select_top_k",
    "sigmoid",
    "split",
    "squared_loss",
    "stream",
    "train_stream",
    "write_instances",
    "write_regret_csv",
    "write_report_csv",
]
