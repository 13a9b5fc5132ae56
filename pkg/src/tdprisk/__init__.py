"""Three-class drug TdP-risk modeling from ventricular-wedge assay features.

Public surface: domain types and the math core (:mod:`tdprisk.model`),
maximum-likelihood fitting (:mod:`tdprisk.trainer`), resampling protocols
(:mod:`tdprisk.evaluation`), dataset schema / CSV / synthetic generation
(:mod:`tdprisk.data`), and the command line (:mod:`tdprisk.cli`).
"""

__version__ = "0.1.0"

from .model import (
    CLASS_ORDER,
    ClassProbabilities,
    CoefficientMatrix,
    Dataset,
    Observation,
    RiskClass,
    class_probabilities,
    classify,
    linear_scores,
    negative_log_likelihood,
    nll_gradient,
)
from .trainer import FittedModel, TrainConfig, fit, predict
from .evaluation import (
    GROUPING_BY_DRUG,
    GROUPING_BY_OBSERVATION,
    BootstrapDistribution,
    CVReport,
    ImportanceEntry,
    ImportanceTable,
    ReplicateMeta,
    SkippedReplicate,
    SplitSpec,
    accuracy,
    bootstrap_accuracy,
    k_fold_cv,
    normalize_importance,
    percentile_ci,
    permutation_importance,
    train_test_split,
)
from .data import (
    FEATURE_NAMES,
    SynthConfig,
    load_csv,
    parse_risk_label,
    select_features,
    synthesize_dataset,
    write_csv,
)
from .errors import (
    DataError,
    DimensionError,
    EvaluationError,
    NumericError,
    TdpRiskError,
    TrainingError,
)

__all__ = [
    "__version__",
    "CLASS_ORDER",
    "ClassProbabilities",
    "CoefficientMatrix",
    "Dataset",
    "Observation",
    "RiskClass",
    "class_probabilities",
    "classify",
    "linear_scores",
    "negative_log_likelihood",
    "nll_gradient",
    "FittedModel",
    "TrainConfig",
    "fit",
    "predict",
    "GROUPING_BY_DRUG",
    "GROUPING_BY_OBSERVATION",
    "BootstrapDistribution",
    "CVReport",
    "ImportanceEntry",
    "ImportanceTable",
    "ReplicateMeta",
    "SkippedReplicate",
    "SplitSpec",
    "accuracy",
    "bootstrap_accuracy",
    "k_fold_cv",
    "normalize_importance",
    "percentile_ci",
    "permutation_importance",
    "train_test_split",
    "FEATURE_NAMES",
    "SynthConfig",
    "load_csv",
    "parse_risk_label",
    "select_features",
    "synthesize_dataset",
    "write_csv",
    "DataError",
    "DimensionError",
    "EvaluationError",
    "NumericError",
    "TdpRiskError",
    "TrainingError",
]
