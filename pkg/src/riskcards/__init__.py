"""Sparse integer risk scorecards learned from tabular data.

The pipeline has three stages: a beam search fits a small-support real-valued
logistic model under box, sparsity, group, and sign constraints; support swaps
grow that into a pool of near-optimal alternatives; a multiplier grid with
sequential rounding turns each pool member into an integer scorecard. The
resulting cards serialize to JSON, render as text tables, and score new
records with a plain sum of points.
"""

__version__ = "0.1.0"

from .binarize import (
    BinarizationMap,
    BinarizedDataset,
    RawDataset,
    SplitSpec,
    apply_binarizer,
    apply_record,
    fit_binarizer,
    load_csv,
    transform_matrix,
)
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    ConstraintViolationError,
    DataValidationError,
    ParseError,
    RiskcardsError,
    SchemaMismatchError,
    UndefinedMetricError,
)
from .metrics import (
    EvaluationReport,
    IsotonicMap,
    apply_isotonic,
    auprc,
    auroc,
    brier,
    evaluate,
    fit_isotonic,
    hl_chi2,
    smr,
)
from .model import (
    Scorecard,
    SparsityReport,
    deserialize,
    load_card,
    predict_matrix,
    predict_risk,
    render_scorecard,
    save_card,
    score_total,
    serialize,
    sparsity_report,
    used_variables,
    variable_bins,
)
from .pool import SolutionPool, generate_pool
from .rounding import IntegerRiskScore, multiplier_grid, round_pool, sequential_round
from .solver import (
    ConstraintSet,
    ContinuousSolution,
    check_feasibility,
    coordinate_descent,
    fit_continuous,
    logistic_loss,
    loss_gradient,
)
from .synth import sample_dataset, sample_raw

__all__ = [
    "__version__",
    "BinarizationMap",
    "BinarizedDataset",
    "RawDataset",
    "SplitSpec",
    "apply_binarizer",
    "apply_record",
    "fit_binarizer",
    "load_csv",
    "transform_matrix",
    "RunConfig",
    "load_config",
    "ConfigError",
    "ConstraintViolationError",
    "DataValidationError",
    "ParseError",
    "RiskcardsError",
    "SchemaMismatchError",
    "UndefinedMetricError",
    "EvaluationReport",
    "IsotonicMap",
    "apply_isotonic",
    "auprc",
    "auroc",
    "brier",
    "evaluate",
    "fit_isotonic",
    "hl_chi2",
    "smr",
    "Scorecard",
    "SparsityReport",
    "deserialize",
    "load_card",
    "predict_matrix",
    "predict_risk",
    "render_scorecard",
    "save_card",
    "score_total",
    "serialize",
    "sparsity_report",
    "used_variables",
    "variable_bins",
    "SolutionPool",
    "generate_pool",
    "IntegerRiskScore",
    "multiplier_grid",
    "round_pool",
    "sequential_round",
    "ConstraintSet",
    "ContinuousSolution",
    "check_feasibility",
    "coordinate_descent",
    "fit_continuous",
    "logistic_loss",
    "loss_gradient",
    "sample_dataset",
    "sample_raw",
]
