"""Metrics, cross-validation plans and experiment runners."""
from .metrics import accuracy, auc, f1, precision_recall, roc_auc, roc_curve
from .runner import (
    AblationReport,
    CVReport,
    ExperimentSettings,
    FoldResult,
    ablation_run,
    canonical_hash,
    pooled_roc,
    run_experiment,
    sensitivity_sweep,
)
from .splits import (
    SLICE_WISE,
    TRIAL_WISE,
    Fold,
    SplitPlan,
    leakage_violations,
    make_plan,
    normalize_mode,
    partition_errors,
    slicewise_folds,
    trialwise_folds,
)

__all__ = [
    "AblationReport", "CVReport", "ExperimentSettings", "Fold", "FoldResult", "SLICE_WISE", "SplitPlan",
    "TRIAL_WISE", "ablation_run", "accuracy", "auc", "canonical_hash", "f1", "leakage_violations",
    "make_plan", "normalize_mode", "partition_errors", "pooled_roc", "precision_recall", "roc_auc",
    "roc_curve", "run_experiment", "sensitivity_sweep", "slicewise_folds", "trialwise_folds",
]
