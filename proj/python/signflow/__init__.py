"""signflow: reproducible sign-language image classification pipeline."""

from signflow._core import (
    ExperimentConfig,
    SignflowError,
    balance,
    classification_metrics,
    compound_scale,
    confusion_matrix,
    evaluate,
    evaluate_fold,
    explain,
    generate_synthetic,
    load_config,
    parse_config,
    percent_truncated,
    prepare,
    relu6,
    report,
    resize,
    run,
    split,
    train,
)

__all__ = [
    "ExperimentConfig",
    "SignflowError",
    "balance",
    "classification_metrics",
    "compound_scale",
    "confusion_matrix",
    "evaluate",
    "evaluate_fold",
    "explain",
    "generate_synthetic",
    "load_config",
    "parse_config",
    "percent_truncated",
    "prepare",
    "relu6",
    "report",
    "resize",
    "run",
    "split",
    "train",
]
