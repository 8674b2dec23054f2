"""Masked-autoencoder vision transformer for pediatric kidney ultrasound."""

from ._core import (
    ConfigError,
    ContractError,
    DegenerateError,
    IoError,
    Model,
    ParseError,
    ShapeError,
    StateError,
    UsmaeError,
    cli,
    deannotate,
    evaluate_predictions,
    fold_plan,
    masked_count,
    render_phantom,
    resize_normalize,
    roc_auc,
    sample_mask,
    synth_dataset,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DegenerateError",
    "IoError",
    "Model",
    "ParseError",
    "ShapeError",
    "StateError",
    "UsmaeError",
    "cli",
    "deannotate",
    "evaluate_predictions",
    "fold_plan",
    "masked_count",
    "render_phantom",
    "resize_normalize",
    "roc_auc",
    "sample_mask",
    "synth_dataset",
]
