"""Masked-autoencoder pretraining for multi-sensor pixel timeseries."""

from ._presto import (
    Checkpoint,
    Dataset,
    IoError,
    ModelConfig,
    aggregate_image,
    count_flops,
    count_params,
    embed,
    finetune,
    pretrain,
    read_checkpoint,
    read_pts,
    synthesize,
    validate_probe,
    write_checkpoint,
    write_pts,
)

__all__ = [
    "Checkpoint",
    "Dataset",
    "IoError",
    "ModelConfig",
    "aggregate_image",
    "count_flops",
    "count_params",
    "embed",
    "finetune",
    "pretrain",
    "read_checkpoint",
    "read_pts",
    "synthesize",
    "validate_probe",
    "write_checkpoint",
    "write_pts",
]
