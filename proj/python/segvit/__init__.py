"""Python access to the SegViT C++ core."""

from ._segvit import (
    Config,
    ConfigError,
    DataError,
    DimensionError,
    Error,
    IoError,
    Model,
    NumericError,
    Trainer,
    flops,
    flops_ratio,
    generate_dataset,
    gradcheck,
    make_sample,
    miou,
)

__all__ = [
    "Config",
    "ConfigError",
    "DataError",
    "DimensionError",
    "Error",
    "IoError",
    "Model",
    "NumericError",
    "Trainer",
    "flops",
    "flops_ratio",
    "generate_dataset",
    "gradcheck",
    "make_sample",
    "miou",
]
