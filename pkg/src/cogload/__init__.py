"""Multimodal cognitive-load classification toolkit.

Synthetic multimodal data generation, stream fusion, four feature-selection
methods, a hand-rolled CNN-RNN classifier, evaluation metrics, and a CLI
that chains them into a reproducible pipeline.
"""

from .errors import (
    CogloadError,
    ConfigError,
    DimensionError,
    DivergenceError,
    NumericError,
    ParseError,
    RangeError,
    StratificationError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "CogloadError",
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "NumericError",
    "ParseError",
    "RangeError",
    "StratificationError",
    "ValidationError",
    "__version__",
]
