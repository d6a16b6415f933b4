"""Lossless codec and compressed-domain inference for quantized feedforward networks."""

from .errors import (
    ModelMismatchError,
    QnncError,
    StreamError,
    ValidationError,
    VerificationError,
)
from .model import (
    Codebook,
    ColorMatrix,
    EdgeModel,
    RowPermutation,
    canonical_sort_rows,
    empirical_model,
)

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "ColorMatrix",
    "EdgeModel",
    "ModelMismatchError",
    "QnncError",
    "RowPermutation",
    "StreamError",
    "ValidationError",
    "VerificationError",
    "canonical_sort_rows",
    "empirical_model",
    "__version__",
]
