from .tensor import SharedTensor, ShapeMismatchError
from .engine import (
    LocalEngine,
    TensorEngineBase,
    Transcript,
    OP_ROUNDS,
    MEAN_RECIP_BITS,
    RandomnessExhaustedError,
)

__all__ = [
    "SharedTensor",
    "ShapeMismatchError",
    "LocalEngine",
    "TensorEngineBase",
    "Transcript",
    "OP_ROUNDS",
    "MEAN_RECIP_BITS",
    "RandomnessExhaustedError",
]
