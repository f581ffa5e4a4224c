"""Shaped fixed-point tensors held as additive shares.

A SharedTensor records the logical shape, the fixed-point exponent
(frac_bits: 0 for integers and comparison masks, t for encoded reals) and
the share planes.  The plane layout is engine-specific: the single-process
engine stacks all parties along a leading axis, a party-side engine holds
only its own plane.  All operations on these tensors live on the engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeMismatchError(ValueError):
    """Operands with incompatible logical shapes or scales."""


@dataclass
class SharedTensor:
    planes: np.ndarray
    shape: tuple
    frac_bits: int

    def __post_init__(self) -> None:
        self.shape = tuple(self.shape)
        if self.planes.dtype != np.uint64:
            raise TypeError("share planes must be uint64")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def with_planes(self, planes: np.ndarray, shape=None, frac_bits=None) -> "SharedTensor":
        return SharedTensor(
            planes=planes,
            shape=self.shape if shape is None else tuple(shape),
            frac_bits=self.frac_bits if frac_bits is None else frac_bits,
        )
