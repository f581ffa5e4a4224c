"""Fixed-point encoding of reals into the 64-bit modular ring Z_{2^64}.

A real x is represented as round(x * 2^t) reduced mod 2^64, with negative
values stored as their two's complement.  All shared computation in this
package runs on these ring residues; decoding divides the signed
interpretation by 2^t.

The ring wraps silently during arithmetic (documented); encoding a value
outside the representable range is a hard error.  Rounding is
half-away-from-zero so that encode(-x) == -encode(x) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RING_BITS = 64
RING_MODULUS = 1 << RING_BITS

# A ring element is a uint64 scalar or ndarray; signed semantics come from
# the two's-complement view.
RingElement = np.uint64


class FixedPointOverflowError(OverflowError):
    """Raised when a real value cannot be represented at the configured scale."""


@dataclass(frozen=True)
class FixedPointConfig:
    """Precision parameters for the fixed-point ring encoding.

    precision_t: number of fractional bits (scale factor 2^t).
    """

    precision_t: int = 16

    def __post_init__(self) -> None:
        if not 1 <= self.precision_t <= 32:
            raise ValueError(f"precision_t must be in [1, 32], got {self.precision_t}")

    @property
    def scale(self) -> int:
        return 1 << self.precision_t

    @property
    def bound(self) -> float:
        """Largest representable magnitude, 2^(63 - t)."""
        return float(1 << (63 - self.precision_t))

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale


DEFAULT_CONFIG = FixedPointConfig()


def to_signed(r):
    """Two's-complement reinterpretation of ring residues."""
    out = np.asarray(r, dtype=np.uint64).view(np.int64)
    return out if out.ndim else out[()]


def from_signed(s):
    out = np.asarray(s, dtype=np.int64).view(np.uint64)
    return out if out.ndim else out[()]


def encode(x, cfg: FixedPointConfig = DEFAULT_CONFIG):
    """Encode reals as ring residues round(x * 2^t), half away from zero.

    Raises FixedPointOverflowError when |x| >= 2^(63 - t).
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise FixedPointOverflowError("cannot encode non-finite values")
    if np.any(np.abs(arr) >= cfg.bound):
        worst = float(np.max(np.abs(arr)))
        raise FixedPointOverflowError(
            f"|x| = {worst} exceeds representable bound {cfg.bound} at t={cfg.precision_t}"
        )
    scaled = arr * float(cfg.scale)
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    out = rounded.astype(np.int64).view(np.uint64)
    return out if out.ndim else out[()]


def decode(r, cfg: FixedPointConfig = DEFAULT_CONFIG):
    """Decode ring residues back to floats: signed(r) / 2^t."""
    arr = np.asarray(r, dtype=np.uint64)
    signed = arr.view(np.int64).astype(np.float64)
    out = signed / float(cfg.scale)
    return out if out.ndim else float(out)


def truncate(r, cfg: FixedPointConfig = DEFAULT_CONFIG, shift: int | None = None):
    """Rescale a double-scale residue (2^2t) down to single scale 2^t.

    Arithmetic right shift of the signed view: floor division by 2^shift,
    error at most one unit in the last place.  Used after every fixed-point
    product.
    """
    by = cfg.precision_t if shift is None else shift
    arr = np.asarray(r, dtype=np.uint64)
    shifted = (arr.view(np.int64) >> np.int64(by)).view(np.uint64)
    return shifted if shifted.ndim else shifted[()]


def ring_neg(r):
    arr = np.asarray(r, dtype=np.uint64)
    out = np.zeros_like(arr) - arr
    return out if out.ndim else out[()]


def ring_mul_scalar(r, k: int):
    """Multiply residues by a (possibly negative) public integer."""
    arr = np.asarray(r, dtype=np.uint64)
    ku = np.uint64(k % RING_MODULUS)
    out = arr * ku
    return out if out.ndim else out[()]
