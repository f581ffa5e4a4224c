"""Receiver-side covert feedback codecs: haptic pulses and visual dots.

Haptic channel: symbol k maps to a monotone pulse count (A=1, B=2, C=3,
E=4); a schedule is pulse_count pulses of T1 ms separated by T2 ms, closed
by the longer inter-sequence gap T3, at amplitude h.  T3 > T2 is what lets
the wearer tell pulse gaps from sequence boundaries, so the pattern
validates it.

Visual channel: each symbol owns a fixed (grid position, dot index, color)
in the lower display region; an optional sender identifier renders as a
row of white dots (binary, up to 8 bits) in the upper region.  Both codecs
are exact bijections and raise on anything outside the mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SYMBOLS = ("A", "B", "C", "E")

# measured perceptibility radius of the default amplitude when worn on the
# wrist; recorded as deployment metadata, no physical model implemented
OBSERVATION_RADIUS_M = 0.5


class CodecError(ValueError):
    """Unknown symbol or a schedule/code outside the mapping."""


@dataclass(frozen=True)
class HapticPattern:
    pulse_ms: float = 150.0        # T1
    gap_ms: float = 120.0          # T2, between pulses within a symbol
    sequence_gap_ms: float = 600.0  # T3, between symbol sequences
    amplitude: int = 70            # h, device units in [1, 255]
    pulse_counts: dict = field(
        default_factory=lambda: {"A": 1, "B": 2, "C": 3, "E": 4}
    )

    def __post_init__(self) -> None:
        if min(self.pulse_ms, self.gap_ms, self.sequence_gap_ms) <= 0:
            raise ValueError("all durations must be positive")
        if self.sequence_gap_ms <= self.gap_ms:
            raise ValueError("sequence gap T3 must exceed the intra-symbol gap T2")
        if not 1 <= self.amplitude <= 255:
            raise ValueError("amplitude must lie in [1, 255]")
        counts = list(self.pulse_counts.values())
        if len(set(counts)) != len(counts):
            raise ValueError("pulse counts must be distinct per symbol")


DEFAULT_PATTERN = HapticPattern()


def encode_haptic(symbol: str, pattern: HapticPattern = DEFAULT_PATTERN) -> list:
    """Pulse schedule [(on_ms, off_ms), ...] at the pattern amplitude.

    k pulses of T1, separated by T2, terminated by T3; total time is
    k*T1 + (k-1)*T2 + T3.
    """
    if symbol not in pattern.pulse_counts:
        raise CodecError(f"unknown symbol {symbol!r}")
    k = pattern.pulse_counts[symbol]
    schedule = [(pattern.pulse_ms, pattern.gap_ms)] * (k - 1)
    schedule.append((pattern.pulse_ms, pattern.sequence_gap_ms))
    return schedule


def decode_haptic(schedule: list, pattern: HapticPattern = DEFAULT_PATTERN) -> str:
    """Inverse of encode_haptic; rejects malformed gap structure."""
    if not schedule:
        raise CodecError("empty schedule")
    for on_ms, off_ms in schedule[:-1]:
        if on_ms != pattern.pulse_ms or off_ms != pattern.gap_ms:
            raise CodecError("corrupted intra-symbol pulse or gap")
    on_ms, off_ms = schedule[-1]
    if on_ms != pattern.pulse_ms or off_ms != pattern.sequence_gap_ms:
        raise CodecError("schedule does not end with a sequence gap")
    count = len(schedule)
    for symbol, k in pattern.pulse_counts.items():
        if k == count:
            return symbol
    raise CodecError(f"pulse count {count} outside the mapping")


def schedule_duration_ms(schedule: list) -> float:
    return float(sum(on + off for on, off in schedule))


# visual mapping: symbol -> (grid position, dot index, color)
VISUAL_MAP = {
    "A": ("bottom-right", 1, "green"),
    "B": ("bottom-center", 2, "red"),
    "C": ("bottom-center", 3, "blue"),
    "E": ("bottom-left", 4, "orange"),
}
_VISUAL_INVERSE = {v: k for k, v in VISUAL_MAP.items()}

MAX_ID_BITS = 8


@dataclass(frozen=True)
class VisualCode:
    position: str
    dot_index: int
    color: str
    identifier_bits: str = ""

    def to_dict(self) -> dict:
        return {
            "symbol_dot": {
                "position": self.position,
                "index": self.dot_index,
                "color": self.color,
            },
            "identifier_dots": [bit == "1" for bit in self.identifier_bits],
        }


def encode_visual(symbol: str, sender_id: str = "") -> VisualCode:
    if symbol not in VISUAL_MAP:
        raise CodecError(f"unknown symbol {symbol!r}")
    if len(sender_id) > MAX_ID_BITS or any(b not in "01" for b in sender_id):
        raise CodecError(f"sender id must be <= {MAX_ID_BITS} binary digits")
    position, index, color = VISUAL_MAP[symbol]
    return VisualCode(position=position, dot_index=index, color=color,
                      identifier_bits=sender_id)


def decode_visual(code: VisualCode) -> tuple:
    key = (code.position, code.dot_index, code.color)
    if key not in _VISUAL_INVERSE:
        raise CodecError(f"unmapped visual code {key!r}")
    return _VISUAL_INVERSE[key], code.identifier_bits
