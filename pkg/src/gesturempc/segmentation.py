"""Pause-delimited segmentation of continuous wrist-motion traces.

A sample is a pause candidate when all three gyroscope axes sit inside the
closed band [-Th, Th].  Maximal runs of pause samples become pause
intervals; runs at least `delimiter_min_duration` long delimit motion
segments, shorter dips (zero crossings inside a gesture) merge into the
surrounding motion.

Session handling is a three-state machine:

    idle   --opening pause (t1 +- eps)-->  active
    active --motion segment-->             active   (emits a window)
    active --closing pause (t2 +- eps)-->  closed
    closed --reset-->                      idle

Motion outside an active session is ignored; after a closing pause the
machine resets, so later motion stays invisible until a new opening pause
arrives.  Windows shorter than `min_motion_samples` are discarded as
jitter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class TraceError(ValueError):
    """Malformed trace input (unsorted timestamps, empty, bad columns)."""


@dataclass
class MotionTrace:
    """Timestamped tri-axial gyroscope stream, optional accelerometer."""

    t: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    gz: np.ndarray
    ax: np.ndarray | None = None
    ay: np.ndarray | None = None
    az: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.t)
        for name in ("gx", "gy", "gz"):
            if len(getattr(self, name)) != n:
                raise TraceError(f"column {name} length mismatch")
        if n and np.any(np.diff(self.t) <= 0):
            raise TraceError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def gyro(self) -> np.ndarray:
        """(n, 3) gyroscope matrix."""
        return np.column_stack([self.gx, self.gy, self.gz])


@dataclass(frozen=True)
class PauseConfig:
    threshold: float = 0.1          # rad/s, closed interval on every axis
    open_duration: float = 2.0      # t1, seconds
    close_duration: float = 2.0     # t2, seconds
    tolerance: float = 0.5          # eps, seconds
    min_motion_samples: int = 12    # 0.2 s at 60 Hz
    delimiter_min_duration: float = 0.3  # shorter pauses merge into motion
    activation_mode: str = "pause"  # "pause" or "symbol"

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("pause threshold must be positive")
        if not (self.open_duration > 2 * self.tolerance >= 0):
            raise ValueError("need open_duration > 2*tolerance >= 0")
        if not (self.close_duration > 2 * self.tolerance >= 0):
            raise ValueError("need close_duration > 2*tolerance >= 0")
        if self.activation_mode not in ("pause", "symbol"):
            raise ValueError(f"unknown activation mode {self.activation_mode!r}")

    def in_open_range(self, duration: float) -> bool:
        return abs(duration - self.open_duration) <= self.tolerance

    def in_close_range(self, duration: float) -> bool:
        return abs(duration - self.close_duration) <= self.tolerance


class SessionState(enum.Enum):
    IDLE = "idle"
    ACTIVE = "active"
    CLOSED = "closed"


@dataclass(frozen=True)
class PauseEvent:
    duration: float
    start: int = 0
    end: int = 0


@dataclass(frozen=True)
class MotionEvent:
    start: int = 0
    end: int = 0


@dataclass
class GestureWindow:
    """Half-open sample range [start_index, end_index) of one gesture."""

    start_index: int
    end_index: int
    trace: MotionTrace | None = field(default=None, repr=False)
    role: str = "symbol"

    @property
    def n_samples(self) -> int:
        return self.end_index - self.start_index

    def axis(self, name: str) -> np.ndarray:
        if self.trace is None:
            raise TraceError("window is not bound to a trace")
        return getattr(self.trace, name)[self.start_index : self.end_index]

    @property
    def gyro(self) -> np.ndarray:
        return self.trace.gyro[self.start_index : self.end_index]


def is_pause_sample(gx: float, gy: float, gz: float, cfg: PauseConfig) -> bool:
    th = cfg.threshold
    return bool(abs(gx) <= th and abs(gy) <= th and abs(gz) <= th)


def pause_mask(trace: MotionTrace, cfg: PauseConfig) -> np.ndarray:
    th = cfg.threshold
    return (
        (np.abs(trace.gx) <= th) & (np.abs(trace.gy) <= th) & (np.abs(trace.gz) <= th)
    )


def detect_pauses(trace: MotionTrace, cfg: PauseConfig) -> list:
    """Maximal runs of pause samples as (start, end, duration) intervals."""
    if len(trace) == 0:
        raise TraceError("empty trace")
    mask = pause_mask(trace, cfg)
    edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
    bounds = np.concatenate([[0], edges + 1, [len(mask)]])
    intervals = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if mask[lo]:
            intervals.append((int(lo), int(hi), float(trace.t[hi - 1] - trace.t[lo])))
    return intervals


def step(state: SessionState, event, cfg: PauseConfig):
    """One state-machine transition; returns (new_state, emitted_motion).

    The closed state resets to idle before the event is considered, so a
    closing pause reads as "closed, then idle" to the caller.
    """
    if state is SessionState.CLOSED:
        state = SessionState.IDLE
    if state is SessionState.IDLE:
        if isinstance(event, PauseEvent) and cfg.in_open_range(event.duration):
            return SessionState.ACTIVE, None
        return SessionState.IDLE, None
    # active
    if isinstance(event, MotionEvent):
        return SessionState.ACTIVE, event
    if cfg.in_close_range(event.duration):
        return SessionState.CLOSED, None
    return SessionState.ACTIVE, None


def _events(trace: MotionTrace, cfg: PauseConfig) -> list:
    """Alternating pause/motion events; sub-delimiter pauses merge into motion."""
    delimiters = [
        (lo, hi, dur)
        for lo, hi, dur in detect_pauses(trace, cfg)
        if dur >= cfg.delimiter_min_duration
    ]
    events = []
    cursor = 0
    for lo, hi, dur in delimiters:
        if lo > cursor:
            events.append(MotionEvent(start=cursor, end=lo))
        events.append(PauseEvent(duration=dur, start=lo, end=hi))
        cursor = hi
    if cursor < len(trace):
        events.append(MotionEvent(start=cursor, end=len(trace)))
    return events


def segment(trace: MotionTrace, cfg: PauseConfig | None = None) -> list:
    """Gesture windows of every completed or still-open active session."""
    cfg = cfg or PauseConfig()
    state = SessionState.IDLE
    windows: list = []
    session: list = []

    def flush() -> None:
        if cfg.activation_mode == "symbol" and session:
            session[0].role = "activation"
            if len(session) > 1:
                session[-1].role = "termination"
        windows.extend(session)
        session.clear()

    for event in _events(trace, cfg):
        state, emitted = step(state, event, cfg)
        if emitted is not None and emitted.end - emitted.start >= cfg.min_motion_samples:
            session.append(
                GestureWindow(start_index=emitted.start, end_index=emitted.end, trace=trace)
            )
        if state is SessionState.CLOSED:
            flush()
    flush()
    return windows


def calibrate_threshold(pause_segments: list, floor: float = 0.01) -> float:
    """99th percentile of |gyro| over labeled pause samples, floored.

    Accepts (n, 3) arrays or MotionTrace instances.
    """
    if not pause_segments:
        raise ValueError("need at least one labeled pause segment")
    chunks = []
    for seg in pause_segments:
        g = seg.gyro if isinstance(seg, MotionTrace) else np.asarray(seg, dtype=np.float64)
        chunks.append(np.abs(g).ravel())
    pooled = np.concatenate(chunks)
    if pooled.size == 0:
        raise ValueError("labeled pause segments are empty")
    return float(max(np.percentile(pooled, 99, method="higher"), floor))


# ---------------------------------------------------------------------------
# trace CSV + window report formats
# ---------------------------------------------------------------------------

_GYRO_HEADER = ["t", "gx", "gy", "gz"]
_FULL_HEADER = _GYRO_HEADER + ["ax", "ay", "az"]


def write_trace_csv(path, trace: MotionTrace) -> None:
    has_accel = trace.ax is not None
    header = _FULL_HEADER if has_accel else _GYRO_HEADER
    cols = [trace.t, trace.gx, trace.gy, trace.gz]
    if has_accel:
        cols += [trace.ax, trace.ay, trace.az]
    data = np.column_stack(cols)
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.9g")


def read_trace_csv(path) -> MotionTrace:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[:4] != _GYRO_HEADER:
        raise TraceError(f"unexpected trace header {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] not in (4, 7):
        raise TraceError(f"expected 4 or 7 columns, got {data.shape[1]}")
    kwargs = dict(t=data[:, 0], gx=data[:, 1], gy=data[:, 2], gz=data[:, 3])
    if data.shape[1] == 7:
        kwargs.update(ax=data[:, 4], ay=data[:, 5], az=data[:, 6])
    return MotionTrace(**kwargs)


def windows_report(windows: list, trace: MotionTrace) -> list:
    return [
        {
            "start_index": w.start_index,
            "end_index": w.end_index,
            "start_time": float(trace.t[w.start_index]),
            "end_time": float(trace.t[w.end_index - 1]),
            "n_samples": w.n_samples,
            "role": w.role,
        }
        for w in windows
    ]
