"""Synthetic wrist-motion traces and feature-space datasets.

Stands in for human recordings: each gesture symbol gets a distinct
tri-axial oscillation signature, sessions follow the pause protocol
(opening pause, symbol bursts separated by mid pauses, closing pause), and
users contribute amplitude/speed jitter.  Bursts ride on a cosine carrier
so their first and last samples sit well above the pause threshold, which
keeps ground-truth window boundaries exact.

The feature-space generator draws four Gaussian clusters directly in
feature coordinates for classifier benchmarks that do not need the trace
pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .segmentation import MotionTrace

SYMBOLS = ("A", "B", "C", "E")

# per-symbol carrier/secondary frequencies (Hz), axis amplitudes (rad/s),
# and nominal burst duration (s); the carrier is the highest-amp axis
SYMBOL_SIGNATURES = {
    "A": {"freqs": (3.0, 5.0, 2.0), "amps": (1.6, 0.9, 0.5), "duration": 1.0},
    "B": {"freqs": (6.0, 2.5, 4.0), "amps": (0.7, 1.5, 1.0), "duration": 1.2},
    "C": {"freqs": (2.0, 4.5, 6.5), "amps": (1.3, 0.6, 1.5), "duration": 0.9},
    "E": {"freqs": (5.0, 7.0, 3.0), "amps": (1.0, 1.2, 1.8), "duration": 1.3},
}

RATE = 60.0


@dataclass(frozen=True)
class TraceStyle:
    amp_scale: float = 1.0
    speed_scale: float = 1.0
    noise: float = 0.02
    pause_noise: float = 0.015


def _pause_block(duration: float, rng: np.random.Generator, style: TraceStyle,
                 rate: float = RATE) -> np.ndarray:
    n = int(round(duration * rate)) + 1
    g = rng.normal(0.0, style.pause_noise, size=(n, 3))
    return np.clip(g, -0.08, 0.08)


def _filler_block(duration: float, rng: np.random.Generator, rate: float = RATE) -> np.ndarray:
    """Idle-state wiggle: clearly motion, never a valid pause."""
    n = int(round(duration * rate)) + 1
    t = np.arange(n) / rate
    base = 0.6 * np.cos(2 * np.pi * 1.3 * t + rng.uniform(0, 2 * np.pi))
    g = np.column_stack([base, 0.5 * np.roll(base, n // 3), 0.4 * base])
    return g + rng.normal(0, 0.05, size=g.shape)


def gesture_burst(symbol: str, rng: np.random.Generator, style: TraceStyle = TraceStyle(),
                  rate: float = RATE) -> np.ndarray:
    """(n, 3) gyro burst for one symbol; boundary samples exceed 0.5 rad/s."""
    sig = SYMBOL_SIGNATURES[symbol]
    amps = np.array(sig["amps"]) * style.amp_scale * rng.normal(1.0, 0.08, 3).clip(0.75, 1.25)
    freqs = np.array(sig["freqs"]) * style.speed_scale * rng.normal(1.0, 0.05, 3).clip(0.85, 1.15)
    duration = sig["duration"] / style.speed_scale

    carrier = int(np.argmax(amps))
    cycles = max(2, int(round(duration * freqs[carrier])))
    n = int(round(cycles * rate / freqs[carrier])) + 1
    t = np.arange(n) / rate

    g = np.empty((n, 3))
    for axis in range(3):
        phase = 0.0 if axis == carrier else rng.uniform(0, 2 * np.pi)
        g[:, axis] = amps[axis] * np.cos(2 * np.pi * freqs[axis] * t + phase)
    return g + rng.normal(0, style.noise, size=g.shape)


def synthesize_trace(
    sessions: list,
    seed: int = 0,
    style: TraceStyle = TraceStyle(),
    open_duration: float = 2.0,
    close_duration: float = 2.0,
    mid_pause: float = 1.0,
    rate: float = RATE,
    lead_in: float = 1.0,
):
    """Build one continuous trace from per-session symbol lists.

    Returns (MotionTrace, truth) where truth lists dicts with the symbol
    and its exact half-open sample range.
    """
    rng = np.random.default_rng(seed)
    blocks = [_filler_block(lead_in, rng, rate)]
    truth = []
    offset = len(blocks[0])
    for si, symbols in enumerate(sessions):
        blocks.append(_pause_block(open_duration, rng, style, rate))
        offset += len(blocks[-1])
        for pos, symbol in enumerate(symbols):
            if pos:
                blocks.append(_pause_block(mid_pause, rng, style, rate))
                offset += len(blocks[-1])
            burst = gesture_burst(symbol, rng, style, rate)
            truth.append(
                {"session": si, "symbol": symbol, "start": offset, "end": offset + len(burst)}
            )
            blocks.append(burst)
            offset += len(burst)
        blocks.append(_pause_block(close_duration, rng, style, rate))
        offset += len(blocks[-1])
        blocks.append(_filler_block(1.5, rng, rate))
        offset += len(blocks[-1])
    g = np.vstack(blocks)
    t = np.arange(len(g)) / rate
    trace = MotionTrace(t=t, gx=g[:, 0], gy=g[:, 1], gz=g[:, 2])
    return trace, truth


def make_gesture_dataset(users: int, reps: int, symbols=SYMBOLS, seed: int = 0):
    """Per-user traces, one session per repetition holding every symbol.

    Returns a list of (user_id, MotionTrace, truth) tuples; users x reps x
    len(symbols) bursts in total.
    """
    out = []
    rng = np.random.default_rng(seed)
    for user in range(users):
        style = TraceStyle(
            amp_scale=float(np.clip(rng.normal(1.0, 0.12), 0.7, 1.3)),
            speed_scale=float(np.clip(rng.normal(1.0, 0.08), 0.8, 1.2)),
        )
        sessions = [list(symbols) for _ in range(reps)]
        trace, truth = synthesize_trace(sessions, seed=seed + 1000 + user, style=style)
        out.append((user, trace, truth))
    return out


def gaussian_blob_dataset(
    n_train: int = 200,
    n_test: int = 54,
    dim: int = 96,
    sigma: float = 0.3,
    seed: int = 0,
    n_classes: int = 4,
):
    """Four well-separated Gaussian clusters in feature space.

    Returns a dict with float feature matrices, one-hot labels, and the
    integer class vectors for both splits.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, size=(n_classes, dim))

    def draw(count):
        labels = np.arange(count) % n_classes
        rng.shuffle(labels)
        x = centers[labels] + rng.normal(0.0, sigma, size=(count, dim))
        onehot = np.eye(n_classes)[labels]
        return x, onehot, labels

    x_train, y_train, l_train = draw(n_train)
    x_test, y_test, l_test = draw(n_test)
    return {
        "x_train": x_train,
        "y_train": y_train,
        "labels_train": l_train,
        "x_test": x_test,
        "y_test": y_test,
        "labels_test": l_test,
        "centers": centers,
    }
