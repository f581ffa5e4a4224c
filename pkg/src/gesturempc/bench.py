"""Benchmark harness: training time and inference latency per mode.

Reports four columns per execution mode: total training wall time, median
single-sample inference latency, median full-batch latency at the
configured batch size, and the per-sample cost of the batched path.  The
shared mode pays the interactive-protocol overhead on every sample, which
batching amortizes."""

from __future__ import annotations

import time

import numpy as np

from .features import fit_standardizer
from .fixedpoint import FixedPointConfig
from .model import TrainConfig, predict_logits, train
from .synthetic import gaussian_blob_dataset


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def run_bench(
    modes=("plain", "mpc"),
    epochs: int = 30,
    batch_sizes=(1, 54),
    seed: int = 0,
    repeats: int = 5,
    precision_t: int = 16,
    dataset: dict | None = None,
) -> list:
    """Train and time each mode on the synthetic fixture; returns rows of
    {mode, train_s, latency_ms, batch_latency_ms, avg_inference_ms}."""
    if dataset is None:
        raw = gaussian_blob_dataset(seed=seed)
        stats = fit_standardizer(raw["x_train"])
        dataset = {
            "x_train": stats.apply(raw["x_train"]),
            "y_train": raw["y_train"],
            "x_test": stats.apply(raw["x_test"]),
        }
    single = dataset["x_test"][: batch_sizes[0]]
    batch = dataset["x_test"][: batch_sizes[1]]
    if len(batch) < batch_sizes[1]:
        reps = -(-batch_sizes[1] // len(dataset["x_test"]))
        batch = np.tile(dataset["x_test"], (reps, 1))[: batch_sizes[1]]

    rows = []
    for mode in modes:
        cfg = TrainConfig(
            epochs=epochs, mode=mode, seed=seed, fp=FixedPointConfig(precision_t)
        )
        result = train(dataset["x_train"], dataset["y_train"], cfg)
        latency = _median_time(lambda: predict_logits(result.params, single, cfg), repeats)
        batch_latency = _median_time(lambda: predict_logits(result.params, batch, cfg), repeats)
        rows.append(
            {
                "mode": mode,
                "train_s": result.elapsed_s,
                "latency_ms": latency * 1e3,
                "batch_latency_ms": batch_latency * 1e3,
                "avg_inference_ms": batch_latency * 1e3 / batch_sizes[1],
            }
        )
    return rows
