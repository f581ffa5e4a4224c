"""Report artifacts: delimited outputs plus rendered figures.

Every reporting path emits machine-readable files (JSON metrics, CSV loss
curves / ROC points / timing tables) and, alongside them, matplotlib
figures rendered straight to disk.  ROC data stays numeric-only by
design; loss curves, confusion matrices, and benchmark timings get
figures.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import EvalReport

CLASS_NAMES = ("A", "B", "C", "E")


def write_metrics_json(path, report: EvalReport, extra: dict | None = None) -> None:
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def write_roc_csv(path, report: EvalReport) -> None:
    with open(path, "w") as fh:
        fh.write("class,fpr,tpr\n")
        for cls, pts in report.roc.items():
            name = CLASS_NAMES[cls] if cls < len(CLASS_NAMES) else str(cls)
            for fpr, tpr in pts:
                fh.write(f"{name},{fpr:.6f},{tpr:.6f}\n")


def write_loss_csv(path, curves: dict) -> None:
    labels = list(curves)
    depth = max(len(v) for v in curves.values())
    with open(path, "w") as fh:
        fh.write("epoch," + ",".join(labels) + "\n")
        for i in range(depth):
            row = [str(i + 1)]
            row += [f"{curves[l][i]:.8f}" if i < len(curves[l]) else "" for l in labels]
            fh.write(",".join(row) + "\n")


def save_loss_figure(path, curves: dict) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in curves.items():
        ax.plot(range(1, len(values) + 1), values, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE loss")
    ax.set_title("Training loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_figure(path, confusion: np.ndarray, class_names=CLASS_NAMES) -> None:
    cm = np.asarray(confusion, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(cm, cmap="Blues")
    ax.set_xticks(range(len(class_names)), class_names)
    ax.set_yticks(range(len(class_names)), class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, int(cm[i, j]), ha="center", va="center",
                    color="white" if cm[i, j] > cm.max() / 2 else "black")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


BENCH_COLUMNS = ("mode", "train_s", "latency_ms", "batch_latency_ms", "avg_inference_ms")


def write_bench_csv(path, rows: list) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(BENCH_COLUMNS) + "\n")
        for row in rows:
            fh.write(
                f"{row['mode']},{row['train_s']:.4f},{row['latency_ms']:.4f},"
                f"{row['batch_latency_ms']:.4f},{row['avg_inference_ms']:.4f}\n"
            )


def format_bench_table(rows: list) -> str:
    header = f"{'Mode':<8}{'Train (s)':>12}{'Lat. (ms)':>12}{'Batch Lat. (ms)':>18}{'Avg. Inf. (ms)':>16}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['mode']:<8}{row['train_s']:>12.3f}{row['latency_ms']:>12.3f}"
            f"{row['batch_latency_ms']:>18.3f}{row['avg_inference_ms']:>16.3f}"
        )
    return "\n".join(lines)


def save_bench_figure(path, rows: list) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [r["mode"] for r in rows]
    cols = ["latency_ms", "batch_latency_ms", "avg_inference_ms"]
    width = 0.25
    x = np.arange(len(labels))
    for i, col in enumerate(cols):
        ax.bar(x + (i - 1) * width, [r[col] for r in rows], width, label=col)
    ax.set_yscale("log")
    ax.set_xticks(x, labels)
    ax.set_ylabel("milliseconds (log)")
    ax.set_title("Inference timing")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trace_figure(path, trace, windows=None) -> None:
    fig, axes = plt.subplots(3, 1, figsize=(8, 5), sharex=True)
    for ax, name in zip(axes, ("gx", "gy", "gz")):
        ax.plot(trace.t, getattr(trace, name), linewidth=0.6)
        ax.set_ylabel(name)
        if windows:
            for w in windows:
                ax.axvspan(trace.t[w.start_index], trace.t[w.end_index - 1],
                           color="orange", alpha=0.25)
    axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cluster_table_text(rows: list) -> str:
    lines = []
    k = max(len(r["clusters"]) for r in rows)
    header = f"{'Group':<10}" + "".join(f"{'Cluster ' + str(c + 1):<22}" for c in range(k))
    lines.append(header)
    lines.append("-" * len(header))
    for row in rows:
        cells = [",".join(row["clusters"].get(str(c), [])) or "-" for c in range(k)]
        lines.append(f"{row['group']:<10}" + "".join(f"{cell:<22}" for cell in cells))
    return "\n".join(lines)
