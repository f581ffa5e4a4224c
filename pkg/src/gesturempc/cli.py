"""Command-line entry point for the gesture pipeline.

Subcommands cover the whole flow: gen-data -> segment -> features ->
cluster / train -> infer, plus the bench harness, feedback codecs, and the
LWE demo.  Configuration resolves defaults <- --config JSON <- flags;
--print-config dumps the merged result.  Failures print a structured JSON
error on stderr and exit nonzero.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, config as cfgmod, feedback as fb, lwe as lwemod
from .bench import run_bench
from .features import (
    FeatureConfig,
    extract_many,
    fit_standardizer,
    read_feature_csv,
    write_feature_csv,
)
from .fixedpoint import FixedPointConfig
from .model import (
    TrainConfig,
    evaluate,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .report import (
    cluster_table_text,
    format_bench_table,
    save_bench_figure,
    save_confusion_figure,
    save_loss_figure,
    save_trace_figure,
    write_bench_csv,
    write_loss_csv,
    write_metrics_json,
    write_roc_csv,
)
from .segmentation import PauseConfig, read_trace_csv, segment, windows_report, write_trace_csv
from .synthetic import SYMBOLS, gaussian_blob_dataset, make_gesture_dataset
from .vocab import cluster_table, kmeans, separability_report

SYMBOL_INDEX = {s: i for i, s in enumerate(SYMBOLS)}


def _fail_json(exc: BaseException) -> None:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


def json_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:  # structured error for scripting
            _fail_json(exc)

    return wrapper


def _pause_config(cfg: dict) -> PauseConfig:
    seg = cfg["segmentation"]
    return PauseConfig(
        threshold=seg["threshold"],
        open_duration=seg["open_duration"],
        close_duration=seg["close_duration"],
        tolerance=seg["tolerance"],
        min_motion_samples=seg["min_motion_samples"],
        delimiter_min_duration=seg["delimiter_min_duration"],
        activation_mode=seg["activation_mode"],
    )


def _feature_config(cfg: dict) -> FeatureConfig:
    feat = cfg["features"]
    return FeatureConfig(
        quantile_levels=tuple(feat["quantile_levels"]),
        ac_lags=tuple(feat["ac_lags"]),
        rolloff_fraction=feat["rolloff_fraction"],
        sample_rate=cfg["sample_rate"],
    )


@click.group(invoke_without_command=True)
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config file merged over built-in defaults.")
@click.option("--print-config", is_flag=True, help="Dump the merged configuration and exit.")
@click.pass_context
def main(ctx, config_path, print_config):
    ctx.ensure_object(dict)
    ctx.obj["config"] = cfgmod.load_config(config_path)
    if print_config:
        click.echo(json.dumps(ctx.obj["config"], indent=2))
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
        ctx.exit(0)


@main.command("gen-data")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--users", default=1, show_default=True)
@click.option("--reps", default=1, show_default=True)
@click.option("--symbols", default=",".join(SYMBOLS), show_default=True)
@click.option("--seed", default=None, type=int)
@click.pass_context
@json_errors
def gen_data(ctx, out_dir, users, reps, symbols, seed):
    """Synthesize per-user wrist-motion traces with pause-framed sessions."""
    cfg = ctx.obj["config"]
    seed = cfg["seed"] if seed is None else seed
    symbol_list = [s.strip() for s in symbols.split(",") if s.strip()]
    unknown = [s for s in symbol_list if s not in SYMBOLS]
    if users < 1 or reps < 1:
        raise ValueError("users and reps must be >= 1")
    if unknown:
        raise ValueError(f"unknown symbols {unknown}; supported: {list(SYMBOLS)}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    label_rows = []
    for user, trace, truth in make_gesture_dataset(users, reps, symbol_list, seed=seed):
        path = out / f"trace_user{user:02d}.csv"
        write_trace_csv(path, trace)
        outputs.append(path)
        for ordinal, item in enumerate(truth):
            label_rows.append((user, ordinal, item["symbol"]))
    labels_path = out / "labels.csv"
    with open(labels_path, "w") as fh:
        fh.write("user,ordinal,symbol\n")
        for user, ordinal, symbol in label_rows:
            fh.write(f"{user},{ordinal},{symbol}\n")
    outputs.append(labels_path)
    cfgmod.write_manifest(out, "gen-data", {**cfg, "seed": seed, "users": users,
                                            "reps": reps, "symbols": symbol_list},
                          inputs=[], outputs=outputs)
    click.echo(f"wrote {len(outputs) - 1} traces + labels ({len(label_rows)} gestures) to {out}")


@main.command("segment")
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--figure/--no-figure", default=True, show_default=True)
@click.pass_context
@json_errors
def segment_cmd(ctx, trace_path, out_path, figure):
    """Detect pause-delimited gesture windows in one trace."""
    cfg = ctx.obj["config"]
    trace = read_trace_csv(trace_path)
    windows = segment(trace, _pause_config(cfg))
    report = windows_report(windows, trace)
    with open(out_path, "w") as fh:
        json.dump({"windows": report}, fh, indent=2)
    outputs = [out_path]
    if figure:
        fig_path = str(Path(out_path).with_suffix("")) + "_trace.png"
        save_trace_figure(fig_path, trace, windows)
        outputs.append(fig_path)
    cfgmod.write_manifest(Path(out_path).parent, "segment", cfg,
                          inputs=[trace_path], outputs=outputs)
    click.echo(f"{len(windows)} windows -> {out_path}")


@main.command("features")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="gen-data output directory (traces + labels.csv)")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@json_errors
def features_cmd(ctx, data_dir, out_path):
    """Segment every user trace and extract the 96-dim feature vectors."""
    cfg = ctx.obj["config"]
    pause_cfg = _pause_config(cfg)
    feat_cfg = _feature_config(cfg)
    data = Path(data_dir)

    labels: dict = {}
    with open(data / "labels.csv") as fh:
        fh.readline()
        for line in fh:
            user, ordinal, symbol = line.strip().split(",")
            labels[(int(user), int(ordinal))] = symbol

    rows, meta_user, meta_label = [], [], []
    traces = sorted(data.glob("trace_user*.csv"))
    if not traces:
        raise FileNotFoundError(f"no trace_user*.csv files under {data}")
    for path in traces:
        user = int(path.stem.replace("trace_user", ""))
        windows = segment(read_trace_csv(path), pause_cfg)
        expected = sum(1 for (u, _) in labels if u == user)
        if len(windows) != expected:
            raise ValueError(
                f"user {user}: segmented {len(windows)} windows but labels list {expected}"
            )
        mat = extract_many(windows, feat_cfg)
        for ordinal in range(len(windows)):
            meta_user.append(user)
            meta_label.append(labels[(user, ordinal)])
        rows.append(mat)
    matrix = np.vstack(rows)
    write_feature_csv(out_path, matrix, meta={"user": meta_user, "label": meta_label},
                      cfg=feat_cfg)
    cfgmod.write_manifest(Path(out_path).parent, "features", cfg,
                          inputs=[data_dir], outputs=[out_path, str(out_path) + ".manifest.json"])
    click.echo(f"{matrix.shape[0]} x {matrix.shape[1]} feature matrix -> {out_path}")


@main.command("cluster")
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=4, show_default=True)
@click.option("--group-by", "group_by", default=None, help="meta column, e.g. user")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.option("--seed", default=None, type=int)
@click.pass_context
@json_errors
def cluster_cmd(ctx, features_path, k, group_by, out_path, seed):
    """K-means vocabulary clustering over standardized features."""
    cfg = ctx.obj["config"]
    seed = cfg["seed"] if seed is None else seed
    matrix, meta, _ = read_feature_csv(features_path)
    if "label" not in meta:
        raise ValueError("feature file lacks a label column")
    standardized = fit_standardizer(matrix).apply(matrix)
    users = meta.get(group_by) if group_by else None
    rows = cluster_table(standardized, meta["label"], users=users, k=k, seed=seed)
    assignment = kmeans(standardized, k=k, seed=seed)
    sep = separability_report(assignment, meta["label"])
    click.echo(cluster_table_text(rows))
    click.echo(
        "separable: {} (shared clusters: {})".format(sep["separable"], sep["shared_clusters"])
    )
    if out_path:
        with open(out_path, "w") as fh:
            json.dump({"table": rows, "separability": sep}, fh, indent=2)
        cfgmod.write_manifest(Path(out_path).parent, "cluster", cfg,
                              inputs=[features_path], outputs=[out_path])


def _split_features(matrix, labels, test_fraction, seed):
    rng = np.random.default_rng(seed)
    y_idx = np.array([SYMBOL_INDEX[l] for l in labels])
    train_idx, test_idx = [], []
    for cls in range(len(SYMBOLS)):
        members = np.flatnonzero(y_idx == cls)
        rng.shuffle(members)
        n_test = max(1, int(round(len(members) * test_fraction))) if len(members) > 1 else 0
        test_idx.extend(members[:n_test])
        train_idx.extend(members[n_test:])
    train_idx, test_idx = np.array(sorted(train_idx)), np.array(sorted(test_idx))
    onehot = np.eye(len(SYMBOLS))[y_idx]
    return (matrix[train_idx], onehot[train_idx], matrix[test_idx], onehot[test_idx])


@main.command("train")
@click.option("--features", "features_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--synthetic", is_flag=True, help="train on the built-in synthetic clusters")
@click.option("--mode", type=click.Choice(["plain", "mpc"]), default=None)
@click.option("--epochs", default=None, type=int)
@click.option("--learning-rate", "lr", default=None, type=float)
@click.option("--batch-size", default=None, type=int)
@click.option("--precision", "precision_t", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.pass_context
@json_errors
def train_cmd(ctx, features_path, synthetic, mode, epochs, lr, batch_size,
              precision_t, seed, out_dir):
    """Train the classifier (plaintext or secret-shared) and report metrics."""
    cfg = ctx.obj["config"]
    tr = cfg["train"]
    seed = cfg["seed"] if seed is None else seed
    mode = mode or tr["mode"]
    epochs = epochs or tr["epochs"]
    t = precision_t or tr["precision_t"]

    if synthetic == (features_path is not None):
        raise ValueError("provide exactly one of --features or --synthetic")
    if synthetic:
        data = gaussian_blob_dataset(seed=seed)
        x_tr_raw, y_tr = data["x_train"], data["y_train"]
        x_te_raw, y_te = data["x_test"], data["y_test"]
        inputs = []
    else:
        matrix, meta, _ = read_feature_csv(features_path)
        if "label" not in meta:
            raise ValueError("feature file lacks a label column")
        x_tr_raw, y_tr, x_te_raw, y_te = _split_features(
            matrix, meta["label"], tr["test_fraction"], seed
        )
        inputs = [features_path]

    stats = fit_standardizer(x_tr_raw)
    x_tr, x_te = stats.apply(x_tr_raw), stats.apply(x_te_raw)

    train_cfg = TrainConfig(
        epochs=epochs,
        learning_rate=lr or tr["learning_rate"],
        leak_alpha=tr["leak_alpha"],
        batch_size=batch_size if batch_size is not None else tr["batch_size"],
        seed=seed,
        mode=mode,
        n_parties=tr["n_parties"],
        fp=FixedPointConfig(t),
    )
    result = train(x_tr, y_tr, train_cfg)
    report = evaluate(result.params, x_te, y_te)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.bin"
    save_checkpoint(ckpt, result.params, mode=mode, precision_t=t)
    scaler_path = out / "scaler.json"
    with open(scaler_path, "w") as fh:
        json.dump({"mean": stats.mean.tolist(), "std": stats.std.tolist()}, fh)
    metrics_path = out / "metrics.json"
    write_metrics_json(metrics_path, report, extra={
        "mode": mode, "epochs": epochs, "final_loss": result.loss_curve[-1],
        "train_seconds": result.elapsed_s,
    })
    roc_path = out / "roc.csv"
    write_roc_csv(roc_path, report)
    loss_csv = out / "loss.csv"
    write_loss_csv(loss_csv, {mode: result.loss_curve})
    loss_png = out / "loss_curve.png"
    save_loss_figure(loss_png, {mode: result.loss_curve})
    cm_png = out / "confusion_matrix.png"
    save_confusion_figure(cm_png, report.confusion)
    cfgmod.write_manifest(out, "train", {**cfg, "seed": seed, "mode": mode,
                                         "epochs": epochs, "precision_t": t},
                          inputs=inputs,
                          outputs=[ckpt, scaler_path, metrics_path, roc_path,
                                   loss_csv, loss_png, cm_png])
    click.echo(
        f"{mode} training done in {result.elapsed_s:.1f}s: "
        f"loss {result.loss_curve[0]:.4f} -> {result.loss_curve[-1]:.4f}, "
        f"test accuracy {report.accuracy:.4f}, weighted F1 {report.f1_weighted:.4f}"
    )


@main.command("infer")
@click.option("--checkpoint", "ckpt_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--scaler", "scaler_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["plain", "mpc"]), default=None,
              help="defaults to the checkpoint's training mode")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@json_errors
def infer_cmd(ctx, ckpt_path, features_path, scaler_path, mode, out_path):
    """Predict gesture symbols for a feature file."""
    cfg = ctx.obj["config"]
    params, meta = load_checkpoint(ckpt_path)
    mode = mode or meta["mode"]
    matrix, file_meta, _ = read_feature_csv(features_path)
    if scaler_path:
        with open(scaler_path) as fh:
            sc = json.load(fh)
        from .features import StandardizationStats

        matrix = StandardizationStats(
            mean=np.array(sc["mean"]), std=np.array(sc["std"])
        ).apply(matrix)
    run_cfg = TrainConfig(mode=mode, seed=cfg["seed"],
                          fp=FixedPointConfig(meta["precision_t"]))
    preds = predict(params, matrix, run_cfg)
    symbols = [SYMBOLS[i] for i in preds]
    with open(out_path, "w") as fh:
        fh.write("row,predicted_symbol\n")
        for i, s in enumerate(symbols):
            fh.write(f"{i},{s}\n")
    msg = f"{len(symbols)} predictions -> {out_path}"
    if "label" in file_meta:
        truth = file_meta["label"]
        acc = float(np.mean([s == t for s, t in zip(symbols, truth)]))
        msg += f" (accuracy vs labels: {acc:.4f})"
    cfgmod.write_manifest(Path(out_path).parent, "infer", cfg,
                          inputs=[ckpt_path, features_path], outputs=[out_path])
    click.echo(msg)


@main.command("bench")
@click.option("--modes", default="plain,mpc", show_default=True)
@click.option("--epochs", default=None, type=int)
@click.option("--batch-sizes", default=None, help="e.g. 1,54")
@click.option("--repeats", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--precision", "precision_t", default=None, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.pass_context
@json_errors
def bench_cmd(ctx, modes, epochs, batch_sizes, repeats, seed, precision_t, out_dir):
    """Timing table across modes: train time, single and batched latency."""
    cfg = ctx.obj["config"]
    bc = cfg["bench"]
    seed = cfg["seed"] if seed is None else seed
    sizes = tuple(int(x) for x in (batch_sizes or ",".join(map(str, bc["batch_sizes"]))).split(","))
    rows = run_bench(
        modes=tuple(m.strip() for m in modes.split(",") if m.strip()),
        epochs=epochs or bc["epochs"],
        batch_sizes=sizes,
        seed=seed,
        repeats=repeats or bc["repeats"],
        precision_t=precision_t or cfg["train"]["precision_t"],
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "bench.csv"
    write_bench_csv(csv_path, rows)
    fig_path = out / "bench_timing.png"
    save_bench_figure(fig_path, rows)
    cfgmod.write_manifest(out, "bench", {**cfg, "seed": seed},
                          inputs=[], outputs=[csv_path, fig_path])
    click.echo(format_bench_table(rows))


@main.command("feedback")
@click.option("--symbol", required=True, type=click.Choice(list(SYMBOLS)))
@click.option("--channel", type=click.Choice(["haptic", "visual"]), default="haptic",
              show_default=True)
@click.option("--sender-id", default="", help="binary string, up to 8 bits")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.pass_context
@json_errors
def feedback_cmd(ctx, symbol, channel, sender_id, out_path):
    """Emit the covert feedback rendering for one symbol."""
    fcfg = ctx.obj["config"]["feedback"]
    if channel == "haptic":
        pattern = fb.HapticPattern(
            pulse_ms=fcfg["pulse_ms"], gap_ms=fcfg["gap_ms"],
            sequence_gap_ms=fcfg["sequence_gap_ms"], amplitude=fcfg["amplitude"],
        )
        schedule = fb.encode_haptic(symbol, pattern)
        payload = {
            "channel": "haptic",
            "symbol": symbol,
            "amplitude": pattern.amplitude,
            "observation_radius_m": fb.OBSERVATION_RADIUS_M,
            "schedule_ms": [{"on": on, "off": off} for on, off in schedule],
            "total_ms": fb.schedule_duration_ms(schedule),
        }
    else:
        payload = {
            "channel": "visual",
            "symbol": symbol,
            **fb.encode_visual(symbol, sender_id).to_dict(),
        }
    text = json.dumps(payload, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    click.echo(text)


@main.command("lwe-demo")
@click.option("--trials", default=10_000, show_default=True)
@click.option("--xor-trials", default=1_000, show_default=True)
@click.option("--seed", default=None, type=int)
@click.pass_context
@json_errors
def lwe_demo(ctx, trials, xor_trials, seed):
    """Round-trip and homomorphic-XOR statistics for the bit encryption."""
    cfg = ctx.obj["config"]
    seed = cfg["seed"] if seed is None else seed
    params = lwemod.LweParams(
        dimension=cfg["lwe"]["dimension"], modulus=cfg["lwe"]["modulus"],
        sigma_key=cfg["lwe"]["sigma"], sigma_err=cfg["lwe"]["sigma"],
        sigma_enc=cfg["lwe"]["sigma"],
    )
    stats = lwemod.demo_stats(params, round_trips=trials, xor_trials=xor_trials, seed=seed)
    width = 28
    click.echo(f"{'parameter':<{width}}value")
    click.echo("-" * (width + 24))
    for key in ("dimension", "modulus", "sigma", "noise_std_single",
                "noise_std_one_add", "round_trips", "round_trip_success",
                "xor_trials", "xor_success"):
        click.echo(f"{key:<{width}}{stats[key]}")


if __name__ == "__main__":
    main()
