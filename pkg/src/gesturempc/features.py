"""Temporal and spectral features of segmented gesture windows.

Each gyroscope axis yields 32 values: 24 temporal (the quantile feature is
evaluated at two levels and autocorrelation/autocovariance at two lags)
and 8 spectral statistics of the one-sided DFT magnitude spectrum, for a
96-dimensional vector per gesture in the fixed order X block, Y block,
Z block.  The exact layout travels with every feature file as a JSON
manifest.

Conventions worth knowing: moments are population moments; centroid-based
spectral statistics exclude the DC bin; flatness floors the geometric mean
at 1e-12; sample entropy (m=2, r=0.2*sigma) returns the log of the
template-pair count when no length-3 matches exist so the value stays
finite.  Every feature is finite for any finite input of length >= 4.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .segmentation import GestureWindow


class FeatureError(ValueError):
    """Input signal unusable for feature extraction."""


@dataclass(frozen=True)
class FeatureConfig:
    quantile_levels: tuple = (0.25, 0.75)
    ac_lags: tuple = (1, 2)
    sampen_m: int = 2
    sampen_r_factor: float = 0.2
    rolloff_fraction: float = 0.85
    sample_rate: float = 60.0
    dft_length: int | None = None  # None: DFT length = window length

    def __post_init__(self) -> None:
        if not all(0.0 < q < 1.0 for q in self.quantile_levels):
            raise ValueError("quantile levels must lie in (0, 1)")
        if any(lag < 1 for lag in self.ac_lags):
            raise ValueError("autocorrelation lags must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantile_levels"] = list(self.quantile_levels)
        d["ac_lags"] = list(self.ac_lags)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


DEFAULT_FEATURE_CONFIG = FeatureConfig()

AXES = ("gx", "gy", "gz")


def axis_feature_names(cfg: FeatureConfig = DEFAULT_FEATURE_CONFIG) -> list:
    names = ["mean", "std", "iqr", "abs_energy", "mean_abs_deviation", "sem",
             "mean_change"]
    names += [f"autocovariance_lag{l}" for l in cfg.ac_lags]
    names += ["longest_strike_above_mean", "variance", "abs_sum_of_changes",
              "kurtosis", "sample_entropy"]
    names += [f"autocorrelation_lag{l}" for l in cfg.ac_lags]
    names += ["mean_abs_change", "sum", "skewness"]
    names += [f"quantile_{int(q * 100):02d}" for q in cfg.quantile_levels]
    names += ["median", "longest_strike_below_mean", "complexity_invariant_distance",
              "spectral_centroid", "spectral_flatness", "spectral_kurtosis",
              "spectral_skewness", "spectral_decrease", "spectral_spread",
              "spectral_rolloff", "spectral_slope"]
    return names


def feature_names(cfg: FeatureConfig = DEFAULT_FEATURE_CONFIG) -> list:
    return [f"{axis}_{name}" for axis in AXES for name in axis_feature_names(cfg)]


def _longest_run(mask: np.ndarray) -> int:
    best = run = 0
    for flag in mask:
        run = run + 1 if flag else 0
        best = max(best, run)
    return best


def _sample_entropy(x: np.ndarray, m: int, r: float) -> float:
    n = len(x)
    if n <= m + 1:
        return 0.0

    def count_matches(length: int) -> int:
        count = n - length + 1
        templates = np.lib.stride_tricks.sliding_window_view(x, length)
        total = 0
        for i in range(count - 1):
            dist = np.max(np.abs(templates[i + 1 :] - templates[i]), axis=1)
            total += int(np.count_nonzero(dist <= r))
        return total

    b = count_matches(m)
    a = count_matches(m + 1)
    pairs = (n - m) * (n - m - 1) / 2.0
    if a == 0 or b == 0:
        return float(np.log(max(pairs, np.e)))
    return float(-np.log(a / b))


def _spectral_block(x: np.ndarray, cfg: FeatureConfig) -> list:
    n_fft = cfg.dft_length or len(x)
    mag = np.abs(np.fft.rfft(x, n=n_fft))
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / cfg.sample_rate)

    m1 = mag[1:]
    f1 = freqs[1:]
    total1 = float(np.sum(m1))
    if total1 > 0:
        centroid = float(np.sum(f1 * m1) / total1)
        spread = float(np.sqrt(np.sum(m1 * (f1 - centroid) ** 2) / total1))
        if spread > 0:
            skew = float(np.sum(m1 * (f1 - centroid) ** 3) / (total1 * spread**3))
            kurt = float(np.sum(m1 * (f1 - centroid) ** 4) / (total1 * spread**4))
        else:
            skew = kurt = 0.0
    else:
        centroid = spread = skew = kurt = 0.0

    amean = float(np.mean(mag))
    flatness = float(np.exp(np.mean(np.log(mag + 1e-12))) / amean) if amean > 0 else 0.0

    if len(mag) > 2:
        tail = mag[2:]
        denom = float(np.sum(tail))
        decrease = (
            float(np.sum((tail - mag[1]) / np.arange(1, len(tail) + 1)) / denom)
            if denom > 0
            else 0.0
        )
    else:
        decrease = 0.0

    total = float(np.sum(mag))
    if total > 0:
        rolloff_idx = int(np.searchsorted(np.cumsum(mag), cfg.rolloff_fraction * total))
        rolloff = float(freqs[min(rolloff_idx, len(freqs) - 1)])
    else:
        rolloff = 0.0

    if len(f1) >= 2:
        fvar = float(np.var(f1))
        slope = float(np.mean((f1 - f1.mean()) * (m1 - m1.mean())) / fvar) if fvar > 0 else 0.0
    else:
        slope = 0.0

    return [centroid, flatness, kurt, skew, decrease, spread, rolloff, slope]


def extract_axis(signal, cfg: FeatureConfig = DEFAULT_FEATURE_CONFIG) -> np.ndarray:
    """All 32 per-axis features, in the axis_feature_names order."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or len(x) < 4:
        raise FeatureError(f"need a 1-d signal of length >= 4, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise FeatureError("signal contains non-finite values")

    n = len(x)
    mu = float(np.mean(x))
    centered = x - mu
    var = float(np.mean(centered**2))
    std = float(np.sqrt(var))
    diffs = np.diff(x)

    out = [
        mu,
        std,
        float(np.percentile(x, 75) - np.percentile(x, 25)),
        float(np.sum(x**2)),
        float(np.mean(np.abs(centered))),
        float(np.std(x, ddof=1) / np.sqrt(n)),
        float(np.mean(diffs)),
    ]
    for lag in cfg.ac_lags:
        out.append(float(np.mean(centered[:-lag] * centered[lag:])) if lag < n else 0.0)
    out.append(float(_longest_run(x > mu)))
    out.append(var)
    out.append(float(np.sum(np.abs(diffs))))
    out.append(float(np.mean(centered**4) / var**2 - 3.0) if var > 0 else 0.0)
    out.append(_sample_entropy(x, cfg.sampen_m, cfg.sampen_r_factor * std))
    for lag in cfg.ac_lags:
        if var > 0 and lag < n:
            out.append(float(np.mean(centered[:-lag] * centered[lag:]) / var))
        else:
            out.append(0.0)
    out.append(float(np.mean(np.abs(diffs))))
    out.append(float(np.sum(x)))
    out.append(float(np.mean(centered**3) / std**3) if std > 0 else 0.0)
    for q in cfg.quantile_levels:
        out.append(float(np.quantile(x, q)))
    out.append(float(np.median(x)))
    out.append(float(_longest_run(x < mu)))
    out.append(float(np.sqrt(np.sum(diffs**2))))
    out.extend(_spectral_block(x, cfg))
    return np.array(out, dtype=np.float64)


def extract(window: GestureWindow, cfg: FeatureConfig = DEFAULT_FEATURE_CONFIG) -> np.ndarray:
    """96-dimensional feature vector: X block, then Y, then Z."""
    blocks = [extract_axis(window.axis(axis), cfg) for axis in AXES]
    return np.concatenate(blocks)


def extract_many(windows: list, cfg: FeatureConfig = DEFAULT_FEATURE_CONFIG) -> np.ndarray:
    if not windows:
        return np.empty((0, len(feature_names(cfg))))
    return np.vstack([extract(w, cfg) for w in windows])


@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        safe = np.where(self.std > 0, self.std, 1.0)
        out = (x - self.mean) / safe
        return np.where(self.std > 0, out, 0.0)


def fit_standardizer(train: np.ndarray) -> StandardizationStats:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise FeatureError("standardizer needs at least two training rows")
    return StandardizationStats(mean=train.mean(axis=0), std=train.std(axis=0))


# ---------------------------------------------------------------------------
# feature matrix files: CSV + JSON manifest sidecar
# ---------------------------------------------------------------------------


def write_feature_csv(path, matrix: np.ndarray, meta: dict | None = None,
                      cfg: FeatureConfig = DEFAULT_FEATURE_CONFIG) -> None:
    """Write rows of features with optional leading metadata columns.

    meta maps column name -> list of per-row values (e.g. user, label); a
    manifest JSON with the feature layout lands next to the CSV.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    names = feature_names(cfg)
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise FeatureError(f"matrix must be (n, {len(names)})")
    meta = meta or {}
    header = list(meta) + names
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(matrix.shape[0]):
            row = [str(meta[k][i]) for k in meta]
            row += [f"{v:.10g}" for v in matrix[i]]
            fh.write(",".join(row) + "\n")
    manifest = {
        "feature_names": names,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "meta_columns": list(meta),
        "n_rows": int(matrix.shape[0]),
    }
    with open(str(path) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def read_feature_csv(path):
    """Returns (matrix, meta dict, manifest dict or None)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    manifest = None
    try:
        with open(str(path) + ".manifest.json") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        pass
    n_meta = len(manifest["meta_columns"]) if manifest else 0
    if not manifest:
        n_meta = next((i for i, h in enumerate(header) if h.startswith("gx_")), 0)
    meta_cols = header[:n_meta]
    rows = []
    meta: dict = {k: [] for k in meta_cols}
    with open(path) as fh:
        fh.readline()
        for line in fh:
            parts = line.rstrip("\n").split(",")
            for k, v in zip(meta_cols, parts[:n_meta]):
                meta[k].append(v)
            rows.append([float(v) for v in parts[n_meta:]])
    return np.array(rows, dtype=np.float64), meta, manifest
