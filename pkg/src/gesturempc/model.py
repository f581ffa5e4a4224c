"""Three-layer gesture classifier, identical in plaintext and shared mode.

Architecture: fc1 (d_in x 250), fc2 (250 x 80), fc3 (80 x 4), Leaky ReLU
between layers, raw logits out (no normalization before decryption,
argmax after).  Training minimizes mean squared error against one-hot
targets, full batch by default:

    L = mean((Y - O)^2)            over all N*C entries
    G = dL/dZ3 = 2/(N*C) * (O - Y)
    dW = X^T G,  db = sum_batch(G),  dX = G W^T
    between layers G gates through the Leaky ReLU derivative {1, alpha}

The same driver runs against two interchangeable backends: numpy floats,
or secret-shared fixed-point tensors where every activation, gradient and
parameter stays shared and only the per-epoch scalar loss is opened for
logging.  Bias gradients use the batch sum (the exact derivative of the
mean-reduced loss, which is what the finite-difference check validates);
any constant-factor convention is absorbed by the learning rate.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .fixedpoint import FixedPointConfig, DEFAULT_CONFIG
from .metrics import EvalReport, evaluate_outputs
from .mpc import LocalEngine, Transcript

HIDDEN1 = 250
HIDDEN2 = 80
N_CLASSES = 4

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")

_CKPT_MAGIC = b"GMCK"
_CKPT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass
class ModelParams:
    d_in: int
    values: dict

    def copy(self) -> "ModelParams":
        return ModelParams(self.d_in, {k: v.copy() for k, v in self.values.items()})


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.1   # absorbs any constant reduction factor
    leak_alpha: float = 0.01
    batch_size: int | None = None  # None: full batch
    seed: int = 0
    mode: str = "plain"            # "plain" | "mpc"
    n_parties: int = 2
    fp: FixedPointConfig = field(default_factory=lambda: DEFAULT_CONFIG)

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ModelError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ModelError("learning rate must be positive")
        if self.mode not in ("plain", "mpc"):
            raise ModelError(f"unknown mode {self.mode!r}")


@dataclass
class TrainResult:
    params: ModelParams
    loss_curve: list
    mode: str
    elapsed_s: float
    transcript: Transcript | None = None


def init_params(d_in: int, seed: int = 0) -> ModelParams:
    """Scaled-normal weights, Var(W) = 1/n_in per layer; zero biases."""
    if d_in < 1:
        raise ModelError("d_in must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [(d_in, HIDDEN1), (HIDDEN1, HIDDEN2), (HIDDEN2, N_CLASSES)]
    values = {}
    for i, (n_in, n_out) in enumerate(dims, start=1):
        values[f"W{i}"] = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out))
        values[f"b{i}"] = np.zeros(n_out)
    return ModelParams(d_in=d_in, values=values)


# ---------------------------------------------------------------------------
# execution backends
# ---------------------------------------------------------------------------


class PlainBackend:
    mode = "plain"

    def __init__(self, alpha: float):
        self.alpha = alpha

    def lift(self, array):
        return np.asarray(array, dtype=np.float64).copy()

    def matmul(self, a, b):
        return a @ b

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def scale(self, a, c):
        return a * c

    def transpose(self, a):
        return a.T

    def sum_batch(self, a):
        return a.sum(axis=0)

    def leaky_relu(self, z):
        return np.where(z > 0, z, self.alpha * z), np.where(z > 0, 1.0, self.alpha)

    def loss_scalar(self, diff):
        return float(np.mean(diff**2))

    def to_host(self, a):
        return np.asarray(a, dtype=np.float64)


class MpcBackend:
    """Same operation surface over secret-shared tensors."""

    mode = "mpc"

    def __init__(self, engine: LocalEngine, alpha: float):
        self.engine = engine
        self.alpha = alpha

    def lift(self, array):
        return self.engine.share(np.asarray(array, dtype=np.float64))

    def matmul(self, a, b):
        return self.engine.matmul(a, b)

    def add(self, a, b):
        return self.engine.add(a, b)

    def sub(self, a, b):
        return self.engine.sub(a, b)

    def mul(self, a, b):
        return self.engine.mul(a, b)

    def scale(self, a, c):
        return self.engine.scale_by_public(a, float(c))

    def transpose(self, a):
        return self.engine.transpose(a)

    def sum_batch(self, a):
        return self.engine.sum(a, 0)

    def leaky_relu(self, z):
        return self.engine.leaky_relu(z, self.alpha)

    def loss_scalar(self, diff):
        # exact double-scale squares: the opened scalar carries no
        # truncation bias, matching the plaintext mean reduction
        sq = self.engine.mul(diff, diff, rescale=False)
        total = self.engine.sum(self.engine.sum(sq, 1), 0)
        return float(self.engine.open(total)) / (diff.shape[0] * diff.shape[1])

    def to_host(self, a):
        return self.engine.open(a)


def _backend_for(cfg: TrainConfig, engine: LocalEngine | None = None):
    if cfg.mode == "plain":
        return PlainBackend(cfg.leak_alpha)
    engine = engine or LocalEngine(
        seed=cfg.seed, n_parties=cfg.n_parties, fp=cfg.fp
    )
    return MpcBackend(engine, cfg.leak_alpha)


# ---------------------------------------------------------------------------
# forward / loss / backward / update
# ---------------------------------------------------------------------------


def forward(be, params: dict, x):
    """Logits plus the activation cache the backward pass needs."""
    z1 = be.add(be.matmul(x, params["W1"]), params["b1"])
    a1, m1 = be.leaky_relu(z1)
    z2 = be.add(be.matmul(a1, params["W2"]), params["b2"])
    a2, m2 = be.leaky_relu(z2)
    logits = be.add(be.matmul(a2, params["W3"]), params["b3"])
    cache = {"x": x, "a1": a1, "m1": m1, "a2": a2, "m2": m2}
    return logits, cache


def mse_loss(logits, targets) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ModelError(f"shape mismatch {logits.shape} vs {targets.shape}")
    return float(np.mean((targets - logits) ** 2))


def backward(be, params: dict, cache: dict, logits, targets):
    """Exact gradients of the mean-reduced squared error for all six
    parameters."""
    n, c = logits.shape
    g3 = be.scale(be.sub(logits, targets), 2.0 / (n * c))
    grads = {
        "W3": be.matmul(be.transpose(cache["a2"]), g3),
        "b3": be.sum_batch(g3),
    }
    g2 = be.mul(be.matmul(g3, be.transpose(params["W3"])), cache["m2"])
    grads["W2"] = be.matmul(be.transpose(cache["a1"]), g2)
    grads["b2"] = be.sum_batch(g2)
    g1 = be.mul(be.matmul(g2, be.transpose(params["W2"])), cache["m1"])
    grads["W1"] = be.matmul(be.transpose(cache["x"]), g1)
    grads["b1"] = be.sum_batch(g1)
    return grads


def sgd_step(be, params: dict, grads: dict, eta: float) -> dict:
    return {k: be.sub(params[k], be.scale(grads[k], eta)) for k in params}


def train(x_train, y_train, cfg: TrainConfig, params: ModelParams | None = None) -> TrainResult:
    """Run the epoch loop; in mpc mode data, labels, activations, gradients
    and parameters all stay shared, and only the scalar loss is opened."""
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    if x_train.ndim != 2 or y_train.shape != (x_train.shape[0], N_CLASSES):
        raise ModelError("expected x (n, d_in) and one-hot y (n, 4)")
    base = params.copy() if params is not None else init_params(x_train.shape[1], cfg.seed)

    be = _backend_for(cfg)
    lifted = {k: be.lift(v) for k, v in base.values.items()}
    xs = be.lift(x_train)
    ys = be.lift(y_train)

    n = x_train.shape[0]
    batch = cfg.batch_size or n
    curve = []
    t0 = time.perf_counter()
    for _ in range(cfg.epochs):
        epoch_losses = []
        for lo in range(0, n, batch):
            hi = min(lo + batch, n)
            xb = _slice_rows(be, xs, lo, hi)
            yb = _slice_rows(be, ys, lo, hi)
            logits, cache = forward(be, lifted, xb)
            epoch_losses.append(be.loss_scalar(be.sub(logits, yb)))
            grads = backward(be, lifted, cache, logits, yb)
            lifted = sgd_step(be, lifted, grads, cfg.learning_rate)
        curve.append(float(np.mean(epoch_losses)))
    elapsed = time.perf_counter() - t0

    final = ModelParams(
        d_in=base.d_in, values={k: be.to_host(v) for k, v in lifted.items()}
    )
    transcript = be.engine.transcript if cfg.mode == "mpc" else None
    return TrainResult(
        params=final, loss_curve=curve, mode=cfg.mode, elapsed_s=elapsed,
        transcript=transcript,
    )


def _slice_rows(be, tensor, lo, hi):
    if isinstance(tensor, np.ndarray):
        return tensor[lo:hi]
    if lo == 0 and hi == tensor.shape[0]:
        return tensor
    planes = tensor.planes[..., lo:hi, :]
    from .mpc import SharedTensor

    return SharedTensor(
        np.ascontiguousarray(planes), (hi - lo,) + tensor.shape[1:], tensor.frac_bits
    )


def predict_logits(params: ModelParams, x, cfg: TrainConfig) -> np.ndarray:
    be = _backend_for(cfg)
    lifted = {k: be.lift(v) for k, v in params.values.items()}
    logits, _ = forward(be, lifted, be.lift(np.asarray(x, dtype=np.float64)))
    return be.to_host(logits)


def predict(params: ModelParams, x, cfg: TrainConfig | None = None) -> np.ndarray:
    cfg = cfg or TrainConfig(mode="plain")
    return np.argmax(predict_logits(params, x, cfg), axis=1)


def evaluate(params: ModelParams, x_test, y_test, cfg: TrainConfig | None = None) -> EvalReport:
    cfg = cfg or TrainConfig(mode="plain")
    y_test = np.asarray(y_test, dtype=np.float64)
    if y_test.shape[0] == 0:
        raise ModelError("empty test set")
    logits = predict_logits(params, x_test, cfg)
    return evaluate_outputs(logits, y_test)


# ---------------------------------------------------------------------------
# finite-difference gradient check
# ---------------------------------------------------------------------------


def gradient_check(params: ModelParams, x, y, alpha: float = 0.01,
                   n_probes: int = 20, h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error of analytic vs central-difference gradients over
    randomly probed parameter entries."""
    be = PlainBackend(alpha)
    values = {k: v.copy() for k, v in params.values.items()}
    logits, cache = forward(be, values, np.asarray(x, dtype=np.float64))
    grads = backward(be, values, cache, logits, np.asarray(y, dtype=np.float64))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in PARAM_NAMES:
        flat = values[name].reshape(-1)
        gflat = np.asarray(grads[name]).reshape(-1)
        for idx in rng.choice(flat.size, size=min(n_probes, flat.size), replace=False):
            orig = flat[idx]
            flat[idx] = orig + h
            lo_p, _ = forward(be, values, x)
            up = mse_loss(lo_p, y)
            flat[idx] = orig - h
            lo_m, _ = forward(be, values, x)
            down = mse_loss(lo_m, y)
            flat[idx] = orig
            fd = (up - down) / (2 * h)
            denom = max(abs(fd), abs(gflat[idx]), 1e-8)
            worst = max(worst, abs(fd - gflat[idx]) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoint file: magic, version, mode, d_in, fixed-point t, then
# little-endian float64 parameter planes
# ---------------------------------------------------------------------------


def save_checkpoint(path, params: ModelParams, mode: str = "plain",
                    precision_t: int = DEFAULT_CONFIG.precision_t) -> None:
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<HBIH", _CKPT_VERSION, 1 if mode == "mpc" else 0,
                             params.d_in, precision_t))
        fh.write(struct.pack("<H", len(PARAM_NAMES)))
        for name in PARAM_NAMES:
            arr = np.asarray(params.values[name], dtype="<f8")
            nb = name.encode()
            fh.write(struct.pack("<B", len(nb)) + nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Returns (ModelParams, meta dict with mode and precision_t)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _CKPT_MAGIC:
            raise ModelError("not a checkpoint file")
        version, mode_flag, d_in, t = struct.unpack("<HBIH", fh.read(9))
        if version != _CKPT_VERSION:
            raise ModelError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack("<H", fh.read(2))
        values = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<B", fh.read(1))
            name = fh.read(nlen).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            data = np.frombuffer(
                fh.read(8 * int(np.prod(shape))), dtype="<f8"
            ).reshape(shape)
            values[name] = data.astype(np.float64)
    meta = {"mode": "mpc" if mode_flag else "plain", "precision_t": t}
    return ModelParams(d_in=d_in, values=values), meta
