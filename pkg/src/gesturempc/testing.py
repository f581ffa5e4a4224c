"""Randomized oracle-equivalence checks for the shared-tensor engine.

Builds random expression trees over the full operation set, evaluates them
once on shared tensors and once in plain float arithmetic on the same
grid-quantized inputs, and reports the worst absolute deviation.  Programs
are generated so comparisons always see inputs with a safe margin from
zero (a sign flip at the quantization boundary is a property of the grid,
not an engine defect) and intermediate magnitudes stay inside the
comparison range.
"""

from __future__ import annotations

import numpy as np

from . import fixedpoint as fx
from .mpc import LocalEngine

MAGNITUDE_CAP = 16.0
SIGN_MARGIN = 2.0**-8
_OFFSETS = (0.11, 0.23, 0.37, 0.53)


def _with_sign_margin(eng, node):
    st, ref = node
    if np.min(np.abs(ref)) >= SIGN_MARGIN:
        return node
    for off in _OFFSETS:
        if np.min(np.abs(ref + off)) >= SIGN_MARGIN:
            return eng.add_public(st, off), ref + off
    return None


def _rescaled(eng, st, ref):
    # keep magnitudes inside the comparison precondition; 1/16 is exact in
    # fixed point so the oracle stays aligned
    while np.max(np.abs(ref)) > MAGNITUDE_CAP:
        st = eng.scale_by_public(st, 0.0625)
        ref = ref * 0.0625
    return st, ref


def random_program_check(seed: int, depth: int = 6) -> float:
    """Run one random tensor program; return max abs error vs the oracle."""
    rng = np.random.default_rng(seed)
    eng = LocalEngine(seed=int(seed) + 40_000)
    k = int(rng.integers(2, 7))
    alpha = 0.01

    pool = []
    for _ in range(3):
        vals = fx.decode(fx.encode(rng.uniform(-8, 8, (k, k))))
        pool.append((eng.share(vals), vals))

    def pick():
        return pool[int(rng.integers(0, len(pool)))]

    for _ in range(depth):
        op = rng.choice(
            ["add", "sub", "scale", "mul", "matmul", "leaky_relu", "select", "mean"]
        )
        if op == "add":
            (sx, rx), (sy, ry) = pick(), pick()
            node = eng.add(sx, sy), rx + ry
        elif op == "sub":
            (sx, rx), (sy, ry) = pick(), pick()
            node = eng.sub(sx, sy), rx - ry
        elif op == "scale":
            (sx, rx) = pick()
            c = float(rng.uniform(-2, 2))
            node = eng.scale_by_public(sx, c), rx * c
        elif op == "mul":
            (sx, rx), (sy, ry) = pick(), pick()
            node = eng.mul(sx, sy), rx * ry
        elif op == "matmul":
            (sx, rx), (sy, ry) = pick(), pick()
            node = eng.matmul(sx, sy), rx @ ry
        elif op == "leaky_relu":
            guarded = _with_sign_margin(eng, pick())
            if guarded is None:
                continue
            sx, rx = guarded
            act, grad = eng.leaky_relu(sx, alpha)
            pool.append((grad, np.where(rx > 0, 1.0, alpha)))
            node = act, np.where(rx > 0, rx, alpha * rx)
        elif op == "select":
            guarded = _with_sign_margin(eng, pick())
            if guarded is None:
                continue
            sc, rc = guarded
            (sx, rx), (sy, ry) = pick(), pick()
            mask = eng.gt_zero(sc)
            node = eng.select(mask, sx, sy), np.where(rc > 0, rx, ry)
        else:
            (sx, rx) = pick()
            axis = int(rng.integers(0, 2))
            m = eng.mean(sx, axis)
            # means drop an axis; re-lift so later ops keep the pool shape
            node = (
                eng.add(eng.reshape(m, (1, k) if axis == 0 else (k, 1)), eng.share(np.zeros((k, k)))),
                np.broadcast_to(
                    rx.mean(axis=axis).reshape((1, k) if axis == 0 else (k, 1)), (k, k)
                ).copy(),
            )
        pool.append(_rescaled(eng, *node))

    return max(float(np.max(np.abs(eng.open(st) - ref))) for st, ref in pool)
