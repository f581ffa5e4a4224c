"""Execution engines for secret-shared tensor programs.

The math lives once in TensorEngineBase, written SPMD-style over share
planes; subclasses provide the party topology.  LocalEngine evaluates all
parties in one process (planes stacked on a leading axis) and doubles as
the single-process reference execution for the distributed runtime, which
plugs in a transport-backed engine with the same hooks.

Protocol costs (opening rounds) per operation:

    add / sub / neg / scale_by_public / add_public / sum / mean   0
    mul / matmul / select                                          1
    gt_zero                                                        7
    leaky_relu (gt_zero + masked select)                           8

Sign extraction opens x + r for a dealer-supplied uniform mask r whose low
COMPARISON_BITS bits are shared, then evaluates the public-minus-shared
borrow circuit on the masked value: a tree fold over 31 bit lanes (5
batched multiplication rounds) plus one XOR round recovers the range bit
of x without revealing it.

Products are rescaled by local share truncation (each party shifts its own
share).  This is exact to 1 ulp except when the share sum wraps the ring,
which happens with probability about |value| / 2^64 per element; at the
default precision and standardized data magnitudes that is ~2^-28 and the
seeded test fixtures are verified clean.  Division only ever appears as
multiplication by a public reciprocal.
"""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, field

import numpy as np

from ..fixedpoint import FixedPointConfig, DEFAULT_CONFIG, RING_MODULUS
from ..sharing import COMPARISON_BITS, TripleDealer, split_planes
from .tensor import SharedTensor, ShapeMismatchError

# Opening rounds per public operation, used by tests as the static analysis
# the live transcript must match.
OP_ROUNDS = {
    "add": 0,
    "sub": 0,
    "neg": 0,
    "scale_by_public": 0,
    "add_public": 0,
    "sum": 0,
    "mean": 0,
    "transpose": 0,
    "reshape": 0,
    "mul": 1,
    "matmul": 1,
    "select": 1,
    "gt_zero": 7,
    "leaky_relu": 8,
    "open": 1,
    "reveal": 1,
}

# Extra precision carried by public reciprocals in mean(); keeps the
# rescale error within one fixed-point ulp for count * |mean| <= 2^8.
MEAN_RECIP_BITS = 8


class RandomnessExhaustedError(RuntimeError):
    """Dealer refused or ran out of correlated randomness."""


@dataclass
class Transcript:
    """Communication accounting for one engine: rounds, bytes, randomness.

    payload_bytes counts share words actually exchanged (sum over senders),
    excluding any transport framing, so in-process and TCP sessions agree.
    """

    rounds: int = 0
    payload_bytes: int = 0
    triples: int = 0
    comparisons: int = 0
    ops: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def op_entry(self, label: str) -> dict:
        return self.ops.setdefault(
            label,
            {"count": 0, "rounds": 0, "payload_bytes": 0, "triples": 0, "comparisons": 0},
        )

    def snapshot(self) -> tuple:
        return (self.rounds, self.payload_bytes, self.triples, self.comparisons)

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "payload_bytes": self.payload_bytes,
            "triples": self.triples,
            "comparisons": self.comparisons,
            "ops": self.ops,
            "timings": self.timings,
        }


class TensorEngineBase:
    """Shared-tensor operation set over engine-specific share planes."""

    #: number of leading party axes in plane arrays (1 stacked, 0 party-local)
    pax: int = 1

    def __init__(self, n_parties: int, fp: FixedPointConfig = DEFAULT_CONFIG,
                 transcript: Transcript | None = None):
        self.n_parties = n_parties
        self.fp = fp
        self.transcript = transcript if transcript is not None else Transcript()
        self._op_depth = 0

    # ------------------------------------------------------------------
    # topology hooks
    # ------------------------------------------------------------------

    def _exchange_open(self, planes_list: list) -> list:
        """One synchronous opening round for a batch of plane arrays."""
        raise NotImplementedError

    def _party0_add(self, planes: np.ndarray, pub: np.ndarray) -> np.ndarray:
        """Add a public value into party 0's plane (mutates and returns planes)."""
        raise NotImplementedError

    def _fresh_mul_triple(self, shape: tuple) -> tuple:
        raise NotImplementedError

    def _fresh_matmul_triple(self, dims: tuple) -> tuple:
        raise NotImplementedError

    def _fresh_comparison(self, shape: tuple) -> tuple:
        raise NotImplementedError

    # ------------------------------------------------------------------
    # bookkeeping
    # ------------------------------------------------------------------

    @contextlib.contextmanager
    def _op(self, label: str):
        if self._op_depth:
            # nested helper inside a public op: cost rolls up to the outer label
            with np.errstate(over="ignore"):
                yield
            return
        self._op_depth += 1
        before = self.transcript.snapshot()
        t0 = time.perf_counter()
        try:
            with np.errstate(over="ignore"):
                yield
        finally:
            self._op_depth -= 1
            after = self.transcript.snapshot()
            entry = self.transcript.op_entry(label)
            entry["count"] += 1
            entry["rounds"] += after[0] - before[0]
            entry["payload_bytes"] += after[1] - before[1]
            entry["triples"] += after[2] - before[2]
            entry["comparisons"] += after[3] - before[3]
            self.transcript.timings[label] = (
                self.transcript.timings.get(label, 0.0) + time.perf_counter() - t0
            )

    def _open_raw(self, planes_list: list) -> list:
        """Open a batch of plane arrays in one round, with accounting."""
        words = sum(int(np.prod(p.shape[self.pax:], dtype=np.int64)) for p in planes_list)
        self.transcript.rounds += 1
        self.transcript.payload_bytes += self._round_bytes(words)
        return self._exchange_open(planes_list)

    def _round_bytes(self, words: int) -> int:
        # every party sends its plane to the n-1 others
        return 8 * words * self.n_parties * (self.n_parties - 1)

    # ------------------------------------------------------------------
    # plane helpers
    # ------------------------------------------------------------------

    def _logical_shape(self, planes: np.ndarray) -> tuple:
        return planes.shape[self.pax:]

    def _expand(self, st: SharedTensor, target: tuple) -> np.ndarray:
        """Broadcast a tensor's planes to a larger logical shape."""
        if st.shape == tuple(target):
            return st.planes
        extra = len(target) - st.ndim
        if extra < 0:
            raise ShapeMismatchError(f"cannot broadcast {st.shape} to {target}")
        idx = (slice(None),) * self.pax + (None,) * extra
        full = st.planes[idx]
        return np.broadcast_to(full, st.planes.shape[: self.pax] + tuple(target))

    def _encode_public(self, value, frac_bits: int) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64)
        bound = float(1 << (63 - frac_bits)) if frac_bits else float(1 << 62)
        if np.any(np.abs(arr) >= bound):
            raise OverflowError(f"public value exceeds ring bound at frac={frac_bits}")
        scaled = arr * float(1 << frac_bits)
        rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
        out = rounded.astype(np.int64).view(np.uint64)
        return out

    def _decode(self, ring: np.ndarray, frac_bits: int) -> np.ndarray:
        return np.asarray(ring, dtype=np.uint64).view(np.int64).astype(np.float64) / float(
            1 << frac_bits
        )

    def _local_trunc(self, planes: np.ndarray, by: int, round_half: bool = False) -> np.ndarray:
        """Per-party rescale by 2^-by: party 0 floors, party 1 takes ceilings.

        Correct (to 1 ulp, modulo the documented wrap probability) only for
        two computing parties; with more, the signed share sum wraps the
        ring too often for the local trick to hold.
        """
        if self.n_parties != 2:
            raise NotImplementedError(
                "fixed-point rescaling (mul/matmul/mean/fractional scaling) "
                "requires the 2-party + dealer topology"
            )
        if round_half:
            planes = self._party0_add(np.array(planes), np.uint64(1 << (by - 1)))
        signed = np.asarray(planes, dtype=np.uint64).view(np.int64)
        out = np.empty_like(signed)
        self._trunc_signed(signed, out, np.int64(by))
        return out.view(np.uint64)

    def _trunc_signed(self, signed: np.ndarray, out: np.ndarray, by: np.int64) -> None:
        raise NotImplementedError

    def _check_same_frac(self, x: SharedTensor, y: SharedTensor) -> None:
        if x.frac_bits != y.frac_bits:
            raise ShapeMismatchError(
                f"scale mismatch: {x.frac_bits} vs {y.frac_bits} fractional bits"
            )

    # ------------------------------------------------------------------
    # local (round-free) operations
    # ------------------------------------------------------------------

    def _broadcast_target(self, x: SharedTensor, y: SharedTensor) -> tuple:
        try:
            return np.broadcast_shapes(x.shape, y.shape)
        except ValueError as exc:
            raise ShapeMismatchError(f"shapes {x.shape} and {y.shape}: {exc}") from None

    def add(self, x: SharedTensor, y: SharedTensor) -> SharedTensor:
        self._check_same_frac(x, y)
        with self._op("add"):
            target = self._broadcast_target(x, y)
            planes = self._expand(x, target) + self._expand(y, target)
            return SharedTensor(planes, target, x.frac_bits)

    def sub(self, x: SharedTensor, y: SharedTensor) -> SharedTensor:
        self._check_same_frac(x, y)
        with self._op("sub"):
            target = self._broadcast_target(x, y)
            planes = self._expand(x, target) - self._expand(y, target)
            return SharedTensor(planes, target, x.frac_bits)

    def neg(self, x: SharedTensor) -> SharedTensor:
        with self._op("neg"):
            return x.with_planes(np.zeros_like(x.planes) - x.planes)

    def scale_by_public(self, x: SharedTensor, c) -> SharedTensor:
        """Multiply by a public scalar; integers are exact, reals cost one
        local truncation."""
        with self._op("scale_by_public"):
            if isinstance(c, (int, np.integer)):
                k = np.uint64(int(c) % RING_MODULUS)
                return x.with_planes(x.planes * k)
            t = self.fp.precision_t
            k = self._encode_public(float(c), t)
            planes = x.planes * k
            new_frac = x.frac_bits + t
            if new_frac > t:
                planes = self._local_trunc(planes, new_frac - t)
                new_frac = t
            return x.with_planes(planes, frac_bits=new_frac)

    def add_public(self, x: SharedTensor, value) -> SharedTensor:
        with self._op("add_public"):
            pub = self._encode_public(value, x.frac_bits)
            pub = np.broadcast_to(pub, x.shape) if x.shape else pub
            planes = self._party0_add(np.array(x.planes), pub)
            return x.with_planes(planes)

    def sum(self, x: SharedTensor, axis: int) -> SharedTensor:
        with self._op("sum"):
            ax = axis % x.ndim
            planes = x.planes.sum(axis=self.pax + ax, dtype=np.uint64)
            shape = x.shape[:ax] + x.shape[ax + 1:]
            return SharedTensor(planes, shape, x.frac_bits)

    def mean(self, x: SharedTensor, axis: int) -> SharedTensor:
        """Mean along an axis: local sum, then multiply by the public
        reciprocal carried at t + MEAN_RECIP_BITS fractional bits."""
        ax = axis % x.ndim
        count = x.shape[ax]
        if count == 0:
            raise ShapeMismatchError("mean over an empty axis")
        with self._op("mean"):
            summed = self.sum(x, ax)
            u = self.fp.precision_t + MEAN_RECIP_BITS
            recip = np.uint64(round((1 << u) / count))
            planes = summed.planes * recip
            planes = self._local_trunc(planes, u, round_half=True)
            return summed.with_planes(planes)

    def transpose(self, x: SharedTensor) -> SharedTensor:
        if x.ndim != 2:
            raise ShapeMismatchError("transpose expects a 2-d tensor")
        with self._op("transpose"):
            return SharedTensor(
                np.swapaxes(x.planes, -1, -2).copy(), (x.shape[1], x.shape[0]), x.frac_bits
            )

    def reshape(self, x: SharedTensor, shape: tuple) -> SharedTensor:
        with self._op("reshape"):
            planes = x.planes.reshape(x.planes.shape[: self.pax] + tuple(shape))
            return SharedTensor(planes, shape, x.frac_bits)

    # ------------------------------------------------------------------
    # interactive operations
    # ------------------------------------------------------------------

    def _sharevec_planes(self, sv) -> np.ndarray:
        """Local-layout planes of an externally supplied ShareVector."""
        raise NotImplementedError

    def _adopt_mul_triple(self, triple, shape: tuple) -> tuple:
        got = np.asarray(triple.a.shares[0], dtype=np.uint64).shape
        if got != tuple(shape):
            raise ShapeMismatchError(f"triple shape {got} does not match operands {shape}")
        triple.mark_consumed()
        self.transcript.triples += 1
        return tuple(self._sharevec_planes(sv) for sv in (triple.a, triple.b, triple.c))

    def _beaver_mul_raw(self, xp: np.ndarray, yp: np.ndarray, triple=None) -> np.ndarray:
        """Beaver product of two plane arrays; one opening round, no rescale."""
        shape = self._logical_shape(xp)
        if triple is None:
            a, b, c = self._fresh_mul_triple(shape)
        else:
            a, b, c = self._adopt_mul_triple(triple, shape)
        eps, delta = self._open_raw([xp - a, yp - b])
        z = c + eps * b + delta * a
        return self._party0_add(z, eps * delta)

    def mul(self, x: SharedTensor, y: SharedTensor, triple=None,
            rescale: bool = True) -> SharedTensor:
        """Element-wise product; rescales to t fractional bits when both
        operands carry fixed-point scale.  rescale=False keeps the exact
        double-scale product (caller owns the headroom)."""
        with self._op("mul"):
            target = self._broadcast_target(x, y)
            planes = self._beaver_mul_raw(
                self._expand(x, target), self._expand(y, target), triple=triple
            )
            new_frac = x.frac_bits + y.frac_bits
            t = self.fp.precision_t
            if rescale and new_frac > t:
                planes = self._local_trunc(planes, new_frac - t)
                new_frac = t
            return SharedTensor(planes, target, new_frac)

    def matmul(self, x: SharedTensor, y: SharedTensor, triple=None) -> SharedTensor:
        if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[0]:
            raise ShapeMismatchError(f"matmul dims {x.shape} x {y.shape}")
        with self._op("matmul"):
            n, k = x.shape
            m = y.shape[1]
            if triple is None:
                a, b, c = self._fresh_matmul_triple((n, k, m))
            else:
                if tuple(triple.dims) != (n, k, m):
                    raise ShapeMismatchError(
                        f"matmul triple dims {triple.dims} do not match {(n, k, m)}"
                    )
                triple.mark_consumed()
                self.transcript.triples += 1
                a, b, c = (self._sharevec_planes(sv) for sv in (triple.a, triple.b, triple.c))
            eps, delta = self._open_raw([x.planes - a, y.planes - b])
            z = c + np.matmul(eps, b) + np.matmul(a, delta)
            z = self._party0_add(z, np.matmul(eps, delta))
            new_frac = x.frac_bits + y.frac_bits
            t = self.fp.precision_t
            if new_frac > t:
                z = self._local_trunc(z, new_frac - t)
                new_frac = t
            return SharedTensor(z, (n, m), new_frac)

    def gt_zero(self, x: SharedTensor, randomness=None) -> SharedTensor:
        """Shared {0,1} mask of x > 0 (integer scale); x == 0 maps to 0.

        Valid for shared ring magnitudes below 2^(COMPARISON_BITS - 1),
        i.e. decoded |x| < 2^(31 - t) at the default width.
        """
        with self._op("gt_zero"):
            # x > 0  <=>  bit L-1 of (x + 2^(L-1) - 1), when |x| < 2^(L-1)
            offset = np.uint64((1 << (COMPARISON_BITS - 1)) - 1)
            z = self._party0_add(np.array(x.planes), offset)
            mask = self._extract_bit(z, x.shape, randomness=randomness)
            return SharedTensor(mask, x.shape, 0)

    def _extract_bit(self, z_planes: np.ndarray, shape: tuple, randomness=None) -> np.ndarray:
        """Shared bit L-1 of a shared value known to lie in [0, 2^L).

        Opens z + r for a uniform dealer mask r, then evaluates the public-
        minus-shared borrow circuit on the low L bits of z = m - r: a tree
        fold of (generate, propagate) pairs, one batched multiplication
        round per level, plus a final XOR round.
        """
        L = COMPARISON_BITS
        if randomness is None:
            r_planes, bit_planes = self._fresh_comparison(shape)
        else:
            if randomness.consumed:
                raise RandomnessExhaustedError(
                    f"comparison randomness #{randomness.index} already consumed"
                )
            got = np.asarray(randomness.r.shares[0], dtype=np.uint64).shape
            if got != tuple(shape):
                raise ShapeMismatchError(f"comparison randomness shape {got} != {shape}")
            randomness.mark_consumed()
            self.transcript.comparisons += 1
            r_planes = self._sharevec_planes(randomness.r)
            bit_planes = self._sharevec_planes(randomness.bits)
        (m_pub,) = self._open_raw([z_planes + r_planes])

        lanes = np.arange(L, dtype=np.uint64)
        m_bits = (np.asarray(m_pub, dtype=np.uint64)[..., None] >> lanes) & np.uint64(1)
        m_low = m_bits[..., : L - 1]
        m_top = m_bits[..., L - 1]
        rb_low = np.ascontiguousarray(bit_planes[..., : L - 1])
        rb_top = np.ascontiguousarray(bit_planes[..., L - 1])

        # z = m - r bitwise: per-lane borrow generate/propagate are affine
        # in the shared bits of r because m is public.
        one = np.uint64(1)
        two = np.uint64(2)
        g = rb_low * (one - m_low)
        p = rb_low * (two * m_low - one)
        p = self._party0_add(p, one - m_low)

        # Fold (g, p) over lanes 0..L-2 under the borrow composition
        # (g2,p2) o (g1,p1) = (g2 + p2*g1, p2*p1): adjacent lanes pair up in
        # a tree, both products of a level batched into one opening round.
        while g.shape[-1] > 1:
            width = g.shape[-1]
            even = width - width % 2
            g_lo, g_hi = g[..., 0:even:2], g[..., 1:even:2]
            p_lo, p_hi = p[..., 0:even:2], p[..., 1:even:2]
            u = np.ascontiguousarray(np.concatenate([p_hi, p_hi], axis=-1))
            v = np.ascontiguousarray(np.concatenate([g_lo, p_lo], axis=-1))
            prod = self._beaver_mul_raw(u, v)
            half = g_hi.shape[-1]
            g_new = g_hi + prod[..., :half]
            p_new = np.ascontiguousarray(prod[..., half:])
            if even < width:
                g_new = np.concatenate([g_new, g[..., even:]], axis=-1)
                p_new = np.concatenate([p_new, p[..., even:]], axis=-1)
            g, p = g_new, p_new
        borrow = np.ascontiguousarray(g[..., 0])

        # bit = m_top xor r_top xor borrow; one product for the shared XOR,
        # the public XOR is affine.
        prod = self._beaver_mul_raw(rb_top, borrow)
        s = rb_top + borrow - two * prod
        coeff = one - two * m_top
        out = s * coeff
        return self._party0_add(np.array(out), m_top)

    def select(self, mask: SharedTensor, x: SharedTensor, y: SharedTensor) -> SharedTensor:
        """Oblivious choice: mask*x + (1-mask)*y for a shared bit mask."""
        if mask.frac_bits != 0:
            raise ShapeMismatchError("select mask must be integer-scale shared bits")
        self._check_same_frac(x, y)
        with self._op("select"):
            diff = self.sub(x, y)
            gated = self.mul(mask, diff)
            return self.add(y, gated)

    def open_ring(self, st: SharedTensor) -> np.ndarray:
        """Open to all parties, returning the raw ring value."""
        with self._op("open"):
            (ring,) = self._open_raw([st.planes])
            return ring

    def open(self, st: SharedTensor) -> np.ndarray:
        """Open to all parties and decode at the tensor's scale."""
        return self._decode(self.open_ring(st), st.frac_bits)

    def leaky_relu(self, x: SharedTensor, alpha: float, randomness=None) -> tuple:
        """Piecewise activation and its derivative mask, both shared.

        activation = x where x > 0 else alpha*x; grad mask = 1 / alpha.
        """
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"leak alpha must be in (0, 1), got {alpha}")
        with self._op("leaky_relu"):
            mask = self.gt_zero(x, randomness=randomness)
            scaled = self.scale_by_public(x, alpha)
            act = self.add(scaled, self.mul(mask, self.sub(x, scaled)))
            grad = self.add_public(self.scale_by_public(mask, 1.0 - alpha), alpha)
            return act, grad


class LocalEngine(TensorEngineBase):
    """All parties simulated in-process; planes carry a leading party axis.

    Given the same seed this produces bit-identical share planes and opened
    values as a distributed session, so it serves as the reference
    execution for transport tests.
    """

    pax = 1

    # seed-derivation tags shared with the distributed runtime
    TAG_DEALER = 11
    TAG_INPUT = 12

    def __init__(self, seed: int = 0, n_parties: int = 2,
                 fp: FixedPointConfig = DEFAULT_CONFIG,
                 transcript: Transcript | None = None):
        super().__init__(n_parties, fp, transcript)
        self.seed = seed
        self.dealer = TripleDealer(self._derive_seed(self.TAG_DEALER), n_parties)
        self._input_counters: dict = {}

    def _derive_seed(self, tag: int, *rest) -> int:
        return int(np.random.SeedSequence((self.seed, tag) + rest).generate_state(1)[0])

    def _input_rng(self, owner: int) -> np.random.Generator:
        k = self._input_counters.get(owner, 0)
        self._input_counters[owner] = k + 1
        return np.random.default_rng(
            np.random.SeedSequence((self.seed, self.TAG_INPUT, owner, k))
        )

    # -- sharing / opening -------------------------------------------------

    def share(self, values, frac_bits: int | None = None, owner: int = 0) -> SharedTensor:
        frac = self.fp.precision_t if frac_bits is None else frac_bits
        ring = self._encode_public(np.asarray(values, dtype=np.float64), frac)
        return self.share_ring(ring, frac, owner=owner)

    def share_ring(self, ring, frac_bits: int, owner: int = 0) -> SharedTensor:
        ring = np.asarray(ring, dtype=np.uint64)
        planes = split_planes(ring, self.n_parties, self._input_rng(owner))
        return SharedTensor(planes, ring.shape, frac_bits)

    # -- hooks --------------------------------------------------------------

    def _exchange_open(self, planes_list: list) -> list:
        return [p.sum(axis=0, dtype=np.uint64) for p in planes_list]

    def _party0_add(self, planes: np.ndarray, pub) -> np.ndarray:
        planes[0] = planes[0] + np.asarray(pub, dtype=np.uint64)
        return planes

    def _sharevec_planes(self, sv) -> np.ndarray:
        return np.stack([np.asarray(s, dtype=np.uint64) for s in sv.shares])

    def _trunc_signed(self, signed: np.ndarray, out: np.ndarray, by: np.int64) -> None:
        out[0] = signed[0] >> by
        np.negative((np.zeros_like(signed[1:]) - signed[1:]) >> by, out=out[1:])

    def _fresh_mul_triple(self, shape: tuple) -> tuple:
        idx = self.dealer._next_index("mul")
        self.transcript.triples += 1
        return self.dealer.mul_triple_planes(idx, tuple(shape))

    def _fresh_matmul_triple(self, dims: tuple) -> tuple:
        idx = self.dealer._next_index("matmul")
        self.transcript.triples += 1
        return self.dealer.matmul_triple_planes(idx, tuple(dims))

    def _fresh_comparison(self, shape: tuple) -> tuple:
        idx = self.dealer._next_index("cmp")
        self.transcript.comparisons += 1
        return self.dealer.comparison_planes(idx, tuple(shape))
