"""Additive secret sharing over Z_{2^64} and trusted-dealer Beaver triples.

A secret is split into n uniformly random residues summing to it mod 2^64;
any n-1 shares are marginally uniform and reveal nothing.  Multiplication
of two shared values is accelerated by Beaver triples (a, b, c = a*b): the
dealer emits them offline from correlated randomness and never touches
live data.

Triple generation is counter-keyed from the dealer seed, so a given dealer
seed always produces the identical triple stream regardless of request
interleaving.  Triples are single-use; the product share c is the exact
ring product and therefore lives at the combined scale of its factors
(2^2t for two fixed-point operands) until the consumer rescales.

Security model: semi-honest parties with a trusted dealer.  Nothing here
defends against active deviation from the protocol.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .fixedpoint import RING_MODULUS

_MAGIC = b"GMT1"


class MissingShareError(ValueError):
    """A share vector with absent shares cannot be reconstructed."""


class TripleReuseError(RuntimeError):
    """Beaver triples are one-time; a second consumption is a protocol bug."""


def random_ring(rng: np.random.Generator, shape=()) -> np.ndarray:
    return rng.integers(0, RING_MODULUS, size=shape, dtype=np.uint64)


@dataclass
class ShareVector:
    """Additive shares of one secret (scalar or tensor) across n parties."""

    shares: list

    @property
    def party_count(self) -> int:
        return len(self.shares)

    def __post_init__(self) -> None:
        if len(self.shares) < 2:
            raise ValueError("additive sharing needs at least 2 parties")


def split(secret, n: int, rng: np.random.Generator) -> ShareVector:
    """Split a ring element into n shares: n-1 uniform, last = secret - sum."""
    if n < 2:
        raise ValueError(f"party count must be >= 2, got {n}")
    secret = np.asarray(secret, dtype=np.uint64)
    planes = split_planes(secret, n, rng)
    return ShareVector(shares=[planes[i].reshape(secret.shape) for i in range(n)])


def split_planes(secret: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized split: returns an (n, *shape) stack of share planes."""
    secret = np.asarray(secret, dtype=np.uint64)
    with np.errstate(over="ignore"):
        planes = np.empty((n,) + secret.shape, dtype=np.uint64)
        planes[:-1] = random_ring(rng, (n - 1,) + secret.shape)
        last = secret - planes[0]
        for i in range(1, n - 1):
            last = last - planes[i]
        planes[-1] = last
    return planes


def reconstruct(sv: ShareVector):
    if any(s is None for s in sv.shares):
        raise MissingShareError("cannot reconstruct: one or more shares missing")
    total = np.zeros_like(np.asarray(sv.shares[0], dtype=np.uint64))
    with np.errstate(over="ignore"):
        for s in sv.shares:
            total = total + np.asarray(s, dtype=np.uint64)
    return total


@dataclass
class BeaverTriple:
    """Shares of (a, b, c) with c the exact ring product of a and b.

    For fixed-point operands at scale 2^t the product c sits at scale 2^2t;
    rescaling to 2^t is the consumer's responsibility (the dealer never
    truncates, keeping the Beaver identity x*y = c + eps*b + delta*a +
    eps*delta exact in the ring).
    """

    a: ShareVector
    b: ShareVector
    c: ShareVector
    index: int = 0
    consumed: bool = field(default=False, compare=False)

    def mark_consumed(self) -> None:
        if self.consumed:
            raise TripleReuseError(f"triple #{self.index} already consumed")
        self.consumed = True


@dataclass
class MatmulTriple:
    """Matrix-shaped triple: A (n x k), B (k x m), C = A @ B exactly."""

    a: ShareVector
    b: ShareVector
    c: ShareVector
    dims: tuple
    index: int = 0
    consumed: bool = field(default=False, compare=False)

    def mark_consumed(self) -> None:
        if self.consumed:
            raise TripleReuseError(f"matmul triple #{self.index} already consumed")
        self.consumed = True


@dataclass
class ComparisonRandomness:
    """Dealer material for one sign extraction: mask r plus its shared bits.

    bits holds additive shares of the (*shape, COMPARISON_BITS) low-bit
    decomposition of r, every bit stored as a ring element in {0, 1}.
    One-time use, like triples.
    """

    r: ShareVector
    bits: ShareVector
    index: int = 0
    consumed: bool = field(default=False, compare=False)

    def mark_consumed(self) -> None:
        if self.consumed:
            raise TripleReuseError(f"comparison randomness #{self.index} already consumed")
        self.consumed = True


# Bit width of comparison randomness: sign extraction works for shared
# values of ring magnitude below 2^(COMPARISON_BITS - 1).
COMPARISON_BITS = 32


class TripleDealer:
    """Trusted dealer emitting correlated randomness, keyed by seed + counter.

    The k-th object of each kind is generated from a SeedSequence derived
    from (seed, kind, k): identical across reruns and across parties
    requesting their own cut of the same logical object.  Philox keeps bulk
    generation cheap; streams are deterministic for a fixed seed.
    """

    def __init__(self, seed: int, n_parties: int = 2):
        if n_parties < 2:
            raise ValueError("dealer needs at least 2 computing parties")
        self.seed = seed
        self.n_parties = n_parties
        self.issued = {"mul": 0, "matmul": 0, "cmp": 0}

    def _rng(self, kind: str, index: int) -> np.random.Generator:
        tag = {"mul": 1, "matmul": 2, "cmp": 3}[kind]
        return np.random.Generator(
            np.random.Philox(np.random.SeedSequence((self.seed, tag, index)))
        )

    def _next_index(self, kind: str) -> int:
        idx = self.issued[kind]
        self.issued[kind] = idx + 1
        return idx

    # -- generation at a fixed index (shared by local and served modes) --

    def mul_triple_planes(self, index: int, shape: tuple):
        rng = self._rng("mul", index)
        a = random_ring(rng, shape)
        b = random_ring(rng, shape)
        c = a * b
        return tuple(split_planes(v, self.n_parties, rng) for v in (a, b, c))

    def matmul_triple_planes(self, index: int, dims: tuple):
        n, k, m = dims
        rng = self._rng("matmul", index)
        a = random_ring(rng, (n, k))
        b = random_ring(rng, (k, m))
        c = np.matmul(a, b)
        return tuple(split_planes(v, self.n_parties, rng) for v in (a, b, c))

    def comparison_planes(self, index: int, shape: tuple):
        rng = self._rng("cmp", index)
        r = random_ring(rng, shape)
        lanes = np.arange(COMPARISON_BITS, dtype=np.uint64)
        bits = (r[..., None] >> lanes) & np.uint64(1)
        return (
            split_planes(r, self.n_parties, rng),
            split_planes(bits, self.n_parties, rng),
        )

    # -- ShareVector-level API --

    def next_mul_triple(self, shape: tuple = ()) -> BeaverTriple:
        idx = self._next_index("mul")
        pa, pb, pc = self.mul_triple_planes(idx, shape)
        return BeaverTriple(
            a=ShareVector(list(pa)), b=ShareVector(list(pb)), c=ShareVector(list(pc)),
            index=idx,
        )

    def next_matmul_triple(self, dims: tuple) -> MatmulTriple:
        idx = self._next_index("matmul")
        pa, pb, pc = self.matmul_triple_planes(idx, dims)
        return MatmulTriple(
            a=ShareVector(list(pa)), b=ShareVector(list(pb)), c=ShareVector(list(pc)),
            dims=dims, index=idx,
        )

    def next_comparison(self, shape: tuple) -> ComparisonRandomness:
        idx = self._next_index("cmp")
        r_planes, bit_planes = self.comparison_planes(idx, shape)
        return ComparisonRandomness(
            r=ShareVector(list(r_planes)),
            bits=ShareVector(list(bit_planes)),
            index=idx,
        )


def deal_triples(dealer: TripleDealer, shape: tuple, count: int) -> list:
    """Issue `count` element-wise Beaver triples of the given shape."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [dealer.next_mul_triple(shape) for _ in range(count)]


# ---------------------------------------------------------------------------
# Triple stream serialization: length-prefixed binary records so the dealer
# can ship triples to a consumer in another process.
#
# Record layout (all integers little-endian):
#   u32 record_length (bytes after this field)
#   u32 triple_index
#   u8  n_parties, u8 ndim, u8[6] pad
#   u64 dims[ndim]
#   then for each of a, b, c: n_parties planes of prod(dims) u64 words
# The stream starts with the 4-byte magic "GMT1".
# ---------------------------------------------------------------------------


def serialize_triples(triples: list) -> bytes:
    out = [_MAGIC]
    for t in triples:
        planes = [np.asarray(s, dtype=np.uint64) for sv in (t.a, t.b, t.c) for s in sv.shares]
        shape = np.asarray(t.a.shares[0], dtype=np.uint64).shape
        n_parties = t.a.party_count
        body = struct.pack("<IBB6x", t.index, n_parties, len(shape))
        body += struct.pack(f"<{len(shape)}Q", *shape) if shape else b""
        for p in planes:
            body += p.astype("<u8").tobytes()
        out.append(struct.pack("<I", len(body)))
        out.append(body)
    return b"".join(out)


def deserialize_triples(data: bytes) -> list:
    if data[:4] != _MAGIC:
        raise ValueError("bad triple stream magic")
    pos = 4
    triples = []
    while pos < len(data):
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        body = data[pos : pos + length]
        if len(body) != length:
            raise ValueError("truncated triple record")
        pos += length
        index, n_parties, ndim = struct.unpack_from("<IBB6x", body, 0)
        off = 12
        shape = struct.unpack_from(f"<{ndim}Q", body, off) if ndim else ()
        off += 8 * ndim
        count = int(np.prod(shape)) if shape else 1
        vecs = []
        for _ in range(3):
            planes = []
            for _ in range(n_parties):
                arr = np.frombuffer(body, dtype="<u8", count=count, offset=off).reshape(shape)
                planes.append(arr.astype(np.uint64))
                off += 8 * count
            vecs.append(ShareVector(planes))
        triples.append(BeaverTriple(a=vecs[0], b=vecs[1], c=vecs[2], index=index))
    return triples
