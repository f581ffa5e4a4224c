"""Bit encryption from learning-with-errors, with additive homomorphism.

Demonstrational lattice scheme over Z_q, independent of the secret-sharing
engine:

    keygen:   s, e ~ rounded Gaussian; a uniform in Z_q^n
              b = a * s + e  (mod q, element-wise)
    encrypt:  u ~ chi_enc^n, e1, e2 ~ chi_err
              c0 = <b, u> + e1 + m * floor(q/2)   (mod q)
              c1 = a * u + e2                     (mod q, element-wise)
    decrypt:  phase = c0 - <c1, s> (mod q), decode to the nearest multiple
              of q/2, reduce mod 2.

The message rides on the q/2 step so the rounding decoder tolerates all
accumulated noise below q/4.  Ciphertext addition is component-wise mod q
and decrypts to the XOR of the plaintext bits (the message space is mod
2).  Noise distributions are rounded Gaussians sampled via Box-Muller.

This module validates the encryption equations and their noise budget; it
is not a hardened implementation (no constant-time guarantees, no
multiplicative homomorphism, demo-grade parameters).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """LWE parameters outside the supported envelope."""


@dataclass(frozen=True)
class LweParams:
    """Lattice dimension, modulus, and noise widths.

    Defaults (n=512, q=2^15, sigma=3.2) keep one level of homomorphic
    addition comfortably inside the q/4 decoding radius: the per-ciphertext
    noise deviation is sqrt(n*s_err^2*s_enc^2 + s_err^2 + n*s_err^2*s_key^2)
    which is about q/100 here.
    """

    dimension: int = 512
    modulus: int = 2**15
    sigma_key: float = 3.2
    sigma_err: float = 3.2
    sigma_enc: float = 3.2

    def __post_init__(self) -> None:
        q = self.modulus
        if self.dimension < 128:
            raise ParameterError("lattice dimension below the demo floor of 128")
        if q % 2 != 1 and (q & (q - 1)) != 0:
            raise ParameterError("modulus must be odd or a power of two")
        budget = 16 * (self.noise_std_one_add() + 1e-9)
        if q <= budget:
            raise ParameterError(
                f"modulus {q} too small for the noise budget ({budget:.0f} required)"
            )

    def noise_std_single(self) -> float:
        n = self.dimension
        return float(
            np.sqrt(
                n * self.sigma_err**2 * self.sigma_enc**2
                + self.sigma_err**2
                + n * self.sigma_err**2 * self.sigma_key**2
            )
        )

    def noise_std_one_add(self) -> float:
        return float(np.sqrt(2.0) * self.noise_std_single())


@dataclass
class SecretKey:
    s: np.ndarray
    params: LweParams


@dataclass
class PublicKey:
    b: np.ndarray
    a: np.ndarray
    params: LweParams


@dataclass
class LweCiphertext:
    c0: int
    c1: np.ndarray
    params: LweParams


def gaussian_integers(sigma: float, size, rng: np.random.Generator) -> np.ndarray:
    """Rounded discrete Gaussian via Box-Muller."""
    if sigma == 0.0:
        return np.zeros(size, dtype=np.int64)
    u1 = rng.random(size)
    u2 = rng.random(size)
    z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    return np.round(sigma * z).astype(np.int64)


def keygen(params: LweParams, rng: np.random.Generator) -> tuple:
    """Sample (sk, pk) satisfying b = a*s + e mod q exactly."""
    q = params.modulus
    n = params.dimension
    s = gaussian_integers(params.sigma_key, n, rng)
    a = rng.integers(0, q, size=n, dtype=np.int64)
    e = gaussian_integers(params.sigma_err, n, rng)
    b = (a * s + e) % q
    return SecretKey(s=s, params=params), PublicKey(b=b, a=a, params=params)


def encrypt_bit(m: int, pk: PublicKey, rng: np.random.Generator) -> LweCiphertext:
    if m not in (0, 1):
        raise ValueError(f"message must be a bit, got {m!r}")
    params = pk.params
    q = params.modulus
    u = gaussian_integers(params.sigma_enc, params.dimension, rng)
    e1 = int(gaussian_integers(params.sigma_err, 1, rng)[0])
    e2 = gaussian_integers(params.sigma_err, params.dimension, rng)
    c0 = int((int(np.dot(pk.b, u)) + e1 + m * (q // 2)) % q)
    c1 = (pk.a * u + e2) % q
    return LweCiphertext(c0=c0, c1=c1, params=params)


def decrypt_bit(ct: LweCiphertext, sk: SecretKey) -> int:
    """Nearest-multiple-of-(q/2) decoding of the phase, reduced mod 2."""
    q = ct.params.modulus
    phase = (ct.c0 - int(np.dot(ct.c1, sk.s))) % q
    return int(round(phase / (q / 2))) % 2


def add_ciphertexts(ct1: LweCiphertext, ct2: LweCiphertext) -> LweCiphertext:
    """Homomorphic addition; decrypts to m1 xor m2."""
    if ct1.params != ct2.params:
        raise ParameterError("ciphertexts from different parameter sets")
    q = ct1.params.modulus
    return LweCiphertext(
        c0=(ct1.c0 + ct2.c0) % q, c1=(ct1.c1 + ct2.c1) % q, params=ct1.params
    )


def demo_stats(
    params: LweParams | None = None,
    round_trips: int = 10_000,
    xor_trials: int = 1_000,
    seed: int = 0,
) -> dict:
    """Round-trip and homomorphic-XOR success rates for the demo CLI."""
    params = params or LweParams()
    rng = np.random.default_rng(seed)
    sk, pk = keygen(params, rng)

    bits = rng.integers(0, 2, size=round_trips)
    ok = sum(
        decrypt_bit(encrypt_bit(int(m), pk, rng), sk) == int(m) for m in bits
    )

    xor_ok = 0
    for _ in range(xor_trials):
        m1, m2 = int(rng.integers(0, 2)), int(rng.integers(0, 2))
        total = add_ciphertexts(encrypt_bit(m1, pk, rng), encrypt_bit(m2, pk, rng))
        xor_ok += decrypt_bit(total, sk) == (m1 ^ m2)

    return {
        "dimension": params.dimension,
        "modulus": params.modulus,
        "sigma": (params.sigma_key, params.sigma_err, params.sigma_enc),
        "round_trips": round_trips,
        "round_trip_success": ok / round_trips,
        "xor_trials": xor_trials,
        "xor_success": xor_ok / xor_trials,
        "noise_std_single": params.noise_std_single(),
        "noise_std_one_add": params.noise_std_one_add(),
    }
