import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gesturempc import fixedpoint as fx


def test_encode_zero():
    assert int(fx.encode(0.0)) == 0


def test_encode_three_halves():
    assert int(fx.encode(1.5)) == 98304  # 1.5 * 2^16 exactly


def test_encode_negative_two_complement():
    cfg = fx.FixedPointConfig(precision_t=4)
    assert int(fx.encode(-0.25, cfg)) == 2**64 - 4


def test_decode_inverse():
    assert fx.decode(np.uint64(98304)) == 1.5
    assert fx.decode(np.uint64(0)) == 0.0


def test_pi_round_trip():
    # round-trip error bounded by half an ulp, checked against host floats
    assert abs(fx.decode(fx.encode(np.pi)) - np.pi) <= 2**-17


def test_encode_overflow_is_error():
    cfg = fx.FixedPointConfig(precision_t=16)
    with pytest.raises(fx.FixedPointOverflowError):
        fx.encode(cfg.bound, cfg)
    with pytest.raises(fx.FixedPointOverflowError):
        fx.encode(float("nan"), cfg)


def test_truncate_double_scale():
    cfg = fx.DEFAULT_CONFIG
    for value in (6.0, -2.5, 0.0):
        double = np.uint64(int(round(value * 2 ** (2 * cfg.precision_t))) % fx.RING_MODULUS)
        single = fx.truncate(double, cfg)
        assert abs(fx.decode(single, cfg) - value) <= 2**-16


def test_negation_symmetry():
    xs = np.linspace(-100, 100, 1001)
    enc = fx.encode(xs)
    neg = fx.ring_neg(enc)
    assert np.array_equal(neg, fx.encode(-xs))


def test_addition_homomorphism_bulk():
    rng = np.random.default_rng(42)
    x = rng.uniform(-(2**10), 2**10, 100_000)
    y = rng.uniform(-(2**10), 2**10, 100_000)
    total = fx.decode(fx.encode(x) + fx.encode(y))
    assert np.max(np.abs(total - (x + y))) <= 2**-16


def test_product_truncation_error_bound():
    rng = np.random.default_rng(7)
    x = rng.uniform(-64, 64, 20_000)
    y = rng.uniform(-64, 64, 20_000)
    prod = fx.decode(fx.truncate(fx.encode(x) * fx.encode(y)))
    bound = (np.abs(x) + np.abs(y) + 1) * 2**-16
    assert np.all(np.abs(prod - x * y) <= bound)


def test_grid_identity():
    # decode(encode(.)) is exact on multiples of 2^-t
    grid = np.arange(-2048, 2048) / 16.0
    assert np.array_equal(fx.decode(fx.encode(grid)), grid)


@settings(max_examples=200)
@given(st.floats(min_value=-2**10, max_value=2**10, allow_nan=False))
def test_round_trip_bound_property(x):
    assert abs(fx.decode(fx.encode(x)) - x) <= 2**-17


def test_config_validation():
    with pytest.raises(ValueError):
        fx.FixedPointConfig(precision_t=0)
    with pytest.raises(ValueError):
        fx.FixedPointConfig(precision_t=33)


def test_scalar_mul_by_negative_public():
    enc = fx.encode(3.0)
    assert fx.decode(fx.ring_mul_scalar(enc, -2)) == -6.0
