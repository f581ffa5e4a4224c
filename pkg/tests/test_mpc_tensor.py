import numpy as np
import pytest

from gesturempc.mpc import LocalEngine, OP_ROUNDS, ShapeMismatchError, RandomnessExhaustedError
from gesturempc.sharing import TripleDealer, TripleReuseError


@pytest.fixture
def eng():
    return LocalEngine(seed=101)


def test_additive_identity(eng):
    x = eng.share([1.25, -4.5])
    zero = eng.share([0.0, 0.0])
    assert np.array_equal(eng.open_ring(eng.add(x, zero)), eng.open_ring(x))


def test_add_matches_plaintext_oracle(eng):
    rng = np.random.default_rng(0)
    for _ in range(100):
        a = rng.uniform(-50, 50, (3, 4))
        b = rng.uniform(-50, 50, (3, 4))
        out = eng.open(eng.add(eng.share(a), eng.share(b)))
        # ring addition is exact; only the input encoding rounds
        assert np.max(np.abs(out - (a + b))) <= 2**-16


def test_scale_by_public_minus_one(eng):
    x = eng.share([2.5, -3.0])
    assert np.allclose(eng.open(eng.scale_by_public(x, -1)), [-2.5, 3.0])


def test_sub_and_neg(eng):
    a, b = eng.share([5.0, 1.0]), eng.share([2.0, 7.0])
    assert np.allclose(eng.open(eng.sub(a, b)), [3.0, -6.0])
    assert np.allclose(eng.open(eng.neg(a)), [-5.0, -1.0])


def test_shape_mismatch_raises(eng):
    with pytest.raises(ShapeMismatchError):
        eng.add(eng.share(np.zeros((2, 3))), eng.share(np.zeros((4, 5))))
    with pytest.raises(ShapeMismatchError):
        eng.matmul(eng.share(np.zeros((2, 3))), eng.share(np.zeros((4, 5))))


def test_mul_scalar_example(eng):
    out = eng.open(eng.mul(eng.share(1.5), eng.share(2.0)))
    assert abs(float(out) - 3.0) <= 2**-14


def test_mul_by_shared_zero(eng):
    x = eng.share([3.7, -1.2])
    z = eng.share([0.0, 0.0])
    assert np.max(np.abs(eng.open(eng.mul(x, z)))) <= 2**-16


def test_mul_oracle_sweep(eng):
    rng = np.random.default_rng(1)
    a = rng.uniform(-8, 8, 1000)
    b = rng.uniform(-8, 8, 1000)
    out = eng.open(eng.mul(eng.share(a), eng.share(b)))
    assert np.max(np.abs(out - a * b)) <= 2**-12


def test_mul_explicit_triple_and_reuse(eng):
    dealer = TripleDealer(seed=77, n_parties=2)
    tri = dealer.next_mul_triple((2,))
    x, y = eng.share([2.0, 3.0]), eng.share([5.0, -1.0])
    assert np.allclose(eng.open(eng.mul(x, y, triple=tri)), [10.0, -3.0], atol=1e-3)
    with pytest.raises(TripleReuseError):
        eng.mul(x, y, triple=tri)
    bad = dealer.next_mul_triple((7,))
    with pytest.raises(ShapeMismatchError):
        eng.mul(x, y, triple=bad)


def test_matmul_identity(eng):
    x = np.random.default_rng(2).uniform(-4, 4, (5, 5))
    out = eng.open(eng.matmul(eng.share(x), eng.share(np.eye(5))))
    assert np.max(np.abs(out - x)) <= 5 * 2**-16 + 2**-12


def test_matmul_oracle_8x8(eng):
    rng = np.random.default_rng(3)
    a, b = rng.uniform(-8, 8, (8, 8)), rng.uniform(-8, 8, (8, 8))
    out = eng.open(eng.matmul(eng.share(a), eng.share(b)))
    tol = 8 * 2**-16 * max(np.max(np.abs(a)), np.max(np.abs(b))) + 2**-12
    assert np.max(np.abs(out - a @ b)) <= tol


def test_matmul_zero(eng):
    z = eng.share(np.zeros((4, 6)))
    w = eng.share(np.random.default_rng(4).uniform(-2, 2, (6, 3)))
    assert np.max(np.abs(eng.open(eng.matmul(z, w)))) <= 2**-14


def test_gt_zero_examples(eng):
    mask = eng.open(eng.gt_zero(eng.share([3.7, 0.0, -3.7])))
    assert np.array_equal(mask, [1.0, 0.0, 0.0])


def test_gt_zero_grid_sweep(eng):
    # every grid point down to one ulp matches the plaintext sign test
    k = np.arange(-64, 65)
    vals = k * 2.0**-16
    mask = eng.open(eng.gt_zero(eng.share(vals)))
    assert np.array_equal(mask, (vals > 0).astype(float))


def test_gt_zero_explicit_randomness_single_use(eng):
    dealer = TripleDealer(seed=5, n_parties=2)
    cr = dealer.next_comparison((3,))
    x = eng.share([1.0, -2.0, 0.5])
    assert np.array_equal(eng.open(eng.gt_zero(x, randomness=cr)), [1.0, 0.0, 1.0])
    with pytest.raises(RandomnessExhaustedError):
        eng.gt_zero(x, randomness=cr)


def test_select_constant_masks(eng):
    x, y = eng.share([10.0, 20.0]), eng.share([30.0, 40.0])
    ones = eng.gt_zero(eng.share([1.0, 1.0]))
    zeros = eng.gt_zero(eng.share([-1.0, -1.0]))
    assert np.allclose(eng.open(eng.select(ones, x, y)), [10.0, 20.0], atol=1e-3)
    assert np.allclose(eng.open(eng.select(zeros, x, y)), [30.0, 40.0], atol=1e-3)


def test_select_random_where_oracle(eng):
    rng = np.random.default_rng(6)
    cond = rng.uniform(-5, 5, 64)
    x, y = rng.uniform(-8, 8, 64), rng.uniform(-8, 8, 64)
    out = eng.open(eng.select(eng.gt_zero(eng.share(cond)), eng.share(x), eng.share(y)))
    assert np.max(np.abs(out - np.where(cond > 0, x, y))) <= 2**-12


def test_select_requires_bit_mask(eng):
    with pytest.raises(ShapeMismatchError):
        eng.select(eng.share([1.0]), eng.share([2.0]), eng.share([3.0]))


def test_leaky_relu_cases(eng):
    x = eng.share([2.0, -1.0, 0.0])
    act, grad = eng.leaky_relu(x, 0.01)
    act_v, grad_v = eng.open(act), eng.open(grad)
    assert np.allclose(act_v, [2.0, -0.01, 0.0], atol=1e-3)
    assert np.allclose(grad_v, [1.0, 0.01, 0.01], atol=1e-3)


def test_leaky_relu_alpha_validation(eng):
    with pytest.raises(ValueError):
        eng.leaky_relu(eng.share([1.0]), 1.5)


def test_mean_constant(eng):
    x = eng.share(np.full((4, 3), 2.5))
    assert np.max(np.abs(eng.open(eng.mean(x, 0)) - 2.5)) <= 2**-16


def test_mean_random_oracle(eng):
    rng = np.random.default_rng(7)
    x = rng.uniform(-8, 8, (8, 5))
    out = eng.open(eng.mean(eng.share(x), 0))
    assert np.max(np.abs(out - x.mean(axis=0))) <= 2**-16 + 8 * 8 * 2**-25


def test_mean_single_element_axis(eng):
    x = rngv = np.random.default_rng(8).uniform(-4, 4, (1, 6))
    out = eng.open(eng.mean(eng.share(x), 0))
    assert np.max(np.abs(out - x[0])) <= 2**-16


def test_mean_empty_axis(eng):
    with pytest.raises(ShapeMismatchError):
        eng.mean(eng.share(np.zeros((0, 3))), 0)


def test_round_accounting_matches_static_analysis():
    eng = LocalEngine(seed=55)
    x, y = eng.share(np.ones((3, 3))), eng.share(np.ones((3, 3)))
    eng.add(x, y)
    eng.mul(x, y)
    eng.matmul(x, y)
    eng.gt_zero(x)
    eng.leaky_relu(x, 0.01)
    eng.mean(x, 0)
    eng.select(eng.gt_zero(y), x, y)
    for label, entry in eng.transcript.ops.items():
        assert entry["rounds"] == OP_ROUNDS[label] * entry["count"], label
    assert eng.transcript.rounds == sum(
        e["rounds"] for e in eng.transcript.ops.values()
    )


def test_determinism_bit_identical():
    def run():
        eng = LocalEngine(seed=99)
        x = eng.share(np.linspace(-3, 3, 12).reshape(3, 4))
        y = eng.share(np.linspace(1, 2, 12).reshape(3, 4))
        out = eng.mul(x, y)
        return out.planes.copy(), eng.open_ring(out).copy()

    p1, o1 = run()
    p2, o2 = run()
    assert np.array_equal(p1, p2)
    assert np.array_equal(o1, o2)


def test_three_party_engine_rescale_free_ops():
    # share rescaling is a 2-party protocol; everything round-free plus the
    # comparison circuit still works at n = 3
    eng = LocalEngine(seed=31, n_parties=3)
    a = np.array([1.5, -2.25, 8.0])
    b = np.array([-3.0, 0.5, 0.125])
    assert np.allclose(eng.open(eng.add(eng.share(a), eng.share(b))), a + b, atol=2**-15)
    mask = eng.gt_zero(eng.share(b))
    assert np.array_equal(eng.open(mask), (b > 0).astype(float))
    sel = eng.select(mask, eng.share(a), eng.share(b))
    assert np.allclose(eng.open(sel), np.where(b > 0, a, b), atol=2**-14)
    with pytest.raises(NotImplementedError):
        eng.mul(eng.share(a), eng.share(b))


def test_composed_expression_oracle_property():
    # random expression trees of the full op set stay within fixed-point
    # tolerance of the plaintext evaluation (desk-scale version of the
    # acceptance criterion)
    from gesturempc.testing import random_program_check

    worst = max(random_program_check(seed) for seed in range(40))
    assert worst <= 1e-2


def test_mul_broadcast_scalar_tensor(eng):
    x = eng.share(np.array([[1.0, 2.0], [3.0, 4.0]]))
    s = eng.share(0.5)
    out = eng.open(eng.mul(x, s))
    assert out.shape == (2, 2)
    assert np.max(np.abs(out - np.array([[0.5, 1.0], [1.5, 2.0]]))) <= 2**-12


def test_add_broadcast_bias_row(eng):
    z = eng.share(np.zeros((3, 4)))
    b = eng.share(np.array([1.0, 2.0, 3.0, 4.0]))
    out = eng.open(eng.add(z, b))
    assert np.allclose(out, np.tile([1.0, 2.0, 3.0, 4.0], (3, 1)), atol=2**-15)
