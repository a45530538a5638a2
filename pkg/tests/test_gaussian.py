import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from accelkernel.errors import DimensionMismatch, NotNormalizable, SingularMidBlock
from accelkernel.gaussian import (
    GaussianForm, VariableSplit, compose, integral, marginalize, second_moments, sqrt_det,
    weighted_integral,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_pd(rng, n, shift=1.0):
    a = rng.normal(size=(n, n))
    return a @ a.T + shift * np.eye(n)


def random_form(rng, n):
    return GaussianForm(rng.uniform(0.5, 2.0), random_pd(rng, n))


def test_quad_is_symmetrized_and_frozen():
    g = GaussianForm(1.0, [[1.0, 2.0], [0.0, 3.0]])
    assert np.array_equal(g.quad, [[1.0, 1.0], [1.0, 3.0]])
    with pytest.raises(ValueError):
        g.quad[0, 0] = 5.0


def test_non_square_rejected():
    with pytest.raises(DimensionMismatch):
        GaussianForm(1.0, np.zeros((2, 3)))


def test_evaluate_scalar_and_batch():
    g = GaussianForm(2.0, np.diag([1.0, 4.0]))
    assert g.evaluate([1.0, 0.5]) == pytest.approx(2.0 * math.exp(-0.5 - 0.5))
    batch = g.evaluate(np.zeros((3, 5, 2)))
    assert batch.shape == (3, 5)
    with pytest.raises(DimensionMismatch):
        g.evaluate([1.0, 2.0, 3.0])


def test_log_abs_survives_underflow():
    g = GaussianForm(1.0, np.eye(1))
    assert g.log_abs([100.0]) == pytest.approx(-5000.0)


def test_integral_matches_quadrature_2d(rng):
    g = random_form(rng, 2)
    num, _ = integrate.dblquad(lambda y, x: g.evaluate([x, y]).real, -12, 12, -12, 12, epsabs=1e-13)
    assert integral(g).real == pytest.approx(num, rel=1e-9)


def test_compose_matches_quadrature(rng):
    k1 = random_form(rng, 2)
    k2 = random_form(rng, 2)
    c = compose(k1, k2)
    for x, y in [(0.0, 0.0), (0.3, -0.7), (1.1, 0.4)]:
        num, _ = integrate.quad(lambda m: (k1.evaluate([x, m]) * k2.evaluate([m, y])).real, -15, 15,
                                epsabs=1e-14)
        assert c.evaluate([x, y]).real == pytest.approx(num, rel=1e-10)


def test_kernel_on_state_matches_quadrature(rng):
    k = random_form(rng, 2)
    psi = random_form(rng, 1)
    out = compose(k, psi)
    assert out.n == 1
    num, _ = integrate.quad(lambda m: (k.evaluate([0.4, m]) * psi.evaluate([m])).real, -15, 15)
    assert out.evaluate([0.4]).real == pytest.approx(num, rel=1e-10)


@given(seed=seeds)
def test_compose_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_form(rng, 4) for _ in range(3))
    left = compose(compose(a, b), c)
    right = compose(a, compose(b, c))
    assert left.norm == pytest.approx(right.norm, rel=1e-9)
    np.testing.assert_allclose(left.quad, right.quad, rtol=1e-8, atol=1e-9 * np.max(np.abs(right.quad)))


@given(seed=seeds)
def test_sequential_marginalization_agrees(seed):
    rng = np.random.default_rng(seed)
    g = random_form(rng, 5)
    one = marginalize(g, [1, 3, 4])
    seq = marginalize(g, [1, 3, 4], sequential=True)
    assert seq.norm == pytest.approx(one.norm, rel=1e-10)
    np.testing.assert_allclose(seq.quad, one.quad, rtol=1e-9, atol=1e-12)


@given(seed=seeds)
def test_sqrt_det_positive_definite(seed):
    rng = np.random.default_rng(seed)
    m = random_pd(rng, 4)
    assert sqrt_det(m) == pytest.approx(math.sqrt(np.linalg.det(m)), rel=1e-10)


def test_sqrt_det_negative_eigenvalue_branch():
    # -1 + i0 has square root +i
    assert sqrt_det(np.diag([4.0, -1.0])) == pytest.approx(2j)


def test_sqrt_det_singular():
    with pytest.raises(SingularMidBlock):
        sqrt_det(np.diag([1.0, 0.0]))


def test_compose_singular_mid_block():
    left = GaussianForm(1.0, np.diag([1.0, 0.0]))
    right = GaussianForm(1.0, np.diag([0.0, 1.0]))
    with pytest.raises(SingularMidBlock):
        compose(left, right)


def test_explicit_split():
    rng = np.random.default_rng(3)
    a = random_form(rng, 3)
    b = random_form(rng, 3)
    split = VariableSplit(out_indices=(0, 2), mid_indices=((1, 0),), in_indices=(1, 2))
    c = compose(a, b, split)
    joint = a.outer(b)
    # the same integral written as a marginal over a product with z1[1] tied to z2[0]
    t = np.zeros((6, 5))
    for row, col in [(0, 0), (2, 1), (1, 4), (3, 4), (4, 2), (5, 3)]:
        t[row, col] = 1.0
    ref = marginalize(joint.transform(t), [4])
    assert c.norm == pytest.approx(ref.norm, rel=1e-12)
    np.testing.assert_allclose(c.quad, ref.quad, rtol=1e-12)


def test_bad_split_rejected():
    a = GaussianForm(1.0, np.eye(2))
    with pytest.raises(DimensionMismatch):
        compose(a, a, VariableSplit((0,), ((0, 0),), (1,)))
    with pytest.raises(DimensionMismatch):
        VariableSplit.chain(2, 2, 3)


def test_moments_match_quadrature(rng):
    g = random_form(rng, 2)
    num, _ = integrate.dblquad(lambda y, x: x * y * g.evaluate([x, y]).real, -12, 12, -12, 12,
                               epsabs=1e-13)
    assert weighted_integral(g, 0, 1).real == pytest.approx(num, rel=1e-8, abs=1e-12)
    np.testing.assert_allclose(second_moments(g), np.linalg.inv(g.quad))


def test_moments_need_decay():
    g = GaussianForm(1.0, np.diag([1.0, -1.0]))
    with pytest.raises(NotNormalizable):
        second_moments(g)


def test_permuted_and_transform():
    g = GaussianForm(1.0, np.array([[2.0, 0.5], [0.5, 1.0]]))
    p = g.permuted([1, 0], [1.0, -1.0])
    z = np.array([0.3, -0.8])
    assert p.evaluate(z) == pytest.approx(g.evaluate([z[1], -z[0]]))
