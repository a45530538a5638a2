import cmath

import numpy as np
import pytest

from accelkernel.errors import GridTooSmall
from accelkernel.grid import (
    GridOperator, GridSpec, convergence_ratios, grid_residuals, propagator_grid, vacuum_box,
)
from accelkernel.params import ModelParams
from accelkernel.qoperator import propagator_g


@pytest.mark.parametrize("order, degree", [(2, 2), (4, 4)])
def test_stencils_exact_on_polynomials(real_params, order, degree):
    g = GridSpec(2.0, 3.0, 21, 19)
    op = GridOperator(real_params, g, order)
    xx, vv = g.mesh()
    inner = (slice(order // 2, -(order // 2)), slice(order // 2, -(order // 2)))
    for k in range(degree + 1):
        f = (xx**k * vv**(degree - k)).ravel()
        dfx = (op.dx_op @ f).reshape(xx.shape)
        want = (k * xx ** max(k - 1, 0) * vv**(degree - k)) if k else np.zeros_like(xx)
        np.testing.assert_allclose(dfx[inner], want[inner], atol=1e-9)


def test_hamiltonian_on_quadratic(real_params):
    # H (x^2 + v^2) = -1/g - 2 v x + (alpha v^2 + beta x^2)(x^2 + v^2)/2, exact for the 2nd order stencil
    p = real_params
    g = GridSpec(2.0, 2.0, 15, 15)
    xx, vv = g.mesh()
    f = (xx**2 + vv**2).ravel()
    got = (GridOperator(p, g).hamiltonian @ f).reshape(xx.shape)
    want = -1.0 / p.gamma - 2 * vv * xx + 0.5 * (p.alpha * vv**2 + p.beta * xx**2) * (xx**2 + vv**2)
    np.testing.assert_allclose(got[1:-1, 1:-1], want[1:-1, 1:-1], atol=1e-10)


def test_grid_spec_validation():
    with pytest.raises(GridTooSmall):
        GridSpec(1.0, 1.0, 2, 10)
    with pytest.raises(GridTooSmall):
        GridSpec(0.0, 1.0, 10, 10)
    g = GridSpec(1.0, 2.0, 9, 9)
    assert g.refined().h_x == pytest.approx(g.h_x / 2)
    assert g.x[0] == pytest.approx(-1.0 + g.h_x)


def test_bad_order_rejected(real_params):
    with pytest.raises(ValueError):
        GridOperator(real_params, GridSpec(1, 1, 5, 5), order=3)


def test_box_too_small(real_params):
    with pytest.raises(GridTooSmall):
        grid_residuals(real_params, GridSpec(1.0, 1.0, 31, 31))


def test_box_refused_for_non_square_integrable_vacuum():
    w1 = cmath.rect(1.0, 1.2)
    p = ModelParams.from_frequencies(1.0, w1, w1.conjugate())
    with pytest.raises(GridTooSmall):
        vacuum_box(p, 31)


def test_residuals_second_order(real_params, complex_params):
    for p in (real_params, complex_params):
        g = vacuum_box(p, 31)
        res = []
        for _ in range(3):
            res.append(grid_residuals(p, g))
            g = g.refined()
        for field in ("eigen", "dual_eigen", "commutator"):
            ratios = convergence_ratios([getattr(r, field) for r in res])
            assert all(3.5 <= r <= 4.5 for r in ratios), (field, ratios)
        assert all(r.anti_hermitian <= 1e-12 for r in res)


def test_propagator_grid_oracle(real_params):
    g = vacuum_box(real_params, 64)
    assert propagator_grid(real_params, 0.0, g) == pytest.approx(1 / 12, rel=1e-6)
    assert propagator_grid(real_params, 0.5, g) == pytest.approx(propagator_g(real_params, 0.5), rel=1e-3)


def test_convergence_ratios():
    assert convergence_ratios([16.0, 4.0, 1.0]) == [4.0, 4.0]
