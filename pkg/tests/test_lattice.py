import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.linalg import cholesky_banded

from accelkernel.classical import BoundaryData, action_matrix, solve_bvp
from accelkernel.errors import BadDiscretization, NonConvergent
from accelkernel.lattice import (
    _path_form, build_problem, closed_form_ratio, continuum_ratio, extrapolate, kernel_ratio,
    log_kernel_ratio, observed_order, step_kernel,
)
from accelkernel.params import ModelParams

from helpers import random_bc, random_params

ZERO = BoundaryData(0.0, 0.0, 0.0, 0.0)


def test_velocity_integral(real_params):
    eps = 0.05
    sk = step_kernel(real_params, eps)
    dv = 0.3
    num, _ = integrate.quad(lambda q: math.cos(q * dv) * math.exp(-eps * q * q / (2 * real_params.gamma)),
                            -np.inf, np.inf)
    assert num / (2 * math.pi) == pytest.approx(sk.velocity_norm * math.exp(-real_params.gamma * dv**2 / (2 * eps)),
                                                rel=1e-10)


def test_constraint_enforces_finite_difference(real_params):
    sk = step_kernel(real_params, 0.1)
    x_prev, x = 0.7, 0.4
    assert sk.constraint(x, -(x - x_prev) / 0.1, x_prev) == pytest.approx(0.0, abs=1e-15)


def test_step_kernel_rejects_bad_eps(real_params):
    with pytest.raises(BadDiscretization):
        step_kernel(real_params, 0.0)


def test_hessian_matches_symbolic_expansion():
    p = ModelParams.from_couplings(1.5, 2.5, 0.75)
    n, eps = 6, sp.Rational(1, 4)
    xs = sp.symbols(f"x0:{n + 1}")
    vi = sp.Symbol("vi")
    v = [vi] + [-(xs[k] - xs[k - 1]) / eps for k in range(1, n + 1)]
    g, a, b = (sp.nsimplify(c) for c in (p.gamma, p.alpha, p.beta))
    # sum of step log-weights with every velocity eliminated by its constraint
    total = sum(-g / (2 * eps) * (v[k] - v[k - 1]) ** 2 - eps * a / 2 * v[k] ** 2
                - eps * b / 4 * (xs[k] ** 2 + xs[k - 1] ** 2) for k in range(2, n + 1))
    total += -eps * a / 2 * v[1] ** 2 - eps * b / 4 * (xs[1] ** 2 + xs[0] ** 2)
    hess = -sp.hessian(total, xs)
    got = _path_form(p, n, float(eps))
    np.testing.assert_allclose(got, np.array(hess, dtype=float), rtol=1e-13, atol=1e-12)

    sk = step_kernel(p, float(eps))
    z = np.random.default_rng(5).normal(size=4)
    lw = sk.log_weight(z[0], z[1], z[2], z[3])
    want = (-p.gamma / (2 * float(eps)) * (z[1] - z[3]) ** 2 - float(eps) * p.alpha / 2 * z[1] ** 2
            - float(eps) * p.beta / 4 * (z[0] ** 2 + z[2] ** 2))
    assert lw == pytest.approx(want, rel=1e-15)


def test_interior_stencil(real_params):
    p = real_params
    n, tau = 40, 1.0
    eps = tau / n
    h = _path_form(p, n, eps)
    row = h[20, 18:23]
    want = (p.gamma / eps**3 * np.array([1, -4, 6, -4, 1]) + p.alpha / eps * np.array([0, -1, 2, -1, 0])
            + p.beta * eps * np.array([0, 0, 1, 0, 0]))
    np.testing.assert_allclose(row, want, rtol=1e-12)


def test_constraint_fidelity_dyadic(real_params):
    bc = BoundaryData(0.375, -1.25, 0.5, 0.75)
    prob = build_problem(real_params, bc, 1.0, 64)
    eps = 1.0 / 64
    assert prob.boundary_values.tolist() == [0.5, 0.5 - eps * 0.75, 0.375 + eps * -1.25, 0.375]
    sk = step_kernel(real_params, eps)
    x0, x1, xm, xn = prob.boundary_values
    assert sk.constraint(x1, bc.v_i, x0) == 0.0
    assert sk.constraint(xn, bc.v_f, xm) == 0.0


def test_zero_boundary_data(real_params):
    prob = build_problem(real_params, ZERO, 1.0, 16)
    assert np.all(prob.maximizer() == 0.0)
    assert prob.max_action() == 0.0


def test_maximizer_is_stationary(real_params, rng):
    prob = build_problem(real_params, random_bc(rng), 1.0, 32)
    path = prob.maximizer()
    assert prob.action(path) == pytest.approx(prob.max_action(), rel=1e-12)
    bump = np.zeros_like(path)
    bump[10] = 1e-3
    assert prob.action(path + bump) < prob.action(path)


def test_maximizer_converges_to_classical_path(real_params):
    bc = BoundaryData(0.3, -0.4, 0.8, 0.5)
    sol = solve_bvp(real_params, bc, 1.0)
    errs = []
    for n in (64, 128, 256):
        path = build_problem(real_params, bc, 1.0, n).maximizer()
        t = np.linspace(0.0, 1.0, n + 1)
        errs.append(np.max(np.abs(path - sol.position(t))))
    assert errs[0] / errs[1] > 1.8 and errs[1] / errs[2] > 1.8
    assert errs[-1] < 1e-2


@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_hessian_positive_definite(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng)
    tau = rng.uniform(0.1, 5.0)
    n = int(rng.choice([4, 16, 256, 1024]))
    cholesky_banded(build_problem(p, ZERO, tau, n).h_free)


def test_ratio_identity(real_params, rng):
    bc = random_bc(rng)
    assert kernel_ratio(real_params, bc, bc, 1.0, 64) == 1.0


@pytest.mark.parametrize("bc", [BoundaryData(0.1, 0.1, 0.1, 0.1), BoundaryData(0.05, -0.1, 0.08, 0.02)])
def test_ratio_at_512(real_params, bc):
    # unextrapolated error is about 2|S(bc) - S(ref)|/N, so small-action data only
    got = kernel_ratio(real_params, bc, ZERO, 1.0, 512)
    assert got == pytest.approx(closed_form_ratio(real_params, bc, ZERO, 1.0), rel=1e-3)


def test_ratio_error_is_first_order(real_params):
    bc = BoundaryData(1.0, 0.0, 0.0, 0.0)
    exact = math.log(closed_form_ratio(real_params, bc, ZERO, 1.0))
    errs = [log_kernel_ratio(real_params, bc, ZERO, 1.0, n) - exact for n in (256, 512, 1024)]
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.02)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.02)


def test_discrete_action_order(real_params):
    bc = BoundaryData(0.3, -0.4, 0.8, 0.5)
    exact = action_matrix(real_params, 1.0).action(bc)
    errs = [abs(build_problem(real_params, bc, 1.0, n).max_action() - exact) for n in (64, 128, 256, 512)]
    assert math.log2(errs[-2] / errs[-1]) >= 0.9


def test_extrapolate_synthetic():
    eps = 0.1 / 2.0 ** np.arange(5)
    lin = extrapolate(3.0 + 2.0 * eps)
    assert lin.limit == pytest.approx(3.0, abs=1e-13)
    assert lin.order == pytest.approx(1.0, abs=1e-9)
    quad = extrapolate(-1.0 + 0.5 * eps**2)
    assert quad.limit == pytest.approx(-1.0, abs=1e-13)
    assert quad.order == pytest.approx(2.0, abs=1e-9)
    mixed = extrapolate(1.0 + eps + 4.0 * eps**2 - eps**3)
    assert mixed.limit == pytest.approx(1.0, abs=1e-12)
    frac = extrapolate(2.0 + eps**1.5)
    assert frac.order == pytest.approx(1.5, abs=1e-9)
    assert frac.limit == pytest.approx(2.0, abs=1e-12)


def test_extrapolate_constant():
    ex = extrapolate([1.5, 1.5, 1.5])
    assert ex.limit == 1.5 and ex.order == math.inf


def test_extrapolate_nonconvergent():
    with pytest.raises(NonConvergent):
        extrapolate([1.0, 1.1, 1.3, 1.7])
    with pytest.raises(NonConvergent):
        observed_order([1.0, 2.0])


def test_continuum_ratio(real_params):
    bc = BoundaryData(0.2, 0.5, -0.4, 0.3)
    ex = continuum_ratio(real_params, bc, ZERO, 1.0)
    assert ex.limit == pytest.approx(closed_form_ratio(real_params, bc, ZERO, 1.0), rel=1e-4)
    assert 0.8 <= ex.order <= 1.2


def test_bad_discretization(real_params):
    with pytest.raises(BadDiscretization):
        build_problem(real_params, ZERO, 1.0, 3)
    with pytest.raises(BadDiscretization):
        continuum_ratio(real_params, ZERO, ZERO, 1.0, levels=(64, 100, 200))
    with pytest.raises(BadDiscretization):
        log_kernel_ratio(real_params, ZERO, ZERO, 0.0, 64)
