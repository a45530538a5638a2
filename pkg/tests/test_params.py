import cmath
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from accelkernel.errors import ComplexBranch, CriticalFrequency
from accelkernel.params import (
    Branch, Couplings, ModelParams, classify_branch, couplings_from_frequencies,
    frequencies_from_couplings, h0_coefficients, q_parameters,
)

pos = st.floats(min_value=0.05, max_value=20.0)
ratio = st.floats(min_value=1.05, max_value=20.0)


def test_reference_point_couplings():
    p = ModelParams.from_frequencies(1.0, 2.0, 1.0)
    assert (p.gamma, p.alpha, p.beta) == (1.0, 5.0, 4.0)
    assert p.branch is Branch.REAL
    assert p.ground_energy == 1.5


def test_from_couplings_reference_point():
    f = frequencies_from_couplings(Couplings(1.0, 5.0, 4.0))
    assert f.omega1 == pytest.approx(2.0, rel=1e-15)
    assert f.omega2 == pytest.approx(1.0, rel=1e-15)


def test_complex_branch_example():
    p = ModelParams.from_couplings(1.0, 2.0, 4.0)
    assert p.branch is Branch.COMPLEX
    assert p.freqs.modulus == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert p.freqs.phase == pytest.approx(math.pi / 6, rel=1e-14)
    assert p.freqs.omega2 == p.freqs.omega1.conjugate()
    assert p.ground_energy == pytest.approx(math.sqrt(2.0) * math.cos(math.pi / 6), rel=1e-15)


def test_critical_line():
    p = ModelParams.from_couplings(1.0, 4.0, 4.0)
    assert p.branch is Branch.CRITICAL
    assert p.freqs.omega1 == pytest.approx(p.freqs.omega2)
    with pytest.raises(CriticalFrequency):
        p.qparams


def test_qparams_refused_on_complex_branch(complex_params):
    with pytest.raises(ComplexBranch):
        complex_params.qparams


def test_negative_alpha_is_complex():
    p = ModelParams.from_couplings(1.0, -1.0, 4.0)
    assert p.branch is Branch.COMPLEX
    assert p.freqs.phase > math.pi / 4


@pytest.mark.parametrize("g, a, b", [(0.0, 1.0, 1.0), (1.0, 1.0, -1.0), (1.0, math.nan, 1.0)])
def test_invalid_couplings(g, a, b):
    with pytest.raises(ValueError):
        Couplings(g, a, b)


def test_qparams_reference_values(real_params):
    qp = real_params.qparams
    assert qp.C == 2.0
    assert qp.sqrt_ab == pytest.approx(math.log(3.0), rel=1e-15)
    assert qp.A == pytest.approx(2.0 / math.sqrt(3.0), rel=1e-15)
    assert qp.B == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-15)


@given(g=pos, w2=pos, k=ratio)
def test_frequency_round_trip(g, w2, k):
    w1 = k * w2
    c = couplings_from_frequencies(g, ModelParams.from_frequencies(g, w1, w2).freqs)
    f = frequencies_from_couplings(c)
    assert f.omega1.real == pytest.approx(w1, rel=1e-9)
    assert f.omega2.real == pytest.approx(w2, rel=1e-9)


@given(g=pos, b=pos, t=st.floats(min_value=-0.99, max_value=0.99))
def test_complex_round_trip(g, b, t):
    c = Couplings(g, t * 2.0 * math.sqrt(b * g), b)
    f = frequencies_from_couplings(c)
    assert 0.0 < f.phase <= math.pi / 2
    back = couplings_from_frequencies(g, f)
    assert back.alpha == pytest.approx(c.alpha, abs=1e-12 * c.critical_alpha)
    assert back.beta == pytest.approx(c.beta, rel=1e-12)


@given(g=pos, w2=pos, k=ratio)
def test_half_angle_identity(g, w2, k):
    qp = ModelParams.from_frequencies(g, k * w2, w2).qparams
    assert qp.A**2 - qp.B**2 == pytest.approx(1.0, abs=1e-12 * qp.A**2)
    assert qp.A == pytest.approx(math.cosh(qp.sqrt_ab / 2), rel=1e-12)
    assert qp.B == pytest.approx(math.sinh(qp.sqrt_ab / 2), rel=1e-12)
    assert math.sqrt(qp.a / qp.b) == pytest.approx(qp.C, rel=1e-13)


@given(g=pos, a=st.floats(min_value=-10, max_value=30), b=pos, s=st.floats(min_value=0.1, max_value=10))
def test_branch_scale_invariance(g, a, b, s):
    c = Couplings(g, a, b)
    assert classify_branch(c) is classify_branch(c.scaled(s))


@given(g=pos, w2=pos, k=ratio)
def test_qparams_unchanged_by_overall_scaling_of_frequencies_ratio(g, w2, k):
    # sqrt(ab) depends only on the frequency ratio
    q1 = ModelParams.from_frequencies(g, k * w2, w2).qparams
    q2 = ModelParams.from_frequencies(g, 3.0 * k * w2, 3.0 * w2).qparams
    assert q1.sqrt_ab == pytest.approx(q2.sqrt_ab, rel=1e-12)


def test_h0_reference_point(real_params):
    h = real_params.h0
    assert h.c1 == pytest.approx(-0.5, abs=1e-15)
    assert h.c2 == pytest.approx(0.0, abs=1e-15)
    assert h.c3 == pytest.approx(0.0, abs=1e-15)
    assert h.c4 == pytest.approx(-1.0 / 8.0, abs=1e-15)
    assert h.c5 == pytest.approx(2.0, abs=1e-15)
    assert h.c6 == pytest.approx(2.0, abs=1e-15)


def test_h0_refused_off_real_branch(complex_params):
    with pytest.raises(ComplexBranch):
        h0_coefficients(1.0, complex_params.freqs)


def test_q_parameters_critical_raises():
    p = ModelParams.from_frequencies(1.0, 1.0, 1.0)
    with pytest.raises(CriticalFrequency):
        q_parameters(1.0, p.freqs)


def test_rw_parameters(real_params, complex_params):
    rw = real_params.rw
    assert rw.r == 1.5
    assert rw.omega == pytest.approx(-0.5j)
    w1 = complex_params.freqs.omega1
    rwc = complex_params.rw
    assert complex(rwc.r, rwc.omega.real) == pytest.approx(w1, rel=1e-15)
    assert cmath.isclose(rwc.r + 1j * rwc.omega, w1, rel_tol=1e-15)
