"""Operator route to the evolution kernel.

H = -(1/2g) d_v^2 - v d_x + (g/2)(w1^2 + w2^2) v^2 + (g/2) w1^2 w2^2 x^2 is not
Hermitian, but Q = a x v - b d_x d_v conjugates it into two decoupled
oscillators, e^{-Q/2} H e^{Q/2} = H0.  All the pieces (matrix elements of
e^{-tau Q}, the H0 Mehler kernel, the oscillator ground state) are centered
Gaussians, so the evolution kernel and the vacuum states come out of
``gaussian.compose`` in closed form.

Kernel forms use the variable order (x, v, x', v'), i.e. <x,v| . |x',v'>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotNormalizable, QuadratureFailure, ZeroTau
from .gaussian import GaussianForm, VariableSplit, compose, weighted_integral
from .params import Branch, ModelParams, QParams

_OPS = ("X", "DX", "V", "DV")


@dataclass(frozen=True)
class QKernel:
    """<x,v| e^{-tau Q} |x',v'> = norm * exp{-G (xv + x'v') + H (xv' + vx')}."""

    g_coef: float
    h_coef: float
    norm: complex
    tau: float

    def form(self) -> GaussianForm:
        g, h = self.g_coef, self.h_coef
        m = np.array([
            [0.0, g, 0.0, -h],
            [g, 0.0, -h, 0.0],
            [0.0, -h, 0.0, g],
            [-h, 0.0, g, 0.0],
        ])
        return GaussianForm(self.norm, m)


def q_kernel(qp: QParams, tau: float) -> QKernel:
    """Matrix elements of e^{-tau Q}; negative ``tau`` gives e^{|tau| Q}.

    The beta sector of Q is an inverted oscillator, so for either sign of tau
    the form is only integrable by continuation; the normalization
    (i/2pi)|H(tau)| encodes that continuation.
    """
    if tau == 0.0:
        raise ZeroTau("e^{-tau Q} at tau = 0 is the identity (a delta function)")
    s = tau * qp.sqrt_ab
    g = qp.C / math.tanh(s)
    h = qp.C / math.sinh(s)
    return QKernel(g_coef=g, h_coef=h, norm=1j * abs(h) / (2.0 * math.pi), tau=tau)


def mehler_kernel(mass: float, freq: float, tau: float) -> tuple[float, float, float]:
    """Oscillator kernel <z|e^{-tau H}|z'> = n exp{-(d/2)(z^2 + z'^2) - o z z'}.

    Returns ``(d, o, n)``.
    """
    mw = mass * freq
    s = math.sinh(freq * tau)
    return mw / math.tanh(freq * tau), -mw / s, math.sqrt(mw / (2.0 * math.pi * s))


def h0_kernel(p: ModelParams, tau: float) -> GaussianForm:
    """Kernel of e^{-tau H0}: a v-oscillator (mass g, frequency w1) times an
    x-oscillator (mass g w1^2, frequency w2)."""
    w1, w2 = p.require_real()
    if tau <= 0.0:
        raise ZeroTau(f"tau must be positive, got {tau}")
    g = p.gamma
    dv, ov, nv = mehler_kernel(g, w1, tau)
    dx, ox, nx = mehler_kernel(g * w1 * w1, w2, tau)
    m = np.array([
        [dx, 0.0, ox, 0.0],
        [0.0, dv, 0.0, ov],
        [ox, 0.0, dx, 0.0],
        [0.0, ov, 0.0, dv],
    ])
    return GaussianForm(nv * nx, m)


def oscillator_ground_state(p: ModelParams) -> GaussianForm:
    """<x,v|0,0> for H0, energy (w1 + w2)/2."""
    w1, w2 = p.require_real()
    g = p.gamma
    norm = (g * g * w1**3 * w2 / math.pi**2) ** 0.25
    return GaussianForm(norm, np.diag([g * w1 * w1 * w2, g * w1]))


def _realify(g: GaussianForm, rtol: float = 1e-10) -> GaussianForm:
    """Drop imaginary round-off from a form that must be real."""
    q = np.asarray(g.quad)
    scale = max(np.max(np.abs(q)), 1e-300)
    norm = g.norm
    if abs(norm.imag) <= rtol * abs(norm) and np.all(np.abs(np.imag(q)) <= rtol * scale):
        return GaussianForm(norm.real, np.real(q))
    return g


def evolution_kernel_operator(p: ModelParams, tau: float) -> GaussianForm:
    """<x,v| e^{-tau H} |x',v'> as e^{Q/2} e^{-tau H0} e^{-Q/2}."""
    qp = p.qparams
    up = q_kernel(qp, -0.5).form()
    down = q_kernel(qp, 0.5).form()
    return _realify(compose(compose(up, h0_kernel(p, tau)), down))


def sandwiched_h0(p: ModelParams, tau: float) -> GaussianForm:
    """e^{-Q/2} K_S(tau) e^{Q/2}; equals the H0 kernel when everything is consistent."""
    qp = p.qparams
    down = q_kernel(qp, 0.5).form()
    up = q_kernel(qp, -0.5).form()
    return _realify(compose(compose(down, evolution_kernel_operator(p, tau)), up))


@dataclass(frozen=True)
class VacuumState:
    """Ground state of H (or of H^dagger when ``dual``) on (x, v)."""

    form: GaussianForm
    energy: float
    dual: bool

    @property
    def is_square_integrable(self) -> bool:
        """Whether the state alone is in L2 (stronger than pairing with its dual)."""
        re = np.real(self.form.quad)
        return bool(np.all(np.linalg.eigvalsh(re) > 0.0))

    def __call__(self, x, v):
        z = np.stack(np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float)), axis=-1)
        return self.form.evaluate(z)


def vacuum_norm(p: ModelParams) -> float:
    """N00 = (w1 w2)^{1/4} sqrt(g (w1 + w2)/pi)."""
    f = p.freqs
    return f.product**0.25 * math.sqrt(p.gamma * f.total / math.pi)


def vacuum(p: ModelParams, dual: bool = False) -> VacuumState:
    """Closed-form vacuum of H (dual: of H^dagger).

    Exponent -(g/2)(w1+w2) w1 w2 x^2 - (g/2)(w1+w2) v^2 -+ g w1 w2 x v.  On the
    complex branch w1 + w2 = 2R cos(phi); the state pairs to a finite norm with
    its dual only when cos(phi) > 0.
    """
    f = p.freqs
    g = p.gamma
    cos_phi = f.total / (2.0 * f.modulus)
    if cos_phi <= 1e-12:
        raise NotNormalizable(f"vacuum needs cos(phi) > 0, got {cos_phi:.3g}")
    a = g * f.total * f.product
    b = g * f.total
    c = g * f.product
    c = -c if dual else c
    form = GaussianForm(vacuum_norm(p), np.array([[a, c], [c, b]]))
    return VacuumState(form=form, energy=p.ground_energy, dual=dual)


def vacuum_via_q(p: ModelParams, dual: bool = False) -> VacuumState:
    """Vacuum as e^{Q/2}|0,0> (dual: <0,0|e^{-Q/2}) by Gaussian composition."""
    qp = p.qparams
    ground = oscillator_ground_state(p)
    if dual:
        form = compose(ground, q_kernel(qp, 0.5).form())
    else:
        form = compose(q_kernel(qp, -0.5).form(), ground)
    return VacuumState(form=_realify(form), energy=p.ground_energy, dual=dual)


def vacuum_pairing(p: ModelParams) -> float:
    """<Psi00^D | Psi00> by exact Gaussian integration."""
    psi = vacuum(p).form
    dual = vacuum(p, dual=True).form
    from .gaussian import integral

    return integral(GaussianForm(psi.norm * dual.norm, psi.quad + dual.quad)).real


def large_tau_factor(p: ModelParams) -> GaussianForm:
    """Psi00(x_f, v_f) Psi00^D(x_i, v_i): the tau -> infinity limit of e^{tau E00} K."""
    return vacuum(p).form.outer(vacuum(p, dual=True).form)


def propagator_g(p: ModelParams, tau: float) -> float:
    """G(tau) = e^{tau E00} <Psi00^D| x e^{-tau H} x |Psi00>.

    Uses the operator kernel on the real branch and the classical one elsewhere.
    """
    if tau < 0.0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    psi = vacuum(p).form
    dual = vacuum(p, dual=True).form
    if tau == 0.0:
        overlap = GaussianForm(psi.norm * dual.norm, psi.quad + dual.quad)
        return weighted_integral(overlap, 0, 0).real
    if p.branch is Branch.REAL:
        kern = evolution_kernel_operator(p, tau)
    else:
        from .classical import kernel_closed_form

        kern = kernel_closed_form(p, tau)
    joint = GaussianForm(dual.norm * kern.norm * psi.norm,
                         kern.quad + np.block([[dual.quad, np.zeros((2, 2))],
                                               [np.zeros((2, 2)), psi.quad]]))
    return (math.exp(tau * p.ground_energy) * weighted_integral(joint, 0, 2)).real


# -- similarity identities ---------------------------------------------------

@dataclass(frozen=True)
class LinearTimesGaussian:
    """(coef . z) * g(z)."""

    coef: np.ndarray
    gauss: GaussianForm


def _apply_op(op: str, g: GaussianForm) -> LinearTimesGaussian:
    """One of x, d_x, v, d_v applied to a Gaussian over (x, v)."""
    m = np.asarray(g.quad)
    if op == "X":
        c = np.array([1.0, 0.0])
    elif op == "V":
        c = np.array([0.0, 1.0])
    elif op == "DX":
        c = -m[0, :]
    elif op == "DV":
        c = -m[1, :]
    else:
        raise ValueError(f"unknown operator {op!r}; expected one of {_OPS}")
    return LinearTimesGaussian(np.asarray(c, dtype=complex), g)


def _kernel_on_linear(kern: GaussianForm, f: LinearTimesGaussian) -> LinearTimesGaussian:
    """int K(w, z) (c . z) g(z) dz = (c' . w) G(w) with G = K o g."""
    joint_q = kern.quad + np.block([[np.zeros((2, 2)), np.zeros((2, 2))],
                                    [np.zeros((2, 2)), f.gauss.quad]])
    jzz = joint_q[2:, 2:]
    jzw = joint_q[2:, :2]
    # mean of z given w under the (formal) joint Gaussian
    cond = -np.linalg.solve(jzz, jzw)
    composed = compose(kern, f.gauss)
    return LinearTimesGaussian(cond.T @ f.coef, composed)


def _conjugation_rhs(qp: QParams, op: str, tau: float, g: GaussianForm) -> list[tuple[complex, LinearTimesGaussian]]:
    ch = math.cosh(tau * qp.sqrt_ab)
    sh = math.sinh(tau * qp.sqrt_ab)
    r_ba = 1.0 / qp.C
    r_ab = qp.C
    partner = {"X": ("DV", r_ba), "V": ("DX", r_ba), "DX": ("V", r_ab), "DV": ("X", r_ab)}[op]
    return [(ch, _apply_op(op, g)), (partner[1] * sh, _apply_op(partner[0], g))]


def gaussian_battery(seed: int = 0, count: int = 4, scale: float = 1.0) -> list[GaussianForm]:
    """Random well-decaying real Gaussians on (x, v) for weak identity checks."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        l = rng.normal(size=(2, 2))
        m = scale * (l @ l.T + 1.5 * np.eye(2))
        out.append(GaussianForm(1.0, m))
    return out


def _pair(dual: GaussianForm, k: int, f: LinearTimesGaussian) -> complex:
    """int dual(z) z_k (c . z) G(z) dz."""
    prod = GaussianForm(dual.norm * f.gauss.norm, dual.quad + f.gauss.quad)
    re = np.real(prod.quad)
    if np.min(np.linalg.eigvalsh(0.5 * (re + re.T))) <= 0.0:
        raise QuadratureFailure("test function does not decay fast enough to pair with the dual")
    return sum(f.coef[l] * weighted_integral(prod, k, l) for l in range(2))


def similarity_residual(qp: QParams, op_id: str, tau: float,
                        tests: Sequence[GaussianForm] | None = None,
                        duals: Sequence[GaussianForm] | None = None) -> float:
    """Weak check of e^{-tau Q} O e^{tau Q} = cosh O + (...) sinh O'.

    Both sides act on each test Gaussian; the results (linear times Gaussian)
    are paired with z_k times each dual Gaussian and the maximum relative
    deviation over the battery is returned.
    """
    op_id = op_id.upper()
    if op_id not in _OPS:
        raise ValueError(f"unknown operator {op_id!r}; expected one of {_OPS}")
    tests = gaussian_battery(0) if tests is None else tests
    duals = gaussian_battery(1) if duals is None else duals
    worst = 0.0
    for psi in tests:
        if tau == 0.0:
            lhs = _apply_op(op_id, psi)
        else:
            up = q_kernel(qp, -tau).form()     # e^{tau Q}
            down = q_kernel(qp, tau).form()    # e^{-tau Q}
            lifted = compose(up, psi)
            lhs = _kernel_on_linear(down, _apply_op(op_id, lifted))
        rhs_terms = _conjugation_rhs(qp, op_id, tau, psi)
        for chi in duals:
            for k in range(2):
                left = _pair(chi, k, lhs)
                right = sum(w * _pair(chi, k, t) for w, t in rhs_terms)
                denom = max(abs(right), max(abs(w * _pair(chi, k, t)) for w, t in rhs_terms))
                worst = max(worst, abs(left - right) / denom)
    return worst


__all__ = [
    "QKernel", "q_kernel", "mehler_kernel", "h0_kernel", "oscillator_ground_state",
    "evolution_kernel_operator", "sandwiched_h0", "VacuumState", "vacuum", "vacuum_norm",
    "vacuum_via_q", "vacuum_pairing", "large_tau_factor", "propagator_g",
    "similarity_residual", "gaussian_battery", "LinearTimesGaussian", "Branch",
]
