"""Classical route: boundary-value problem, action matrix and kernel.

Time conventions.  A path starts at (x_i, v_i) at t = 0 and ends at
(x_f, v_f) at t = tau, with the velocity variable v = -dx/dt.  The closed-form
solution is stored in reversed time s = tau - t, in which y(s) = x(tau - s)
satisfies y(0) = x_f, dy/ds(0) = v_f, y(tau) = x_i, dy/ds(tau) = v_i.

The classical action is S_c = -1/2 z^T M z with z = (x_f, v_f, x_i, v_i) and

    M = [[ M11,  M12,  M14,  M13],
         [ M12,  M22, -M13,  M23],
         [ M14, -M13,  M11, -M12],
         [ M13,  M23, -M12,  M22]]

so the kernel is N(tau) exp(-1/2 z^T M z).
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBvp, ZeroTau
from .gaussian import GaussianForm, sqrt_det
from .params import Branch, ModelParams

#: Below this |omega tau| the ratio sin(omega tau)/omega is summed as a series.
_SERIES_CUTOFF = 1e-4
#: Relative frequency splitting below which the (r, omega) forms lose digits.
_NEAR_CRITICAL = 1e-6


@dataclass(frozen=True)
class BoundaryData:
    x_f: float
    v_f: float
    x_i: float
    v_i: float

    def as_vector(self) -> np.ndarray:
        """(x_f, v_f, x_i, v_i), the kernel variable order."""
        return np.array([self.x_f, self.v_f, self.x_i, self.v_i], dtype=float)

    def time_reversed(self) -> "BoundaryData":
        """Data of the path run backwards: (x_i, -v_i) becomes the final state."""
        return BoundaryData(self.x_i, -self.v_i, self.x_f, -self.v_f)


def _sinc_ratio(omega: complex, tau: float) -> tuple[complex, complex]:
    """(sin(omega tau)/omega, cos(omega tau)), regular as omega -> 0."""
    wt = omega * tau
    c = cmath.cos(wt)
    if abs(wt) < _SERIES_CUTOFF:
        w2t2 = wt * wt
        return tau * (1.0 - w2t2 / 6.0 + w2t2 * w2t2 / 120.0), c
    return cmath.sin(wt) / omega, c


def _real(z: complex, what: str) -> float:
    if abs(z.imag) > 1e-9 * max(1.0, abs(z.real)):
        raise ArithmeticError(f"{what} came out complex: {z}")
    return z.real


@dataclass(frozen=True)
class ActionMatrix:
    """The six independent entries of the classical action matrix."""

    m11: float
    m12: float
    m13: float
    m14: float
    m22: float
    m23: float
    tau: float

    def kernel_quad(self) -> np.ndarray:
        """Quadratic form over (x_f, v_f, x_i, v_i)."""
        a, b, c, d, e, f = self.m11, self.m12, self.m13, self.m14, self.m22, self.m23
        return np.array([
            [a, b, d, c],
            [b, e, -c, f],
            [d, -c, a, -b],
            [c, f, -b, e],
        ])

    def full(self) -> np.ndarray:
        """Quadratic form over (x_f, v_f, v_i, x_i)."""
        return self.kernel_quad()[np.ix_([0, 1, 3, 2], [0, 1, 3, 2])]

    def action(self, bc: BoundaryData) -> float:
        z = bc.as_vector()
        return -0.5 * float(z @ self.kernel_quad() @ z)


def action_matrix(p: ModelParams, tau: float) -> ActionMatrix:
    """Closed-form action matrix, valid on both branches.

    With r = (w1 + w2)/2, w1 = r + i*omega, S = sin(omega tau)/omega and
    D = sinh^2(r tau) - r^2 S^2 (positive for tau > 0) every entry is a ratio
    of real combinations; ``S`` stays finite as omega -> 0, so the critical
    line is reached continuously.
    """
    if not tau > 0.0:
        raise ZeroTau(f"tau must be positive, got {tau}")
    if p.branch is Branch.CRITICAL:
        warnings.warn("frequencies are (nearly) degenerate; using the omega -> 0 limit",
                      RuntimeWarning, stacklevel=2)
    f = p.freqs
    if f.is_real and abs(f.omega1.real - f.omega2.real) < _NEAR_CRITICAL * abs(f.omega1.real) \
            and p.branch is not Branch.CRITICAL:
        warnings.warn("w1 and w2 nearly coincide; action matrix loses precision",
                      RuntimeWarning, stacklevel=2)
    a = p.gamma
    b = 0.5 * p.alpha
    rw = p.rw
    r, om = rw.r, rw.omega
    rr = f.product  # r^2 + omega^2 = w1 w2
    S, c1 = _sinc_ratio(om, tau)
    c2 = cmath.cos(2.0 * om * tau)
    rt = r * tau
    if 2.0 * rt > 700.0:
        return _asymptotic(p, tau)
    sh1, ch1 = math.sinh(rt), math.cosh(rt)
    sh2, ch2 = math.sinh(2.0 * rt), math.cosh(2.0 * rt)
    D = sh1 * sh1 - r * r * S * S
    Dr = _real(D, "denominator")
    if Dr <= 1e-300:
        raise DegenerateBvp(f"boundary-value system is singular at tau={tau}")
    m11 = a * r * rr * (sh2 + 2.0 * r * S * c1) / D
    m22 = a * r * (sh2 - 2.0 * r * S * c1) / D
    m12 = ((2.0 * a * r * r - b) * ch2 - 2.0 * a * r * r * c2 + b + 2.0 * r * r * b * S * S) / (2.0 * D)
    m13 = 2.0 * a * r * rr * S * sh1 / D
    m14 = -2.0 * a * r * rr * (r * ch1 * S + sh1 * c1) / D
    m23 = 2.0 * a * r * (r * ch1 * S - sh1 * c1) / D
    vals = [_real(v, name) for v, name in
            ((m11, "M11"), (m12, "M12"), (m13, "M13"), (m14, "M14"), (m22, "M22"), (m23, "M23"))]
    return ActionMatrix(*vals, tau=tau)


def _asymptotic(p: ModelParams, tau: float) -> ActionMatrix:
    """Entries when e^{2 r tau} overflows; off-diagonal couplings are below round-off."""
    inf = infinite_tau_matrix(p)
    return ActionMatrix(inf.m11, inf.m12, 0.0, 0.0, inf.m22, 0.0, tau=tau)


def infinite_tau_matrix(p: ModelParams) -> ActionMatrix:
    """tau -> infinity limit: M11 -> 2ar(r^2+omega^2), M22 -> 2ar, M12 -> 2ar^2 - b."""
    a = p.gamma
    b = 0.5 * p.alpha
    r = p.rw.r
    rr = p.freqs.product
    return ActionMatrix(2.0 * a * r * rr, 2.0 * a * r * r - b, 0.0, 0.0, 2.0 * a * r, 0.0,
                        tau=math.inf)


@dataclass(frozen=True)
class ClassicalSolution:
    """Solution of the fourth-order equation of motion for given boundary data.

    ``coeffs`` are (a1, a2, a3, a4) in
    y(s) = e^{rs}(a1 sin ws + a2 cos ws) + e^{-rs}(a3 sin ws + a4 cos ws),
    with s = tau - t the reversed time (complex on the real branch, where
    omega is imaginary; y itself is real).
    """

    params: ModelParams
    bc: BoundaryData
    tau: float
    coeffs: tuple[complex, complex, complex, complex]

    def _y(self, s, k: int = 0):
        rw = self.params.rw
        r, w = rw.r, rw.omega
        s = np.asarray(s, dtype=float)
        a1, a2, a3, a4 = self.coeffs
        out = 0.0
        for lam, amp_s, amp_c in ((r, a1, a2), (-r, a3, a4)):
            # e^{lam s}(S sin ws + C cos ws) = c+ e^{(lam+iw)s} + c- e^{(lam-iw)s}
            mu_p, mu_m = lam + 1j * w, lam - 1j * w
            cp = 0.5 * (amp_c - 1j * amp_s)
            cm = 0.5 * (amp_c + 1j * amp_s)
            out = out + cp * mu_p**k * np.exp(mu_p * s) + cm * mu_m**k * np.exp(mu_m * s)
        return np.real(out)

    def derivative(self, t, k: int = 0):
        """k-th derivative of x(t) in forward time."""
        return (-1.0) ** k * self._y(self.tau - np.asarray(t, dtype=float), k)

    def position(self, t):
        return self.derivative(t, 0)

    def velocity(self, t):
        """v = -dx/dt."""
        return -self.derivative(t, 1)

    def eom_residual(self, t):
        """gamma x'''' - alpha x'' + beta x (zero on a classical path)."""
        p = self.params
        return (p.gamma * self.derivative(t, 4) - p.alpha * self.derivative(t, 2)
                + p.beta * self.derivative(t, 0))

    def lagrangian(self, t):
        p = self.params
        return -0.5 * (p.gamma * self.derivative(t, 2) ** 2 + p.alpha * self.derivative(t, 1) ** 2
                       + p.beta * self.derivative(t, 0) ** 2)

    def energy(self, t=0.0):
        """Conserved Ostrogradsky energy g x''' x' - g/2 x''^2 - a/2 x'^2 + b/2 x^2."""
        p = self.params
        d0, d1, d2, d3 = (self.derivative(t, k) for k in range(4))
        return (p.gamma * d3 * d1 - 0.5 * p.gamma * d2**2 - 0.5 * p.alpha * d1**2
                + 0.5 * p.beta * d0**2)

    def action(self) -> float:
        """Boundary-term evaluation -1/2 [g x'' x' - g x''' x + a x' x]_0^tau."""
        p = self.params

        def term(t):
            d0, d1, d2, d3 = (self.derivative(t, k) for k in range(4))
            return p.gamma * d2 * d1 - p.gamma * d3 * d0 + p.alpha * d1 * d0

        return float(-0.5 * (term(self.tau) - term(0.0)))


def _coefficients_closed_form(p: ModelParams, bc: BoundaryData, tau: float):
    """a1..a4 from the explicit inverse of the 4x4 boundary system.

    The expressions are written for y'(0) = -V_f and y'(tau) = -V_i, so they
    are fed V = -v.
    """
    rw = p.rw
    r, om = rw.r, rw.omega
    xf, vf, xi, vi = bc.x_f, -bc.v_f, bc.x_i, -bc.v_i
    T = tau
    e = lambda u: cmath.exp(u)  # noqa: E731
    s1, c1 = cmath.sin(T * om), cmath.cos(T * om)
    s2, c2 = cmath.sin(2 * T * om), cmath.cos(2 * T * om)
    e1, e2, e3, e4 = e(r * T), e(2 * r * T), e(3 * r * T), e(4 * r * T)
    den = om**2 + om**2 * e4 + 2 * r**2 * e2 * c2 - 2 * e2 * (r**2 + om**2)
    if abs(den) <= 1e-300 * max(1.0, abs(e4)):
        raise DegenerateBvp(f"boundary system is singular at tau={tau}")
    g = 1.0 / den
    a1 = g * (r**2 * xf * e2 * s2 + om * vf * e2 - r * vf * e2 * s2 + r * om * xf * e2 * c2
              - r * om * xf - om * vf - 2 * r**2 * xi * e1 * s1 + 2 * r * vi * e1 * s1
              - om * e1 * (e2 - 1) * c1 * (vi + r * xi) - om**2 * xi * e1 * s1
              + om**2 * xi * e3 * s1)
    a2 = g * (-r**2 * xf * e2 + r * vf * e2 + r * e2 * c2 * (r * xf - vf) - om**2 * xf * e2
              - r * om * xf * e2 * s2 + om**2 * xf - om * vi * e1 * s1 + om * vi * e3 * s1
              + om**2 * xi * e1 * (e2 - 1) * c1 + r * om * xi * e1 * s1 + r * om * xi * e3 * s1)
    a3 = g * e1 * (r**2 * xf * e1 * s2 + om * vf * e1 - om * vf * e3 + r * vf * e1 * s2
                   + r * om * xf * e3 - r * om * xf * e1 * c2 - 2 * r**2 * xi * e2 * s1
                   - 2 * r * vi * e2 * s1 - om * (e2 - 1) * c1 * (r * xi - vi)
                   - om**2 * xi * e2 * s1 + om**2 * xi * s1)
    a4 = g * e1 * (-r**2 * xf * e1 - r * vf * e1 + r * e1 * c2 * (r * xf + vf) - om**2 * xf * e1
                   + om**2 * xf * e3 + r * om * xf * e1 * s2 - om * vi * e2 * s1
                   - om**2 * xi * (e2 - 1) * c1 - r * om * xi * e2 * s1 - r * om * xi * s1
                   + om * vi * s1)
    return (a1, a2, a3, a4)


def _boundary_rows(p: ModelParams, tau: float) -> np.ndarray:
    """Rows mapping (a1..a4) to (y(0), y'(0), y(tau), y'(tau))."""
    rw = p.rw
    r, w = rw.r, rw.omega

    def at(s):
        ep, em = cmath.exp(r * s), cmath.exp(-r * s)
        sn, cs = cmath.sin(w * s), cmath.cos(w * s)
        return (
            [ep * sn, ep * cs, em * sn, em * cs],
            [ep * (r * sn + w * cs), ep * (r * cs - w * sn),
             em * (-r * sn + w * cs), em * (-r * cs - w * sn)],
        )

    r0, d0 = at(0.0)
    rt, dt = at(tau)
    return np.array([r0, d0, rt, dt], dtype=complex)


def _coefficients_linear(p: ModelParams, bc: BoundaryData, tau: float):
    rows = _boundary_rows(p, tau)
    rhs = np.array([bc.x_f, bc.v_f, bc.x_i, bc.v_i], dtype=complex)
    cond = np.linalg.cond(rows)
    if not np.isfinite(cond) or cond > 1e14:
        raise DegenerateBvp(f"boundary system condition number {cond:.3g} at tau={tau}")
    return tuple(complex(c) for c in np.linalg.solve(rows, rhs))


def solve_bvp(p: ModelParams, bc: BoundaryData, tau: float, method: str = "closed_form") -> ClassicalSolution:
    """Classical path with the given endpoint data.

    ``method`` is ``"closed_form"`` (explicit coefficients) or ``"linear"``
    (numerical solve of the boundary system); the two are independent routes.
    Both need omega != 0, i.e. a point off the critical line.
    """
    if not tau > 0.0:
        raise ZeroTau(f"tau must be positive, got {tau}")
    if abs(p.rw.omega) * tau < _SERIES_CUTOFF:
        raise DegenerateBvp("sin/cos basis degenerates on the critical line")
    if method == "closed_form":
        coeffs = _coefficients_closed_form(p, bc, tau)
    elif method == "linear":
        coeffs = _coefficients_linear(p, bc, tau)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ClassicalSolution(p, bc, tau, tuple(complex(c) for c in coeffs))


def van_vleck_norm(quad: np.ndarray) -> float:
    """(1/2pi) sqrt(det M_fi), with M_fi the final/initial coupling block."""
    block = np.asarray(quad)[:2, 2:]
    d = float(np.linalg.det(block))
    if d <= 0.0:
        raise DegenerateBvp(f"final/initial coupling determinant {d:.3g} is not positive")
    return math.sqrt(d) / (2.0 * math.pi)


def kernel_closed_form(p: ModelParams, tau: float) -> GaussianForm:
    """<x_f, v_f| e^{-tau H} |x_i, v_i> = N(tau) exp(S_c).

    The exponent always comes from the action matrix.  On the real branch the
    prefactor is the one fixed by the operator route; elsewhere it is the
    Van Vleck determinant of the action.
    """
    quad = action_matrix(p, tau).kernel_quad()
    if p.branch is Branch.REAL:
        from .qoperator import evolution_kernel_operator

        norm = evolution_kernel_operator(p, tau).norm.real
    else:
        norm = van_vleck_norm(quad)
    return GaussianForm(norm, quad)


def kernel_symmetry_map() -> np.ndarray:
    """T with K(T z) = K(z): (x_f, v_f, x_i, v_i) -> (x_i, -v_i, x_f, -v_f)."""
    t = np.zeros((4, 4))
    t[0, 2] = 1.0
    t[1, 3] = -1.0
    t[2, 0] = 1.0
    t[3, 1] = -1.0
    return t


__all__ = [
    "BoundaryData", "ActionMatrix", "ClassicalSolution", "action_matrix", "infinite_tau_matrix",
    "solve_bvp", "kernel_closed_form", "van_vleck_norm", "kernel_symmetry_map", "sqrt_det",
]
