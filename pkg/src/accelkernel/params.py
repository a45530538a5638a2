"""Parameter space of the acceleration oscillator.

The Euclidean Lagrangian is

    L = -(gamma/2) xddot^2 - (alpha/2) xdot^2 - (beta/2) x^2
      = -(gamma/2) [xddot^2 + (w1^2 + w2^2) xdot^2 + w1^2 w2^2 x^2]

so the couplings (gamma, alpha, beta) and the frequency pair (w1, w2) are two
coordinate systems on the same space.  The sign of alpha - 2 sqrt(beta gamma)
splits it into a real branch (w1 > w2 > 0), a complex branch
(w1 = conj(w2) = R e^{i phi}) and the critical line w1 == w2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

from .errors import ComplexBranch, CriticalFrequency

#: Relative width of the band around alpha = 2 sqrt(beta gamma) treated as critical.
CRITICAL_TOL = 1e-10


class Branch(str, Enum):
    REAL = "real"
    COMPLEX = "complex"
    CRITICAL = "critical"


@dataclass(frozen=True)
class Couplings:
    """Lagrangian couplings.

    ``gamma`` and ``beta`` must be positive.  ``alpha`` is only required to be
    finite: alpha <= 0 is still a valid (complex-branch) point and is needed to
    reach the region where the vacuum stops being normalizable.
    """

    gamma: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val!r}")
        if self.gamma <= 0 or self.beta <= 0:
            raise ValueError(f"gamma and beta must be positive, got {self.gamma}, {self.beta}")

    @property
    def critical_alpha(self) -> float:
        return 2.0 * math.sqrt(self.beta * self.gamma)

    def scaled(self, s: float) -> "Couplings":
        return Couplings(s * self.gamma, s * self.alpha, s * self.beta)


@dataclass(frozen=True)
class FrequencyPair:
    omega1: complex
    omega2: complex

    @property
    def is_real(self) -> bool:
        return self.omega1.imag == 0.0 and self.omega2.imag == 0.0

    @property
    def product(self) -> float:
        """w1 * w2, real on every branch."""
        return (self.omega1 * self.omega2).real

    @property
    def total(self) -> float:
        """w1 + w2, real on every branch."""
        return (self.omega1 + self.omega2).real

    @property
    def sum_sq(self) -> float:
        return (self.omega1**2 + self.omega2**2).real

    @property
    def modulus(self) -> float:
        """R in w1 = R e^{i phi}."""
        return abs(self.omega1)

    @property
    def phase(self) -> float:
        """phi in w1 = R e^{i phi} (zero on the real branch)."""
        return cmath.phase(self.omega1)


def _as_pair(omega1, omega2) -> FrequencyPair:
    w1, w2 = complex(omega1), complex(omega2)
    if w1.imag == 0.0 and w2.imag == 0.0:
        w1, w2 = complex(w1.real), complex(w2.real)
        if w2.real > w1.real:
            w1, w2 = w2, w1
    return FrequencyPair(w1, w2)


def classify_branch(c: Couplings, tol: float = CRITICAL_TOL) -> Branch:
    """Branch of ``c``; a relative band of width ``tol`` around the critical line is CRITICAL."""
    crit = c.critical_alpha
    if c.alpha > crit * (1.0 + tol):
        return Branch.REAL
    if c.alpha < crit * (1.0 - tol):
        return Branch.COMPLEX
    return Branch.CRITICAL


def frequencies_from_couplings(c: Couplings) -> FrequencyPair:
    """Roots w1, w2 of gamma*(w^4) - alpha*w^2 + beta with the branch conventions.

    Real branch: w1 > w2 > 0.  Complex branch: w1 = R e^{i phi}, w2 = conj(w1)
    with 0 < phi <= pi/2.  On the critical line both equal (beta/gamma)^{1/4}.
    """
    g, a, b = c.gamma, c.alpha, c.beta
    disc = a - c.critical_alpha
    if disc >= 0.0:
        p = math.sqrt(a + c.critical_alpha)
        m = math.sqrt(disc)
        k = 1.0 / (2.0 * math.sqrt(g))
        w1 = k * (p + m)
        # p - m cancels for large alpha; use w1*w2 = sqrt(beta/gamma) instead
        w2 = math.sqrt(b / g) / w1
        return FrequencyPair(complex(w1), complex(w2))
    R = (b / g) ** 0.25
    cos2phi = a / (2.0 * math.sqrt(b * g))
    phi = 0.5 * math.acos(max(-1.0, min(1.0, cos2phi)))
    w1 = cmath.rect(R, phi)
    return FrequencyPair(w1, w1.conjugate())


def couplings_from_frequencies(gamma: float, f: FrequencyPair) -> Couplings:
    return Couplings(gamma, gamma * f.sum_sq, gamma * f.product**2)


@dataclass(frozen=True)
class QParams:
    """Constants of Q = a x v - b d^2/dxdv and its half-angle functions.

    A = cosh(sqrt(ab)/2), B = sinh(sqrt(ab)/2), C = sqrt(a/b).
    """

    a: float
    b: float
    A: float
    B: float
    C: float

    @property
    def sqrt_ab(self) -> float:
        return math.sqrt(self.a * self.b)


def _require_real_split(f: FrequencyPair) -> tuple[float, float]:
    if not f.is_real:
        raise ComplexBranch(
            "Q parameters need real frequencies; got "
            f"w1={f.omega1}, w2={f.omega2}"
        )
    w1, w2 = f.omega1.real, f.omega2.real
    if w2 > w1:
        w1, w2 = w2, w1
    if w1 - w2 <= CRITICAL_TOL * w1:
        raise CriticalFrequency(f"w1 == w2 == {w1}: log((w1+w2)/(w1-w2)) diverges")
    return w1, w2


def q_parameters(gamma: float, f: FrequencyPair) -> QParams:
    w1, w2 = _require_real_split(f)
    sqrt_ab = math.log((w1 + w2) / (w1 - w2))
    C = gamma * w1 * w2
    # sqrt(a/b) = C, sqrt(ab) = log(...)  =>  a = C sqrt_ab, b = sqrt_ab / C
    a = C * sqrt_ab
    b = sqrt_ab / C
    d = math.sqrt((w1 - w2) * (w1 + w2))
    return QParams(a=a, b=b, A=w1 / d, B=w2 / d, C=C)


@dataclass(frozen=True)
class H0Coefficients:
    """Coefficients of e^{-Q/2} H e^{Q/2} =
    c1 d_v^2 + c2 x d_v + c3 v d_x + c4 d_x^2 + c5 x^2 + c6 v^2."""

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float


def h0_coefficients(gamma: float, f: FrequencyPair) -> H0Coefficients:
    """Conjugated-Hamiltonian coefficients from A, B, C (not the simplified closed forms)."""
    qp = q_parameters(gamma, f)
    A, B, C = qp.A, qp.B, qp.C
    s = f.sum_sq
    p2 = f.product**2
    return H0Coefficients(
        c1=-A * A / (2.0 * gamma) + 0.5 * gamma * (B / C) ** 2 * p2,
        c2=-C * A * B / gamma + gamma * p2 * (A * B / C),
        c3=-(A * A + B * B) + gamma * s * (A * B / C),
        c4=-A * B / C + 0.5 * gamma * s * (B / C) ** 2,
        c5=-B * B * C * C / (2.0 * gamma) + 0.5 * gamma * p2 * A * A,
        c6=-A * B * C + 0.5 * gamma * s * A * A,
    )


@dataclass(frozen=True)
class RwParams:
    """w1 = r + i*omega, w2 = r - i*omega."""

    r: float
    omega: complex


def rw_parameters(gamma: float, f: FrequencyPair) -> RwParams:
    r = 0.5 * f.total
    omega = (f.omega1 - f.omega2) / 2j
    if f.is_real:
        omega = complex(0.0, omega.imag)
    else:
        omega = complex(omega.real, 0.0)
    return RwParams(r=r, omega=omega)


@dataclass(frozen=True)
class ModelParams:
    """Couplings together with everything derived from them."""

    couplings: Couplings
    freqs: FrequencyPair
    branch: Branch

    @classmethod
    def from_couplings(cls, gamma: float, alpha: float, beta: float,
                       tol: float = CRITICAL_TOL) -> "ModelParams":
        c = Couplings(float(gamma), float(alpha), float(beta))
        return cls(c, frequencies_from_couplings(c), classify_branch(c, tol))

    @classmethod
    def from_frequencies(cls, gamma: float, omega1, omega2,
                         tol: float = CRITICAL_TOL) -> "ModelParams":
        """Build from (w1, w2).  The given root labelling is kept, so a complex
        pair with |phi| >= pi/2 is representable (its vacuum is not normalizable)."""
        f = _as_pair(omega1, omega2)
        if not f.is_real and abs(f.omega1 - f.omega2.conjugate()) > 1e-12 * abs(f.omega1):
            raise ValueError("complex frequencies must be a conjugate pair")
        if not f.is_real:
            f = FrequencyPair(f.omega1, f.omega1.conjugate())
        c = couplings_from_frequencies(float(gamma), f)
        return cls(c, f, classify_branch(c, tol))

    @property
    def gamma(self) -> float:
        return self.couplings.gamma

    @property
    def alpha(self) -> float:
        return self.couplings.alpha

    @property
    def beta(self) -> float:
        return self.couplings.beta

    @property
    def ground_energy(self) -> float:
        """E00 = (w1 + w2)/2."""
        return 0.5 * self.freqs.total

    @property
    def qparams(self) -> QParams:
        if self.branch is Branch.CRITICAL:
            raise CriticalFrequency("Q parameters do not exist on the critical line")
        return q_parameters(self.gamma, self.freqs)

    @property
    def rw(self) -> RwParams:
        return rw_parameters(self.gamma, self.freqs)

    @property
    def h0(self) -> H0Coefficients:
        return h0_coefficients(self.gamma, self.freqs)

    def require_real(self) -> tuple[float, float]:
        """(w1, w2) as floats, or the branch error explaining why not."""
        if self.branch is Branch.CRITICAL:
            raise CriticalFrequency("operator method undefined on the critical line")
        if self.branch is Branch.COMPLEX:
            raise ComplexBranch("operator method needs the real branch")
        return self.freqs.omega1.real, self.freqs.omega2.real
