"""Several coupled acceleration oscillators diagonalized by an orthogonal S.

Site coordinates x (and v) relate to mode coordinates by x = S^T z, i.e.
z = S x.  In mode coordinates the Lagrangian is a sum of independent
single-oscillator terms with couplings (gamma_n, alpha_n, beta_n); in site
coordinates the coupling matrices are S^T diag(.) S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import CriticalMode, DimensionMismatch, NotOrthogonal
from .gaussian import GaussianForm
from .params import Branch, ModelParams
from .qoperator import evolution_kernel_operator

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class MultiDofSystem:
    mixing: np.ndarray
    modes: tuple[ModelParams, ...]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def site_couplings(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(gamma, alpha, beta) as site-basis matrices S^T diag(.) S."""
        s = self.mixing
        out = []
        for name in ("gamma", "alpha", "beta"):
            d = np.diag([getattr(m, name) for m in self.modes])
            out.append(s.T @ d @ s)
        return tuple(out)

    def site_transform(self, blocks: int) -> np.ndarray:
        """block_diag(S, ..., S): site variables -> mode variables."""
        return block_diag(*([self.mixing] * blocks))


def build_system(mixing, couplings: Sequence[Sequence[float]]) -> MultiDofSystem:
    """``couplings[n] = (gamma_n, alpha_n, beta_n)`` for mode n."""
    s = np.asarray(mixing, dtype=float)
    n = len(couplings)
    if s.shape != (n, n):
        raise DimensionMismatch(f"mixing matrix {s.shape} does not match {n} modes")
    err = np.max(np.abs(s @ s.T - np.eye(n)))
    if err > ORTHO_TOL * n:
        raise NotOrthogonal(f"S S^T deviates from identity by {err:.3g}")
    modes = []
    for k, c in enumerate(couplings):
        m = ModelParams.from_couplings(*c)
        if m.branch is Branch.CRITICAL:
            raise CriticalMode(f"mode {k} sits on the critical line")
        modes.append(m)
    return MultiDofSystem(s, tuple(modes))


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class MultiGroundState:
    """exp(-1/2 x^T P x - 1/2 v^T Q v - x^T R v) times ``norm``."""

    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    norm: float
    energy: float
    dual: bool = False

    def form(self) -> GaussianForm:
        """Gaussian over (x_1..x_N, v_1..v_N)."""
        return GaussianForm(self.norm, np.block([[self.P, self.R], [self.R.T, self.Q]]))

    def eigen_defect(self, system: MultiDofSystem) -> dict[str, float]:
        """Residual coefficients of (H - E) Psi / Psi for the site Hamiltonian.

        H = -1/2 d_v^T K d_v - v^T d_x + 1/2 v^T A v + 1/2 x^T B x with
        K = S^T gamma^{-1} S; each entry must vanish for an eigenstate.
        """
        s = system.mixing
        kin = s.T @ np.diag([1.0 / m.gamma for m in system.modes]) @ s
        _, a, b = system.site_couplings()
        P, Q, R = self.P, self.Q, self.R
        sign = -1.0 if self.dual else 1.0
        # dual states are eigenstates of H^dagger, whose drift flips sign
        xx = -0.5 * R @ kin @ R + 0.5 * b
        vv = -0.5 * Q @ kin @ Q + 0.5 * sign * (R + R.T) + 0.5 * a
        xv = -R @ kin @ Q + sign * P
        const = 0.5 * np.trace(kin @ Q) - self.energy
        return {
            "xx": float(np.max(np.abs(xx))),
            "vv": float(np.max(np.abs(vv))),
            "xv": float(np.max(np.abs(xv))),
            "energy": abs(const),
        }


def ground_state_many(system: MultiDofSystem, dual: bool = False) -> MultiGroundState:
    """Product of the mode vacua rotated to site coordinates."""
    p_, q_, r_ = [], [], []
    norm, energy = 1.0, 0.0
    for m in system.modes:
        f = m.freqs
        if f.total <= 0.0:
            from .errors import NotNormalizable

            raise NotNormalizable("a mode has cos(phi) <= 0")
        p_.append(m.gamma * f.total * f.product)
        q_.append(m.gamma * f.total)
        r_.append(m.gamma * f.product * (-1.0 if dual else 1.0))
        norm *= f.product**0.25 * math.sqrt(m.gamma * f.total / math.pi)
        energy += m.ground_energy
    s = system.mixing
    rot = lambda d: s.T @ np.diag(d) @ s  # noqa: E731
    return MultiGroundState(rot(p_), rot(q_), rot(r_), norm, energy, dual)


def kernel_many(system: MultiDofSystem, tau: float) -> GaussianForm:
    """Kernel over (x_f, v_f, x_i, v_i), each block of length N, in site coordinates.

    Each mode uses the operator route, so every mode must be on the real branch.
    """
    n = system.n_modes
    quad = np.zeros((4 * n, 4 * n))
    norm = 1.0
    for k, m in enumerate(system.modes):
        g = evolution_kernel_operator(m, tau)
        idx = [k, n + k, 2 * n + k, 3 * n + k]
        quad[np.ix_(idx, idx)] = g.quad
        norm *= g.norm.real
    return GaussianForm(norm, quad).transform(system.site_transform(4))


__all__ = [
    "MultiDofSystem", "build_system", "rotation", "MultiGroundState", "ground_state_many",
    "kernel_many", "ORTHO_TOL",
]
