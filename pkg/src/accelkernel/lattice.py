"""Time-sliced path integral and its continuum limit.

One step of length eps multiplies by

    delta(x - x' + eps v) * exp{-(gamma/2eps)(v - v')^2 - (alpha eps/2) v^2
                                - (eps/2)(U(x) + U(x'))}

(U = beta x^2 / 2).  Eliminating every velocity through the delta functions
leaves positions x_0 = x_i, ..., x_N = x_f on which the exponent is

    -(gamma/2eps^3) sum (x_n - 2x_{n-1} + x_{n-2})^2
    -(alpha/2eps)   sum (x_n - x_{n-1})^2
    -(beta eps/4)   sum (x_n^2 + x_{n-1}^2),

and the boundary velocities pin x_1 = x_i - eps v_i, x_{N-1} = x_f + eps v_f.
The remaining N - 3 interior positions are Gaussian with a pentadiagonal
positive-definite Hessian, so the integral is exp(max S) times a determinant
that does not depend on the boundary data.  Ratios K(bc)/K(bc_ref) therefore
need only the maximum, which comes from one banded solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import solveh_banded

from .classical import BoundaryData, action_matrix
from .errors import BadDiscretization, NonConvergent
from .params import ModelParams

#: Smallest number of steps that leaves a free interior position.
MIN_STEPS = 4


@dataclass(frozen=True)
class StepKernel:
    """One time step: the smooth factor ``exp(log_weight)`` times the delta of ``constraint``."""

    eps: float
    gamma: float
    alpha: float
    beta: float

    @property
    def velocity_norm(self) -> float:
        """sqrt(gamma / (2 pi eps)), the Gaussian normalization of the v-jump."""
        return math.sqrt(self.gamma / (2.0 * math.pi * self.eps))

    def constraint(self, x, v, x_prev):
        """Argument of the delta function; zero when v = -(x - x')/eps."""
        return np.asarray(x) - np.asarray(x_prev) + self.eps * np.asarray(v)

    def log_weight(self, x, v, x_prev, v_prev):
        e = self.eps
        return (-(self.gamma / (2.0 * e)) * (np.asarray(v) - v_prev) ** 2
                - 0.25 * e * self.beta * (np.asarray(x) ** 2 + np.asarray(x_prev) ** 2)
                - 0.5 * e * self.alpha * np.asarray(v) ** 2)


def step_kernel(p: ModelParams, eps: float) -> StepKernel:
    if not eps > 0.0:
        raise BadDiscretization(f"step must be positive, got {eps}")
    return StepKernel(eps, p.gamma, p.alpha, p.beta)


def _path_form(p: ModelParams, n: int, eps: float) -> np.ndarray:
    """Symmetric H (dense, (n+1)^2) with lattice exponent -1/2 x^T H x."""
    h = np.zeros((n + 1, n + 1))
    acc = p.gamma / eps**3
    for k in range(2, n + 1):
        d = np.array([1.0, -2.0, 1.0])
        idx = [k - 2, k - 1, k]
        h[np.ix_(idx, idx)] += acc * np.outer(d, d)
    vel = p.alpha / eps
    pot = 0.5 * p.beta * eps
    for k in range(1, n + 1):
        h[np.ix_([k - 1, k], [k - 1, k])] += vel * np.array([[1.0, -1.0], [-1.0, 1.0]])
        h[k - 1, k - 1] += pot
        h[k, k] += pot
    return h


def _banded_upper(h: np.ndarray, bands: int = 2) -> np.ndarray:
    """Upper banded storage for ``solveh_banded``."""
    n = h.shape[0]
    ab = np.zeros((bands + 1, n))
    for k in range(bands + 1):
        ab[bands - k, k:] = np.diagonal(h, k)
    return ab


@dataclass(frozen=True)
class LatticeProblem:
    """Quadratic problem for the free interior positions x_2 .. x_{N-2}."""

    params: ModelParams
    bc: BoundaryData
    tau: float
    n_steps: int
    eps: float
    boundary_values: np.ndarray   # (x_0, x_1, x_{N-1}, x_N)
    h_free: np.ndarray            # banded storage of the free-free block
    coupling: np.ndarray          # free-boundary block, shape (N-3, 4)
    h_fixed: np.ndarray           # boundary-boundary block, 4x4

    def maximizer(self) -> np.ndarray:
        """Full path (x_0..x_N) maximizing the lattice action."""
        f = self.boundary_values
        y = solveh_banded(self.h_free, -self.coupling @ f)
        return np.concatenate([f[:2], y, f[2:]])

    def max_action(self) -> float:
        """max over interior positions of the lattice exponent."""
        f = self.boundary_values
        b = self.coupling @ f
        y = solveh_banded(self.h_free, b)
        return float(-0.5 * (f @ self.h_fixed @ f - b @ y))

    def action(self, path: np.ndarray) -> float:
        """Lattice exponent of an arbitrary full path."""
        return float(-0.5 * path @ _path_form(self.params, self.n_steps, self.eps) @ path)


def build_problem(p: ModelParams, bc: BoundaryData, tau: float, n_steps: int) -> LatticeProblem:
    if n_steps < MIN_STEPS:
        raise BadDiscretization(f"need at least {MIN_STEPS} steps, got {n_steps}")
    if not tau > 0.0:
        raise BadDiscretization(f"tau must be positive, got {tau}")
    n = int(n_steps)
    eps = tau / n
    h = _path_form(p, n, eps)
    fixed = [0, 1, n - 1, n]
    free = list(range(2, n - 1))
    vals = np.array([bc.x_i, bc.x_i - eps * bc.v_i, bc.x_f + eps * bc.v_f, bc.x_f])
    return LatticeProblem(
        params=p, bc=bc, tau=tau, n_steps=n, eps=eps,
        boundary_values=vals,
        h_free=_banded_upper(h[np.ix_(free, free)]),
        coupling=h[np.ix_(free, fixed)],
        h_fixed=h[np.ix_(fixed, fixed)],
    )


def log_kernel_ratio(p: ModelParams, bc: BoundaryData, ref: BoundaryData, tau: float,
                     n_steps: int) -> float:
    """log K_N(bc) - log K_N(ref); the fluctuation determinant cancels."""
    s = build_problem(p, bc, tau, n_steps).max_action()
    s_ref = build_problem(p, ref, tau, n_steps).max_action()
    return s - s_ref


def kernel_ratio(p: ModelParams, bc: BoundaryData, ref: BoundaryData, tau: float, n_steps: int) -> float:
    """K_N(bc)/K_N(ref)."""
    return math.exp(log_kernel_ratio(p, bc, ref, tau, n_steps))


def closed_form_ratio(p: ModelParams, bc: BoundaryData, ref: BoundaryData, tau: float) -> float:
    m = action_matrix(p, tau)
    return math.exp(m.action(bc) - m.action(ref))


class Extrapolation(NamedTuple):
    limit: float
    order: float


def observed_order(values: Sequence[float], refinement: float = 2.0) -> float:
    """Convergence order from the three finest values."""
    f = np.asarray(values, dtype=float)
    if f.size < 3:
        raise NonConvergent("need at least three refinement levels")
    d1, d2 = f[-2] - f[-3], f[-1] - f[-2]
    if d2 == 0.0 or d1 / d2 <= 1.0:
        raise NonConvergent(f"differences {d1:.3g}, {d2:.3g} do not shrink")
    return math.log(d1 / d2) / math.log(refinement)


def extrapolate(values: Sequence[float], refinement: float = 2.0,
                order_tol: float = 0.25) -> Extrapolation:
    """Repeated Richardson extrapolation of values at steps h, h/r, h/r^2, ...

    The leading order p is measured from the data.  When it lies within
    ``order_tol`` of an integer the error is taken to be a power series
    c_p h^p + c_{p+1} h^{p+1} + ..., and each level removes the next power;
    otherwise only the measured order is removed.  Raises ``NonConvergent``
    when successive differences do not shrink.
    """
    f = np.asarray(values, dtype=float)
    d = np.diff(f)
    if f.size >= 3 and np.all(np.abs(d) <= 1e-14 * max(np.max(np.abs(f)), 1e-300)):
        return Extrapolation(float(f[-1]), math.inf)
    if np.any(np.abs(d[1:]) >= np.abs(d[:-1])):
        raise NonConvergent(f"differences {d} do not shrink")
    p = observed_order(f, refinement)
    formal = round(p)
    series = formal >= 1 and abs(p - formal) <= order_tol
    k = formal if series else p
    while f.size >= 2:
        f = f[1:] + np.diff(f) / (refinement**k - 1.0)
        if not series:
            break
        k += 1
    return Extrapolation(float(f[-1]), float(p))


def continuum_ratio(p: ModelParams, bc: BoundaryData, ref: BoundaryData, tau: float,
                    levels: Sequence[int] = (64, 128, 256, 512)) -> Extrapolation:
    """Continuum K(bc)/K(ref) from lattices with N = levels (each twice the last).

    The log-ratio is extrapolated: it is a smooth function of eps, while the
    ratio itself can vary over many orders of magnitude between boundary sets.
    """
    levels = list(levels)
    if any(b != 2 * a for a, b in zip(levels, levels[1:])):
        raise BadDiscretization(f"levels must double, got {levels}")
    logs = [log_kernel_ratio(p, bc, ref, tau, n) for n in levels]
    ex = extrapolate(logs)
    return Extrapolation(math.exp(ex.limit), ex.order)


__all__ = [
    "StepKernel", "step_kernel", "LatticeProblem", "build_problem", "kernel_ratio",
    "log_kernel_ratio", "continuum_ratio",
    "closed_form_ratio", "Extrapolation", "extrapolate", "observed_order", "MIN_STEPS",
]
