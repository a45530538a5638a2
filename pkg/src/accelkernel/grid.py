"""Finite-difference representation of H on a rectangular (x, v) grid.

Central differences (second or fourth order) with homogeneous Dirichlet walls.  The grid
is an independent oracle: nothing here uses the Gaussian algebra, only the
closed-form vacuum states as sampled test vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import GridTooSmall
from .params import ModelParams
from .qoperator import vacuum

#: Relative size of the vacuum at the walls above which the box is too small.
EDGE_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Interior points x_j = -x_max + j h_x, j = 1..n_x (same for v)."""

    x_max: float
    v_max: float
    n_x: int
    n_v: int

    def __post_init__(self):
        if self.n_x < 3 or self.n_v < 3:
            raise GridTooSmall(f"need at least 3 points per axis, got {self.n_x}x{self.n_v}")
        if self.x_max <= 0 or self.v_max <= 0:
            raise GridTooSmall("box half-widths must be positive")

    @property
    def h_x(self) -> float:
        return 2.0 * self.x_max / (self.n_x + 1)

    @property
    def h_v(self) -> float:
        return 2.0 * self.v_max / (self.n_v + 1)

    @property
    def x(self) -> np.ndarray:
        return -self.x_max + self.h_x * np.arange(1, self.n_x + 1)

    @property
    def v(self) -> np.ndarray:
        return -self.v_max + self.h_v * np.arange(1, self.n_v + 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.v, indexing="ij")

    def refined(self) -> "GridSpec":
        """Same box, half the spacing."""
        return GridSpec(self.x_max, self.v_max, 2 * self.n_x + 1, 2 * self.n_v + 1)

    @property
    def cell(self) -> float:
        return self.h_x * self.h_v

    def sample(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        xx, vv = self.mesh()
        return np.real(np.asarray(f(xx, vv))).ravel()


def vacuum_box(p: ModelParams, n: int, decay: float = 1e-15) -> GridSpec:
    """Smallest box on which both vacua have dropped below ``decay`` at the walls."""
    f = p.freqs
    a = p.gamma * f.total * f.product
    b = p.gamma * f.total
    c = p.gamma * f.product
    # marginal widths of exp(-1/2 z^T M z): the wall value along x is exp(-x^2 (a - c^2/b)/2)
    ax = a - c * c / b
    bv = b - c * c / a
    if ax <= 0 or bv <= 0:
        raise GridTooSmall("vacuum is not square integrable; no finite box contains it")
    k = 2.0 * math.log(1.0 / decay)
    return GridSpec(math.sqrt(k / ax), math.sqrt(k / bv), n, n)


_STENCILS = {
    2: (([-1.0, 1.0], [-1, 1], 2.0), ([1.0, -2.0, 1.0], [-1, 0, 1], 1.0)),
    4: (([1.0, -8.0, 8.0, -1.0], [-2, -1, 1, 2], 12.0),
        ([-1.0, 16.0, -30.0, 16.0, -1.0], [-2, -1, 0, 1, 2], 12.0)),
}


def _first_derivative(n: int, h: float, order: int = 2) -> sp.csr_matrix:
    coef, offs, den = _STENCILS[order][0]
    return sp.diags(coef, offs, shape=(n, n), format="csr") / (den * h)


def _second_derivative(n: int, h: float, order: int = 2) -> sp.csr_matrix:
    coef, offs, den = _STENCILS[order][1]
    return sp.diags(coef, offs, shape=(n, n), format="csr") / (den * h * h)


@dataclass(frozen=True)
class GridOperator:
    """Sparse matrices of H, x, v and d_x on a grid (index = i_x * n_v + i_v).

    ``order`` is the accuracy order of the difference stencils (2 or 4).
    """

    params: ModelParams
    grid: GridSpec
    order: int = 2

    def __post_init__(self):
        if self.order not in _STENCILS:
            raise ValueError(f"stencil order must be one of {sorted(_STENCILS)}, got {self.order}")

    def _x(self) -> sp.csr_matrix:
        return sp.kron(sp.diags(self.grid.x), sp.identity(self.grid.n_v), format="csr")

    def _v(self) -> sp.csr_matrix:
        return sp.kron(sp.identity(self.grid.n_x), sp.diags(self.grid.v), format="csr")

    @property
    def x_op(self) -> sp.csr_matrix:
        return self._x()

    @property
    def v_op(self) -> sp.csr_matrix:
        return self._v()

    @property
    def dx_op(self) -> sp.csr_matrix:
        g = self.grid
        return sp.kron(_first_derivative(g.n_x, g.h_x, self.order), sp.identity(g.n_v), format="csr")

    @property
    def hamiltonian(self) -> sp.csr_matrix:
        p, g = self.params, self.grid
        kin = sp.kron(sp.identity(g.n_x), _second_derivative(g.n_v, g.h_v, self.order))
        xx, vv = g.mesh()
        pot = sp.diags((0.5 * p.alpha * vv**2 + 0.5 * p.beta * xx**2).ravel())
        drift = self.v_op @ self.dx_op
        return (-kin / (2.0 * p.gamma) - drift + pot).tocsr()


@dataclass(frozen=True)
class GridResiduals:
    """Relative residuals, each ||.||/||psi|| in the grid l2 norm."""

    h_x: float
    h_v: float
    eigen: float
    dual_eigen: float
    commutator: float
    anti_hermitian: float


def _check_edges(grid: GridSpec, psi: np.ndarray) -> None:
    a = np.abs(psi).reshape(grid.n_x, grid.n_v)
    edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max())
    if edge > EDGE_TOL * a.max():
        raise GridTooSmall(f"vacuum at the walls is {edge / a.max():.2e} of its peak")


def default_test_functions() -> list[Callable[[np.ndarray, np.ndarray], np.ndarray]]:
    """Five smooth, rapidly decaying functions on (x, v)."""
    specs = [
        (2.0, 1.0, 0.0, 0.0, 0.0),
        (3.0, 2.0, 0.5, 0.2, -0.1),
        (1.5, 2.5, -0.7, -0.3, 0.3),
        (4.0, 1.2, 0.2, 0.4, 0.0),
        (2.5, 3.0, 0.0, -0.5, 0.6),
    ]

    def make(a, b, c, x0, v0):
        return lambda x, v: np.exp(-0.5 * a * (x - x0) ** 2 - 0.5 * b * (v - v0) ** 2 - c * (x - x0) * (v - v0))

    return [make(*s) for s in specs]


def grid_residuals(p: ModelParams, grid: GridSpec,
                   tests: Sequence[Callable] | None = None, order: int = 2) -> GridResiduals:
    """Eigen-equations of both vacua and the constraint [H, x] = -v on ``grid``."""
    op = GridOperator(p, grid, order)
    H = op.hamiltonian
    e = p.ground_energy
    psi = grid.sample(vacuum(p))
    dual = grid.sample(vacuum(p, dual=True))
    _check_edges(grid, psi)
    _check_edges(grid, dual)
    eig = np.linalg.norm(H @ psi - e * psi) / np.linalg.norm(psi)
    deig = np.linalg.norm(H.T @ dual - e * dual) / np.linalg.norm(dual)
    X, V = op.x_op, op.v_op
    comm = 0.0
    for f in tests if tests is not None else default_test_functions():
        phi = grid.sample(f)
        res = H @ (X @ phi) - X @ (H @ phi) + V @ phi
        comm = max(comm, np.linalg.norm(res) / np.linalg.norm(phi))
    # H - H^T should be exactly the drift's antisymmetric part -2 v d_x
    anti = H - H.T + 2.0 * (V @ op.dx_op)
    anti_norm = float(abs(anti).max()) if anti.nnz else 0.0
    return GridResiduals(grid.h_x, grid.h_v, float(eig), float(deig), float(comm), anti_norm)


def propagator_grid(p: ModelParams, tau: float, grid: GridSpec, order: int = 4) -> float:
    """G(tau) from the grid matrix exponential applied to x |Psi00>."""
    op = GridOperator(p, grid, order)
    psi = grid.sample(vacuum(p))
    dual = grid.sample(vacuum(p, dual=True))
    _check_edges(grid, psi)
    xs = op.x_op
    pairing = dual @ psi
    evolved = expm_multiply(-tau * op.hamiltonian, xs @ psi) if tau > 0 else xs @ psi
    return float(math.exp(tau * p.ground_energy) * (dual @ (xs @ evolved)) / pairing)


def convergence_ratios(values: Sequence[float]) -> list[float]:
    """Successive ratios r_k = e_k / e_{k+1} of a residual sequence under h halving."""
    return [values[k] / values[k + 1] for k in range(len(values) - 1)]


__all__ = [
    "GridSpec", "GridOperator", "GridResiduals", "grid_residuals", "propagator_grid",
    "vacuum_box", "default_test_functions", "convergence_ratios", "EDGE_TOL",
]
