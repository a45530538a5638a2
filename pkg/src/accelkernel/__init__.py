"""Evolution kernels of the Euclidean acceleration oscillator.

Two independent routes to <x_f, v_f| e^{-tau H} |x_i, v_i>: the classical
action of the fourth-order boundary-value problem (``classical``) and a
similarity transform to two decoupled oscillators composed with exact
Gaussian algebra (``qoperator``).  ``lattice`` and ``grid`` provide
brute-force oracles; ``multidof`` handles orthogonally mixed modes.
"""

__version__ = "0.1.0"

from .classical import BoundaryData, action_matrix, kernel_closed_form, solve_bvp
from .errors import AccelKernelError
from .gaussian import GaussianForm, compose
from .params import Branch, Couplings, ModelParams
from .qoperator import evolution_kernel_operator, propagator_g, vacuum, vacuum_via_q

__all__ = [
    "__version__", "AccelKernelError", "Branch", "Couplings", "ModelParams", "GaussianForm", "compose",
    "BoundaryData", "action_matrix", "kernel_closed_form", "solve_bvp",
    "evolution_kernel_operator", "propagator_g", "vacuum", "vacuum_via_q",
]
