"""Shared helpers for the test modules."""

import math

import numpy as np

from accelkernel.classical import BoundaryData
from accelkernel.params import ModelParams


def random_bc(rng: np.random.Generator, scale: float = 1.0) -> BoundaryData:
    return BoundaryData(*(scale * rng.normal(size=4)))


def random_params(rng: np.random.Generator, complex_share: float = 0.5) -> ModelParams:
    """A random point on the real branch, or (with probability ``complex_share``) the complex one."""
    g = rng.uniform(0.5, 2.0)
    if rng.random() >= complex_share:
        w2 = rng.uniform(0.3, 1.5)
        return ModelParams.from_frequencies(g, w2 * rng.uniform(1.2, 3.0), w2)
    b = rng.uniform(0.5, 4.0)
    return ModelParams.from_couplings(g, rng.uniform(-0.5, 0.9) * 2.0 * math.sqrt(b * g), b)


def log_ratio_gap(k1, k2, pts) -> float:
    """max |K1(z)/K1(0) / (K2(z)/K2(0)) - 1| over the rows of ``pts``."""
    zero = np.zeros(k1.n)
    d = (k1.log_abs(pts) - k1.log_abs(zero)) - (k2.log_abs(pts) - k2.log_abs(zero))
    return float(np.max(np.abs(np.expm1(d))))


#: Lines printed by the acceptance suite, repeated in the pytest terminal summary.
ACCEPTANCE_LINES: list[str] = []
