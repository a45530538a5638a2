"""Centered complex Gaussian forms ``c * exp(-1/2 z^T M z)``.

Every kernel and state in the package is one of these: states live on (x, v),
evolution kernels on (x, v, x', v').  Composition over shared variables is the
exact Gaussian integral, so chains such as ``e^{Q/2} e^{-tau H0} e^{-Q/2}`` are
evaluated in closed form.

Several of the forms that appear (matrix elements of e^{+-tau Q}) are not
integrable in the ordinary sense; their integrals are defined by analytic
continuation.  ``sqrt_det`` fixes that continuation: det(M)^{1/2} is the
product of the principal square roots of the eigenvalues of M, with a
negative real eigenvalue taken as lambda + i0 (sqrt = +i sqrt|lambda|).  For
any M whose real part is positive definite this coincides with the ordinary
integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotNormalizable, SingularMidBlock

_TWO_PI = 2.0 * np.pi
#: Relative eigenvalue size below which an integrated block counts as singular.
SINGULAR_RTOL = 1e-12


def _clean(a: np.ndarray) -> np.ndarray:
    """Drop a vanishing imaginary part so real forms stay real."""
    a = np.asarray(a)
    if np.iscomplexobj(a) and not np.any(a.imag):
        return a.real.copy()
    return a


def _eigenvalues(m: np.ndarray) -> np.ndarray:
    if not np.iscomplexobj(m):
        return np.linalg.eigvalsh(m).astype(complex)
    lam = np.linalg.eigvals(m)
    scale = np.max(np.abs(lam)) if lam.size else 1.0
    # snap numerically-real eigenvalues onto the axis with a +0 imaginary part
    near_real = np.abs(lam.imag) <= 1e-14 * scale
    return np.where(near_real, lam.real + 0.0j, lam)


def sqrt_det(m: np.ndarray) -> complex:
    """Branch-tracked square root of det(m); see the module docstring."""
    m = np.asarray(m)
    if m.size == 0:
        return 1.0 + 0.0j
    lam = _eigenvalues(m)
    scale = np.max(np.abs(lam))
    if scale == 0.0 or np.min(np.abs(lam)) <= SINGULAR_RTOL * scale:
        raise SingularMidBlock(f"eigenvalues {lam} of the integrated block are degenerate")
    return complex(np.prod(np.sqrt(lam)))


@dataclass(frozen=True)
class GaussianForm:
    """``norm * exp(-1/2 z^T quad z)`` over ``n`` variables."""

    norm: complex
    quad: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.quad))
        if q.size == 0:
            q = np.zeros((0, 0))
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionMismatch(f"quad must be square, got shape {q.shape}")
        q = _clean(0.5 * (q + q.T))
        q.setflags(write=False)
        object.__setattr__(self, "quad", q)
        object.__setattr__(self, "norm", complex(self.norm))

    @property
    def n(self) -> int:
        return self.quad.shape[0]

    @property
    def is_real(self) -> bool:
        return self.norm.imag == 0.0 and not np.iscomplexobj(self.quad)

    def evaluate(self, z) -> complex | np.ndarray:
        """Value at ``z``; a trailing axis of length ``n`` broadcasts over batches."""
        z = np.asarray(z)
        if z.shape[-1:] != (self.n,):
            raise DimensionMismatch(f"expected trailing dimension {self.n}, got {z.shape}")
        expo = -0.5 * np.einsum("...i,ij,...j->...", z, self.quad, z)
        out = self.norm * np.exp(expo)
        return complex(out) if np.ndim(out) == 0 else out

    __call__ = evaluate

    def log_abs(self, z) -> np.ndarray:
        """log|g(z)| without underflow, for ratio comparisons at large z."""
        z = np.asarray(z)
        expo = -0.5 * np.einsum("...i,ij,...j->...", z, self.quad, z)
        return np.log(abs(self.norm)) + np.real(expo)

    def scaled(self, factor: complex) -> "GaussianForm":
        return GaussianForm(self.norm * factor, self.quad)

    def transform(self, t: np.ndarray) -> "GaussianForm":
        """The form z -> g(T z) (same norm)."""
        t = np.asarray(t)
        if t.shape[0] != self.n:
            raise DimensionMismatch(f"transform rows {t.shape[0]} != n {self.n}")
        return GaussianForm(self.norm, t.T @ self.quad @ t)

    def permuted(self, order: Sequence[int], signs: Sequence[float] | None = None) -> "GaussianForm":
        """The form z -> g(w) with w[k] = signs[k] * z[order[k]]."""
        t = np.zeros((self.n, len(order)))
        s = np.ones(len(order)) if signs is None else np.asarray(signs, dtype=float)
        for k, j in enumerate(order):
            t[k, j] = s[k]
        return self.transform(t)

    def outer(self, other: "GaussianForm") -> "GaussianForm":
        """Product g(z1) h(z2) over the concatenated variables (z1, z2)."""
        q = np.zeros((self.n + other.n,) * 2, dtype=np.result_type(self.quad, other.quad))
        q[: self.n, : self.n] = self.quad
        q[self.n :, self.n :] = other.quad
        return GaussianForm(self.norm * other.norm, q)


@dataclass(frozen=True)
class VariableSplit:
    """Which variables two forms share in a composition.

    ``out_indices`` are the kept variables of the left form, ``in_indices`` the
    kept variables of the right form and ``mid_indices`` pairs ``(i, j)`` of a
    left variable identified with a right variable and integrated out.  The
    composed form's variables are ``out`` followed by ``in``.
    """

    out_indices: tuple[int, ...]
    mid_indices: tuple[tuple[int, int], ...]
    in_indices: tuple[int, ...]

    @classmethod
    def chain(cls, n_left: int, n_right: int, m: int) -> "VariableSplit":
        """Last ``m`` variables of the left form meet the first ``m`` of the right one."""
        if m > min(n_left, n_right):
            raise DimensionMismatch(f"cannot share {m} variables between {n_left} and {n_right}")
        return cls(
            tuple(range(n_left - m)),
            tuple((n_left - m + k, k) for k in range(m)),
            tuple(range(m, n_right)),
        )

    def validate(self, n_left: int, n_right: int) -> None:
        left = list(self.out_indices) + [i for i, _ in self.mid_indices]
        right = list(self.in_indices) + [j for _, j in self.mid_indices]
        if sorted(left) != list(range(n_left)) or sorted(right) != list(range(n_right)):
            raise DimensionMismatch(
                f"split {self} does not partition variables of forms with n={n_left}, {n_right}"
            )


def marginalize(g: GaussianForm, indices: Sequence[int], sequential: bool = False) -> GaussianForm:
    """Integrate ``g`` over the variables ``indices`` (kept variables stay in order).

    ``sequential=True`` eliminates one variable at a time; it exists to check
    that the result does not depend on the elimination order.
    """
    idx = list(indices)
    if sequential and len(idx) > 1:
        out = g
        remaining = sorted(idx)
        while remaining:
            j = remaining.pop()  # eliminate from the back so earlier indices stay valid
            out = marginalize(out, [j])
        return out
    keep = [k for k in range(g.n) if k not in idx]
    m = g.quad
    mkk = m[np.ix_(keep, keep)]
    mmm = m[np.ix_(idx, idx)]
    mkm = m[np.ix_(keep, idx)]
    root = sqrt_det(mmm)
    schur = mkk - mkm @ np.linalg.solve(mmm, mkm.T) if keep else np.zeros((0, 0))
    norm = g.norm * _TWO_PI ** (len(idx) / 2.0) / root
    return GaussianForm(norm, schur)


def compose(g1: GaussianForm, g2: GaussianForm, split: VariableSplit | None = None,
            sequential: bool = False) -> GaussianForm:
    """Exact Gaussian integral of g1 * g2 over the shared variables.

    Without ``split`` the two forms are treated as kernels with equal halves
    (last n1/2 variables of g1 meet the first n1/2 of g2), or, when one of them
    has half the size of the other, as a kernel applied to a state.
    """
    if split is None:
        m = min(g1.n, g2.n) if g1.n != g2.n else g1.n // 2
        split = VariableSplit.chain(g1.n, g2.n, m)
    split.validate(g1.n, g2.n)
    n_out, n_in, n_mid = len(split.out_indices), len(split.in_indices), len(split.mid_indices)
    total = n_out + n_in + n_mid
    p1 = np.zeros((g1.n, total))
    p2 = np.zeros((g2.n, total))
    for k, i in enumerate(split.out_indices):
        p1[i, k] = 1.0
    for k, j in enumerate(split.in_indices):
        p2[j, n_out + k] = 1.0
    for k, (i, j) in enumerate(split.mid_indices):
        p1[i, n_out + n_in + k] = 1.0
        p2[j, n_out + n_in + k] = 1.0
    joint = GaussianForm(g1.norm * g2.norm, p1.T @ g1.quad @ p1 + p2.T @ g2.quad @ p2)
    return marginalize(joint, range(n_out + n_in, total), sequential=sequential)


def integral(g: GaussianForm) -> complex:
    """Integral of g over all of its variables."""
    return marginalize(g, range(g.n)).norm


def _require_normalizable(g: GaussianForm) -> None:
    re = np.real(g.quad)
    if g.n and np.min(np.linalg.eigvalsh(0.5 * (re + re.T))) <= 0.0:
        raise NotNormalizable("real part of the quadratic form is not positive definite")


def second_moments(g: GaussianForm) -> np.ndarray:
    """Normalized second moments  int z z^T g / int g  =  M^{-1}."""
    _require_normalizable(g)
    return _clean(np.linalg.inv(g.quad))


def weighted_integral(g: GaussianForm, i: int, j: int) -> complex:
    """int z_i z_j g(z) dz."""
    _require_normalizable(g)
    return integral(g) * complex(np.linalg.inv(g.quad)[i, j])
