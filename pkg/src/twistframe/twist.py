"""Twisted translations on the grid and their phase algebra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ShiftOutOfBox
from .grids import GridSpec, SampledFunction, norm

#: Largest relative norm allowed to fall off the box under a shift.
SHIFT_TOL = 1e-9


@dataclass(frozen=True)
class LatticePoint:
    k: tuple[int, ...]
    l: tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(v) for v in np.atleast_1d(self.k))
        l = tuple(int(v) for v in np.atleast_1d(self.l))
        if len(k) != len(l):
            raise ValueError("k and l must have the same length")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "l", l)

    @classmethod
    def of(cls, *coords: int) -> "LatticePoint":
        """LatticePoint.of(k1..kn, l1..ln)."""
        if len(coords) % 2:
            raise ValueError("need an even number of coordinates")
        h = len(coords) // 2
        return cls(coords[:h], coords[h:])

    @property
    def n(self) -> int:
        return len(self.k)

    def __neg__(self):
        return LatticePoint(tuple(-v for v in self.k), tuple(-v for v in self.l))

    def __add__(self, other: "LatticePoint"):
        return LatticePoint(tuple(a + b for a, b in zip(self.k, other.k)),
                            tuple(a + b for a, b in zip(self.l, other.l)))

    def is_zero(self) -> bool:
        return not any(self.k) and not any(self.l)

    def check(self, spec: GridSpec):
        if self.n != spec.n:
            raise ValueError(f"lattice point has n={self.n}, grid has n={spec.n}")
        bound = 2 * spec.L - 1
        if max(abs(v) for v in self.k + self.l) > bound:
            raise ShiftOutOfBox(f"shift {self} exceeds |k|,|l| <= {bound}")


def _as_point(p) -> LatticePoint:
    if isinstance(p, LatticePoint):
        return p
    return LatticePoint.of(*p)


def lattice(kmax: int, n: int = 1) -> list[LatticePoint]:
    """All lattice points with |k|_inf, |l|_inf <= kmax, in a fixed order."""
    rng = np.arange(-kmax, kmax + 1)
    grids = np.meshgrid(*([rng] * (2 * n)), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return [LatticePoint.of(*row) for row in pts]


def lost_fraction(f: SampledFunction, p: LatticePoint) -> float:
    """Relative norm of the part of f that a shift by p pushes off the grid."""
    spec = f.spec
    total = norm(f)
    if total == 0.0:
        return 0.0
    mask = np.ones(spec.shape, dtype=bool)
    D, N, n = spec.D, spec.N, spec.n
    for i, s in enumerate(p.k + p.l):
        s *= N
        keep = np.zeros(D, dtype=bool)
        keep[max(0, -s):D - max(0, s)] = True
        shape = [1] * (2 * n)
        shape[i] = D
        mask &= keep.reshape(shape)
    lost = np.sqrt(np.sum(np.abs(f.values[~mask]) ** 2) * spec.weight)
    return float(lost / total)


def twisted_translate(f: SampledFunction, p, tail_tol: float | None = SHIFT_TOL) -> SampledFunction:
    """T_(k,l) f (x, y) = exp(pi i (x.l - y.k)) f(x - k, y - l), zero-filled.

    ``tail_tol=None`` skips the lost-mass check; the lattice bound is always
    enforced.
    """
    p = _as_point(p)
    spec = f.spec
    p.check(spec)
    if p.is_zero():
        return f
    if tail_tol is not None:
        lost = lost_fraction(f, p)
        if lost > tail_tol:
            raise ShiftOutOfBox(f"shift {p.k},{p.l} loses {lost:.2e} of {f.label or 'f'}")
    vals = _kernels.twisted_shift(f.values, p.k, p.l, spec.L, spec.N)
    return SampledFunction(spec, vals, f.label)


def compose_phase(p1, p2) -> complex:
    """Phase c with T_p1 T_p2 = c T_(p1 + p2); always +1 or -1."""
    p1, p2 = _as_point(p1), _as_point(p2)
    s = sum(a * b for a, b in zip(p1.k, p2.l)) - sum(a * b for a, b in zip(p1.l, p2.k))
    return complex(-1.0 if s % 2 else 1.0)


def check_composition(f: SampledFunction, p1, p2) -> float:
    """Relative residual of T_p1 T_p2 f - compose_phase(p1, p2) T_(p1+p2) f."""
    p1, p2 = _as_point(p1), _as_point(p2)
    lhs = twisted_translate(twisted_translate(f, p2), p1)
    rhs = twisted_translate(f, p1 + p2)
    nf = norm(f)
    if nf == 0.0:
        return 0.0
    return norm(lhs - compose_phase(p1, p2) * rhs) / nf
