"""Truncated grids on R^{2n}, test generators, and quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatch, TruncationError

#: Tail-mass ceiling for analytically checked generators.
TAIL_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the box [-L, L)^{2n} with N samples per unit length.

    The torus axes use M = N points for xi and P = 2L points for xi'.
    """

    n: int = 1
    L: int = 8
    N: int = 16

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")

    @property
    def M(self) -> int:
        return self.N

    @property
    def P(self) -> int:
        return 2 * self.L

    @property
    def D(self) -> int:
        """Samples per real axis."""
        return 2 * self.L * self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.D,) * (2 * self.n)

    @property
    def weight(self) -> float:
        """Quadrature weight of one sample of a function on R^{2n}."""
        return float(self.N) ** (-2 * self.n)

    @property
    def fiber_weight(self) -> float:
        """Quadrature weight along the eta axes of a fiber."""
        return float(self.N) ** (-self.n)

    @property
    def exact(self) -> bool:
        """True when the discrete transforms are exactly unitary (N = 2L)."""
        return self.N == 2 * self.L

    def axis(self) -> np.ndarray:
        return -self.L + np.arange(self.D) / self.N

    def mesh(self) -> list[np.ndarray]:
        """Coordinate arrays x_1..x_n, y_1..y_n broadcast to the grid."""
        ax = self.axis()
        out = []
        for i in range(2 * self.n):
            shape = [1] * (2 * self.n)
            shape[i] = self.D
            out.append(ax.reshape(shape))
        return out


@dataclass(frozen=True, eq=False)
class SampledFunction:
    spec: GridSpec
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sampled values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values, label: str | None = None) -> "SampledFunction":
        return SampledFunction(self.spec, values, self.label if label is None else label)

    def _check(self, other):
        if isinstance(other, SampledFunction) and other.spec != self.spec:
            raise GridMismatch(f"{self.spec} vs {other.spec}")

    def __add__(self, other):
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * complex(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __truediv__(self, c):
        return self.with_values(self.values / complex(c))


def zeros(spec: GridSpec, label: str = "0") -> SampledFunction:
    return SampledFunction(spec, np.zeros(spec.shape, dtype=np.complex128), label)


def _center(spec: GridSpec, center) -> np.ndarray:
    c = np.asarray(center, dtype=float).ravel()
    if c.size != 2 * spec.n:
        raise ValueError(f"center needs {2 * spec.n} coordinates, got {c.size}")
    return c


def _gaussian_tail(spec: GridSpec, c: np.ndarray, width: float) -> float:
    # |f|^2 is a product of normals with sigma = width / sqrt(4 pi); union bound
    # over the coordinates of the mass outside [-L, L).
    s = width / math.sqrt(4 * math.pi) * math.sqrt(2)
    tail = 0.0
    for ci in c:
        tail += 0.5 * math.erfc((spec.L - ci) / s) + 0.5 * math.erfc((spec.L + ci) / s)
    return tail


def make_gaussian(spec: GridSpec, center=(0.0, 0.0), width: float = 1.0,
                  label: str | None = None) -> SampledFunction:
    """exp(-pi |z - center|^2 / width^2) sampled on the grid."""
    if width <= 0:
        raise ValueError("width must be positive")
    c = _center(spec, center)
    if np.any(np.abs(c) >= spec.L):
        raise TruncationError(f"center {tuple(c)} lies outside the box [-{spec.L}, {spec.L})")
    tail = _gaussian_tail(spec, c, width)
    if tail > TAIL_TOL:
        raise TruncationError(f"gaussian tail mass {tail:.3e} exceeds {TAIL_TOL:g}")
    r2 = sum((z - ci) ** 2 for z, ci in zip(spec.mesh(), c))
    vals = np.exp(-np.pi * r2 / width**2)
    if label is None:
        label = f"gaussian({','.join(f'{v:g}' for v in c)},{width:g})"
    return SampledFunction(spec, vals, label)


def _hermite_fn(k: int, t: np.ndarray) -> np.ndarray:
    # physicists' Hermite polynomial at sqrt(2 pi) t times exp(-pi t^2)
    u = math.sqrt(2 * math.pi) * t
    h_prev, h = np.ones_like(u), 2 * u
    if k == 0:
        h = h_prev
    for j in range(1, k):
        h_prev, h = h, 2 * u * h - 2 * j * h_prev
    return h * np.exp(-np.pi * t**2)


def _edge_mass(spec: GridSpec, vals: np.ndarray, width: float = 1.0) -> float:
    total = float(np.sum(np.abs(vals) ** 2))
    if total == 0.0:
        return 0.0
    inner = np.ones(spec.shape, dtype=bool)
    for z in spec.mesh():
        inner &= np.abs(z) < spec.L - width
    return float(np.sum(np.abs(vals[~inner]) ** 2)) / total


def make_hermite(spec: GridSpec, k: int, center=(0.0, 0.0), label: str | None = None) -> SampledFunction:
    """Hermite function of order k in the first coordinate, gaussian in the rest.

    Order 0 is the unit-width gaussian.
    """
    if k < 0:
        raise ValueError("hermite order must be >= 0")
    c = _center(spec, center)
    if np.any(np.abs(c) >= spec.L):
        raise TruncationError(f"center {tuple(c)} lies outside the box")
    mesh = spec.mesh()
    vals = _hermite_fn(k, mesh[0] - c[0])
    for z, ci in zip(mesh[1:], c[1:]):
        vals = vals * np.exp(-np.pi * (z - ci) ** 2)
    vals = np.broadcast_to(vals, spec.shape)
    if _edge_mass(spec, vals) > TAIL_TOL:
        raise TruncationError(f"hermite({k}) has too much mass near the box edge")
    if label is None:
        label = f"hermite({k},{','.join(f'{v:g}' for v in c)})"
    return SampledFunction(spec, vals, label)


def make_indicator(spec: GridSpec, a: float, b: float, c: float, d: float,
                   label: str | None = None) -> SampledFunction:
    """Indicator of [a, b) x [c, d) in the first (x, y) pair (n = 1 only)."""
    if spec.n != 1:
        raise ValueError("indicator generators are defined for n = 1")
    if not (-spec.L <= a < b <= spec.L and -spec.L <= c < d <= spec.L):
        raise TruncationError(f"rectangle [{a},{b})x[{c},{d}) leaves the box")
    x, y = spec.mesh()
    vals = ((x >= a) & (x < b) & (y >= c) & (y < d)).astype(np.complex128)
    if label is None:
        label = f"indicator({a:g},{b:g},{c:g},{d:g})"
    return SampledFunction(spec, vals, label)


def modulated(base: SampledFunction, freqs: Sequence[float], label: str | None = None) -> SampledFunction:
    """Multiply by exp(2 pi i <freqs, z>)."""
    f = np.asarray(freqs, dtype=float).ravel()
    if f.size != 2 * base.spec.n:
        raise ValueError(f"need {2 * base.spec.n} frequencies")
    arg = sum(fi * z for fi, z in zip(f, base.spec.mesh()))
    if label is None:
        label = f"modulated({base.label},{','.join(f'{v:g}' for v in f)})"
    return SampledFunction(base.spec, base.values * np.exp(2j * np.pi * arg), label)


def inner(f: SampledFunction, g: SampledFunction) -> complex:
    """Riemann-sum L^2 inner product <f, g> (conjugate-linear in g)."""
    if f.spec != g.spec:
        raise GridMismatch(f"{f.spec} vs {g.spec}")
    return complex(np.vdot(g.values, f.values)) * f.spec.weight


def norm(f: SampledFunction) -> float:
    return math.sqrt(max(inner(f, f).real, 0.0))


def random_smooth(spec: GridSpec, rng: np.random.Generator, terms: int = 3,
                  spread: float | None = None, label: str = "random") -> SampledFunction:
    """Random sum of modulated gaussians with centers in [-spread, spread)^{2n}.

    ``spread`` defaults to L/4 so that shifts by a few lattice steps stay in the box.
    """
    spread = spec.L / 4 if spread is None else spread
    vals = np.zeros(spec.shape, dtype=np.complex128)
    for _ in range(terms):
        c = rng.uniform(-spread, spread, 2 * spec.n)
        w = rng.uniform(0.6, 1.4)
        g = make_gaussian(spec, c, w)
        g = modulated(g, rng.uniform(-1.5, 1.5, 2 * spec.n))
        coef = complex(rng.normal(), rng.normal())
        vals = vals + coef * g.values
    return SampledFunction(spec, vals, label)
