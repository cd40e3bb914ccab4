"""Weyl-Zak transform, fiberization, bracket map and membership test.

Z f(xi, xi', eta) = sum_m K_f(m + xi, eta) exp(-2 pi i m.xi'), with xi on the
M = N torus points a/M, xi' on the P = 2L points b/P and m over the P integer
periods of the box.  Because M = N, m + xi is always a kernel grid point and
the m-sum is a length-P DFT.

A fiber is the eta-vector at one torus point (xi, xi').  Fiber arrays are
handled flattened as (T, F) with T = (M P)^n torus points and F = D^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import GridMismatch, ZeroFunction
from .grids import GridSpec, SampledFunction, norm
from .twist import LatticePoint, _as_point, twisted_translate
from .weyl import KernelField, weyl_inverse, weyl_kernel

#: Default relative threshold that defines the support set of a bracket.
EPS_SUPPORT = 1e-8


@dataclass(frozen=True, eq=False)
class ZakField:
    spec: GridSpec
    values: np.ndarray  # axes (xi_1..xi_n, xi'_1..xi'_n, eta_1..eta_n)

    @property
    def torus_shape(self) -> tuple[int, ...]:
        return (self.spec.M,) * self.spec.n + (self.spec.P,) * self.spec.n

    def fibers(self) -> np.ndarray:
        s = self.spec
        return self.values.reshape((s.M * s.P) ** s.n, s.D**s.n)

    @classmethod
    def from_fibers(cls, spec: GridSpec, fibers: np.ndarray) -> "ZakField":
        shape = (spec.M,) * spec.n + (spec.P,) * spec.n + (spec.D,) * spec.n
        return cls(spec, np.asarray(fibers, dtype=np.complex128).reshape(shape))

    def norm(self) -> float:
        s = self.spec
        w = (1.0 / (s.M * s.P)) ** s.n * s.fiber_weight
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * w))

    def __add__(self, other):
        return ZakField(self.spec, self.values + other.values)

    def __sub__(self, other):
        return ZakField(self.spec, self.values - other.values)

    def __mul__(self, c):
        return ZakField(self.spec, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class BracketField:
    spec: GridSpec
    values: np.ndarray  # torus axes (xi..., xi'...)
    eps_support: float = EPS_SUPPORT

    @property
    def threshold(self) -> float:
        peak = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        return self.eps_support * peak

    @property
    def omega_mask(self) -> np.ndarray:
        return np.abs(self.values) > self.threshold

    def l1_norm(self) -> float:
        s = self.spec
        return float(np.sum(np.abs(self.values)) / (s.M * s.P) ** s.n)

    def integral(self) -> complex:
        s = self.spec
        return complex(np.sum(self.values) / (s.M * s.P) ** s.n)


def torus_points(spec: GridSpec) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Broadcastable xi_i = a/M and xi'_i = b/P arrays over the torus axes."""
    n = spec.n
    xs, xps = [], []
    for i in range(n):
        shape = [1] * (2 * n)
        shape[i] = spec.M
        xs.append((np.arange(spec.M) / spec.M).reshape(shape))
        shape = [1] * (2 * n)
        shape[n + i] = spec.P
        xps.append((np.arange(spec.P) / spec.P).reshape(shape))
    return xs, xps


def covariance_phase(spec: GridSpec, p) -> np.ndarray:
    """exp(2 pi i (k.xi + l.xi')) exp(pi i k.l) on the torus grid.

    Evaluated from integer arguments: k xi = k a / N, l xi' = l b / (2L).
    """
    p = _as_point(p)
    n, N, L = spec.n, spec.N, spec.L
    order = 2 * N * L
    w = _kernels.roots(order)
    q = np.zeros((spec.M,) * n + (spec.P,) * n, dtype=np.int64)
    for i in range(n):
        shape = [1] * (2 * n)
        shape[i] = spec.M
        q = q + (np.arange(spec.M) * p.k[i] * 2 * L).reshape(shape)
        shape = [1] * (2 * n)
        shape[n + i] = spec.P
        q = q + (np.arange(spec.P) * p.l[i] * N).reshape(shape)
    kl = sum(a * b for a, b in zip(p.k, p.l))
    sign = -1.0 if kl % 2 else 1.0
    return sign * w[q % order]


def _split_xi(spec: GridSpec) -> tuple[int, ...]:
    # xi index i = (m + L) N + a  ->  axes (m, a) per dimension
    return sum(((spec.P, spec.M) for _ in range(spec.n)), ())


def zak_transform(f: SampledFunction) -> ZakField:
    s = f.spec
    n = s.n
    K = weyl_kernel(f).values
    arr = K.reshape(_split_xi(s) + (s.D,) * n)
    m_axes = tuple(2 * i for i in range(n))
    arr = np.fft.fft(arr, axis=m_axes[0]) if n == 1 else np.fft.fftn(arr, axes=m_axes)
    # m runs from -L: exp(2 pi i L b / P) = (-1)^b
    sign = np.where(np.arange(s.P) % 2, -1.0, 1.0)
    for ax in m_axes:
        shape = [1] * arr.ndim
        shape[ax] = s.P
        arr = arr * sign.reshape(shape)
    a_axes = tuple(2 * i + 1 for i in range(n))
    eta_axes = tuple(range(2 * n, 3 * n))
    arr = np.transpose(arr, a_axes + m_axes + eta_axes)
    return ZakField(s, np.ascontiguousarray(arr))


def inverse_zak(Z: ZakField, label: str = "") -> SampledFunction:
    s = Z.spec
    n = s.n
    arr = Z.values
    sign = np.where(np.arange(s.P) % 2, -1.0, 1.0)
    for i in range(n):
        shape = [1] * arr.ndim
        shape[n + i] = s.P
        arr = arr * sign.reshape(shape)
    xp_axes = tuple(range(n, 2 * n))
    arr = np.fft.ifftn(arr, axes=xp_axes)
    # back to (m_1, a_1, ..., m_n, a_n, eta...)
    order = sum(((n + i, i) for i in range(n)), ()) + tuple(range(2 * n, 3 * n))
    arr = np.transpose(arr, order).reshape((s.D,) * (2 * n))
    return weyl_inverse(KernelField(s, np.ascontiguousarray(arr)), label)


def zak_twist_residual(f: SampledFunction, p) -> float:
    """Relative gap between Z(T_p f) and the covariance phase times Z f."""
    p = _as_point(p)
    if p.is_zero():
        return 0.0
    lhs = zak_transform(twisted_translate(f, p)).values
    z = zak_transform(f).values
    ph = covariance_phase(f.spec, p).reshape(z.shape[: 2 * f.spec.n] + (1,) * f.spec.n)
    rhs = ph * z
    den = np.sqrt(np.sum(np.abs(rhs) ** 2))
    if den == 0.0:
        return float(np.sqrt(np.sum(np.abs(lhs) ** 2)))
    return float(np.sqrt(np.sum(np.abs(lhs - rhs) ** 2)) / den)


def fiber_products(Zf: ZakField, Zg: ZakField) -> np.ndarray:
    """<Zf(xi, xi'), Zg(xi, xi')> in L^2(R^n) at every torus point."""
    if Zf.spec != Zg.spec:
        raise GridMismatch(f"{Zf.spec} vs {Zg.spec}")
    s = Zf.spec
    vals = _kernels.fiber_inner(Zf.fibers(), Zg.fibers()) * s.fiber_weight
    return vals.reshape(Zf.torus_shape)


def bracket(f, g, eps_support: float = EPS_SUPPORT) -> BracketField:
    """[f, g](xi, xi') from functions or precomputed Zak fields."""
    if f.spec != g.spec:
        raise GridMismatch(f"{f.spec} vs {g.spec}")
    Zf = f if isinstance(f, ZakField) else zak_transform(f)
    Zg = Zf if g is f else (g if isinstance(g, ZakField) else zak_transform(g))
    return BracketField(f.spec, fiber_products(Zf, Zg), eps_support)


def membership_residual(f: SampledFunction, phi: SampledFunction,
                        eps_support: float = EPS_SUPPORT) -> tuple[float, np.ndarray]:
    """Test f in V^t(phi) via J f = r J phi; returns (residual, r)."""
    if f.spec != phi.spec:
        raise GridMismatch(f"{f.spec} vs {phi.spec}")
    nf = norm(f)
    if nf == 0.0:
        raise ZeroFunction(f"membership of a zero function ({f.label!r})")
    Zf, Zp = zak_transform(f), zak_transform(phi)
    pp = bracket(Zp, Zp, eps_support)
    fp = fiber_products(Zf, Zp)
    omega = pp.omega_mask
    r = np.zeros_like(fp)
    r[omega] = fp[omega] / pp.values[omega].real
    tail = (1,) * f.spec.n
    approx = ZakField(f.spec, r.reshape(r.shape + tail) * Zp.values)
    return (Zf - approx).norm() / nf, r
