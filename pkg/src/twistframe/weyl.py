"""Discretized Weyl-transform kernel.

K_f(xi, eta) = int f(x, eta - xi) exp(pi i x.(xi + eta)) dx, sampled with xi
and eta on the same grid as x and y.  The transform acts on each (x_i, y_i)
axis pair separately.  Kernel entries whose offset eta - xi leaves the box
are filled from the wrapped offset (mod 2L); for functions that decay inside
the box those entries are negligible, and the wrap makes the map exactly
unitary when N = 2L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grids import GridSpec, SampledFunction
from .twist import LatticePoint, _as_point, twisted_translate


@dataclass(frozen=True, eq=False)
class KernelField:
    spec: GridSpec
    values: np.ndarray  # axes (xi_1..xi_n, eta_1..eta_n)
    source_label: str = ""


def _pairwise(arr: np.ndarray, n: int, fn, L: int, N: int) -> np.ndarray:
    out = arr
    for i in range(n):
        moved = np.moveaxis(out, (i, n + i), (-2, -1))
        lead = moved.shape[:-2]
        D = moved.shape[-1]
        res = fn(moved.reshape((-1, D, D)), L, N).reshape(lead + (D, D))
        out = np.moveaxis(res, (-2, -1), (i, n + i))
    return np.ascontiguousarray(out)


def weyl_kernel(f: SampledFunction) -> KernelField:
    s = f.spec
    vals = _pairwise(f.values, s.n, _kernels.weyl_forward, s.L, s.N)
    return KernelField(s, vals, f.label)


def weyl_inverse(K: KernelField, label: str = "") -> SampledFunction:
    """Recover f from its kernel (exact when N = 2L, quadrature otherwise)."""
    s = K.spec
    vals = _pairwise(K.values, s.n, _kernels.weyl_inverse, s.L, s.N)
    return SampledFunction(s, vals, label or K.source_label)


def hs_norm(K: KernelField) -> float:
    return float(np.sqrt(np.sum(np.abs(K.values) ** 2) * K.spec.weight))


def kernel_twist(K: KernelField, p: LatticePoint) -> np.ndarray:
    """exp(pi i (2 xi + l).k) K(xi + l, eta) on the grid, zero where xi + l leaves it."""
    s = K.spec
    n, N, L, D = s.n, s.N, s.L, s.D
    out = K.values
    for i in range(n):
        li = p.l[i] * N
        moved = np.zeros_like(out)
        src = [slice(None)] * (2 * n)
        dst = [slice(None)] * (2 * n)
        src[i] = slice(max(0, li), D + min(0, li))
        dst[i] = slice(max(0, -li), D - max(0, li))
        moved[tuple(dst)] = out[tuple(src)]
        out = moved
    order = 2 * N
    w = _kernels.roots(order)
    c = np.arange(D) - L * N
    for i in range(n):
        # (2 xi + l) k = (2 c + l N) k / N
        q = ((2 * c + p.l[i] * N) * p.k[i]) % order
        shape = [1] * (2 * n)
        shape[i] = D
        out = out * w[q].reshape(shape)
    return out


def kernel_twist_residual(f: SampledFunction, p) -> float:
    """Relative L^2 gap between K of T_p f and the twisted, shifted K_f."""
    p = _as_point(p)
    if p.is_zero():
        return 0.0
    lhs = weyl_kernel(twisted_translate(f, p)).values
    rhs = kernel_twist(weyl_kernel(f), p)
    den = np.sqrt(np.sum(np.abs(rhs) ** 2))
    if den == 0.0:
        return float(np.sqrt(np.sum(np.abs(lhs) ** 2)))
    return float(np.sqrt(np.sum(np.abs(lhs - rhs) ** 2)) / den)
