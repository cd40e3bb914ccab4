"""Hot loops behind the transforms.

Every kernel exists twice: a numba ``@njit`` version and a plain numpy one.
The numba path is taken when numba imports and the environment variable
``TWISTFRAME_NUMBA`` is not set to ``0``; the flag is read on every call so
tests can flip it.

The Weyl kernel is the exception.  Its numpy form is a chirp-factored matrix
product that BLAS runs an order of magnitude faster than any loop, so both
settings use it; the numba direct sum is kept as ``weyl_forward_direct`` /
``weyl_inverse_direct``, the independent oracle for the factored form.

All phases are evaluated from exact integer arguments reduced modulo the
order of a root-of-unity table, so unimodular factors stay unimodular to
machine precision.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


def use_numba() -> bool:
    flag = os.environ.get("TWISTFRAME_NUMBA", "1").strip().lower()
    return HAVE_NUMBA and flag not in ("0", "false", "no", "off")


@lru_cache(maxsize=32)
def roots(order: int) -> np.ndarray:
    """Table of exp(2*pi*i*t/order) for t = 0..order-1."""
    t = np.arange(order) * (2.0 * np.pi / order)
    table = np.cos(t) + 1j * np.sin(t)
    table.setflags(write=False)
    return table


def _centered(L: int, N: int) -> np.ndarray:
    # grid coordinate times N: x_j * N = j - L*N
    return np.arange(2 * L * N) - L * N


# --------------------------------------------------------------------------
# Weyl kernel of one (x, y) axis pair.
#
# Column m of f (fixed y = d/N, d = m - L*N) maps to the kernel diagonal
# eta - xi = d/N through a chirped DFT:
#   K[a, (a + d) mod D] = (1/N) sum_j f[j, m] exp(pi i c_j (2 c_a + d) / N^2)
# with c = j - L*N.  The diagonal index wraps modulo D; the phase always uses
# the unwrapped eta = xi + d/N.


@lru_cache(maxsize=8)
def _weyl_tables(L: int, N: int):
    c = _centered(L, N)
    order = 2 * N * N
    w = roots(order)
    dft = w[(2 * np.outer(c, c)) % order]
    chirp = w[np.outer(c, c) % order]
    D = c.size
    a = np.arange(D)
    rows = np.broadcast_to(a[:, None], (D, D))
    cols = (a[:, None] + c[None, :]) % D
    return dft, chirp, rows, cols


def _weyl_forward_np(f: np.ndarray, L: int, N: int) -> np.ndarray:
    dft, chirp, rows, cols = _weyl_tables(L, N)
    diag = np.matmul(dft, f * chirp) / N
    out = np.empty_like(diag)
    out[:, rows, cols] = diag
    return out


def _weyl_inverse_np(K: np.ndarray, L: int, N: int) -> np.ndarray:
    dft, chirp, rows, cols = _weyl_tables(L, N)
    diag = K[:, rows, cols]
    return np.conj(chirp) * np.matmul(dft.conj().T, diag) / N


@njit(cache=True)
def _weyl_forward_nb(f, L, N, w):
    B, D, _ = f.shape
    half = L * N
    order = 2 * N * N
    out = np.zeros((B, D, D), dtype=np.complex128)
    for bb in range(B):
        ft = f[bb].T.copy()
        for m in range(D):
            dm = m - half
            col = ft[m]
            for a in range(D):
                step = (2 * (a - half) + dm) % order
                q = ((-half) * (2 * (a - half) + dm)) % order
                acc = 0j
                for j in range(D):
                    acc += col[j] * w[q]
                    q += step
                    if q >= order:
                        q -= order
                out[bb, a, (a + dm) % D] = acc / N
    return out


@njit(cache=True)
def _weyl_inverse_nb(K, L, N, w):
    B, D, _ = K.shape
    half = L * N
    order = 2 * N * N
    out = np.zeros((B, D, D), dtype=np.complex128)
    diag = np.empty(D, dtype=np.complex128)
    for bb in range(B):
        for m in range(D):
            dm = m - half
            for a in range(D):
                diag[a] = K[bb, a, (a + dm) % D]
            for j in range(D):
                cj = j - half
                acc = 0j
                for a in range(D):
                    q = (cj * (2 * (a - half) + dm)) % order
                    acc += diag[a] * w[order - q if q else 0]
                out[bb, j, m] = acc / N
    return out


def weyl_forward(f: np.ndarray, L: int, N: int) -> np.ndarray:
    """Kernel transform of a stack of (x, y) slabs, shape (B, D, D)."""
    return _weyl_forward_np(np.ascontiguousarray(f, dtype=np.complex128), L, N)


def weyl_inverse(K: np.ndarray, L: int, N: int) -> np.ndarray:
    return _weyl_inverse_np(np.ascontiguousarray(K, dtype=np.complex128), L, N)


def weyl_forward_direct(f: np.ndarray, L: int, N: int) -> np.ndarray:
    """Direct O(D^3) sum per slab; numba when enabled, else a numpy row loop."""
    f = np.ascontiguousarray(f, dtype=np.complex128)
    if use_numba():
        return _weyl_forward_nb(f, L, N, roots(2 * N * N))
    return _weyl_direct_np(f, L, N, inverse=False)


def weyl_inverse_direct(K: np.ndarray, L: int, N: int) -> np.ndarray:
    K = np.ascontiguousarray(K, dtype=np.complex128)
    if use_numba():
        return _weyl_inverse_nb(K, L, N, roots(2 * N * N))
    return _weyl_direct_np(K, L, N, inverse=True)


def _weyl_direct_np(arr, L, N, inverse):
    # one diagonal offset at a time, phases evaluated from scratch
    B, D, _ = arr.shape
    c = _centered(L, N)
    order = 2 * N * N
    w = roots(order)
    out = np.zeros_like(arr)
    a = np.arange(D)
    for m in range(D):
        dm = c[m]
        cols = (a + dm) % D
        ph = w[(np.outer(c, 2 * c + dm)) % order]  # [j, a]
        if inverse:
            out[:, :, m] = (arr[:, a, cols] @ ph.conj().T) / N
        else:
            out[:, a, cols] = (arr[:, :, m] @ ph) / N
    return out


# --------------------------------------------------------------------------
# Twisted shift: out[j, m] = exp(pi i (x_j l - y_m k)) f[j - kN, m - lN],
# zero where the source index leaves the grid.


@njit(cache=True)
def _twisted_shift_nb(f, k, l, L, N, w):
    D = f.shape[0]
    half = L * N
    order = 2 * N
    sk = k * N
    sl = l * N
    out = np.zeros_like(f)
    for j in range(D):
        js = j - sk
        if js < 0 or js >= D:
            continue
        qx = ((j - half) * l) % order
        for m in range(D):
            ms = m - sl
            if ms < 0 or ms >= D:
                continue
            q = (qx - (m - half) * k) % order
            out[j, m] = w[q] * f[js, ms]
    return out


def _shift_axis(arr: np.ndarray, axis: int, s: int) -> np.ndarray:
    out = np.zeros_like(arr)
    D = arr.shape[axis]
    if abs(s) >= D:
        return out
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    src[axis] = slice(max(0, -s), D - max(0, s))
    dst[axis] = slice(max(0, s), D - max(0, -s))
    out[tuple(dst)] = arr[tuple(src)]
    return out


def _twisted_shift_np(f, k, l, L, N):
    n = len(k)
    c = _centered(L, N)
    order = 2 * N
    w = roots(order)
    out = f
    for i in range(n):
        out = _shift_axis(out, i, int(k[i]) * N)
        out = _shift_axis(out, n + i, int(l[i]) * N)
    phase = np.ones(f.shape, dtype=np.complex128)
    for i in range(n):
        shape = [1] * (2 * n)
        shape[i] = c.size
        phase = phase * w[(c * int(l[i])) % order].reshape(shape)
        shape = [1] * (2 * n)
        shape[n + i] = c.size
        phase = phase * w[(-c * int(k[i])) % order].reshape(shape)
    return out * phase


def twisted_shift(f: np.ndarray, k, l, L: int, N: int) -> np.ndarray:
    """Twisted lattice shift of samples on the (x, y) grid, any n."""
    f = np.ascontiguousarray(f, dtype=np.complex128)
    k = tuple(int(v) for v in k)
    l = tuple(int(v) for v in l)
    if len(k) == 1 and use_numba():
        return _twisted_shift_nb(f, k[0], l[0], L, N, roots(2 * N))
    return _twisted_shift_np(f, k, l, L, N)


# --------------------------------------------------------------------------
# Fiber-wise inner products: out[t] = sum_c u[t, c] conj(v[t, c])


@njit(cache=True)
def _fiber_inner_nb(u, v):
    T, F = u.shape
    out = np.zeros(T, dtype=np.complex128)
    for t in range(T):
        acc = 0j
        for c in range(F):
            acc += u[t, c] * np.conj(v[t, c])
        out[t] = acc
    return out


def fiber_inner(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Unweighted inner products of matching rows of two (T, F) arrays."""
    u = np.ascontiguousarray(u, dtype=np.complex128)
    v = np.ascontiguousarray(v, dtype=np.complex128)
    if use_numba():
        return _fiber_inner_nb(u, v)
    return np.einsum("tc,tc->t", u, v.conj())
