"""Operators that commute with twisted translations and their range operators.

A range operator is stored through its action on an orthonormal fiber basis:
at each torus point the columns of ``basis`` are the fibers of a Parseval,
fiber-orthogonal generator set and the matching columns of ``images`` are
the fibers of U applied to those generators.  With C = w basis^* images the
compressed matrix on the fiber space, every fiber-level quantity (adjoint,
spectrum, singular values) reduces to small S x S linear algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BasisNotParseval, GridMismatch, NotSelfAdjoint, NotTSP
from .frames import KMAX, GeneratorSet, InverseFrameOperator, fiber_gram
from .grids import GridSpec, SampledFunction, norm, random_smooth
from .twist import LatticePoint, _as_point, lattice, twisted_translate
from .zak import ZakField, covariance_phase, inverse_zak, zak_transform

#: verify_tsp residual below which an operator is accepted as shift-preserving.
TSP_TOL = 1e-6
DEFAULT_SEED = 42


@dataclass(frozen=True, eq=False)
class OperatorHandle:
    apply: Callable[[SampledFunction], SampledFunction]
    label: str
    domain_basis: GeneratorSet | None = None

    def __call__(self, f: SampledFunction) -> SampledFunction:
        return self.apply(f)


# --------------------------------------------------------------------------
# operator factories


def identity_operator(label: str = "identity", basis: GeneratorSet | None = None) -> OperatorHandle:
    return OperatorHandle(lambda f: f, label, basis)


def scaled_identity(c: complex, basis: GeneratorSet | None = None) -> OperatorHandle:
    return OperatorHandle(lambda f: f * c, f"{c:g}*identity", basis)


def multiplication_operator(phi: SampledFunction, basis: GeneratorSet | None = None,
                            label: str | None = None) -> OperatorHandle:
    """M_phi f = phi f, pointwise on the grid."""
    vals = phi.values

    def apply(f):
        if f.spec != phi.spec:
            raise GridMismatch(f"{f.spec} vs {phi.spec}")
        return f.with_values(vals * f.values)

    return OperatorHandle(apply, label or f"mult[{phi.label}]", basis)


def plain_translation(spec: GridSpec, k: Sequence[int], l: Sequence[int],
                      label: str | None = None) -> OperatorHandle:
    """f(x, y) -> f(x - k, y - l) with no phase; not shift-preserving."""
    p = LatticePoint(tuple(k), tuple(l))
    p.check(spec)
    N, n = spec.N, spec.n
    c = np.arange(spec.D) - spec.L * N

    def apply(f):
        out = twisted_translate(f, p, tail_tol=None).values
        # strip the twist phase exp(pi i (x.l - y.k))
        for i in range(n):
            shape = [1] * (2 * n)
            shape[i] = spec.D
            out = out * np.exp(-1j * np.pi * c * p.l[i] / N).reshape(shape)
            shape = [1] * (2 * n)
            shape[n + i] = spec.D
            out = out * np.exp(1j * np.pi * c * p.k[i] / N).reshape(shape)
        return f.with_values(out)

    return OperatorHandle(apply, label or f"translate{p.k + p.l}")


def frame_operator(gens: GeneratorSet, kmax: int = KMAX,
                   basis: GeneratorSet | None = None) -> OperatorHandle:
    stack = gens.translates(kmax)
    return OperatorHandle(lambda f: stack.synthesize(stack.coefficients(f), f"S[{f.label}]"),
                          f"S(Kmax={kmax})", basis)


def inverse_frame_operator(gens: GeneratorSet, kmax: int = KMAX,
                           basis: GeneratorSet | None = None, **kw) -> OperatorHandle:
    return OperatorHandle(InverseFrameOperator(gens, kmax, **kw), f"S^-1(Kmax={kmax})", basis)


class TranslateBasis:
    """Interior translates T_p psi_i, |p|_inf <= radius, of a Parseval basis.

    These form a (truncated) Parseval frame of the space, so an operator on
    the space is represented by the matrix M[a, b] = <U E_b, E_a> and acts as
    f -> sum_ab E_a M[a, b] <f, E_b>.
    """

    def __init__(self, basis: GeneratorSet, radius: int = KMAX):
        self.basis = basis
        self.stack = basis.translates(radius)

    @property
    def size(self) -> int:
        return self.stack.rows.shape[0]

    def element(self, a: int) -> SampledFunction:
        return SampledFunction(self.stack.spec, self.stack.rows[a].reshape(self.stack.spec.shape), f"E{a}")

    def matrix_of(self, U: OperatorHandle) -> np.ndarray:
        w = self.stack.spec.weight
        cols = [U(self.element(b)).values.ravel() for b in range(self.size)]
        return (self.stack.rows.conj() @ np.array(cols).T) * w

    def operator(self, M: np.ndarray, label: str = "matrix") -> OperatorHandle:
        M = np.asarray(M, dtype=np.complex128)
        if M.shape != (self.size, self.size):
            raise ValueError(f"matrix must be {self.size}x{self.size}, got {M.shape}")
        stack = self.stack
        return OperatorHandle(lambda f: stack.synthesize(M @ stack.coefficients(f), label),
                              label, self.basis)


def matrix_operator(basis: GeneratorSet, M: np.ndarray, radius: int = KMAX,
                    label: str = "matrix") -> OperatorHandle:
    return TranslateBasis(basis, radius).operator(M, label)


def adjoint_operator(U: OperatorHandle, basis: GeneratorSet | None = None,
                     radius: int = KMAX) -> OperatorHandle:
    """U^* through the conjugate transpose of U's matrix on interior translates."""
    basis = basis or U.domain_basis
    if basis is None:
        raise ValueError("an adjoint needs a domain basis")
    tb = TranslateBasis(basis, radius)
    M = tb.matrix_of(U)
    return tb.operator(M.conj().T, f"{U.label}^*")


# --------------------------------------------------------------------------
# shift-preservation


def _interior_probe(basis: GeneratorSet | None, spec: GridSpec, rng: np.random.Generator,
                    reach: int = 1, terms: int = 3) -> SampledFunction:
    if basis is None:
        return random_smooth(spec, rng, terms=terms, spread=spec.L / 4, label="probe")
    vals = np.zeros(spec.shape, dtype=np.complex128)
    for _ in range(terms):
        s = int(rng.integers(len(basis)))
        p = tuple(int(v) for v in rng.integers(-reach, reach + 1, 2 * spec.n))
        c = complex(rng.normal(), rng.normal())
        vals = vals + c * twisted_translate(basis[s], p, tail_tol=None).values
    f = SampledFunction(spec, vals, "probe")
    if norm(f) == 0.0:
        return _interior_probe(basis, spec, rng, reach, terms)
    return f


def probes(U: OperatorHandle, spec: GridSpec, trials: int, seed: int = DEFAULT_SEED) -> list[SampledFunction]:
    rng = np.random.default_rng(seed)
    basis = U.domain_basis
    if basis is not None:
        # skip generators that vanish (dependent slots of a decomposition)
        live = [g for g in basis if norm(g) > 0]
        basis = GeneratorSet(tuple(live)) if live else None
    return [_interior_probe(basis, spec, rng) for _ in range(trials)]


def verify_tsp(U: OperatorHandle, spec: GridSpec, trials: int = 3, pmax: int = 2,
               seed: int = DEFAULT_SEED) -> float:
    """max over probes f and 0 < |p| <= pmax of |U T_p f - T_p U f| / |f|."""
    worst = 0.0
    pts = [p for p in lattice(pmax, spec.n) if not p.is_zero()]
    for f in probes(U, spec, trials, seed):
        Uf = U(f)
        nf = norm(f)
        for p in pts:
            lhs = U(twisted_translate(f, p, tail_tol=None))
            rhs = twisted_translate(Uf, p, tail_tol=None)
            worst = max(worst, norm(lhs - rhs) / nf)
    return worst


# --------------------------------------------------------------------------
# fiber operator fields


@dataclass(frozen=True, eq=False)
class FiberOperatorField:
    spec: GridSpec
    basis: np.ndarray   # (T, F, S) orthonormal fiber columns, zero where inactive
    images: np.ndarray  # (T, F, S) fibers of the operator applied to the basis
    active: np.ndarray  # (T, S) bool
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def S(self) -> int:
        return self.basis.shape[-1]

    @property
    def w(self) -> float:
        return self.spec.fiber_weight

    def compressed(self) -> np.ndarray:
        """C = w basis^* images, shape (T, S, S); zero rows/cols off the active set."""
        if "C" not in self._cache:
            C = self.w * (self.basis.conj().transpose(0, 2, 1) @ self.images)
            mask = self.active[:, :, None] & self.active[:, None, :]
            self._cache["C"] = np.where(mask, C, 0.0)
        return self._cache["C"]

    def _masked_images(self) -> np.ndarray:
        return self.images * self.active[:, None, :]

    def fiber_norms(self) -> np.ndarray:
        """Operator 2-norm of R at every fiber, zero on fibers with no basis."""
        Y = np.sqrt(self.w) * self._masked_images()
        return np.linalg.norm(Y, ord=2, axis=(1, 2))

    @property
    def norm_bound(self) -> float:
        if "nb" not in self._cache:
            self._cache["nb"] = float(self.fiber_norms().max(initial=0.0))
        return self._cache["nb"]

    def apply_fibers(self, v: np.ndarray) -> np.ndarray:
        """R applied to fiber arrays v (T, F); components outside the basis span are dropped."""
        c = self.w * np.einsum("tfs,tf->ts", self.basis.conj(), v) * self.active
        return np.einsum("tfs,ts->tf", self.images, c)

    def live_fibers(self) -> np.ndarray:
        return self.active.any(axis=1)


def field_distance(R1: FiberOperatorField, R2: FiberOperatorField, relative: bool = True) -> float:
    """max over fibers of |R1 - R2| on the common basis, optionally over R2.norm_bound."""
    if R1.spec != R2.spec or R1.images.shape != R2.images.shape:
        raise GridMismatch("range fields live on different grids or bases")
    if not np.array_equal(R1.active, R2.active):
        raise GridMismatch("range fields have different active fiber sets")
    d = np.sqrt(R1.w) * (R1._masked_images() - R2._masked_images())
    gap = float(np.linalg.norm(d, ord=2, axis=(1, 2)).max(initial=0.0))
    if relative:
        scale = max(R2.norm_bound, np.finfo(float).tiny)
        return gap / scale
    return gap


def _check_parseval_basis(basis: GeneratorSet, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    w = basis.spec.fiber_weight
    Q = np.array(basis.fiber_matrix())
    G = w * np.einsum("tfi,tfj->tij", Q.conj(), Q)
    diag = G.diagonal(axis1=1, axis2=2).real
    active = diag > 0.5
    if np.any(np.abs(diag[active] - 1.0) > tol) or np.any(diag[~active] > tol):
        raise BasisNotParseval("basis brackets are not in {0} U [1 - tol, 1 + tol]")
    off = G - np.einsum("ti,ij->tij", diag, np.eye(G.shape[-1]))
    if np.abs(off).max(initial=0.0) > 1e-8:
        raise BasisNotParseval(f"basis fibers are not orthogonal (max overlap {np.abs(off).max():.2e})")
    Q[:, :, :] *= active[:, None, :]
    return Q, active


def extract_range_operator(U: OperatorHandle, basis: GeneratorSet, check_tsp: bool = True,
                           tsp_tol: float = TSP_TOL, seed: int = DEFAULT_SEED) -> FiberOperatorField:
    """Range operator of U from the fibers of U applied to a Parseval basis."""
    Q, active = _check_parseval_basis(basis)
    if check_tsp:
        probe_op = U if U.domain_basis is not None else OperatorHandle(U.apply, U.label, basis)
        res = verify_tsp(probe_op, basis.spec, seed=seed)
        if res > tsp_tol:
            raise NotTSP(f"{U.label}: commutation residual {res:.2e} > {tsp_tol:g}")
    imgs = np.stack([zak_transform(U(g)).fibers() for g in basis], axis=-1)
    return FiberOperatorField(basis.spec, Q, imgs, active, U.label)


def build_tsp_from_range(R: FiberOperatorField, basis: GeneratorSet) -> OperatorHandle:
    """The shift-preserving operator whose fibers act by R (zero off the space)."""
    if not np.isfinite(R.norm_bound):
        raise ValueError("range operator is unbounded on the grid")

    def apply(f):
        v = zak_transform(f).fibers()
        return inverse_zak(ZakField.from_fibers(f.spec, R.apply_fibers(v)), f"U_R[{f.label}]")

    return OperatorHandle(apply, f"build[{R.label}]", basis)


def range_reconstruction_residual(U: OperatorHandle, R: FiberOperatorField, f: SampledFunction) -> float:
    """|J(U f) - R J f| / |f|."""
    lhs = zak_transform(U(f)).fibers()
    rhs = R.apply_fibers(zak_transform(f).fibers())
    return ZakField.from_fibers(f.spec, lhs - rhs).norm() / norm(f)


def fiber_adjoint(R: FiberOperatorField) -> FiberOperatorField:
    """R^* compressed to the fiber space: images basis C^*."""
    Ch = R.compressed().conj().transpose(0, 2, 1)
    return FiberOperatorField(R.spec, R.basis, R.basis @ Ch, R.active, f"{R.label}^*")


def selfadjoint_gap(R: FiberOperatorField) -> float:
    return field_distance(R, fiber_adjoint(R), relative=False)


def is_selfadjoint(R: FiberOperatorField, tol: float = 1e-8) -> bool:
    return selfadjoint_gap(R) <= tol


def unitary_gap(R: FiberOperatorField) -> float:
    """max over live fibers of |R^* R - I| on the active columns."""
    Y = np.sqrt(R.w) * R._masked_images()
    RR = Y.conj().transpose(0, 2, 1) @ Y
    eye = np.einsum("ti,ij->tij", R.active.astype(float), np.eye(R.S))
    return float(np.linalg.norm(RR - eye, ord=2, axis=(1, 2)).max(initial=0.0))


def is_unitary(R: FiberOperatorField, tol: float = 1e-8) -> bool:
    return unitary_gap(R) <= tol


def _active_blocks(R: FiberOperatorField):
    C = R.compressed()
    for t in np.flatnonzero(R.live_fibers()):
        idx = np.flatnonzero(R.active[t])
        yield t, idx, C[t][np.ix_(idx, idx)]


def spectrum_box(R: FiberOperatorField, tol: float = 1e-6) -> tuple[float, float]:
    """(min, max) of the fiber eigenvalues of a self-adjoint range operator."""
    gap = selfadjoint_gap(R)
    if gap > tol * max(1.0, R.norm_bound):
        raise NotSelfAdjoint(f"{R.label}: |R - R^*| = {gap:.2e}")
    lo, hi = np.inf, -np.inf
    for _, _, c in _active_blocks(R):
        ev = np.linalg.eigvalsh(0.5 * (c + c.conj().T))
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return float(lo), float(hi)


def bounded_below(R: FiberOperatorField) -> float:
    """min over live fibers of the smallest singular value of R on the fiber space."""
    Y = np.sqrt(R.w) * R.images
    best = np.inf
    for t in np.flatnonzero(R.live_fibers()):
        idx = np.flatnonzero(R.active[t])
        sv = np.linalg.svd(Y[t][:, idx], compute_uv=False)
        best = min(best, sv[-1])
    return float(best)


# --------------------------------------------------------------------------
# multiplier consistency and property transfer


def multiplier_residual(U: OperatorHandle, phi: SampledFunction,
                        coeffs: dict[tuple[int, ...], complex]) -> float:
    """|J U J^-1 (m J phi) - m J(U phi)| / |m J phi| for a trigonometric polynomial m.

    ``coeffs`` maps lattice points (k..., l...) to the coefficient of
    exp(2 pi i (k.xi + l.xi')).
    """
    spec = phi.spec
    m = np.zeros((spec.M,) * spec.n + (spec.P,) * spec.n, dtype=np.complex128)
    for p, c in coeffs.items():
        p = _as_point(p)
        kl = sum(a * b for a, b in zip(p.k, p.l))
        # covariance_phase carries the extra exp(pi i k.l)
        m += c * covariance_phase(spec, p) * (-1.0 if kl % 2 else 1.0)
    tail = (1,) * spec.n
    mJ = ZakField(spec, m.reshape(m.shape + tail) * zak_transform(phi).values)
    lhs = zak_transform(U(inverse_zak(mJ)))
    rhs = ZakField(spec, m.reshape(m.shape + tail) * zak_transform(U(phi)).values)
    den = mJ.norm()
    return (lhs - rhs).norm() / den if den else (lhs - rhs).norm()


@dataclass(frozen=True)
class PropertyRow:
    check: str
    lhs: float
    rhs: float
    residual: float
    passed: bool

    def line(self) -> str:
        return (f"{self.check} lhs={self.lhs:.6e} rhs={self.rhs:.6e} "
                f"residual={self.residual:.3e} {'pass' if self.passed else 'FAIL'}")


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


def ritz_estimates(U: OperatorHandle, basis: GeneratorSet, radius: int = KMAX,
                   eps_rank: float = 1e-8) -> dict:
    """Operator-level extremes of U over the span of interior translates.

    With E_a the translates, Gamma = <E_b, E_a>, M = <U E_b, E_a> and
    W = <U E_b, U E_a>, the Rayleigh quotients <Uf, f>/|f|^2 and |Uf|^2/|f|^2
    over f in span{E_a} are the generalized eigenvalues of (M, Gamma) and
    (W, Gamma).  Everything is computed from function-level inner products.
    """
    tb = TranslateBasis(basis, radius)
    rows = tb.stack.rows
    w = tb.stack.spec.weight
    imgs = np.array([U(tb.element(b)).values.ravel() for b in range(tb.size)])
    gamma = tb.stack.gram()
    M = (rows.conj() @ imgs.T) * w
    W = (imgs.conj() @ imgs.T) * w
    ev, V = np.linalg.eigh(gamma)
    keep = ev > eps_rank * ev.max()
    X = V[:, keep] / np.sqrt(ev[keep])
    Mr = X.conj().T @ M @ X
    ray = np.linalg.eigvalsh(0.5 * (Mr + Mr.conj().T))
    sing2 = np.linalg.eigvalsh(X.conj().T @ W @ X)
    herm_gap = float(np.linalg.norm(Mr - Mr.conj().T, 2))
    return {
        "matrix": M, "translates": tb,
        "ray_min": float(ray[0]), "ray_max": float(ray[-1]),
        "sing_min": float(np.sqrt(max(sing2[0], 0.0))), "sing_max": float(np.sqrt(max(sing2[-1], 0.0))),
        "herm_gap": herm_gap,
    }


def check_tsp_property_transfer(U: OperatorHandle, basis: GeneratorSet, radius: int = KMAX,
                                seed: int = DEFAULT_SEED, rel_tol: float = 0.05,
                                adjoint: bool = True, tsp_tol: float = TSP_TOL) -> list[PropertyRow]:
    """Compare operator-level estimates with the fiber-level quantities of R."""
    spec = basis.spec
    handle = OperatorHandle(U.apply, U.label, basis)
    res = verify_tsp(handle, spec, seed=seed)
    if res > tsp_tol:
        raise NotTSP(f"{U.label}: commutation residual {res:.2e} > {tsp_tol:g}")
    rows = [PropertyRow("tsp", res, 0.0, res, True)]
    R = extract_range_operator(handle, basis, check_tsp=False)
    est = ritz_estimates(handle, basis, radius)

    top = est["sing_max"]
    rows.append(PropertyRow("norm-bound", top, R.norm_bound, max(0.0, top - R.norm_bound),
                            top <= R.norm_bound + 1e-6))
    bb = bounded_below(R)
    r = _rel(est["sing_min"], bb)
    rows.append(PropertyRow("bounded-below", est["sing_min"], bb, r, r <= rel_tol))
    if is_selfadjoint(R, 1e-6 * max(1.0, R.norm_bound)):
        A, B = spectrum_box(R)
        r = _rel(est["ray_min"], A)
        rows.append(PropertyRow("spectrum-min", est["ray_min"], A, r, r <= rel_tol))
        r = _rel(est["ray_max"], B)
        rows.append(PropertyRow("spectrum-max", est["ray_max"], B, r, r <= rel_tol))
    if adjoint:
        tb = est["translates"]
        Ustar = tb.operator(est["matrix"].conj().T, f"{U.label}^*")
        Rstar = extract_range_operator(Ustar, basis, check_tsp=False)
        gap = field_distance(Rstar, fiber_adjoint(R), relative=False)
        rows.append(PropertyRow("adjoint", gap, 0.0, gap, gap <= 1e-6))
    return rows
