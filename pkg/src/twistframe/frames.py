"""Frame analysis of finitely generated twisted shift-invariant spaces.

Generators are fiberized once; per torus point the fiber matrix H has the
fibers of the generators as columns.  The Gramian is G = w H^* H and the dual
Gramian G~ = H (w H^*), with w the eta quadrature weight.  G~ is never formed
densely: it is applied through H, and its pseudo-inverse through a thin SVD
of sqrt(w) H.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, MembershipFailure, NotAFrame, ZeroFunction
from .grids import GridSpec, SampledFunction, inner, norm, zeros
from .twist import compose_phase, lattice, twisted_translate
from .zak import EPS_SUPPORT, ZakField, bracket, inverse_zak, zak_transform

#: Relative cutoff separating the rank of a fiber matrix from roundoff.
EPS_RANK = 1e-8
#: Default lattice truncation for sums over twisted translates.
KMAX = 6


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    generators: tuple[SampledFunction, ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValueError("a generator set needs at least one function")
        spec = gens[0].spec
        for g in gens[1:]:
            if g.spec != spec:
                raise GridMismatch(f"generator {g.label!r} is on {g.spec}, expected {spec}")
        labels = [g.label for g in gens]
        if len(set(labels)) != len(labels):
            raise ValueError(f"generator labels must be unique: {labels}")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def of(cls, *gens: SampledFunction) -> "GeneratorSet":
        return cls(tuple(gens))

    @property
    def spec(self) -> GridSpec:
        return self.generators[0].spec

    @property
    def labels(self) -> list[str]:
        return [g.label for g in self.generators]

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def __getitem__(self, i) -> SampledFunction:
        return self.generators[i]

    def fiber_matrix(self) -> np.ndarray:
        """H with shape (T, F, S): column s is the fiber of generator s."""
        if "H" not in self._cache:
            cols = [zak_transform(g).fibers() for g in self.generators]
            H = np.stack(cols, axis=-1)
            H.setflags(write=False)
            self._cache["H"] = H
        return self._cache["H"]

    def translates(self, kmax: int) -> "TranslateStack":
        key = ("stack", kmax)
        if key not in self._cache:
            # keep one stack alive; they are large
            for k in [k for k in self._cache if isinstance(k, tuple)]:
                del self._cache[k]
            self._cache[key] = TranslateStack(self, kmax)
        return self._cache[key]


class TranslateStack:
    """Rows T_p phi_s for |p|_inf <= kmax, flattened, with analysis/synthesis.

    Translates are zero-filled without a tail check: generators of a space
    need not be compactly supported, and the lattice bound keeps every shift
    on the grid.
    """

    def __init__(self, gens: GeneratorSet, kmax: int):
        spec = gens.spec
        if kmax < 0:
            raise ValueError("kmax must be >= 0")
        self.spec = spec
        self.kmax = kmax
        self.points = lattice(kmax, spec.n)
        for p in self.points[:1] + self.points[-1:]:
            p.check(spec)
        size = spec.D ** (2 * spec.n)
        rows = np.empty((len(self.points) * len(gens), size), dtype=np.complex128)
        i = 0
        for p in self.points:
            for g in gens:
                rows[i] = twisted_translate(g, p, tail_tol=None).values.ravel()
                i += 1
        self.rows = rows

    def coefficients(self, f: SampledFunction) -> np.ndarray:
        """<f, T_p phi_s> for every row."""
        if f.spec != self.spec:
            raise GridMismatch(f"{f.spec} vs {self.spec}")
        return np.conj(self.rows @ np.conj(f.values.ravel())) * self.spec.weight

    def synthesize(self, c: np.ndarray, label: str = "") -> SampledFunction:
        return SampledFunction(self.spec, (c @ self.rows).reshape(self.spec.shape), label)

    def gram(self) -> np.ndarray:
        """Gram[a, b] = <row_b, row_a>."""
        return (self.rows.conj() @ self.rows.T) * self.spec.weight


@dataclass(frozen=True, eq=False)
class FrameReport:
    label: str
    A: float
    B: float
    is_frame: bool
    is_parseval: bool
    omega_fraction: float
    A_est: float | None = None
    B_est: float | None = None
    kmax: int | None = None

    def with_estimates(self, A_est: float, B_est: float, kmax: int) -> "FrameReport":
        return FrameReport(self.label, self.A, self.B, self.is_frame, self.is_parseval,
                           self.omega_fraction, A_est, B_est, kmax)

    def row(self) -> dict:
        return {
            "label": self.label, "A": self.A, "B": self.B,
            "A_est": self.A_est, "B_est": self.B_est,
            "is_frame": self.is_frame, "is_parseval": self.is_parseval,
            "omega_fraction": self.omega_fraction, "Kmax": self.kmax,
        }


def frame_bounds_single(phi: SampledFunction, eps: float = 1e-8, parseval_tol: float = 1e-6,
                        eps_support: float = EPS_SUPPORT) -> FrameReport:
    """Frame bounds of the translates of phi from the extremes of [phi, phi] on Omega."""
    if norm(phi) == 0.0:
        raise ZeroFunction(f"frame bounds of a zero function ({phi.label!r})")
    br = bracket(phi, phi, eps_support)
    mask = br.omega_mask
    vals = br.values.real[mask]
    A, B = float(vals.min()), float(vals.max())
    parseval = abs(A - 1.0) <= parseval_tol and abs(B - 1.0) <= parseval_tol
    return FrameReport(phi.label, A, B, A > eps, parseval, float(mask.mean()))


@dataclass(frozen=True, eq=False)
class FiberGram:
    """Gramian and dual Gramian of a generator set at every torus point."""

    spec: GridSpec
    H: np.ndarray  # (T, F, S)
    eps_rank: float = EPS_RANK

    @property
    def S(self) -> int:
        return self.H.shape[-1]

    def gram(self) -> np.ndarray:
        """G with shape (T, S, S)."""
        w = self.spec.fiber_weight
        return w * np.einsum("tfi,tfj->tij", self.H.conj(), self.H)

    def gram_field(self) -> np.ndarray:
        """G reshaped onto the torus axes."""
        s = self.spec
        return self.gram().reshape((s.M,) * s.n + (s.P,) * s.n + (self.S, self.S))

    def dual_apply(self, v: np.ndarray) -> np.ndarray:
        """G~ v for fiber arrays v of shape (T, F) or (T, F, K)."""
        w = self.spec.fiber_weight
        vv = v[..., None] if v.ndim == 2 else v
        out = self.H @ (w * (self.H.conj().transpose(0, 2, 1) @ vv))
        return out[..., 0] if v.ndim == 2 else out

    def dual_matrix(self, t: int) -> np.ndarray:
        """Dense G~ at flat torus index t (for checks only)."""
        h = self.H[t]
        return self.spec.fiber_weight * (h @ h.conj().T)

    def _svd(self):
        if not hasattr(self, "_svd_cache"):
            B = np.sqrt(self.spec.fiber_weight) * self.H
            U, sv, _ = np.linalg.svd(B, full_matrices=False)
            lam = sv**2  # nonzero eigenvalues of G and G~
            # cut relative to the largest eigenvalue over all fibers, so fibers
            # off the support do not promote roundoff to rank
            keep = lam > self.eps_rank * lam.max(initial=0.0)
            object.__setattr__(self, "_svd_cache", (U, lam, keep))
        return self._svd_cache

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of G~ kept by the rank cut, zero elsewhere; shape (T, S)."""
        _, lam, keep = self._svd()
        return np.where(keep, lam, 0.0)

    def range_projector_apply(self, v: np.ndarray) -> np.ndarray:
        U, _, keep = self._svd()
        Uk = U * keep[:, None, :]
        vv = v[..., None] if v.ndim == 2 else v
        out = Uk @ (Uk.conj().transpose(0, 2, 1) @ vv)
        return out[..., 0] if v.ndim == 2 else out

    def pinv_apply(self, v: np.ndarray) -> np.ndarray:
        """pinv(G~) v restricted to range(H)."""
        U, lam, keep = self._svd()
        inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
        vv = v[..., None] if v.ndim == 2 else v
        out = U @ (inv[:, :, None] * (U.conj().transpose(0, 2, 1) @ vv))
        return out[..., 0] if v.ndim == 2 else out


def fiber_gram(gens: GeneratorSet, eps_rank: float = EPS_RANK) -> FiberGram:
    return FiberGram(gens.spec, gens.fiber_matrix(), eps_rank)


def lattice_gram(gens: GeneratorSet, kmax: int = KMAX) -> np.ndarray:
    """Gram matrix <T_q phi_j, T_p phi_i> of the translates with |p|_inf <= kmax.

    Entries come from the correlations <T_r phi_j, phi_i>, |r|_inf <= 2 kmax,
    through T_p^* T_q = c(-p, p) c(-p, q) T_(q-p) (c = +-1).  Only one factor
    is ever shifted, so no translate is clipped at the box edge the way the
    rows of a TranslateStack are, and the matrix for a smaller kmax is a
    principal submatrix of the one for a larger kmax.
    """
    spec = gens.spec
    pts = lattice(kmax, spec.n)
    pts[-1].check(spec)
    S = len(gens)
    corr = {}
    for r in lattice(2 * kmax, spec.n):
        shifted = [twisted_translate(g, r, tail_tol=None) for g in gens]
        corr[r] = np.array([[inner(shifted[j], gens[i]) for j in range(S)] for i in range(S)])
    G = np.empty((len(pts) * S, len(pts) * S), dtype=np.complex128)
    for a, p in enumerate(pts):
        for b, q in enumerate(pts):
            c = (compose_phase(-p, p) * compose_phase(-p, q)).real
            G[a * S:(a + 1) * S, b * S:(b + 1) * S] = c * corr[q + -p]
    return G


def truncated_gram_translates(gens: GeneratorSet, kmax: int = KMAX,
                              eps_rank: float = EPS_RANK) -> tuple[float, float]:
    """Extreme nonzero eigenvalues of the Gram matrix of all translates with |k|,|l| <= kmax."""
    ev = np.linalg.eigvalsh(lattice_gram(gens, kmax))
    top = ev.max(initial=0.0)
    if top <= 0.0:
        return 0.0, 0.0
    nz = ev[ev > eps_rank * top]
    return float(nz.min()), float(nz.max())


def parsevalize(phi: SampledFunction, eps_support: float = EPS_SUPPORT,
                label: str | None = None) -> SampledFunction:
    """Generator of the same space whose bracket is the indicator of Omega."""
    if norm(phi) == 0.0:
        raise ZeroFunction(f"cannot normalize a zero function ({phi.label!r})")
    Z = zak_transform(phi)
    br = bracket(Z, Z, eps_support)
    mask = br.omega_mask
    scale = np.zeros(br.values.shape)
    scale[mask] = 1.0 / np.sqrt(br.values.real[mask])
    vals = Z.values * scale.reshape(scale.shape + (1,) * phi.spec.n)
    return inverse_zak(ZakField(phi.spec, vals), label or f"parseval({phi.label})")


def decompose(gens: GeneratorSet, eps_rank: float = EPS_RANK,
              eps_support: float = EPS_SUPPORT) -> GeneratorSet:
    """Fiber-orthogonal Parseval generators spanning the same space.

    Fiber-wise modified Gram-Schmidt with one reorthogonalization pass.  A
    remainder whose fiber norm is below eps_rank times the norm of the input
    fiber is treated as dependent and zeroed, so dependent inputs give zero
    outputs in their slot.
    """
    spec = gens.spec
    w = spec.fiber_weight
    H = gens.fiber_matrix()
    T = H.shape[0]
    Q = np.zeros_like(H)
    for i in range(H.shape[-1]):
        v = H[:, :, i].copy()
        n0 = np.sqrt(w * np.sum(np.abs(v) ** 2, axis=1))
        for _ in range(2):
            for j in range(i):
                q = Q[:, :, j]
                c = w * np.einsum("tf,tf->t", v, q.conj())
                v -= c[:, None] * q
        nr = np.sqrt(w * np.sum(np.abs(v) ** 2, axis=1))
        peak = n0.max() if T else 0.0
        keep = (n0**2 > eps_support * peak**2) & (nr > eps_rank * n0)
        scale = np.zeros(T)
        scale[keep] = 1.0 / nr[keep]
        Q[:, :, i] = v * scale[:, None]
    out = []
    for i in range(Q.shape[-1]):
        Z = ZakField.from_fibers(spec, Q[:, :, i])
        out.append(inverse_zak(Z, f"psi{i + 1}"))
    return GeneratorSet(tuple(out))


def frame_operator_apply(gens: GeneratorSet, f: SampledFunction, kmax: int = KMAX) -> SampledFunction:
    """Sum over |k|,|l| <= kmax and s of <f, T_p phi_s> T_p phi_s."""
    stack = gens.translates(kmax)
    return stack.synthesize(stack.coefficients(f), f"S[{f.label}]")


class InverseFrameOperator:
    """S^-1 on the space spanned by the generators, applied fiber-wise."""

    def __init__(self, gens: GeneratorSet, kmax: int = KMAX, eps: float = 1e-8,
                 eps_rank: float = EPS_RANK, membership_tol: float = 1e-4):
        A_est, B_est = truncated_gram_translates(gens, kmax, eps_rank)
        if A_est <= eps:
            raise NotAFrame(f"lower frame bound estimate {A_est:.3e} <= {eps:g} at Kmax={kmax}")
        self.A_est, self.B_est = A_est, B_est
        self.gram = fiber_gram(gens, eps_rank)
        self.spec = gens.spec
        self.membership_tol = membership_tol

    def __call__(self, f: SampledFunction) -> SampledFunction:
        if f.spec != self.spec:
            raise GridMismatch(f"{f.spec} vs {self.spec}")
        nf = norm(f)
        if nf == 0.0:
            return zeros(self.spec, f"Sinv[{f.label}]")
        v = zak_transform(f).fibers()
        off = v - self.gram.range_projector_apply(v)
        res = ZakField.from_fibers(self.spec, off).norm() / nf
        if res > self.membership_tol:
            raise MembershipFailure(f"{f.label or 'f'} is {res:.2e} away from the space")
        out = self.gram.pinv_apply(v)
        return inverse_zak(ZakField.from_fibers(self.spec, out), f"Sinv[{f.label}]")


def inverse_frame_operator_apply(gens: GeneratorSet, f: SampledFunction, **kw) -> SampledFunction:
    return InverseFrameOperator(gens, **kw)(f)


def span_residual(f: SampledFunction, gens: GeneratorSet, eps_rank: float = EPS_RANK) -> float:
    """Relative distance of J f from the fiber span of the generators."""
    nf = norm(f)
    if nf == 0.0:
        raise ZeroFunction(f"membership of a zero function ({f.label!r})")
    v = zak_transform(f).fibers()
    off = v - fiber_gram(gens, eps_rank).range_projector_apply(v)
    return ZakField.from_fibers(f.spec, off).norm() / nf
