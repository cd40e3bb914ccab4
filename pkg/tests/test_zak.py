import numpy as np
import pytest

from twistframe.errors import GridMismatch, ZeroFunction
from twistframe.grids import GridSpec, inner, make_gaussian, norm, random_smooth, zeros
from twistframe.twist import lattice, twisted_translate
from twistframe.weyl import KernelField, weyl_inverse, weyl_kernel
from twistframe.zak import (ZakField, bracket, inverse_zak, membership_residual, zak_transform,
                            zak_twist_residual)


def literal_zak(f):
    """sum_m K(m + xi_a, eta) exp(-2 pi i m xi'_b), with explicit loops over m."""
    s = f.spec
    K = weyl_kernel(f).values
    out = np.zeros((s.M, s.P, s.D), dtype=complex)
    for a in range(s.M):
        for b in range(s.P):
            for m in range(-s.L, s.L):
                row = (m + s.L) * s.N + a  # grid index of m + a/M
                out[a, b] += K[row] * np.exp(-2j * np.pi * m * b / s.P)
    return out


def orthogonal_to(phi, h):
    """h with its fiber projection onto J phi removed."""
    Zp, Zh = zak_transform(phi), zak_transform(h)
    bp = bracket(Zp, Zp).values.real
    c = bracket(Zh, Zp).values / np.where(bp > 0, bp, 1)
    return inverse_zak(ZakField(phi.spec, Zh.values - c[..., None] * Zp.values), "perp")


def test_matches_literal_sum(backend):
    s = GridSpec(L=2, N=4)
    f = random_smooth(s, np.random.default_rng(1), spread=0.3)
    assert np.abs(zak_transform(f).values - literal_zak(f)).max() <= 1e-12


def test_matches_literal_sum_default(spec, gauss):
    ref = literal_zak(gauss)
    assert np.abs(zak_transform(gauss).values - ref).max() <= 1e-12 * np.abs(ref).max()


def test_isometry_and_zero(spec, corpus16):
    for f in corpus16:
        Z = zak_transform(f)
        assert abs(Z.norm() ** 2 - norm(f) ** 2) / norm(f) ** 2 <= 1e-6
    assert not np.any(zak_transform(zeros(spec)).values)


def test_single_kernel_peak(spec):
    m0, a0, c0 = 2, 5, 130
    K = np.zeros((spec.D, spec.D), dtype=complex)
    K[(m0 + spec.L) * spec.N + a0, c0] = 1.0
    f = weyl_inverse(KernelField(spec, K))
    Z = zak_transform(f).values
    b = np.arange(spec.P)
    assert np.abs(Z[a0, :, c0] - np.exp(-2j * np.pi * m0 * b / spec.P)).max() <= 1e-12
    Z[a0, :, c0] = 0
    assert np.abs(Z).max() <= 1e-12


def test_round_trip_and_linearity(spec, gauss):
    assert norm(inverse_zak(zak_transform(gauss)) - gauss) / norm(gauss) <= 1e-6
    Z0 = ZakField(spec, np.zeros((spec.M, spec.P, spec.D), dtype=complex))
    assert norm(inverse_zak(Z0)) == 0
    rng = np.random.default_rng(4)
    Z1 = ZakField(spec, rng.normal(size=Z0.values.shape) + 0j)
    Z2 = ZakField(spec, rng.normal(size=Z0.values.shape) * 1j)
    lhs = inverse_zak(Z1 + Z2)
    rhs = inverse_zak(Z1) + inverse_zak(Z2)
    assert norm(lhs - rhs) <= 1e-12 * norm(lhs)


def test_fibers_round_trip(spec, gauss):
    Z = zak_transform(gauss)
    F = Z.fibers()
    assert F.shape == (spec.M * spec.P, spec.D)
    assert np.array_equal(ZakField.from_fibers(spec, F).values, Z.values)


def test_covariance_examples(gauss, backend):
    assert zak_twist_residual(gauss, (1, 0)) <= 1e-9
    assert zak_twist_residual(gauss, (0, 0)) == 0
    assert zak_twist_residual(gauss, (1, 1)) <= 1e-9


def test_covariance_sign_matters(spec, gauss):
    # without the exp(pi i k l) factor the (1, 1) law fails by a factor 2
    from twistframe.zak import covariance_phase
    lhs = zak_transform(twisted_translate(gauss, (1, 1))).values
    ph = -covariance_phase(spec, (1, 1))[..., None]
    rhs = ph * zak_transform(gauss).values
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) == pytest.approx(2.0, abs=1e-9)


def test_bracket_self(spec, corpus16):
    for f in corpus16:
        b = bracket(f, f)
        assert np.abs(b.values.imag).max() <= 1e-12
        assert b.values.real.min() >= -1e-12
        assert abs(b.integral() - norm(f) ** 2) <= 1e-6
    assert not np.any(bracket(corpus16[0], zeros(spec)).values)


def test_bracket_conjugate_symmetry_and_l1(corpus16):
    f, g = corpus16[3], corpus16[8]
    assert np.abs(bracket(f, g).values - bracket(g, f).values.conj()).max() <= 1e-13
    assert bracket(f, g).l1_norm() <= norm(f) * norm(g) + 1e-6


def test_bracket_grid_mismatch(gauss):
    with pytest.raises(GridMismatch):
        bracket(gauss, make_gaussian(GridSpec(N=32), (0, 0), 1))


def test_omega_threshold(spec, gauss):
    b = bracket(gauss, gauss)
    assert b.omega_mask.all()
    assert b.threshold == pytest.approx(1e-8 * b.values.real.max())


def test_membership_translate(spec, gauss):
    res, r = membership_residual(twisted_translate(gauss, (1, 0)), gauss)
    assert res <= 1e-8
    xi = np.arange(spec.M) / spec.M
    assert np.abs(r - np.exp(2j * np.pi * xi)[:, None]).max() <= 1e-8


def test_membership_self(gauss):
    res, r = membership_residual(gauss, gauss)
    assert res <= 1e-14
    assert np.abs(r - 1).max() <= 1e-13


def test_membership_orthogonal(spec, gauss):
    f = orthogonal_to(gauss, make_gaussian(spec, (0.3, -0.2), 1.6))
    res, _ = membership_residual(f, gauss)
    assert res >= 0.99
    with pytest.raises(ZeroFunction):
        membership_residual(zeros(spec), gauss)


def test_fiber_orthogonal_means_translates_orthogonal(spec, gauss):
    f = orthogonal_to(gauss, make_gaussian(spec, (0.3, -0.2), 1.6))
    assert np.abs(bracket(f, gauss).values).max() <= 1e-10
    for p in lattice(2):
        assert abs(inner(gauss, twisted_translate(f, p, tail_tol=None))) <= 1e-8
    # and a generic pair is not orthogonal
    h = make_gaussian(spec, (0.3, -0.2), 1.6)
    assert max(abs(inner(gauss, twisted_translate(h, p))) for p in lattice(1)) > 1e-2


def test_refinement_isometry():
    s = GridSpec(L=8, N=32)
    g = make_gaussian(s, (0.2, 0.1), 1.0)
    Z = zak_transform(g)
    assert Z.values.shape == (32, 16, 512)
    assert abs(Z.norm() ** 2 - norm(g) ** 2) / norm(g) ** 2 <= 1e-6
    assert zak_twist_residual(g, (1, -1)) <= 1e-9
