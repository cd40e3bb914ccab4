import numpy as np
import pytest

from twistframe.errors import BasisNotParseval, GridMismatch, NotSelfAdjoint, NotTSP
from twistframe.expr import parse_multiplier
from twistframe.frames import GeneratorSet, decompose, frame_bounds_single
from twistframe.grids import make_gaussian, norm, random_smooth
from twistframe.rangeops import (TranslateBasis, adjoint_operator, bounded_below,
                                 build_tsp_from_range, check_tsp_property_transfer,
                                 extract_range_operator, fiber_adjoint, field_distance,
                                 frame_operator, identity_operator, inverse_frame_operator,
                                 is_selfadjoint, is_unitary, multiplication_operator,
                                 multiplier_residual, plain_translation, probes,
                                 range_reconstruction_residual, scaled_identity,
                                 selfadjoint_gap, spectrum_box, unitary_gap, verify_tsp)
from twistframe.twist import twisted_translate


@pytest.fixture(scope="module")
def B1(gauss):
    return decompose(GeneratorSet.of(gauss))


@pytest.fixture(scope="module")
def S7(basis07):
    gens, B = basis07
    return frame_operator(gens, 6, B)


@pytest.fixture(scope="module")
def R_S7(S7, basis07):
    return extract_range_operator(S7, basis07[1])


def mult(text, spec, basis=None):
    return multiplication_operator(parse_multiplier(text, spec), basis)


def symbol_table(spec, l):
    xi = (np.arange(spec.M) / spec.M).repeat(spec.P)
    return np.exp(2j * np.pi * l * (spec.axis()[None, :] - xi[:, None]))


def test_tsp_of_identity_and_scalars(spec, B1):
    assert verify_tsp(identity_operator(basis=B1), spec) == 0.0
    assert verify_tsp(scaled_identity(2 - 1j), spec) <= 1e-14


def test_tsp_of_periodic_multiplier(spec, B1):
    assert verify_tsp(mult("exp(2*pi*i*y)", spec), spec) <= 1e-12
    assert verify_tsp(mult("cos(2*pi*x) + 2*exp(-4*pi*i*y)", spec, B1), spec) <= 1e-12


def test_tsp_rejects_non_tsp(spec, B1):
    assert verify_tsp(plain_translation(spec, (1,), (0,)), spec) >= 0.1
    assert verify_tsp(mult("exp(2*pi*i*x*y)", spec, B1), spec) >= 0.1
    with pytest.raises(NotTSP):
        extract_range_operator(mult("exp(2*pi*i*x*y)", spec), B1)
    with pytest.raises(NotTSP):
        check_tsp_property_transfer(plain_translation(spec, (0,), (1,)), B1, radius=2)


def test_probes_are_seeded(spec, B1):
    U = identity_operator(basis=B1)
    a, b = probes(U, spec, 2, seed=3), probes(U, spec, 2, seed=3)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert not np.array_equal(a[0].values, probes(U, spec, 1, seed=4)[0].values)


def test_identity_range(B1):
    R = extract_range_operator(identity_operator(), B1)
    live = R.live_fibers()
    assert live.all()
    assert np.abs(R.compressed()[:, 0, 0] - 1).max() <= 1e-6
    assert is_unitary(R, 1e-6) and is_selfadjoint(R)
    assert spectrum_box(R) == pytest.approx((1, 1), abs=1e-6)


@pytest.mark.parametrize("l", [1, 2, -1])
def test_multiplier_range_is_symbol(spec, B1, l):
    R = extract_range_operator(mult(f"exp(2*pi*i*({l})*y)", spec), B1)
    m = symbol_table(spec, l)
    assert np.abs(R.images[:, :, 0] - m * R.basis[:, :, 0]).max() <= 1e-12
    assert unitary_gap(R) <= 1e-12
    assert bounded_below(R) == pytest.approx(1, abs=1e-12)
    with pytest.raises(NotSelfAdjoint):
        spectrum_box(R)


def test_range_adjoint_of_multiplier(spec, B1):
    R = extract_range_operator(mult("exp(2*pi*i*y)", spec), B1)
    Rc = extract_range_operator(mult("exp(-2*pi*i*y)", spec), B1)
    # M_phi leaves the space, so the relation holds for the compressions
    assert np.abs(fiber_adjoint(R).compressed() - Rc.compressed()).max() <= 1e-12
    assert selfadjoint_gap(R) > 0.1


def test_requires_parseval_basis(gauss):
    with pytest.raises(BasisNotParseval):
        extract_range_operator(identity_operator(), GeneratorSet.of(gauss))


def test_frame_operator_range_matches_dual_gram(R_S7, basis07, S7, spec):
    gens, B = basis07
    assert is_selfadjoint(R_S7, 1e-8)
    fb = frame_bounds_single(gens[0])
    lo, hi = spectrum_box(R_S7)
    assert fb.A - 1e-6 <= lo <= hi <= fb.B + 1e-6
    f = random_smooth(spec, np.random.default_rng(2), spread=1.0)
    assert range_reconstruction_residual(S7, R_S7, f) <= 1e-6


def test_inverse_frame_operator_range(R_S7, basis07):
    gens, B = basis07
    R_inv = extract_range_operator(inverse_frame_operator(gens, 6, B), B)
    C, Ci = R_S7.compressed(), R_inv.compressed()
    live = R_S7.live_fibers()
    prod = Ci[live] @ C[live]
    assert np.abs(prod - np.eye(C.shape[-1])).max() <= 1e-5


def test_build_extract_round_trips(spec, R_S7, S7, basis07):
    B = basis07[1]
    U = build_tsp_from_range(R_S7, B)
    assert verify_tsp(U, spec) <= 1e-8
    R2 = extract_range_operator(U, B)
    assert field_distance(R2, R_S7) <= 1e-10
    for f in probes(S7, spec, 3, seed=9):
        assert norm(U(f) - S7(f)) / norm(f) <= 1e-6


def test_field_distance_guards(spec, B1, basis07):
    R1 = extract_range_operator(identity_operator(), B1)
    R7 = extract_range_operator(identity_operator(), basis07[1])
    assert field_distance(R1, R1) == 0.0
    if not np.array_equal(R1.active, R7.active):
        with pytest.raises(GridMismatch):
            field_distance(R1, R7)
    other = extract_range_operator(identity_operator(), decompose(GeneratorSet.of(
        B1[0], make_gaussian(spec, (0, 0), 2.0, label="g2"))))
    with pytest.raises(GridMismatch):
        field_distance(R1, other)


def test_multiplier_consistency_exponentials(S7, basis07):
    psi = basis07[1][0]
    for k in range(-2, 3):
        for l in range(-2, 3):
            assert multiplier_residual(S7, psi, {(k, l): 1.0}) <= 1e-6


def test_multiplier_consistency_polynomials(S7, basis07):
    psi = basis07[1][0]
    rng = np.random.default_rng(11)
    for _ in range(3):
        coeffs = {(k, l): complex(*rng.normal(size=2))
                  for k in range(-2, 3) for l in range(-2, 3) if abs(k) + abs(l) <= 2}
        assert multiplier_residual(S7, psi, coeffs) <= 1e-6


def test_multiplier_consistency_fails_for_non_tsp(spec, basis07):
    U = plain_translation(spec, (1,), (0,))
    assert multiplier_residual(U, basis07[1][0], {(0, 1): 1.0}) > 1e-2


def test_translate_basis_matrix_operator(spec, B1):
    tb = TranslateBasis(B1, 2)
    with pytest.raises(ValueError):
        tb.operator(np.eye(3))
    M = tb.matrix_of(scaled_identity(2.0))
    U = tb.operator(M)
    f = twisted_translate(B1[0], (1, 0), tail_tol=None)
    assert norm(U(f) - f * 2) / norm(f) <= 1e-6


def test_adjoint_operator(spec, S7, basis07):
    Sstar = adjoint_operator(S7)
    for f in probes(S7, spec, 2, seed=1):
        assert norm(Sstar(f) - S7(f)) / norm(f) <= 1e-6
    with pytest.raises(ValueError):
        adjoint_operator(mult("exp(2*pi*i*y)", spec))


def test_property_transfer_scalar(B1):
    rows = check_tsp_property_transfer(scaled_identity(3.0), B1, radius=3)
    names = [r.check for r in rows]
    assert names == ["tsp", "norm-bound", "bounded-below", "spectrum-min", "spectrum-max",
                     "adjoint"]
    assert all(r.passed for r in rows)
    by = {r.check: r for r in rows}
    assert by["spectrum-min"].rhs == pytest.approx(3, rel=1e-6)
    assert "pass" in rows[1].line()


def test_property_transfer_multiplier(spec, B1):
    rows = check_tsp_property_transfer(mult("exp(2*pi*i*y)", spec), B1, radius=3, adjoint=False)
    by = {r.check: r for r in rows}
    assert all(r.passed for r in rows)
    assert "spectrum-min" not in by
    assert by["bounded-below"].rhs == pytest.approx(1, abs=1e-12)


@pytest.mark.slow
def test_property_transfer_frame_operator(S7, basis07):
    rows = check_tsp_property_transfer(S7, basis07[1])
    assert all(r.passed for r in rows), [r.line() for r in rows]


def test_multiplier_adjoint_converges_with_radius(spec, B1):
    # the compressed multiplier has a slowly decaying translate matrix
    U = mult("exp(2*pi*i*y)", spec)
    gap = {r: check_tsp_property_transfer(U, B1, radius=r)[-1].residual for r in (2, 4)}
    assert gap[4] < gap[2] / 4


def test_multiplier_adjoint_on_localized_basis(spec, basis07):
    rows = check_tsp_property_transfer(mult("exp(2*pi*i*y)", spec), basis07[1])
    assert all(r.passed for r in rows), [r.line() for r in rows]
