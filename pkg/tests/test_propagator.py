import numpy as np
import pytest

from heatsplit.fem import FemOperators, assemble, h_norm, nodal_interpolant
from heatsplit.mesh import build_uniform_unit_square
from heatsplit.propagator import (
    NONNEG_TOL,
    apply_propagator,
    build_propagator,
    certify_nonnegative,
)
from oracles import eig_expm


@pytest.fixture(scope="module")
def setups():
    out = {}
    for n in (2, 4, 8, 16):
        mesh = build_uniform_unit_square(n)
        out[n] = (mesh, assemble(mesh))
    return out


def test_tau_zero_gives_identity(setups):
    _, ops = setups[4]
    prop = build_propagator(ops, 0.0)
    assert np.array_equal(prop.matrix, np.eye(ops.n_h))
    cert = certify_nonnegative(prop)
    assert cert.passed and cert.min_entry == 0.0


def test_scalar_case_matches_hand_computation(setups):
    # N=2: M_L = [1/4], S = [4], so the propagator is exp(-16 tau)
    _, ops = setups[2]
    for tau in (0.01, 0.1, 1.0):
        prop = build_propagator(ops, tau)
        assert prop.matrix[0, 0] == pytest.approx(np.exp(-16 * tau), rel=1e-13)


def test_min_entry_nonnegative_on_acute_mesh(setups):
    _, ops = setups[4]
    prop = build_propagator(ops, 2.0**-4)
    assert prop.min_entry >= -1e-12
    assert prop.metzler_verified


def test_negative_tau_rejected(setups):
    _, ops = setups[4]
    with pytest.raises(ValueError):
        build_propagator(ops, -0.1)


def test_dense_limit_advises_smaller_mesh(setups):
    _, ops = setups[16]
    with pytest.raises(ValueError, match="smaller N"):
        build_propagator(ops, 0.1, dense_limit=100)


def test_metzler_precondition_fails_on_perturbed_stiffness(setups):
    _, ops = setups[4]
    bad = ops.stiffness.tolil()
    bad[0, 1] = 0.5  # positive off-diagonal entry
    perturbed = FemOperators(
        mass=ops.mass, lumped_mass=ops.lumped_mass, stiffness=bad.tocsr(), n_h=ops.n_h
    )
    prop = build_propagator(perturbed, 0.01)
    cert = certify_nonnegative(prop)
    assert not cert.metzler_ok
    assert not cert.passed


def test_certificate_reports_min_index(setups):
    _, ops = setups[8]
    prop = build_propagator(ops, 2.0**-6)
    cert = certify_nonnegative(prop)
    assert cert.passed
    i, j = cert.min_index
    assert 0 <= i < ops.n_h and 0 <= j < ops.n_h


def test_apply_trivial_and_shape_checks(setups):
    _, ops = setups[4]
    prop = build_propagator(ops, 0.05)
    assert np.array_equal(apply_propagator(prop, np.zeros(ops.n_h)), np.zeros(ops.n_h))
    with pytest.raises(ValueError):
        apply_propagator(prop, np.zeros(ops.n_h + 1))
    v = np.abs(np.random.default_rng(0).standard_normal(ops.n_h))
    assert apply_propagator(prop, v).min() >= 0.0


def test_sine_mode_is_discrete_eigenvector(setups):
    mesh, ops = setups[16]
    tau = 0.01
    prop = build_propagator(ops, tau)
    v = nodal_interpolant(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), mesh).coefficients
    mu = (v @ (ops.stiffness @ v)) / (v @ (ops.lumped_mass * v))
    out = apply_propagator(prop, v)
    np.testing.assert_allclose(out, np.exp(-mu * tau) * v, rtol=1e-3)
    # and the discrete eigenvalue approaches 2 pi^2
    assert mu == pytest.approx(2 * np.pi**2, rel=5e-3)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_semigroup_property(setups, n):
    _, ops = setups[n]
    tau = 2.0**-5
    single = build_propagator(ops, tau).matrix
    double = build_propagator(ops, 2 * tau).matrix
    assert np.abs(double - single @ single).max() <= 1e-10


def test_self_adjoint_in_lumped_inner_product(setups):
    _, ops = setups[8]
    weighted = ops.lumped_mass[:, None] * build_propagator(ops, 0.02).matrix
    assert np.abs(weighted - weighted.T).max() <= 1e-10


def test_h_norm_contraction(setups):
    rng = np.random.default_rng(5)
    _, ops = setups[8]
    prop = build_propagator(ops, 0.03)
    for _ in range(50):
        v = rng.standard_normal(ops.n_h)
        assert h_norm(prop.matrix @ v, ops) <= h_norm(v, ops) * (1 + 1e-12)


@pytest.mark.parametrize("n", [2, 4, 8, 11])
def test_expm_matches_eigendecomposition_oracle(n):
    # n_h <= 100 for all of these
    mesh = build_uniform_unit_square(n)
    ops = assemble(mesh)
    assert ops.n_h <= 100
    for tau in (2.0**-4, 2.0**-8):
        prop = build_propagator(ops, tau)
        np.testing.assert_allclose(prop.matrix, eig_expm(ops, tau), atol=1e-9)


def test_row_sums_substochastic(setups):
    for n in (4, 8, 16):
        _, ops = setups[n]
        prop = build_propagator(ops, 2.0**-5)
        assert prop.matrix.sum(axis=1).max() <= 1 + NONNEG_TOL


def test_tiny_negative_entries_clamped(setups):
    _, ops = setups[16]
    prop = build_propagator(ops, 2.0**-10)
    cert = certify_nonnegative(prop)
    assert cert.passed
    assert prop.matrix.min() >= 0.0  # clamped after certification
