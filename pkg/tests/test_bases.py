import math

import numpy as np
import pytest

from uqme.bases import (
    BasisTransform,
    BlochVector,
    NoDecoherenceBasisError,
    basis_by_name,
    bloch_coherent_derivative,
    bloch_map,
    decoherence_basis,
    diagonalize_lindblad,
    drive_vector,
    transform_generator,
    transform_model,
    transform_state,
    v_model_pm_basis,
)
from uqme.master import assemble, dissipator
from uqme.models import SIGMA_Z, ModelError, ground_state, thermal_state

from helpers import random_state

R2 = math.sqrt(2.0)


def test_two_level_decoherence_basis(two_level):
    g = two_level.params.gamma
    basis, ltilde = diagonalize_lindblad(two_level.collapse_ops[0])
    np.testing.assert_allclose(ltilde, np.diag([-math.sqrt(g), math.sqrt(g)]), atol=1e-15)
    v = basis.matrix
    np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-12)
    a, b = math.sqrt((1 - 1 / R2) / 2), math.sqrt((1 + 1 / R2) / 2)
    np.testing.assert_allclose(np.abs(v), [[a, b], [b, a]], atol=1e-12)
    # phase convention: largest entry of each column is real-positive
    for j in range(2):
        k = np.argmax(np.abs(v[:, j]))
        assert v[k, j].real > 0 and abs(v[k, j].imag) < 1e-15


def test_already_diagonal_operator_gives_identity():
    basis, ltilde = diagonalize_lindblad(math.sqrt(0.02) * SIGMA_Z)
    np.testing.assert_array_equal(basis.matrix, np.eye(2))
    np.testing.assert_array_equal(ltilde, math.sqrt(0.02) * SIGMA_Z)


def test_v_model_has_no_decoherence_basis(v_model):
    with pytest.raises(NoDecoherenceBasisError, match="normal"):
        diagonalize_lindblad(list(v_model.collapse_ops))
    with pytest.raises(NoDecoherenceBasisError):
        decoherence_basis(v_model)


def test_non_commuting_normal_operators():
    from uqme.models import SIGMA_X

    with pytest.raises(NoDecoherenceBasisError, match="commute"):
        diagonalize_lindblad([SIGMA_X, SIGMA_Z])


def test_transform_must_be_unitary():
    with pytest.raises(ValueError, match="unitary"):
        BasisTransform(np.array([[1, 1], [0, 1]], dtype=complex), "a", "b", ("x", "y"))


def test_pm_basis_operators(v_model):
    basis = v_model_pm_basis()
    moved = transform_model(v_model, basis)
    g, d, b = v_model.params.gamma, v_model.params.delta, math.exp(-1)
    h = np.array([[0, 0, 0], [0, 1 - d / 2, d / 2], [0, d / 2, 1 - d / 2]])
    np.testing.assert_allclose(moved.hamiltonian, h, atol=1e-12)
    down, up = moved.collapse_ops
    expected_down = np.zeros((3, 3))
    expected_down[0, 1] = math.sqrt(g)
    np.testing.assert_allclose(down, expected_down, atol=1e-15)
    np.testing.assert_allclose(up, math.sqrt(b) * expected_down.T, atol=1e-15)
    for op in moved.collapse_ops:
        np.testing.assert_allclose(op[2, :], 0, atol=1e-14)  # never produces |->
        np.testing.assert_allclose(op[:, 2], 0, atol=1e-14)  # annihilates |->


def test_pm_basis_state_transforms(v_model):
    basis = v_model_pm_basis()
    two = np.diag([0, 1, 0]).astype(complex)
    half = 0.5 * np.array([[0, 0, 0], [0, 1, 1], [0, 1, 1]])
    # |2> = (|+> - |->)/sqrt2 with this sign of |->; the magnitudes match (|+>+|->)(<+|+<-|)/2
    np.testing.assert_allclose(np.abs(transform_state(two, basis)), half, atol=1e-15)
    rho = thermal_state(v_model)
    np.testing.assert_allclose(transform_state(rho, basis), rho, atol=1e-15)
    rng = np.random.default_rng(0)
    r = random_state(rng, 3)
    np.testing.assert_allclose(transform_state(transform_state(r, basis), basis, "backward"), r, atol=1e-14)
    with pytest.raises(ValueError):
        transform_state(np.eye(2), basis)
    with pytest.raises(ValueError):
        transform_state(r, basis, "sideways")


def test_ground_state_in_decoherence_basis(two_level):
    basis = decoherence_basis(two_level)
    rho = transform_state(ground_state(two_level), basis)
    from uqme.models import SIGMA_X

    np.testing.assert_allclose(rho, 0.5 * (np.eye(2) - (SIGMA_X + SIGMA_Z) / R2), atol=1e-15)
    assert rho[1, 0].real == pytest.approx(-1 / (2 * R2), abs=1e-15)


def test_spectrum_invariance_and_identity():
    rng = np.random.default_rng(1)
    eye = BasisTransform(np.eye(3, dtype=complex), "a", "a", ("1", "2", "3"))
    for basis in (v_model_pm_basis(), eye):
        r = random_state(rng, 3)
        out = transform_state(r, basis)
        np.testing.assert_allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(r), atol=1e-10)
    np.testing.assert_array_equal(transform_state(r, eye), r)


def test_decoherence_dissipator_damps_only_coherences(two_level):
    basis = decoherence_basis(two_level)
    (lt,) = transform_model(two_level, basis).collapse_ops
    g = two_level.params.gamma
    rng = np.random.default_rng(2)
    for _ in range(10):
        r = random_state(rng, 2)
        out = dissipator(lt, r)
        np.testing.assert_allclose(np.diag(out), 0, atol=1e-12)
        off = r - np.diag(np.diag(r))
        np.testing.assert_allclose(out - np.diag(np.diag(out)), -2 * g * off, atol=1e-12)


@pytest.mark.parametrize("which", ["two_level", "v_model"])
def test_generator_covariance(which, request):
    model = request.getfixturevalue(which)
    basis = decoherence_basis(model) if which == "two_level" else v_model_pm_basis()
    direct = assemble(model).matrix
    moved = assemble(model, basis).matrix
    np.testing.assert_allclose(transform_generator(direct, basis), moved, atol=1e-10)


def test_basis_lookup(two_level, v_model):
    assert basis_by_name(two_level, "eigen") is None
    assert basis_by_name(two_level, "decoherence").state_labels == ("m", "p")
    assert basis_by_name(v_model, "pm").state_labels == ("1", "p", "m")
    with pytest.raises(ModelError):
        basis_by_name(two_level, "pm")
    with pytest.raises(ModelError):
        basis_by_name(two_level, "sideways")


def test_bloch_vectors_and_drive(two_level):
    basis = decoherence_basis(two_level)
    moved = transform_model(two_level, basis)
    d = two_level.params.delta
    omega = drive_vector(moved)
    np.testing.assert_allclose(omega, [d / R2, 0, d / R2], atol=1e-16)

    s = bloch_map(ground_state(moved))
    np.testing.assert_allclose(s.as_array(), [-1 / R2, 0, -1 / R2], atol=1e-15)
    np.testing.assert_allclose(bloch_coherent_derivative(s, moved).as_array(), 0, atol=1e-18)

    ds = bloch_coherent_derivative(BlochVector(1.0, 0.0, 0.0), moved)
    np.testing.assert_allclose(ds.as_array(), [0, d / R2, 0], atol=1e-18)

    mixed = bloch_map(np.eye(2) / 2)
    assert mixed.length == 0.0
    with pytest.raises(ValueError):
        bloch_map(np.eye(3) / 3)


def test_bloch_derivative_matches_von_neumann(two_level):
    moved = transform_model(two_level, decoherence_basis(two_level))
    h = moved.hamiltonian
    rng = np.random.default_rng(3)
    for _ in range(5):
        r = random_state(rng, 2)
        drho = -1j * (h @ r - r @ h)
        expected = bloch_map(r + 1e-3 * drho).as_array() - bloch_map(r).as_array()
        got = 1e-3 * bloch_coherent_derivative(bloch_map(r), moved).as_array()
        np.testing.assert_allclose(got, expected, atol=1e-15)
        assert bloch_map(r).length <= 1 + 1e-8
