"""Stress model: rest state, rotation invariance, small-strain limit, viscosity."""

from __future__ import annotations

import numpy as np
import pytest

from mocomp.constitutive import kirchhoff_stress, kirchhoff_stress_batch, polar_rotation
from mocomp.errors import InversionError
from mocomp.materials import MaterialParams

EYE = np.eye(3)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random proper rotation from a normalized quaternion."""
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@pytest.fixture
def material() -> MaterialParams:
    return MaterialParams.from_elastic(1e4, 0.3, viscosity=0.0, density=1.0)


def test_rest_state_is_stress_free(material):
    tau = kirchhoff_stress(EYE, EYE, np.zeros((3, 3)), material)
    assert np.array_equal(tau, np.zeros((3, 3)))


def test_pure_rotation_is_stress_free(material, rng):
    for _ in range(10):
        R = random_rotation(rng)
        tau = kirchhoff_stress(R, EYE, np.zeros((3, 3)), material)
        assert np.max(np.abs(tau)) <= 1e-9 * material.lame_mu


def test_small_strain_matches_hooke(material):
    # Uniaxial stretch F = diag(1+d, 1, 1): to first order the stress is
    # lambda * tr(eps) * I + 2 mu * eps with eps = diag(d, 0, 0).
    d = 1e-4
    F = np.diag([1.0 + d, 1.0, 1.0])
    tau = kirchhoff_stress(F, EYE, np.zeros((3, 3)), material)
    lam, mu = material.lame_lambda, material.lame_mu
    hooke = lam * d * EYE + 2.0 * mu * np.diag([d, 0.0, 0.0])
    assert np.max(np.abs(tau - hooke)) <= 10.0 * (lam + 2.0 * mu) * d**2


def test_rotation_invariance(material, rng):
    # tau(R F) = R tau(F) R^T for the corotated elastic branch.
    for _ in range(20):
        F = EYE + 0.2 * rng.standard_normal((3, 3))
        if np.linalg.det(F) <= 0.05:
            continue
        R = random_rotation(rng)
        tau = kirchhoff_stress(F, EYE, np.zeros((3, 3)), material)
        tau_rot = kirchhoff_stress(R @ F, EYE, np.zeros((3, 3)), material)
        expected = R @ tau @ R.T
        scale = max(np.max(np.abs(expected)), material.lame_mu * 1e-6)
        assert np.max(np.abs(tau_rot - expected)) <= 1e-8 * scale


def test_output_is_symmetric(material, rng):
    for _ in range(10):
        F = EYE + 0.3 * rng.standard_normal((3, 3))
        if np.linalg.det(F) <= 0.05:
            continue
        grad_v = rng.standard_normal((3, 3))
        visc = MaterialParams.from_elastic(1e4, 0.3, viscosity=2.0)
        tau = kirchhoff_stress(F, EYE, grad_v, visc)
        assert np.array_equal(tau, tau.T)


def test_viscous_branch_is_newtonian():
    # With F_E = I the elastic branch vanishes and only v * sym(grad_v) remains.
    material = MaterialParams.from_elastic(1e4, 0.3, viscosity=3.0)
    grad_v = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
    tau = kirchhoff_stress(EYE, EYE, grad_v, material)
    expected = 3.0 * 0.5 * (grad_v + grad_v.T)
    np.testing.assert_allclose(tau, expected, rtol=0, atol=1e-14)


def test_inverted_gradient_raises(material):
    with pytest.raises(InversionError, match="particle 0"):
        kirchhoff_stress(np.diag([-1.0, 1.0, 1.0]), EYE, np.zeros((3, 3)), material)
    with pytest.raises(InversionError):
        kirchhoff_stress(np.diag([0.0, 1.0, 1.0]), EYE, np.zeros((3, 3)), material)


def test_batch_matches_single(material, rng):
    n = 7
    F = EYE + 0.1 * rng.standard_normal((n, 3, 3))
    grad_v = rng.standard_normal((n, 3, 3))
    lam = np.full(n, material.lame_lambda)
    mu = np.full(n, material.lame_mu)
    visc = np.full(n, 1.5)
    batch = kirchhoff_stress_batch(F, np.broadcast_to(EYE, (n, 3, 3)), grad_v, lam, mu, visc)
    single_mat = MaterialParams.from_elastic(1e4, 0.3, viscosity=1.5)
    for i in range(n):
        one = kirchhoff_stress(F[i], EYE, grad_v[i], single_mat)
        np.testing.assert_array_equal(batch[i], one)


def test_polar_rotation_is_proper(rng):
    for _ in range(10):
        F = EYE + 0.4 * rng.standard_normal((3, 3))
        if np.linalg.det(F) <= 0.05:
            continue
        R = polar_rotation(F)
        np.testing.assert_allclose(R @ R.T, EYE, atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
        # R^T F must be symmetric (the stretch factor).
        S = R.T @ F
        np.testing.assert_allclose(S, S.T, atol=1e-12)
