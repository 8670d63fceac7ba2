"""Kirchhoff stress for the fixed-corotated viscoelastic model.

The deformation gradient is split multiplicatively into an elastic part
F_E, a viscous part F_N, and a plastic part F_P.  This solver keeps the
purely elastic regime (F_P = I) and evaluates the viscous branch from the
*current* velocity gradient only, holding F_N at identity:

    tau = tau_E(F_E) + tau_N(grad_v)
    tau_E = 2 mu (F_E - R) F_E^T + lambda (J - 1) J I,   J = det(F_E)
    tau_N = viscosity * sym(grad_v)

R is the rotation factor of the polar decomposition of F_E, computed from
an SVD; for det(F) > 0 the product U V^T is a proper rotation.  tau is
symmetrized before returning to shed roundoff skew.
"""

from __future__ import annotations

import numpy as np

from .errors import InversionError
from .materials import MaterialParams

_EYE = np.eye(3)


def polar_rotation(F: np.ndarray) -> np.ndarray:
    """Rotation factor(s) of the polar decomposition F = R S.

    Accepts a single (3, 3) matrix or a batch (n, 3, 3); requires
    det(F) > 0 so that U V^T is proper.
    """
    U, _, Vt = np.linalg.svd(np.asarray(F, dtype=np.float64))
    return U @ Vt


def kirchhoff_stress_batch(
    F_E: np.ndarray,
    F_N: np.ndarray,
    grad_v: np.ndarray,
    lam: np.ndarray,
    mu: np.ndarray,
    viscosity: np.ndarray,
) -> np.ndarray:
    """Vectorized stress for (n, 3, 3) gradients and (n,) coefficient arrays.

    F_N is accepted for interface stability (a finite viscous-strain rule
    would consume it) but the Newtonian branch reads only grad_v.
    Raises InversionError naming the first particle with det(F_E) <= 0.
    """
    F_E = np.asarray(F_E, dtype=np.float64)
    J = np.linalg.det(F_E)
    bad = np.flatnonzero(~(J > 0.0))
    if bad.size:
        raise InversionError(
            f"particle {bad[0]}: det(F_E) = {J[bad[0]]!r} <= 0, stress undefined"
        )
    R = polar_rotation(F_E)
    lam = np.asarray(lam, dtype=np.float64)[:, None, None]
    mu = np.asarray(mu, dtype=np.float64)[:, None, None]
    visc = np.asarray(viscosity, dtype=np.float64)[:, None, None]

    tau = 2.0 * mu * ((F_E - R) @ np.swapaxes(F_E, -1, -2))
    tau += (lam * ((J - 1.0) * J)[:, None, None]) * _EYE
    tau += visc * 0.5 * (grad_v + np.swapaxes(grad_v, -1, -2))
    # Elastic term is symmetric only up to roundoff; make it exact.
    return 0.5 * (tau + np.swapaxes(tau, -1, -2))


def kirchhoff_stress(
    F_E: np.ndarray,
    F_N: np.ndarray,
    grad_v: np.ndarray,
    material: MaterialParams,
) -> np.ndarray:
    """Stress of a single particle under ``material`` — (3, 3) symmetric."""
    tau = kirchhoff_stress_batch(
        F_E[None],
        F_N[None],
        np.asarray(grad_v, dtype=np.float64)[None],
        np.array([material.lame_lambda]),
        np.array([material.lame_mu]),
        np.array([material.viscosity]),
    )
    return tau[0]
