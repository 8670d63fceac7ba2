"""Material parameter identification by simulation-in-the-loop descent.

Parameters are optimized per part as ``(log E, nu, log v)``: log-space for
the positive quantities (positivity by construction, sane conditioning)
and raw Poisson's ratio projected back into its open interval after every
update.  The Lame pair is *re-derived from (E, nu) at every evaluation* —
lambda and mu are never free variables.

The objective is pluggable: anything mapping a simulated
:class:`~mocomp.particles.Trajectory` to a nonnegative scalar fits the
:class:`GuidanceObjective` seam (a learned video prior would attach here);
the default is mean-squared position error against a reference trajectory.
Gradients come from central finite differences; the descent is plain
fixed-step gradient descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import OptimizationError, ParameterDomainError
from .materials import NU_MAX, NU_MIN, PartMaterialMap, assign_part_material
from .mpm import simulate
from .particles import Trajectory
from .scene import Scene

# Keep projected nu strictly inside the open interval.
_NU_PROJECTION_MARGIN = 1e-9

COORD_FIELDS = ("log_E", "nu", "log_v")


@dataclass(frozen=True)
class OptimizableParams:
    """Per-part free parameters: (log_E, nu, log_v) for each target part."""

    parts: tuple[int, ...]
    log_E: np.ndarray
    nu: np.ndarray
    log_v: np.ndarray

    def __post_init__(self) -> None:
        k = len(self.parts)
        for name in COORD_FIELDS:
            arr = getattr(self, name)
            if arr.shape != (k,):
                raise ParameterDomainError(
                    f"OptimizableParams.{name} has shape {arr.shape}, expected ({k},)"
                )

    @classmethod
    def from_materials(
        cls, materials: PartMaterialMap, parts: Sequence[int]
    ) -> "OptimizableParams":
        """Extract the free coordinates of ``parts`` from a material map.

        Viscosity must be positive for every targeted part (log-space has
        no zero); untargeted parts are unconstrained.
        """
        parts = tuple(int(p) for p in parts)
        log_E, nu, log_v = [], [], []
        for p in parts:
            m = materials.get(p)
            if m.viscosity <= 0.0:
                raise ParameterDomainError(
                    f"part {p}: viscosity must be > 0 to optimize in log-space "
                    f"(got {m.viscosity!r}); give the material a small positive value"
                )
            log_E.append(math.log(m.young_modulus))
            nu.append(m.poisson_ratio)
            log_v.append(math.log(m.viscosity))
        return cls(parts, np.array(log_E), np.array(nu), np.array(log_v))

    def apply(self, materials: PartMaterialMap) -> PartMaterialMap:
        """Bind the coordinates back into a map, re-deriving lambda and mu.

        Density (not a free coordinate) is carried over from the existing
        record of each part.
        """
        out = materials
        for i, p in enumerate(self.parts):
            base = materials.get(p)
            updated = type(base).from_elastic(
                math.exp(self.log_E[i]),
                float(self.nu[i]),
                viscosity=math.exp(self.log_v[i]),
                density=base.density,
            )
            out = assign_part_material(out, p, updated)
        return out

    def to_vector(self) -> np.ndarray:
        """Flatten as [part0: log_E, nu, log_v, part1: ...]."""
        return np.stack([self.log_E, self.nu, self.log_v], axis=1).ravel()

    @classmethod
    def from_vector(cls, parts: Sequence[int], vec: np.ndarray) -> "OptimizableParams":
        parts = tuple(int(p) for p in parts)
        mat = np.asarray(vec, dtype=np.float64).reshape(len(parts), 3)
        nu = np.clip(mat[:, 1], NU_MIN + _NU_PROJECTION_MARGIN, NU_MAX - _NU_PROJECTION_MARGIN)
        return cls(parts, mat[:, 0].copy(), nu, mat[:, 2].copy())

    def coordinate_names(self) -> list[str]:
        return [f"part{p}:{f}" for p in self.parts for f in COORD_FIELDS]


def default_eps(params: OptimizableParams, eps_log: float = 1e-2, eps_nu: float = 1e-3) -> np.ndarray:
    """Per-coordinate FD step: eps_log for log coords, eps_nu for nu."""
    eps = np.full(3 * len(params.parts), eps_log)
    eps[1::3] = eps_nu
    return eps


@dataclass(frozen=True)
class GuidanceObjective:
    """A deterministic trajectory -> loss functional."""

    evaluate: Callable[[Trajectory], float]
    descriptor: str


def trajectory_loss(sim: Trajectory, ref: Trajectory) -> float:
    """Mean squared position error over all frames and particles."""
    a = sim.positions()
    b = ref.positions()
    if a.shape != b.shape:
        raise OptimizationError(
            f"trajectory shape mismatch: simulated {a.shape} vs reference {b.shape}"
        )
    return float(np.mean((a - b) ** 2) * 3.0)  # mean over squared distance, not per-axis


def reference_matching(ref: Trajectory) -> GuidanceObjective:
    return GuidanceObjective(
        evaluate=lambda traj: trajectory_loss(traj, ref),
        descriptor="mean squared position error vs. reference trajectory",
    )


def fd_gradient(
    objective: Callable[[OptimizableParams], float],
    params: OptimizableParams,
    eps=None,
) -> np.ndarray:
    """Central-difference gradient of ``objective`` at ``params``.

    ``eps`` is a scalar or per-coordinate array; defaults to
    :func:`default_eps`.  A non-finite objective value raises, naming the
    coordinate being probed.
    """
    vec = params.to_vector()
    if eps is None:
        eps_vec = default_eps(params)
    else:
        eps_vec = np.broadcast_to(np.asarray(eps, dtype=np.float64), vec.shape).copy()
    if np.any(eps_vec <= 0.0):
        raise ParameterDomainError("fd_gradient eps must be > 0 in every coordinate")
    names = params.coordinate_names()
    grad = np.zeros_like(vec)
    for k in range(len(vec)):
        probe = vec.copy()
        probe[k] = vec[k] + eps_vec[k]
        f_plus = objective(OptimizableParams.from_vector(params.parts, probe))
        probe[k] = vec[k] - eps_vec[k]
        f_minus = objective(OptimizableParams.from_vector(params.parts, probe))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise OptimizationError(
                f"objective is non-finite when probing {names[k]} "
                f"(f+ = {f_plus!r}, f- = {f_minus!r})"
            )
        grad[k] = (f_plus - f_minus) / (2.0 * eps_vec[k])
    return grad


@dataclass(frozen=True)
class OptimizeConfig:
    """Descent settings plus the simulation horizon used per evaluation."""

    iters: int = 10
    step_size: float = 0.1
    eps_log: float = 1e-2
    eps_nu: float = 1e-3
    sim_steps: int = 50
    sim_dt: Optional[float] = None  # None: use scene.dt
    frame_stride: int = 5


def simulate_for_params(
    scene: Scene, params: OptimizableParams, config: OptimizeConfig
) -> Trajectory:
    """Simulate the scene under the materials implied by ``params``."""
    materials = params.apply(scene.materials)
    dt = config.sim_dt if config.sim_dt is not None else scene.dt
    return simulate(
        replace(scene, materials=materials),
        steps=config.sim_steps,
        dt=dt,
        frame_stride=config.frame_stride,
    )


def optimize_materials(
    scene: Scene,
    objective: GuidanceObjective,
    init: OptimizableParams,
    config: OptimizeConfig,
    callback: Optional[Callable[[int, OptimizableParams, float], None]] = None,
) -> tuple[OptimizableParams, list[float]]:
    """Fixed-step gradient descent on the free material coordinates.

    Returns the final parameters and the loss history (``iters + 1``
    entries: the initial loss, then one per update).  ``callback`` is
    invoked after recording each history entry with
    ``(iterate_index, params, loss)``.  A failed simulation aborts with the
    iterate index and the solver diagnostic.
    """
    if config.iters < 0:
        raise ParameterDomainError(f"iters must be >= 0, got {config.iters}")

    iterate = 0

    def evaluate(p: OptimizableParams) -> float:
        traj = simulate_for_params(scene, p, config)
        if traj.failure is not None:
            raise OptimizationError(
                f"iterate {iterate}: simulation failed during evaluation: {traj.failure}"
            ) from traj.failure
        return float(objective.evaluate(traj))

    eps = default_eps(init, config.eps_log, config.eps_nu)
    params = init
    history = [evaluate(params)]
    if callback is not None:
        callback(0, params, history[0])
    for iterate in range(1, config.iters + 1):
        grad = fd_gradient(evaluate, params, eps)
        vec = params.to_vector() - config.step_size * grad
        params = OptimizableParams.from_vector(params.parts, vec)
        history.append(evaluate(params))
        if callback is not None:
            callback(iterate, params, history[-1])
    return params, history
