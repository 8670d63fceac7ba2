"""Moving least squares material point solver (explicit, single step scheme).

One step is the classic three-phase cycle on a fresh background grid:

1. ``particle_to_grid`` — scatter mass and momentum with quadratic B-spline
   weights.  The stress contribution is *fused* into the momentum scatter:
   each particle adds ``w * (m v + A d)`` per node, where
   ``A = m C - dt * (4 / h^2) * V0 * tau`` and ``d`` is the node-minus-
   particle offset.  ``4 / h^2`` is the inverse inertia of the quadratic
   spline, which also appears in the affine-velocity reconstruction.
2. ``grid_step`` — convert momentum to velocity on nodes carrying mass
   (> MASS_EPSILON), add gravity and external accelerations, apply the
   boundary condition.
3. ``grid_to_particle`` — gather the new velocity and its affine gradient
   C, advect positions, and update ``F_E <- (I + dt C) F_E``.  ``F_N``
   stays at identity (the viscous branch reads the current C only).

Scatter order is fixed (single-threaded ``np.bincount`` per stencil
offset), so identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .constitutive import kirchhoff_stress_batch
from .errors import InversionError, SimulationError, TimestepError
from .materials import PartMaterialMap
from .particles import ParticleSet, Trajectory
from .scene import Boundary, Scene, check_in_margin

# Nodes with mass at or below this carry no velocity (they are inactive).
MASS_EPSILON = 1e-12

# Stability safety factor: dt <= CFL_FACTOR * h / max(|v| + c).
CFL_FACTOR = 0.4


@dataclass
class Grid:
    """Background grid: mass, momentum, velocity plus boundary masks.

    Node (i, j, k) sits at ``(i, j, k) * spacing``.  ``sticky`` marks nodes
    whose velocity is zeroed; ``slip_axes[..., a]`` marks nodes whose
    component ``a`` is zeroed.
    """

    dims: tuple[int, int, int]
    spacing: float
    mass: np.ndarray        # (nx, ny, nz)
    momentum: np.ndarray    # (nx, ny, nz, 3)
    velocity: np.ndarray    # (nx, ny, nz, 3)
    sticky: np.ndarray      # (nx, ny, nz) bool
    slip_axes: np.ndarray   # (nx, ny, nz, 3) bool

    @classmethod
    def empty(
        cls, dims: tuple[int, int, int], spacing: float, boundary: Optional[Boundary] = None
    ) -> "Grid":
        dims = tuple(int(d) for d in dims)
        boundary = boundary if boundary is not None else Boundary()
        sticky = np.zeros(dims, dtype=bool)
        slip = np.zeros(dims + (3,), dtype=bool)
        n = boundary.layers
        # faces: (axis, side) with side 0 = low, 1 = high.  Floor is low-z.
        faces = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 1)]
        for axis, side in faces:
            _mark_face(boundary.walls, sticky, slip, axis, side, n)
        _mark_face(boundary.floor, sticky, slip, 2, 0, n)
        return cls(
            dims=dims,
            spacing=float(spacing),
            mass=np.zeros(dims),
            momentum=np.zeros(dims + (3,)),
            velocity=np.zeros(dims + (3,)),
            sticky=sticky,
            slip_axes=slip,
        )

    def node_positions(self) -> np.ndarray:
        """(nx, ny, nz, 3) array of node coordinates."""
        axes = [np.arange(d) * self.spacing for d in self.dims]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def total_mass(self) -> float:
        return float(self.mass.sum())

    def total_momentum(self) -> np.ndarray:
        return self.momentum.reshape(-1, 3).sum(axis=0)


def _mark_face(kind: str, sticky: np.ndarray, slip: np.ndarray, axis: int, side: int, n: int) -> None:
    if kind == "none":
        return
    sel: list = [slice(None)] * 3
    sel[axis] = slice(0, n) if side == 0 else slice(-n, None)
    if kind == "sticky":
        sticky[tuple(sel)] = True
    else:  # slip: zero the face-normal component
        slip[tuple(sel) + (axis,)] = True


def bspline_weights(positions: np.ndarray, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic B-spline stencil for each position.

    Returns ``(base, w)``: ``base`` (n, 3) is the lowest node index of each
    particle's 3x3x3 stencil, and ``w`` (n, 3, 3) holds the three 1D
    weights per axis (``w[:, o, a]`` = weight of offset ``o`` on axis
    ``a``).  The three weights sum to 1 per axis.
    """
    fx = np.asarray(positions, dtype=np.float64) / spacing
    base = np.floor(fx - 0.5).astype(np.int64)
    f = fx - base  # in [0.5, 1.5]
    w = np.empty((len(fx), 3, 3))
    w[:, 0, :] = 0.5 * (1.5 - f) ** 2
    w[:, 1, :] = 0.75 - (f - 1.0) ** 2
    w[:, 2, :] = 0.5 * (f - 0.5) ** 2
    return base, w


def bspline_weight_gradients(positions: np.ndarray, spacing: float) -> np.ndarray:
    """d(weight)/d(position) per axis: (n, 3, 3) array, offset x axis."""
    fx = np.asarray(positions, dtype=np.float64) / spacing
    base = np.floor(fx - 0.5).astype(np.int64)
    f = fx - base
    dw = np.empty((len(fx), 3, 3))
    dw[:, 0, :] = -(1.5 - f)
    dw[:, 1, :] = -2.0 * (f - 1.0)
    dw[:, 2, :] = f - 0.5
    return dw / spacing


def particle_to_grid(
    particles: ParticleSet,
    grid: Grid,
    materials: PartMaterialMap,
    dt: float,
) -> Grid:
    """Scatter particle mass and stress-augmented momentum onto ``grid``.

    Returns a new grid (same geometry/boundary) with mass and momentum
    fields filled; velocity is left zero until ``grid_step``.  Particles
    must sit strictly inside the interior margin.
    """
    out = Grid(
        dims=grid.dims,
        spacing=grid.spacing,
        mass=np.zeros(grid.dims),
        momentum=np.zeros(grid.dims + (3,)),
        velocity=np.zeros(grid.dims + (3,)),
        sticky=grid.sticky,
        slip_axes=grid.slip_axes,
    )
    n = len(particles)
    if n == 0:
        return out
    check_in_margin(particles.x, grid.dims, grid.spacing)

    h = grid.spacing
    lam, mu, visc, _ = materials.field_arrays(particles.part)
    tau = kirchhoff_stress_batch(particles.F_E, particles.F_N, particles.C, lam, mu, visc)

    # A = m C - dt * (4 / h^2) * V0 * tau  (fused stress impulse)
    affine = particles.mass[:, None, None] * particles.C
    affine -= (dt * 4.0 / h**2 * particles.volume0)[:, None, None] * tau

    base, w = bspline_weights(particles.x, h)
    mv = particles.mass[:, None] * particles.v
    nx, ny, nz = grid.dims
    ncell = nx * ny * nz
    mass_flat = np.zeros(ncell)
    mom_flat = np.zeros((ncell, 3))

    for di, dj, dk in itertools.product(range(3), repeat=3):
        weight = w[:, di, 0] * w[:, dj, 1] * w[:, dk, 2]
        nodes = base + np.array([di, dj, dk])
        dpos = nodes * h - particles.x
        contrib = weight[:, None] * (mv + np.einsum("nij,nj->ni", affine, dpos))
        flat = (nodes[:, 0] * ny + nodes[:, 1]) * nz + nodes[:, 2]
        mass_flat += np.bincount(flat, weights=weight * particles.mass, minlength=ncell)
        for c in range(3):
            mom_flat[:, c] += np.bincount(flat, weights=contrib[:, c], minlength=ncell)

    out.mass = mass_flat.reshape(grid.dims)
    out.momentum = mom_flat.reshape(grid.dims + (3,))
    return out


def grid_step(
    grid: Grid,
    dt: float,
    gravity,
    forces=(),
    time: float = 0.0,
) -> Grid:
    """Momentum -> velocity on active nodes, plus body forces and boundaries.

    Active nodes are those with mass > MASS_EPSILON; others keep zero
    velocity.  Gravity and each force field contribute accelerations.
    Sticky nodes are zeroed; slip nodes lose their face-normal component.
    """
    velocity = np.zeros_like(grid.velocity)
    active = grid.mass > MASS_EPSILON
    velocity[active] = grid.momentum[active] / grid.mass[active, None]

    accel = np.asarray(gravity, dtype=np.float64).copy()
    if forces:
        pos = grid.node_positions()
        total = np.broadcast_to(accel, pos.shape).copy()
        for f in forces:
            total += f.sample(pos, time)
        velocity[active] += dt * total[active]
    else:
        velocity[active] += dt * accel

    velocity[grid.sticky] = 0.0
    velocity[grid.slip_axes] = 0.0
    return replace(grid, velocity=velocity)


def grid_to_particle(
    grid: Grid,
    particles: ParticleSet,
    dt: float,
    materials: Optional[PartMaterialMap] = None,
) -> ParticleSet:
    """Gather node velocities back to particles and advect.

    Rebuilds the affine gradient ``C = (4 / h^2) sum_i w_i v_i d_i^T``,
    moves positions by ``dt * v``, and updates ``F_E`` by
    ``(I + dt C) F_E``.  ``materials`` is accepted for a future
    finite-viscous-strain update of ``F_N``; the current rule keeps
    ``F_N`` at identity.  Raises InversionError if any updated ``F_E``
    loses positive determinant.
    """
    n = len(particles)
    out = particles.copy()
    if n == 0:
        return out
    h = grid.spacing
    base, w = bspline_weights(particles.x, h)
    nx, ny, nz = grid.dims
    vel_flat = grid.velocity.reshape(-1, 3)

    v_new = np.zeros((n, 3))
    B = np.zeros((n, 3, 3))
    for di, dj, dk in itertools.product(range(3), repeat=3):
        weight = w[:, di, 0] * w[:, dj, 1] * w[:, dk, 2]
        nodes = base + np.array([di, dj, dk])
        dpos = nodes * h - particles.x
        flat = (nodes[:, 0] * ny + nodes[:, 1]) * nz + nodes[:, 2]
        v_node = vel_flat[flat]
        v_new += weight[:, None] * v_node
        B += weight[:, None, None] * (v_node[:, :, None] @ dpos[:, None, :])

    C_new = (4.0 / h**2) * B
    F_new = (np.eye(3) + dt * C_new) @ particles.F_E
    dets = np.linalg.det(F_new)
    bad = np.flatnonzero(~(dets > 0.0))
    if bad.size:
        raise InversionError(
            f"particle {bad[0]}: det(F_E) = {dets[bad[0]]!r} <= 0 after velocity update "
            f"(dt = {dt!r})"
        )

    out.v = v_new
    out.C = C_new
    out.x = particles.x + dt * v_new
    out.F_E = F_new
    return out


def max_signal_speed(particles: ParticleSet, materials: PartMaterialMap) -> float:
    """max over particles of |v| + c, with c = sqrt((lambda + 2 mu) / rho)."""
    if len(particles) == 0:
        return 0.0
    lam, mu, _, rho = materials.field_arrays(particles.part)
    c = np.sqrt((lam + 2.0 * mu) / rho)
    speed = np.linalg.norm(particles.v, axis=1)
    return float(np.max(speed + c))


def check_timestep(scene: Scene, dt: float) -> None:
    """Enforce dt <= CFL_FACTOR * h / max(|v| + c); raise TimestepError."""
    if dt <= 0.0:
        raise TimestepError(f"dt must be > 0, got {dt!r}")
    signal = max_signal_speed(scene.particles, scene.materials)
    if signal == 0.0:
        return
    dt_max = CFL_FACTOR * scene.grid_spacing / signal
    if dt > dt_max:
        raise TimestepError(
            f"dt = {dt!r} exceeds the stability bound {dt_max!r} "
            f"(CFL {CFL_FACTOR} * h {scene.grid_spacing} / signal speed {signal!r})"
        )


def mpm_step(scene: Scene, dt: float) -> Scene:
    """Advance the scene by one step; returns the evolved scene."""
    check_timestep(scene, dt)
    if len(scene.particles) == 0:
        return replace(scene, time=scene.time + dt)
    grid = Grid.empty(scene.grid_dims, scene.grid_spacing, scene.boundary)
    grid = particle_to_grid(scene.particles, grid, scene.materials, dt)
    grid = grid_step(grid, dt, scene.gravity, scene.external_forces, scene.time)
    particles = grid_to_particle(grid, scene.particles, dt, scene.materials)
    check_in_margin(particles.x, scene.grid_dims, scene.grid_spacing)
    return replace(scene, particles=particles, time=scene.time + dt)


def simulate(scene: Scene, steps: int, dt: float, frame_stride: int = 1) -> Trajectory:
    """Run ``steps`` solver steps, snapshotting every ``frame_stride`` steps.

    ``frames[0]`` is always the initial state; ``steps=0`` returns just
    that.  A simulation failure (inversion, escape, timestep) stops the
    run; the partial trajectory is returned with ``failure`` set.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if frame_stride < 1:
        raise ValueError(f"frame_stride must be >= 1, got {frame_stride}")
    frames = [scene.particles.copy()]
    failure: Optional[SimulationError] = None
    current = scene
    for step in range(1, steps + 1):
        try:
            current = mpm_step(current, dt)
        except SimulationError as exc:
            failure = exc
            break
        if step % frame_stride == 0:
            frames.append(current.particles.copy())
    return Trajectory(frames=frames, dt=dt, frame_stride=frame_stride, failure=failure)
