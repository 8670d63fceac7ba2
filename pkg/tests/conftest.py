"""Shared fixtures and scene-building helpers."""

from __future__ import annotations

import numpy as np
import pytest

from mocomp.materials import MaterialParams, PartMaterialMap, assign_part_material
from mocomp.particles import ParticleSet
from mocomp.scene import Boundary, Scene


def lattice(lo, hi, step) -> np.ndarray:
    """Regular point lattice covering [lo, hi] inclusive, shape (n, 3)."""
    axes = [np.arange(l, h + step * 0.5, step) for l, h in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def block_particles(lo, hi, step, part=0, density=1.0, velocities=None) -> ParticleSet:
    """Lattice block with per-particle rest volume step^3 and mass density*V0."""
    pos = lattice(lo, hi, step)
    v0 = step**3
    return ParticleSet.at_rest(
        pos, mass=density * v0, volume0=v0, part=part, velocities=velocities
    )


def single_material_scene(
    particles: ParticleSet,
    material: MaterialParams,
    dims=(32, 32, 32),
    spacing=1.0 / 32.0,
    gravity=(0.0, 0.0, 0.0),
    boundary=None,
    forces=(),
) -> Scene:
    mats = PartMaterialMap.empty()
    for label in particles.labels():
        mats = assign_part_material(mats, int(label), material)
    if not len(particles.labels()):
        mats = assign_part_material(mats, 0, material)
    scene = Scene(
        particles=particles,
        materials=mats,
        grid_dims=tuple(dims),
        grid_spacing=spacing,
        gravity=tuple(gravity),
        boundary=boundary if boundary is not None else Boundary(floor="none", walls="none"),
        external_forces=tuple(forces),
    )
    scene.validate()
    return scene


@pytest.fixture
def soft_material() -> MaterialParams:
    return MaterialParams.from_elastic(1e4, 0.3, viscosity=0.0, density=100.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
