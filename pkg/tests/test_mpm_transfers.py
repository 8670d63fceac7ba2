"""Grid transfer kernels: weights, P2G, grid update, G2P.

The P2G oracle below re-derives node fields with plain scalar loops and
the interpolation-gradient surrogate written out directly, independent of
the vectorized kernel's affine-matrix formulation.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mocomp.errors import InversionError, OutOfDomainError
from mocomp.materials import MaterialParams, PartMaterialMap, assign_part_material
from mocomp.mpm import (
    Grid,
    bspline_weight_gradients,
    bspline_weights,
    grid_step,
    grid_to_particle,
    particle_to_grid,
)
from mocomp.particles import ParticleSet
from mocomp.scene import Boundary, Box, ForceField

DIMS = (16, 16, 16)
H = 1.0 / 16.0


def material_map(material: MaterialParams, labels=(0,)) -> PartMaterialMap:
    m = PartMaterialMap.empty()
    for label in labels:
        m = assign_part_material(m, label, material)
    return m


@pytest.fixture
def material() -> MaterialParams:
    return MaterialParams.from_elastic(1e3, 0.2, viscosity=0.0, density=1.0)


@pytest.fixture
def free_grid() -> Grid:
    return Grid.empty(DIMS, H, Boundary(floor="none", walls="none"))


def interior_positions(rng: np.random.Generator, n: int) -> np.ndarray:
    lo, hi = 2.0 * H, (DIMS[0] - 3.0) * H
    return rng.uniform(lo + 0.01, hi - 0.01, size=(n, 3))


class TestWeights:
    def test_particle_on_node_gets_standard_triplet(self):
        # A point exactly on a node: 1D weights are (0.125, 0.75, 0.125).
        x = np.array([[5 * H, 7 * H, 9 * H]])
        base, w = bspline_weights(x, H)
        assert base.tolist() == [[4, 6, 8]]
        np.testing.assert_allclose(w[0], np.tile([0.125, 0.75, 0.125], (3, 1)).T, atol=1e-15)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_partition_of_unity_and_gradient_sum(self, seed):
        rng = np.random.default_rng(seed)
        x = interior_positions(rng, 40)
        _, w = bspline_weights(x, H)
        dw = bspline_weight_gradients(x, H)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(dw.sum(axis=1), 0.0, atol=1e-10)

    def test_linear_reproduction(self, rng):
        # Quadratic B-splines reproduce linear fields: sum_i w_i x_i == x_p.
        x = interior_positions(rng, 25)
        base, w = bspline_weights(x, H)
        recon = np.zeros_like(x)
        for di, dj, dk in itertools.product(range(3), repeat=3):
            weight = w[:, di, 0] * w[:, dj, 1] * w[:, dk, 2]
            nodes = (base + np.array([di, dj, dk])) * H
            recon += weight[:, None] * nodes
        np.testing.assert_allclose(recon, x, atol=1e-13)


def naive_p2g(pts: ParticleSet, material: MaterialParams, dims, h, dt):
    """Scalar-loop reference P2G with the stress impulse written out directly.

    Node impulse uses the interpolation-gradient surrogate
    grad_w(i, p) = (4 / h^2) * w_ip * (x_i - x_p): each massive node gets
    w * m * (v + C d)  -  dt * (4 / h^2) * w * V0 * tau @ d.
    """
    mass = np.zeros(dims)
    mom = np.zeros(dims + (3,))
    for p in range(len(pts)):
        x, v, m = pts.x[p], pts.v[p], pts.mass[p]
        C, F = pts.C[p], pts.F_E[p]
        U, _, Vt = np.linalg.svd(F)
        R = U @ Vt
        J = np.linalg.det(F)
        tau = 2.0 * material.lame_mu * (F - R) @ F.T
        tau += material.lame_lambda * (J - 1.0) * J * np.eye(3)
        tau += material.viscosity * 0.5 * (C + C.T)
        tau = 0.5 * (tau + tau.T)
        fx = x / h
        base = np.floor(fx - 0.5).astype(int)
        f = fx - base
        w1d = np.stack([0.5 * (1.5 - f) ** 2, 0.75 - (f - 1.0) ** 2, 0.5 * (f - 0.5) ** 2])
        for i, j, k in itertools.product(range(3), repeat=3):
            wt = w1d[i, 0] * w1d[j, 1] * w1d[k, 2]
            node = base + (i, j, k)
            d = node * h - x
            mass[tuple(node)] += wt * m
            mom[tuple(node)] += wt * (m * (v + C @ d) - dt * (4.0 / h**2) * pts.volume0[p] * (tau @ d))
    return mass, mom


class TestParticleToGrid:
    def test_single_particle_on_node_mass_split(self, material, free_grid):
        m = 2.5
        pts = ParticleSet.at_rest(np.array([[5 * H, 6 * H, 7 * H]]), m, 1e-5, 0)
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-4)
        assert grid.total_mass() == pytest.approx(m, rel=1e-12)
        # Coincident node holds 0.75^3 of the mass.
        assert grid.mass[5, 6, 7] == pytest.approx(m * 0.421875, rel=1e-12)
        # Stencil corner holds 0.125^3.
        assert grid.mass[4, 5, 6] == pytest.approx(m * 0.125**3, rel=1e-12)

    def test_totals_match_particles(self, material, free_grid, rng):
        n = 50
        pts = ParticleSet.at_rest(
            interior_positions(rng, n),
            mass=rng.uniform(0.5, 2.0, n),
            volume0=np.full(n, 1e-5),
            part=np.zeros(n, dtype=np.int64),
            velocities=rng.standard_normal((n, 3)),
        )
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-4)
        assert grid.total_mass() == pytest.approx(pts.mass.sum(), rel=1e-10)
        np.testing.assert_allclose(
            grid.total_momentum(),
            (pts.mass[:, None] * pts.v).sum(axis=0),
            rtol=1e-10,
            atol=1e-13,
        )

    def test_stressed_state_still_conserves_momentum(self, material, free_grid, rng):
        # Internal stress impulses cancel in the total (sum_i w d = 0).
        n = 30
        pts = ParticleSet.at_rest(
            interior_positions(rng, n),
            mass=1.0,
            volume0=1e-5,
            part=0,
            velocities=rng.standard_normal((n, 3)),
        )
        pts.F_E = np.eye(3) + 0.05 * rng.standard_normal((n, 3, 3))
        pts.C = rng.standard_normal((n, 3, 3))
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-4)
        total_mv = (pts.mass[:, None] * pts.v).sum(axis=0)
        total_affine = np.einsum("n,nij->ij", pts.mass, pts.C)
        scale = np.abs(total_mv).max() + np.abs(total_affine).max() + 1.0
        np.testing.assert_allclose(grid.total_momentum(), total_mv, atol=1e-10 * scale)

    def test_matches_naive_reference(self, material, free_grid, rng):
        n = 12
        dt = 2e-4
        pts = ParticleSet.at_rest(
            interior_positions(rng, n),
            mass=rng.uniform(0.5, 1.5, n),
            volume0=rng.uniform(0.5e-5, 2e-5, n),
            part=np.zeros(n, dtype=np.int64),
            velocities=rng.standard_normal((n, 3)),
        )
        pts.F_E = np.eye(3) + 0.08 * rng.standard_normal((n, 3, 3))
        pts.C = 0.5 * rng.standard_normal((n, 3, 3))
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=dt)
        ref_mass, ref_mom = naive_p2g(pts, material, DIMS, H, dt)
        np.testing.assert_allclose(grid.mass, ref_mass, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(grid.momentum, ref_mom, rtol=1e-12, atol=1e-13)

    def test_mirror_symmetry(self, material, free_grid):
        # Two particles mirrored about the x = 8h plane with mirrored
        # velocities produce mirrored fields.
        xc = 8 * H
        off = 0.37 * H
        pts = ParticleSet.at_rest(
            np.array([[xc - off, 7 * H, 7 * H], [xc + off, 7 * H, 7 * H]]),
            mass=1.0,
            volume0=1e-5,
            part=0,
            velocities=np.array([[1.0, 0.5, 0.0], [-1.0, 0.5, 0.0]]),
        )
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-4)
        flipped_mass = grid.mass[::-1]
        np.testing.assert_allclose(grid.mass, np.roll(flipped_mass, 17, axis=0), atol=1e-15)
        mom_x = grid.momentum[..., 0]
        np.testing.assert_allclose(mom_x, -np.roll(mom_x[::-1], 17, axis=0), atol=1e-14)

    def test_out_of_margin_names_particle(self, material, free_grid):
        pts = ParticleSet.at_rest(
            np.array([[5 * H, 5 * H, 5 * H], [0.5 * H, 5 * H, 5 * H]]), 1.0, 1e-5, 0
        )
        with pytest.raises(OutOfDomainError, match="particle 1"):
            particle_to_grid(pts, free_grid, material_map(material), dt=1e-4)


class TestGridStep:
    def test_gravity_increments_active_nodes(self, material, free_grid, rng):
        pts = ParticleSet.at_rest(interior_positions(rng, 5), 1.0, 1e-5, 0)
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-3)
        g = (0.0, 0.0, -9.8)
        stepped = grid_step(grid, dt=1e-3, gravity=g)
        active = grid.mass > 1e-12
        base_v = grid.momentum[active] / grid.mass[active, None]
        delta = stepped.velocity[active] - base_v
        np.testing.assert_allclose(delta, np.tile(np.array(g) * 1e-3, (len(delta), 1)), atol=1e-15)
        assert np.all(stepped.velocity[~active] == 0.0)

    def test_sticky_floor_zeroes_velocity(self, material):
        grid = Grid.empty(DIMS, H, Boundary(floor="sticky", walls="none", layers=3))
        pts = ParticleSet.at_rest(
            np.array([[8 * H, 8 * H, 2.2 * H]]), 1.0, 1e-5, 0,
            velocities=np.array([[0.0, 0.0, -1.0]]),
        )
        grid = particle_to_grid(pts, grid, material_map(material), dt=1e-4)
        stepped = grid_step(grid, dt=1e-4, gravity=(0, 0, -9.8))
        assert np.all(stepped.velocity[:, :, :3] == 0.0)
        # Above the floor layers, motion survives.
        assert np.any(stepped.velocity[:, :, 3:] != 0.0)

    def test_slip_wall_removes_normal_component_only(self, material):
        grid = Grid.empty(DIMS, H, Boundary(floor="none", walls="slip", layers=3))
        pts = ParticleSet.at_rest(
            np.array([[2.2 * H, 8 * H, 8 * H]]), 1.0, 1e-5, 0,
            velocities=np.array([[1.0, 2.0, 0.0]]),
        )
        grid = particle_to_grid(pts, grid, material_map(material), dt=1e-4)
        stepped = grid_step(grid, dt=1e-4, gravity=(0, 0, 0))
        active_low_x = (grid.mass > 1e-12) & (np.arange(DIMS[0])[:, None, None] < 3)
        assert np.any(active_low_x)
        assert np.all(stepped.velocity[active_low_x][:, 0] == 0.0)
        tangential = stepped.velocity[grid.mass > 1e-12][:, 1]
        assert np.all(tangential > 0.0)

    def test_wind_field_respects_region_and_window(self, material, free_grid, rng):
        pts = ParticleSet.at_rest(interior_positions(rng, 8), 1.0, 1e-5, 0)
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-3)
        wind = ForceField(
            kind="uniform_wind",
            vector=(5.0, 0.0, 0.0),
            region=Box((0.0, 0.0, 0.0), (1.0, 1.0, 0.5)),
            window=(0.0, 1.0),
        )
        inside = grid_step(grid, 1e-3, (0, 0, 0), forces=(wind,), time=0.5)
        outside = grid_step(grid, 1e-3, (0, 0, 0), forces=(wind,), time=2.0)
        active = grid.mass > 1e-12
        pos = grid.node_positions()
        in_region = active & (pos[..., 2] <= 0.5)
        base = grid.momentum[in_region] / grid.mass[in_region, None]
        np.testing.assert_allclose(
            inside.velocity[in_region][:, 0] - base[:, 0], 5e-3, atol=1e-15
        )
        np.testing.assert_allclose(
            outside.velocity[active],
            grid.momentum[active] / grid.mass[active, None],
            atol=1e-15,
        )


class TestGridToParticle:
    def test_uniform_velocity_field(self, material, free_grid, rng):
        pts = ParticleSet.at_rest(interior_positions(rng, 10), 1.0, 1e-5, 0)
        u = np.array([0.3, -0.2, 0.1])
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-3)
        grid.velocity[...] = u
        out = grid_to_particle(grid, pts, dt=1e-3)
        np.testing.assert_allclose(out.v, np.tile(u, (10, 1)), atol=1e-13)
        np.testing.assert_allclose(out.C, 0.0, atol=1e-10)
        np.testing.assert_allclose(out.x, pts.x + 1e-3 * u, atol=1e-15)
        np.testing.assert_allclose(out.F_E, pts.F_E, atol=1e-12)

    def test_linear_field_recovers_gradient(self, material, free_grid, rng):
        pts = ParticleSet.at_rest(interior_positions(rng, 10), 1.0, 1e-5, 0)
        A = np.array([[0.0, 0.4, 0.0], [-0.4, 0.0, 0.2], [0.1, 0.0, -0.3]])
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-4)
        pos = grid.node_positions()
        grid.velocity = pos @ A.T
        out = grid_to_particle(grid, pts, dt=1e-4)
        for p in range(10):
            np.testing.assert_allclose(out.C[p], A, atol=1e-8)
            np.testing.assert_allclose(out.v[p], A @ pts.x[p], atol=1e-10)

    def test_zero_velocities_fixed_point(self, material, free_grid, rng):
        pts = ParticleSet.at_rest(interior_positions(rng, 6), 1.0, 1e-5, 0)
        pts.F_E = np.eye(3) + 0.1 * np.ones((6, 3, 3)) * 0.01
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=1e-4)
        grid.velocity[...] = 0.0
        out = grid_to_particle(grid, pts, dt=1e-4)
        np.testing.assert_array_equal(out.x, pts.x)
        np.testing.assert_array_equal(out.F_E, pts.F_E)
        np.testing.assert_array_equal(out.v, np.zeros((6, 3)))

    def test_inversion_names_particle(self, material, free_grid):
        dt = 1e-3
        pts = ParticleSet.at_rest(np.array([[8 * H, 8 * H, 8 * H]]), 1.0, 1e-5, 0)
        grid = particle_to_grid(pts, free_grid, material_map(material), dt=dt)
        # Velocity field v(x) = -(x - x0)/dt collapses F to zero determinant.
        pos = grid.node_positions()
        grid.velocity = -(pos - pts.x[0]) / dt
        with pytest.raises(InversionError, match="particle 0"):
            grid_to_particle(grid, pts, dt=dt)
