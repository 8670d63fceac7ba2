"""Scene assembly: grids, boundaries, force fields, and object placement.

A :class:`Scene` bundles everything one solver step needs — particle
state, per-part materials, grid geometry, gravity, external force fields
and the boundary condition.  Scenes are immutable; stepping returns a new
one.  ``compose_scene`` inserts a placed foreground cloud into a
background scene under a fresh part label.

Axes: z is up.  The grid spans ``[0, (dims[k]-1) * spacing]`` per axis and
particles must stay at least two cells away from every face (the
"interior margin") so the quadratic interpolation stencil never touches
out-of-range nodes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import OutOfDomainError, ParseError, SceneError
from .materials import MaterialParams, PartMaterialMap, assign_part_material
from .particles import ParticleSet

logger = logging.getLogger(__name__)

# Particles must keep this many cells between themselves and every grid face.
MARGIN_CELLS = 2.0


def interior_margin_bounds(dims: Sequence[int], spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Admissible position range [lo, hi] per axis for the given grid."""
    d = np.asarray(dims, dtype=np.float64)
    lo = np.full(3, MARGIN_CELLS * spacing)
    hi = (d - 1.0 - MARGIN_CELLS) * spacing
    return lo, hi


def check_in_margin(positions: np.ndarray, dims: Sequence[int], spacing: float) -> None:
    """Raise OutOfDomainError naming the first particle outside the margin."""
    if len(positions) == 0:
        return
    lo, hi = interior_margin_bounds(dims, spacing)
    ok = np.all((positions >= lo) & (positions <= hi), axis=1)
    bad = np.flatnonzero(~ok)
    if bad.size:
        i = int(bad[0])
        raise OutOfDomainError(
            f"particle {i} at {positions[i].tolist()} is outside the grid interior "
            f"margin [{lo.tolist()}, {hi.tolist()}]"
        )


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, inclusive on both ends."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self) -> None:
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise SceneError(f"box lo {self.lo} exceeds hi {self.hi}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((points >= lo) & (points <= hi), axis=-1)


@dataclass(frozen=True)
class ForceField:
    """External acceleration field applied at grid nodes.

    ``uniform_wind`` applies ``vector`` [length/s^2] everywhere in
    ``region`` for the whole window; ``region_impulse`` is the same shape
    but conventionally used with a short window.  ``region=None`` means
    the whole domain; ``window=None`` means always active.
    """

    kind: Literal["uniform_wind", "region_impulse"]
    vector: tuple[float, float, float]
    region: Optional[Box] = None
    window: Optional[tuple[float, float]] = None

    def __post_init__(self) -> None:
        if self.kind not in ("uniform_wind", "region_impulse"):
            raise SceneError(f"unknown force field kind {self.kind!r}")
        if self.window is not None:
            t0, t1 = self.window
            if not (math.isfinite(t0) and t0 <= t1):
                raise SceneError(f"force window must satisfy t_start <= t_end, got {self.window}")

    def sample(self, points: np.ndarray, t: float) -> np.ndarray:
        """Acceleration at ``points`` (..., 3) at time ``t``."""
        points = np.asarray(points, dtype=np.float64)
        out = np.zeros_like(points)
        if self.window is not None and not (self.window[0] <= t <= self.window[1]):
            return out
        if self.region is None:
            out[...] = self.vector
        else:
            mask = self.region.contains(points)
            out[mask] = self.vector
        return out


def sample_force(field_: ForceField, x: np.ndarray, t: float) -> np.ndarray:
    """Acceleration contributed by one field at position(s) ``x``, time ``t``."""
    return field_.sample(x, t)


@dataclass(frozen=True)
class Placement:
    """Rigid placement of a foreground cloud: scale, rotate, translate, lift.

    Applied as ``y = R @ (s * x) + translation + (0, 0, drop_height)``.
    The quaternion is (w, x, y, z) and must be unit length to 1e-10.
    """

    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    uniform_scale: float = 1.0
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    drop_height: float = 0.0

    def validate(self) -> None:
        if not (self.uniform_scale > 0.0 and math.isfinite(self.uniform_scale)):
            raise SceneError(f"uniform_scale must be > 0, got {self.uniform_scale!r}")
        if self.drop_height < 0.0:
            raise SceneError(f"drop_height must be >= 0, got {self.drop_height!r}")
        norm = math.sqrt(sum(q * q for q in self.rotation))
        if abs(norm - 1.0) > 1e-10:
            raise SceneError(
                f"rotation quaternion must be unit length (|q| = {norm!r}); "
                "normalize it before building the placement"
            )

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.rotation
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def apply(self, positions: np.ndarray) -> np.ndarray:
        self.validate()
        R = self.rotation_matrix()
        out = (self.uniform_scale * np.asarray(positions, dtype=np.float64)) @ R.T
        out = out + np.asarray(self.translation)
        out[:, 2] += self.drop_height
        return out

    def apply_velocity(self, velocities: np.ndarray) -> np.ndarray:
        """Velocities transform with the linear part only."""
        R = self.rotation_matrix()
        return (self.uniform_scale * np.asarray(velocities, dtype=np.float64)) @ R.T


@dataclass(frozen=True)
class Boundary:
    """Grid boundary condition.

    The floor is the low-z face; walls are the remaining five faces.  Each
    is ``sticky`` (node velocity zeroed), ``slip`` (normal component
    zeroed), or ``none``; a condition covers ``layers`` node layers.
    Sticky wins where regions overlap.
    """

    floor: Literal["sticky", "slip", "none"] = "sticky"
    walls: Literal["sticky", "slip", "none"] = "none"
    layers: int = 3

    def __post_init__(self) -> None:
        for name, kind in (("floor", self.floor), ("walls", self.walls)):
            if kind not in ("sticky", "slip", "none"):
                raise SceneError(f"boundary {name} must be sticky|slip|none, got {kind!r}")
        if self.layers < 1:
            raise SceneError(f"boundary layers must be >= 1, got {self.layers}")


@dataclass(frozen=True)
class Scene:
    """Immutable simulation state: particles + materials + grid + forcing."""

    particles: ParticleSet
    materials: PartMaterialMap
    grid_dims: tuple[int, int, int]
    grid_spacing: float
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.8)
    boundary: Boundary = field(default_factory=Boundary)
    external_forces: tuple[ForceField, ...] = ()
    dt: float = 1e-3  # default step size; explicit dt arguments override
    time: float = 0.0

    @classmethod
    def empty(
        cls,
        grid_dims: tuple[int, int, int] = (32, 32, 32),
        grid_spacing: float = 1.0 / 32.0,
        gravity: tuple[float, float, float] = (0.0, 0.0, -9.8),
        boundary: Optional[Boundary] = None,
        external_forces: tuple[ForceField, ...] = (),
    ) -> "Scene":
        return cls(
            particles=ParticleSet.empty(),
            materials=PartMaterialMap.empty(),
            grid_dims=tuple(int(d) for d in grid_dims),
            grid_spacing=float(grid_spacing),
            gravity=tuple(float(g) for g in gravity),
            boundary=boundary if boundary is not None else Boundary(),
            external_forces=tuple(external_forces),
        )

    def domain_extent(self) -> np.ndarray:
        return (np.asarray(self.grid_dims, dtype=np.float64) - 1.0) * self.grid_spacing

    def validate(self, require_dense: bool = True) -> None:
        """Check structural invariants; raise SceneError/OutOfDomainError.

        ``require_dense=False`` skips the labels-dense-from-0 check so that
        partially composed scenes (parts arriving out of order) stay legal;
        finished scenes must pass the full check.
        """
        if any(d < 8 for d in self.grid_dims):
            raise SceneError(f"grid dims must each be >= 8, got {self.grid_dims}")
        if not (self.grid_spacing > 0.0):
            raise SceneError(f"grid spacing must be > 0, got {self.grid_spacing!r}")
        bound = self.materials.labels()
        used = self.particles.labels()
        missing = sorted(set(used) - set(bound))
        if missing:
            raise SceneError(f"parts {missing} have no bound material; bound: {list(bound)}")
        if require_dense and bound and list(bound) != list(range(len(bound))):
            raise SceneError(f"part labels must be dense from 0, got {list(bound)}")
        check_in_margin(self.particles.x, self.grid_dims, self.grid_spacing)
        extent = self.domain_extent()
        for f in self.external_forces:
            if f.region is not None:
                lo = np.asarray(f.region.lo)
                hi = np.asarray(f.region.hi)
                if np.any(hi < 0.0) or np.any(lo > extent):
                    raise SceneError(
                        f"force region [{f.region.lo}, {f.region.hi}] does not intersect "
                        f"the grid domain [0, {extent.tolist()}]"
                    )


def compose_scene(
    background: Scene,
    foreground: ParticleSet,
    placement: Placement,
    material: MaterialParams,
) -> Scene:
    """Insert a placed foreground cloud into ``background`` as a new part.

    The foreground must carry exactly one part label, unused by the
    background.  Its mass is recomputed as ``material.density * volume0``
    so the bound material, not the loader, decides inertia.  The placed
    cloud must land inside the grid interior margin.
    """
    if len(foreground) == 0:
        raise SceneError("foreground cloud is empty")
    fg_labels = foreground.labels()
    if len(fg_labels) != 1:
        raise SceneError(
            f"foreground must carry exactly one part label, got {list(fg_labels)}"
        )
    label = fg_labels[0]
    taken = set(background.particles.labels()) | set(background.materials.labels())
    if label in taken:
        raise SceneError(
            f"part label {label} is already used by the background (labels {sorted(taken)})"
        )

    placed = foreground.copy()
    placed.x = placement.apply(foreground.x)
    placed.v = placement.apply_velocity(foreground.v)
    placed.mass = material.density * placed.volume0
    try:
        check_in_margin(placed.x, background.grid_dims, background.grid_spacing)
    except OutOfDomainError as exc:
        lo = placed.x.min(axis=0).tolist()
        hi = placed.x.max(axis=0).tolist()
        raise SceneError(
            f"placed foreground extent [{lo}, {hi}] leaves the grid interior margin: {exc}"
        ) from exc

    materials = assign_part_material(background.materials, label, material)
    particles = ParticleSet.concatenate([background.particles, placed])
    scene = replace(background, particles=particles, materials=materials)
    scene.validate(require_dense=False)
    return scene


def apply_segmentation_labels(particles: ParticleSet, labels_path) -> ParticleSet:
    """Overwrite part labels from a text file (one integer per line).

    The file must contain exactly one label per particle; a count mismatch
    reports both counts.  The resulting label set is logged.
    """
    values: list[int] = []
    with open(labels_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(int(text))
            except ValueError:
                raise ParseError(
                    f"{labels_path}: line {lineno}: expected an integer part label, got {text!r}"
                ) from None
    if len(values) != len(particles):
        raise ParseError(
            f"{labels_path}: {len(values)} labels for {len(particles)} particles"
        )
    if values and min(values) < 0:
        raise ParseError(f"{labels_path}: part labels must be >= 0")
    out = particles.copy()
    out.part = np.asarray(values, dtype=np.int64)
    logger.info("segmentation labels applied: parts %s", sorted(set(values)))
    return out
