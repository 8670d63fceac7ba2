"""Particle state containers for the point solver.

State is stored struct-of-arrays in a :class:`ParticleSet` (float64
throughout); :class:`Particle` is a scalar view for inspection and tests.
A :class:`Trajectory` is a sequence of snapshots taken every
``frame_stride`` solver steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterDomainError, SimulationError


@dataclass(frozen=True)
class Particle:
    """One material point (convenience view; the solver works on ParticleSet)."""

    position: np.ndarray        # (3,)
    velocity: np.ndarray        # (3,)
    mass: float
    volume0: float              # rest volume
    F_E: np.ndarray             # (3, 3) elastic deformation gradient
    F_N: np.ndarray             # (3, 3) viscous-branch gradient (held at identity)
    C: np.ndarray               # (3, 3) affine velocity gradient
    part: int


@dataclass
class ParticleSet:
    """Struct-of-arrays particle state.

    Invariants: mass > 0, volume0 > 0, det(F_E) > 0 for every particle;
    all arrays share the leading length.  ``check`` verifies them and
    raises with the first offending particle index.
    """

    x: np.ndarray        # (n, 3) positions
    v: np.ndarray        # (n, 3) velocities
    mass: np.ndarray     # (n,)
    volume0: np.ndarray  # (n,)
    F_E: np.ndarray      # (n, 3, 3)
    F_N: np.ndarray      # (n, 3, 3)
    C: np.ndarray        # (n, 3, 3)
    part: np.ndarray     # (n,) int64 part labels

    def __post_init__(self) -> None:
        n = len(self.x)
        shapes = {
            "x": (n, 3),
            "v": (n, 3),
            "mass": (n,),
            "volume0": (n,),
            "F_E": (n, 3, 3),
            "F_N": (n, 3, 3),
            "C": (n, 3, 3),
            "part": (n,),
        }
        for name, want in shapes.items():
            arr = getattr(self, name)
            if arr.shape != want:
                raise ParameterDomainError(
                    f"ParticleSet.{name} has shape {arr.shape}, expected {want}"
                )

    @classmethod
    def at_rest(
        cls,
        positions: np.ndarray,
        mass,
        volume0,
        part,
        velocities: Optional[np.ndarray] = None,
    ) -> "ParticleSet":
        """Build a set with identity gradients and zero affine velocity.

        ``mass``, ``volume0`` and ``part`` broadcast from scalars to the
        particle count.
        """
        x = np.atleast_2d(np.asarray(positions, dtype=np.float64))
        n = len(x)
        v = (
            np.zeros((n, 3))
            if velocities is None
            else np.array(velocities, dtype=np.float64).reshape(n, 3)
        )
        eye = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
        return cls(
            x=x.copy(),
            v=v,
            mass=np.broadcast_to(np.asarray(mass, dtype=np.float64), (n,)).copy(),
            volume0=np.broadcast_to(np.asarray(volume0, dtype=np.float64), (n,)).copy(),
            F_E=eye,
            F_N=eye.copy(),
            C=np.zeros((n, 3, 3)),
            part=np.broadcast_to(np.asarray(part, dtype=np.int64), (n,)).copy(),
        )

    @classmethod
    def empty(cls) -> "ParticleSet":
        return cls.at_rest(np.zeros((0, 3)), np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.x)

    def copy(self) -> "ParticleSet":
        return ParticleSet(
            x=self.x.copy(),
            v=self.v.copy(),
            mass=self.mass.copy(),
            volume0=self.volume0.copy(),
            F_E=self.F_E.copy(),
            F_N=self.F_N.copy(),
            C=self.C.copy(),
            part=self.part.copy(),
        )

    def select(self, which) -> "ParticleSet":
        """Subset by boolean mask or index array (fancy indexing copies)."""
        which = np.asarray(which)
        return ParticleSet(
            x=self.x[which],
            v=self.v[which],
            mass=self.mass[which],
            volume0=self.volume0[which],
            F_E=self.F_E[which],
            F_N=self.F_N[which],
            C=self.C[which],
            part=self.part[which],
        )

    def particle(self, i: int) -> Particle:
        return Particle(
            position=self.x[i].copy(),
            velocity=self.v[i].copy(),
            mass=float(self.mass[i]),
            volume0=float(self.volume0[i]),
            F_E=self.F_E[i].copy(),
            F_N=self.F_N[i].copy(),
            C=self.C[i].copy(),
            part=int(self.part[i]),
        )

    def labels(self) -> tuple[int, ...]:
        return tuple(np.unique(self.part).tolist())

    def check(self) -> None:
        """Raise SimulationError naming the first particle violating an invariant."""
        if len(self) == 0:
            return
        for name, arr in (("mass", self.mass), ("volume0", self.volume0)):
            bad = np.flatnonzero(~(arr > 0.0))
            if bad.size:
                raise SimulationError(
                    f"particle {bad[0]}: {name} must be > 0, got {arr[bad[0]]!r}"
                )
        dets = np.linalg.det(self.F_E)
        bad = np.flatnonzero(~(dets > 0.0))
        if bad.size:
            raise SimulationError(
                f"particle {bad[0]}: det(F_E) = {dets[bad[0]]!r} <= 0 (inverted element)"
            )

    @staticmethod
    def concatenate(sets: Sequence["ParticleSet"]) -> "ParticleSet":
        sets = [s for s in sets]
        if not sets:
            return ParticleSet.empty()
        return ParticleSet(
            x=np.concatenate([s.x for s in sets]),
            v=np.concatenate([s.v for s in sets]),
            mass=np.concatenate([s.mass for s in sets]),
            volume0=np.concatenate([s.volume0 for s in sets]),
            F_E=np.concatenate([s.F_E for s in sets]),
            F_N=np.concatenate([s.F_N for s in sets]),
            C=np.concatenate([s.C for s in sets]),
            part=np.concatenate([s.part for s in sets]),
        )


@dataclass
class Trajectory:
    """Snapshots of a simulation, one every ``frame_stride`` steps.

    ``frames[0]`` is the pre-step state.  If the run aborted, ``failure``
    holds the diagnostic and ``frames`` covers everything up to the abort.
    """

    frames: list[ParticleSet]
    dt: float
    frame_stride: int
    failure: Optional[SimulationError] = field(default=None)

    def __post_init__(self) -> None:
        if self.frames:
            n = len(self.frames[0])
            labels = self.frames[0].labels()
            for k, f in enumerate(self.frames):
                if len(f) != n or f.labels() != labels:
                    raise ParameterDomainError(
                        f"trajectory frame {k} changed particle count or part labels"
                    )

    def __len__(self) -> int:
        return len(self.frames)

    def times(self, t0: float = 0.0) -> np.ndarray:
        return t0 + self.dt * self.frame_stride * np.arange(len(self.frames))

    def positions(self) -> np.ndarray:
        """Stacked positions, shape (n_frames, n_particles, 3)."""
        return np.stack([f.x for f in self.frames])
