"""Particle cloud and trajectory file I/O.

Formats:

- **CSV clouds** — header ``x,y,z`` or ``x,y,z,vx,vy,vz``, one particle per
  row, decimal floats.  Floats are written with ``repr`` so a write/read
  round trip is bit-exact.
- **PLY frames** — ``binary_little_endian 1.0`` with per-vertex properties,
  in order: ``double x, y, z, vx, vy, vz`` then ``int part``.  The loader
  accepts exactly this layout (the one the exporter writes).
- **Trajectory export** — one PLY per frame named ``<base>_NNNN.ply`` plus
  ``summary.csv`` with columns
  ``frame,time,total_mass,momentum_x,momentum_y,momentum_z,com_x,com_y,com_z``.

Loaded clouds get rest volume ``V0 = 0.85 * bbox_volume / count`` (a lumped
fill-factor estimate) and a provisional unit-density mass; binding a
material during scene composition recomputes mass as ``density * V0``.
"""

from __future__ import annotations

import csv
import os
import re
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError
from .particles import ParticleSet, Trajectory

FILL_FACTOR = 0.85

PLY_DTYPE = np.dtype(
    [
        ("x", "<f8"),
        ("y", "<f8"),
        ("z", "<f8"),
        ("vx", "<f8"),
        ("vy", "<f8"),
        ("vz", "<f8"),
        ("part", "<i4"),
    ]
)

_PLY_HEADER_PROPS = [
    "property double x",
    "property double y",
    "property double z",
    "property double vx",
    "property double vy",
    "property double vz",
    "property int part",
]

SUMMARY_COLUMNS = [
    "frame",
    "time",
    "total_mass",
    "momentum_x",
    "momentum_y",
    "momentum_z",
    "com_x",
    "com_y",
    "com_z",
]


def _default_volumes(positions: np.ndarray) -> np.ndarray:
    extent = positions.max(axis=0) - positions.min(axis=0)
    volume = float(np.prod(extent))
    if volume <= 0.0:
        raise ParseError(
            f"cloud bounding box is degenerate (extent {extent.tolist()}); "
            "cannot estimate particle volumes — provide a volume0 override"
        )
    return np.full(len(positions), FILL_FACTOR * volume / len(positions))


def _finish_cloud(
    positions: np.ndarray,
    velocities: Optional[np.ndarray],
    part,
    volume0: Optional[float],
) -> ParticleSet:
    if volume0 is not None:
        v0 = np.full(len(positions), float(volume0))
    else:
        v0 = _default_volumes(positions)
    # Unit density placeholder; compose_scene re-derives mass from the material.
    return ParticleSet.at_rest(positions, mass=v0.copy(), volume0=v0, part=part,
                               velocities=velocities)


def load_cloud_csv(path, part: int = 0, volume0: Optional[float] = None) -> ParticleSet:
    """Load a CSV cloud; parse failures cite the 1-based file line."""
    rows: list[list[float]] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        cols = [c.strip().lower() for c in header]
        if cols not in (["x", "y", "z"], ["x", "y", "z", "vx", "vy", "vz"]):
            raise ParseError(
                f"{path}: line 1: header must be x,y,z or x,y,z,vx,vy,vz, got {header}"
            )
        width = len(cols)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"{path}: line {lineno}: expected {width} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: cloud contains no particles")
    data = np.asarray(rows, dtype=np.float64)
    velocities = data[:, 3:6] if data.shape[1] == 6 else None
    return _finish_cloud(data[:, :3], velocities, part, volume0)


def save_cloud_csv(path, particles: ParticleSet, include_velocity: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if include_velocity:
            writer.writerow(["x", "y", "z", "vx", "vy", "vz"])
            for x, v in zip(particles.x, particles.v):
                writer.writerow([repr(float(c)) for c in (*x, *v)])
        else:
            writer.writerow(["x", "y", "z"])
            for x in particles.x:
                writer.writerow([repr(float(c)) for c in x])


def save_cloud_ply(path, particles: ParticleSet) -> None:
    """Write one binary little-endian PLY frame (positions, velocities, parts)."""
    n = len(particles)
    header = "\n".join(
        [
            "ply",
            "format binary_little_endian 1.0",
            f"element vertex {n}",
            *_PLY_HEADER_PROPS,
            "end_header",
            "",
        ]
    )
    record = np.empty(n, dtype=PLY_DTYPE)
    record["x"], record["y"], record["z"] = particles.x.T
    record["vx"], record["vy"], record["vz"] = particles.v.T
    record["part"] = particles.part
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(record.tobytes())


def load_cloud_ply(path, part: Optional[int] = None, volume0: Optional[float] = None) -> ParticleSet:
    """Load a PLY frame written by :func:`save_cloud_ply`.

    Part labels stored in the file win; pass ``part`` only to override them.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply\n") or end < 0:
        raise ParseError(f"{path}: not a PLY file (missing header)")
    header_lines = blob[: end].decode("ascii", errors="replace").splitlines()
    body = blob[end + len(b"end_header\n"):]

    count = None
    props: list[str] = []
    for line in header_lines[1:]:
        line = line.strip()
        if line.startswith("comment") or not line:
            continue
        if line == "format binary_little_endian 1.0":
            continue
        if line.startswith("format"):
            raise ParseError(f"{path}: unsupported PLY format {line!r}")
        m = re.fullmatch(r"element vertex (\d+)", line)
        if m:
            count = int(m.group(1))
            continue
        if line.startswith("element"):
            raise ParseError(f"{path}: unsupported PLY element {line!r}")
        if line.startswith("property"):
            props.append(line)
            continue
        raise ParseError(f"{path}: unrecognized PLY header line {line!r}")
    if count is None:
        raise ParseError(f"{path}: PLY header missing 'element vertex'")
    if props != _PLY_HEADER_PROPS:
        raise ParseError(
            f"{path}: PLY properties must be exactly {_PLY_HEADER_PROPS}, got {props}"
        )
    if count == 0:
        raise ParseError(f"{path}: cloud contains no particles")
    expected = count * PLY_DTYPE.itemsize
    if len(body) < expected:
        raise ParseError(
            f"{path}: truncated PLY body ({len(body)} bytes, expected {expected})"
        )
    record = np.frombuffer(body[:expected], dtype=PLY_DTYPE)
    positions = np.stack([record["x"], record["y"], record["z"]], axis=1)
    velocities = np.stack([record["vx"], record["vy"], record["vz"]], axis=1)
    labels = record["part"].astype(np.int64) if part is None else part
    return _finish_cloud(positions.copy(), velocities.copy(), labels, volume0)


def load_particle_cloud(path, part: int = 0, volume0: Optional[float] = None) -> ParticleSet:
    """Load a cloud by extension: ``.csv`` or ``.ply``."""
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return load_cloud_csv(path, part=part, volume0=volume0)
    if suffix == ".ply":
        return load_cloud_ply(path, volume0=volume0)
    raise ParseError(f"{path}: unsupported cloud format {suffix!r} (use .csv or .ply)")


def frame_filename(base: str, index: int) -> str:
    return f"{base}_{index:04d}.ply"


def export_trajectory(trajectory: Trajectory, out_dir, base: str = "frame") -> list[str]:
    """Write per-frame PLYs plus summary.csv; returns all written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[str] = []
    times = trajectory.times()
    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for i, frame in enumerate(trajectory.frames):
            ply_path = out / frame_filename(base, i)
            save_cloud_ply(ply_path, frame)
            paths.append(str(ply_path))
            total_mass = float(frame.mass.sum())
            momentum = (frame.mass[:, None] * frame.v).sum(axis=0)
            com = (frame.mass[:, None] * frame.x).sum(axis=0) / total_mass
            writer.writerow(
                [i, repr(float(times[i])), repr(total_mass)]
                + [repr(float(c)) for c in momentum]
                + [repr(float(c)) for c in com]
            )
    paths.append(str(summary_path))
    return paths


def load_trajectory(directory, base: str = "frame") -> Trajectory:
    """Reconstruct a trajectory from an export directory.

    Frame times come from summary.csv; the stride collapses to 1 with
    ``dt`` equal to the exported frame spacing.
    """
    directory = Path(directory)
    summary = directory / "summary.csv"
    if not summary.exists():
        raise ParseError(f"{directory}: missing summary.csv")
    times: list[float] = []
    with open(summary, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SUMMARY_COLUMNS:
            raise ParseError(f"{summary}: unexpected columns {header}")
        for row in reader:
            times.append(float(row[1]))
    frames = []
    for i in range(len(times)):
        path = directory / frame_filename(base, i)
        if not path.exists():
            raise ParseError(f"{directory}: missing frame file {path.name}")
        frames.append(load_cloud_ply(path))
    if not frames:
        raise ParseError(f"{directory}: trajectory has no frames")
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    return Trajectory(frames=frames, dt=dt, frame_stride=1)


def list_frame_files(directory, base: str = "frame") -> list[str]:
    pattern = re.compile(rf"{re.escape(base)}_(\d{{4}})\.ply$")
    names = [n for n in os.listdir(directory) if pattern.fullmatch(n)]
    return [str(Path(directory) / n) for n in sorted(names)]
