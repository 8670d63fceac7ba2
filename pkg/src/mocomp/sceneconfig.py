"""TOML scene/pipeline configuration: grammar, overrides, scene building.

A config file describes up to four concerns, all optional except where a
subcommand needs them:

* the simulation scene — ``[grid]``, ``[boundary]``, ``[gravity]``,
  ``[material.<name>]``, ``[object.<name>]``, ``[force.<name>]``, ``[sim]``;
* the routing scenario — ``[scenario]`` (descriptions + feature tags);
* the inpainting job — ``[inpaint]`` (images or composite+mask, frames,
  steps, denoiser);
* the parameter fit — ``[optimize]`` (reference trajectory + descent
  settings).

Material blocks take physical inputs only (``young_modulus``,
``poisson_ratio``, ``viscosity``, ``density``); the Lamé parameters are
derived quantities and are rejected as keys. Every referenced file is
stat-checked at load time, relative paths resolve against the config file's
directory, and unknown keys anywhere are errors naming the block and field.

CLI ``--set block.key=value`` overrides are applied to the parsed tree
before validation; values are parsed as TOML scalars (falling back to plain
strings), so ``--set sim.dt=0.0005`` supersedes the file's value with a
float.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cloud_io import load_particle_cloud
from .errors import ConfigError, MaterialValidationError, ParseError, SceneError
from .materials import MaterialParams, PartMaterialMap
from .optimize import OptimizeConfig
from .scene import (
    Boundary,
    Box,
    ForceField,
    Placement,
    Scene,
    apply_segmentation_labels,
    compose_scene,
)

__all__ = [
    "GridSpec",
    "SimSpec",
    "ObjectSpec",
    "ScenarioSpec",
    "InpaintSpec",
    "OptimizeSpec",
    "Config",
    "parse_override",
    "load_config",
    "build_scene",
]

_FORBIDDEN_MATERIAL_KEYS = ("lame_lambda", "lame_mu", "lambda", "mu")


@dataclass(frozen=True)
class GridSpec:
    dims: Tuple[int, int, int]
    spacing: float


@dataclass(frozen=True)
class SimSpec:
    dt: float = 1e-3
    steps: int = 100
    frame_stride: int = 1


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    cloud: Path
    material: str
    label: Optional[int]
    placement: Placement
    velocity: Optional[Tuple[float, float, float]] = None
    labels_file: Optional[Path] = None
    part_materials: Dict[int, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioSpec:
    foreground: str = ""
    background: str = ""
    tags: Tuple[str, ...] = ()
    region_tags: Dict[int, Tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class InpaintSpec:
    background: Optional[Path] = None
    foreground: Optional[Path] = None
    composite: Optional[Path] = None
    mask: Optional[Path] = None
    frames: int = 8
    steps: int = 25
    denoiser: str = "identity"
    denoiser_options: Dict[str, float] = field(default_factory=dict)
    schedule_floor: float = 1e-4


@dataclass(frozen=True)
class OptimizeSpec:
    reference: Optional[Path] = None
    parts: Tuple[int, ...] = (0,)
    settings: OptimizeConfig = field(default_factory=OptimizeConfig)


@dataclass(frozen=True)
class Config:
    """Validated configuration; sections are None when absent from the file."""

    path: Path
    base_dir: Path
    grid: Optional[GridSpec] = None
    boundary: Boundary = field(default_factory=Boundary)
    gravity: Tuple[float, float, float] = (0.0, 0.0, -9.8)
    materials: Dict[str, MaterialParams] = field(default_factory=dict)
    objects: Tuple[ObjectSpec, ...] = ()
    forces: Tuple[ForceField, ...] = ()
    sim: SimSpec = field(default_factory=SimSpec)
    scenario: Optional[ScenarioSpec] = None
    inpaint: Optional[InpaintSpec] = None
    optimize: Optional[OptimizeSpec] = None


def parse_override(text: str):
    """Split one ``block.key=value`` override; value parsed as a TOML scalar."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like block.key=value")
    dotted, raw = text.split("=", 1)
    dotted = dotted.strip()
    if not dotted or "." not in dotted:
        raise ConfigError(f"override key {dotted!r} must be a dotted path like sim.dt")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return dotted.split("."), value


def _apply_overrides(tree: dict, overrides: Sequence[str]) -> dict:
    for text in overrides:
        keys, value = parse_override(text)
        node = tree
        for key in keys[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError(
                    f"override {text!r}: {key!r} is a value, not a table"
                )
            node = child
        node[keys[-1]] = value
    return tree


class _Block:
    """One TOML table with typed, consumed-key access."""

    def __init__(self, name: str, data: dict):
        self.name = name
        self.data = dict(data)

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"[{self.name}] {key}: {message}")

    def take(self, key: str, kind, default=...):
        if key not in self.data:
            if default is ...:
                raise self.error(key, "required key is missing")
            return default
        value = self.data.pop(key)
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            raise self.error(
                key, f"expected {getattr(kind, '__name__', kind)}, got {value!r}"
            )
        return value

    def take_vector(self, key: str, length: int, default=...):
        if key not in self.data:
            if default is ...:
                raise self.error(key, "required key is missing")
            return default
        value = self.data.pop(key)
        if not (
            isinstance(value, list)
            and len(value) == length
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        ):
            raise self.error(key, f"expected a list of {length} numbers, got {value!r}")
        return tuple(float(v) for v in value)

    def finish(self):
        if self.data:
            stray = sorted(self.data)
            raise ConfigError(f"[{self.name}] unknown key(s): {', '.join(stray)}")


def _resolve_path(base_dir: Path, block: _Block, key: str, value: str) -> Path:
    path = Path(value)
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise block.error(key, f"referenced file {path} does not exist")
    return path


def _parse_grid(data: dict) -> GridSpec:
    block = _Block("grid", data)
    dims = block.take("dims", list)
    if not (len(dims) == 3 and all(isinstance(d, int) for d in dims)):
        raise block.error("dims", f"expected three integers, got {dims!r}")
    spacing = block.take("spacing", float)
    block.finish()
    return GridSpec(dims=tuple(int(d) for d in dims), spacing=float(spacing))


def _parse_boundary(data: dict) -> Boundary:
    block = _Block("boundary", data)
    floor = block.take("floor", str, "sticky")
    walls = block.take("walls", str, "none")
    layers = block.take("layers", int, 3)
    block.finish()
    try:
        return Boundary(floor=floor, walls=walls, layers=layers)
    except SceneError as exc:
        raise ConfigError(f"[boundary] {exc}") from exc


def _parse_material(name: str, data: dict) -> MaterialParams:
    block = _Block(f"material.{name}", data)
    for key in _FORBIDDEN_MATERIAL_KEYS:
        if key in block.data:
            raise block.error(
                key,
                "derived Lame parameters are not accepted here; specify "
                "young_modulus and poisson_ratio instead",
            )
    young = block.take("young_modulus", float)
    poisson = block.take("poisson_ratio", float)
    viscosity = block.take("viscosity", float, 0.0)
    density = block.take("density", float, 1.0)
    block.finish()
    try:
        return MaterialParams.from_elastic(
            young, poisson, viscosity=viscosity, density=density
        )
    except MaterialValidationError as exc:
        raise ConfigError(f"[material.{name}] {exc}") from exc


def _parse_object(name: str, data: dict, base_dir: Path) -> ObjectSpec:
    block = _Block(f"object.{name}", data)
    cloud = _resolve_path(base_dir, block, "cloud", block.take("cloud", str))
    material = block.take("material", str)
    label = block.take("label", int, None)
    translate = block.take_vector("translate", 3, (0.0, 0.0, 0.0))
    scale = block.take("scale", float, 1.0)
    rotate = block.take("rotate", list, None)
    if rotate is not None:
        if not (len(rotate) == 4 and all(isinstance(v, (int, float)) for v in rotate)):
            raise block.error("rotate", f"expected a quaternion [w, x, y, z], got {rotate!r}")
        rotate = tuple(float(v) for v in rotate)
    else:
        rotate = (1.0, 0.0, 0.0, 0.0)
    drop_height = block.take("drop_height", float, 0.0)
    velocity = block.take_vector("velocity", 3, None)
    labels_value = block.take("labels_file", str, None)
    labels_file = (
        _resolve_path(base_dir, block, "labels_file", labels_value)
        if labels_value is not None
        else None
    )
    part_materials_raw = block.take("part_materials", dict, {})
    part_materials = {}
    for key, value in part_materials_raw.items():
        try:
            part_label = int(key)
        except ValueError:
            raise block.error("part_materials", f"part label {key!r} is not an integer")
        if not isinstance(value, str):
            raise block.error("part_materials", f"material name for part {key} must be a string")
        part_materials[part_label] = value
    block.finish()
    try:
        placement = Placement(
            translation=translate,
            uniform_scale=float(scale),
            rotation=rotate,
            drop_height=float(drop_height),
        )
        placement.validate()
    except SceneError as exc:
        raise ConfigError(f"[object.{name}] {exc}") from exc
    return ObjectSpec(
        name=name,
        cloud=cloud,
        material=material,
        label=label,
        placement=placement,
        velocity=velocity,
        labels_file=labels_file,
        part_materials=part_materials,
    )


def _parse_force(name: str, data: dict) -> ForceField:
    block = _Block(f"force.{name}", data)
    kind = block.take("kind", str)
    vector = block.take_vector("vector", 3)
    window = block.take_vector("window", 2, None)
    region_raw = block.take("region", dict, None)
    region = None
    if region_raw is not None:
        region_block = _Block(f"force.{name}.region", region_raw)
        lo = region_block.take_vector("lo", 3)
        hi = region_block.take_vector("hi", 3)
        region_block.finish()
        region = Box(lo=lo, hi=hi)
    block.finish()
    try:
        return ForceField(kind=kind, vector=vector, region=region, window=window)
    except SceneError as exc:
        raise ConfigError(f"[force.{name}] {exc}") from exc


def _parse_sim(data: dict) -> SimSpec:
    block = _Block("sim", data)
    dt = block.take("dt", float, 1e-3)
    steps = block.take("steps", int, 100)
    frame_stride = block.take("frame_stride", int, 1)
    block.finish()
    if dt <= 0:
        raise ConfigError(f"[sim] dt: must be > 0, got {dt}")
    if steps < 0:
        raise ConfigError(f"[sim] steps: must be >= 0, got {steps}")
    if frame_stride < 1:
        raise ConfigError(f"[sim] frame_stride: must be >= 1, got {frame_stride}")
    return SimSpec(dt=dt, steps=steps, frame_stride=frame_stride)


def _parse_scenario(data: dict) -> ScenarioSpec:
    block = _Block("scenario", data)
    foreground = block.take("foreground", str, "")
    background = block.take("background", str, "")
    tags = block.take("tags", list, [])
    if not all(isinstance(t, str) for t in tags):
        raise block.error("tags", f"expected a list of strings, got {tags!r}")
    region_tags_raw = block.take("region_tags", dict, {})
    region_tags = {}
    for key, value in region_tags_raw.items():
        try:
            index = int(key)
        except ValueError:
            raise block.error("region_tags", f"region index {key!r} is not an integer")
        if not (isinstance(value, list) and all(isinstance(v, str) for v in value)):
            raise block.error("region_tags", f"tags for region {key} must be a list of strings")
        region_tags[index] = tuple(value)
    block.finish()
    return ScenarioSpec(
        foreground=foreground,
        background=background,
        tags=tuple(tags),
        region_tags=region_tags,
    )


def _parse_inpaint(data: dict, base_dir: Path) -> InpaintSpec:
    block = _Block("inpaint", data)
    paths = {}
    for key in ("background", "foreground", "composite", "mask"):
        value = block.take(key, str, None)
        paths[key] = (
            _resolve_path(base_dir, block, key, value) if value is not None else None
        )
    frames = block.take("frames", int, 8)
    steps = block.take("steps", int, 25)
    denoiser = block.take("denoiser", str, "identity")
    options_raw = block.take("denoiser_options", dict, {})
    options = {}
    for key, value in options_raw.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise block.error("denoiser_options", f"{key} must be a number, got {value!r}")
        options[str(key)] = float(value)
    schedule_floor = block.take("schedule_floor", float, 1e-4)
    block.finish()
    if frames < 1:
        raise ConfigError(f"[inpaint] frames: must be >= 1, got {frames}")
    if steps < 1:
        raise ConfigError(f"[inpaint] steps: must be >= 1, got {steps}")
    if not 0 < schedule_floor < 1:
        raise ConfigError(
            f"[inpaint] schedule_floor: must lie in (0, 1), got {schedule_floor}"
        )
    return InpaintSpec(
        background=paths["background"],
        foreground=paths["foreground"],
        composite=paths["composite"],
        mask=paths["mask"],
        frames=frames,
        steps=steps,
        denoiser=denoiser,
        denoiser_options=options,
        schedule_floor=schedule_floor,
    )


def _parse_optimize(data: dict, base_dir: Path) -> OptimizeSpec:
    block = _Block("optimize", data)
    reference_value = block.take("reference", str, None)
    reference = None
    if reference_value is not None:
        reference = Path(reference_value)
        if not reference.is_absolute():
            reference = base_dir / reference
        if not reference.is_dir():
            raise block.error("reference", f"referenced directory {reference} does not exist")
    parts = block.take("parts", list, [0])
    if not all(isinstance(p, int) for p in parts):
        raise block.error("parts", f"expected a list of integers, got {parts!r}")
    settings = OptimizeConfig(
        iters=block.take("iters", int, 10),
        step_size=block.take("step_size", float, 0.1),
        eps_log=block.take("eps_log", float, 1e-2),
        eps_nu=block.take("eps_nu", float, 1e-3),
        sim_steps=block.take("sim_steps", int, 50),
        sim_dt=block.take("sim_dt", float, None),
        frame_stride=block.take("frame_stride", int, 5),
    )
    block.finish()
    return OptimizeSpec(reference=reference, parts=tuple(parts), settings=settings)


def load_config(path, overrides: Sequence[str] = ()) -> Config:
    """Parse and validate a config file, applying CLI overrides first."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as fh:
            tree = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        # tomllib messages carry "(at line N, column M)".
        raise ParseError(f"{path}: {exc}") from exc
    tree = _apply_overrides(tree, overrides)
    base_dir = path.parent

    known = {
        "grid",
        "boundary",
        "gravity",
        "material",
        "object",
        "force",
        "sim",
        "scenario",
        "inpaint",
        "optimize",
    }
    stray = sorted(set(tree) - known)
    if stray:
        raise ConfigError(f"unknown top-level table(s): {', '.join(stray)}")

    gravity = (0.0, 0.0, -9.8)
    if "gravity" in tree:
        block = _Block("gravity", tree["gravity"])
        gravity = block.take_vector("vector", 3)
        block.finish()

    materials = {}
    for name, data in tree.get("material", {}).items():
        if not isinstance(data, dict):
            raise ConfigError(f"[material.{name}] must be a table")
        materials[name] = _parse_material(name, data)

    objects = []
    for name, data in tree.get("object", {}).items():
        if not isinstance(data, dict):
            raise ConfigError(f"[object.{name}] must be a table")
        spec = _parse_object(name, data, base_dir)
        for material_name in [spec.material, *spec.part_materials.values()]:
            if material_name not in materials:
                raise ConfigError(
                    f"[object.{name}] material: {material_name!r} is not defined "
                    f"(have: {sorted(materials)})"
                )
        objects.append(spec)

    forces = tuple(
        _parse_force(name, data) for name, data in tree.get("force", {}).items()
    )

    config = Config(
        path=path,
        base_dir=base_dir,
        grid=_parse_grid(tree["grid"]) if "grid" in tree else None,
        boundary=_parse_boundary(tree["boundary"]) if "boundary" in tree else Boundary(),
        gravity=gravity,
        materials=materials,
        objects=tuple(objects),
        forces=forces,
        sim=_parse_sim(tree["sim"]) if "sim" in tree else SimSpec(),
        scenario=_parse_scenario(tree["scenario"]) if "scenario" in tree else None,
        inpaint=_parse_inpaint(tree["inpaint"], base_dir) if "inpaint" in tree else None,
        optimize=_parse_optimize(tree["optimize"], base_dir) if "optimize" in tree else None,
    )
    if config.objects and config.grid is None:
        raise ConfigError("[grid] is required when objects are defined")
    return config


def build_scene(config: Config) -> Scene:
    """Compose the configured objects into a validated scene.

    Objects are inserted in file order. An object without an explicit
    ``label`` takes the lowest unused one. ``labels_file`` splits an object
    into the parts named by the file; each part binds ``part_materials``
    when given, else the object's default material.
    """
    if config.grid is None:
        raise ConfigError("config has no [grid] table; cannot build a scene")
    scene = Scene.empty(
        grid_dims=config.grid.dims,
        grid_spacing=config.grid.spacing,
        gravity=config.gravity,
        boundary=config.boundary,
        external_forces=config.forces,
    )
    scene = replace(scene, dt=float(config.sim.dt))
    for spec in config.objects:
        cloud = load_particle_cloud(spec.cloud)
        if spec.velocity is not None:
            cloud.v[:] = spec.velocity
        if spec.labels_file is not None:
            cloud = apply_segmentation_labels(cloud, spec.labels_file)
            for label in cloud.labels():
                subset = cloud.select(cloud.part == label)
                material_name = spec.part_materials.get(label, spec.material)
                scene = compose_scene(
                    scene, subset, spec.placement, config.materials[material_name]
                )
        else:
            used = set(scene.materials.labels()) | set(scene.particles.labels())
            if spec.label is not None:
                label = spec.label
            else:
                label = 0
                while label in used:
                    label += 1
            cloud.part[:] = label
            scene = compose_scene(
                scene, cloud, spec.placement, config.materials[spec.material]
            )
    scene.validate(require_dense=True)
    return scene
