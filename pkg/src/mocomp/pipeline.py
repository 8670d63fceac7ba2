"""End-to-end stage glue: route a scenario, run the chosen branch, export.

Stages communicate only through files in the output directory, so each is
independently runnable and testable:

* ``plan`` writes ``decision.json``;
* the simulator branch writes ``trajectory/`` (per-frame PLYs plus
  ``summary.csv``);
* the inpainting branch writes ``composite.png``, ``mask.png``,
  ``frames/frame_NNNN.png``, ``selected.png``, and ``selection.json``;
* ``optimize`` writes ``optimized_materials.json``;
* every run writes ``manifest.json``.

The manifest carries the decision, seed, package versions, per-stage
timings, and the artifact list with stable key order. ``created_at`` and
``timings`` are the only fields that vary between identical runs; all other
manifest content and every artifact file are byte-reproducible given the
same config and seed.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import __version__
from .cloud_io import export_trajectory, load_trajectory
from .denoisers import make_denoiser
from .errors import ConfigError, MocompError
from .inpaint import NoiseSchedule, extend_mask, inpaint, score_frames
from .mpm import simulate
from .optimize import OptimizableParams, optimize_materials, reference_matching
from .planner import (
    DEFAULT_SPLIT_RATIO,
    Method,
    PlannerDecision,
    ScenarioRequest,
    backend_from_env,
    compose_intermediate,
    rule_decide,
    select_region,
    service_decide,
    split_regions,
)
from .raster import (
    image_from_latent,
    latent_from_image,
    load_image,
    load_mask,
    save_image,
    save_mask,
)
from .sceneconfig import Config, build_scene, load_config

__all__ = [
    "MODES",
    "PipelineConfig",
    "stage_plan",
    "stage_simulate",
    "stage_optimize",
    "stage_inpaint",
    "run_pipeline",
]

MODES = ("plan", "simulate", "optimize", "inpaint", "pipeline")


@dataclass(frozen=True)
class PipelineConfig:
    """One run request: which stage(s), on which config, writing where."""

    mode: str
    config_path: Path
    out_dir: Path
    overrides: Tuple[str, ...] = ()
    seed: int = 0
    offline: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "config_path", Path(self.config_path))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "overrides", tuple(self.overrides))


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _decision_payload(decision: PlannerDecision) -> dict:
    payload = {"method": decision.method.value, "rationale": decision.rationale}
    if decision.method is Method.PHYS:
        payload["segmentation_prompts"] = list(decision.segmentation_prompts)
    else:
        payload["split_ratio"] = decision.split_ratio
        payload["region_index"] = decision.region_index
        if decision.region_rect is not None:
            payload["region_rect"] = list(decision.region_rect)
    return payload


def stage_plan(
    config: Config, out_dir: Path, offline: bool = True, backend=None
) -> Tuple[PlannerDecision, dict]:
    """Produce and persist the routing decision.

    Uses the chat backend when one is supplied (or configured in the
    environment) and ``offline`` is false; otherwise the rule engine.
    """
    if config.scenario is None:
        raise ConfigError("config has no [scenario] table; cannot plan")
    scenario = config.scenario
    bg_image = None
    fg_image = None
    if config.inpaint is not None:
        if config.inpaint.background is not None:
            bg_image = load_image(config.inpaint.background)
        if config.inpaint.foreground is not None:
            fg_image = load_image(config.inpaint.foreground)
    req = ScenarioRequest(
        fg_description=scenario.foreground,
        bg_description=scenario.background,
        feature_tags=frozenset(scenario.tags),
        bg_image=bg_image,
        fg_image=fg_image,
    )
    if not offline and backend is None:
        backend = backend_from_env()
    if not offline and backend is not None:
        decision = service_decide(req, backend)
    else:
        decision = rule_decide(req, region_tags=scenario.region_tags or None)
    _write_json(out_dir / "decision.json", _decision_payload(decision))
    return decision, {"decision": "decision.json"}


def stage_simulate(config: Config, out_dir: Path) -> dict:
    """Build the configured scene, run it, export the trajectory."""
    scene = build_scene(config)
    trajectory = simulate(
        scene,
        steps=config.sim.steps,
        dt=config.sim.dt,
        frame_stride=config.sim.frame_stride,
    )
    if trajectory.failure is not None:
        raise trajectory.failure
    paths = export_trajectory(trajectory, out_dir / "trajectory")
    return {
        "trajectory_dir": "trajectory",
        "frame_count": len(trajectory.frames),
        "files": sorted(str(Path(p).relative_to(out_dir)) for p in paths),
    }


def stage_optimize(config: Config, out_dir: Path) -> dict:
    """Fit the configured parts' materials to the reference trajectory."""
    if config.optimize is None or config.optimize.reference is None:
        raise ConfigError(
            "config has no [optimize] table with a reference trajectory"
        )
    scene = build_scene(config)
    reference = load_trajectory(config.optimize.reference)
    init = OptimizableParams.from_materials(scene.materials, config.optimize.parts)
    objective = reference_matching(reference)
    best, history = optimize_materials(
        scene, objective, init, config.optimize.settings
    )
    fitted = best.apply(scene.materials)
    materials_payload = {}
    for part in config.optimize.parts:
        m = fitted.get(part)
        materials_payload[str(part)] = {
            "young_modulus": m.young_modulus,
            "poisson_ratio": m.poisson_ratio,
            "lame_lambda": m.lame_lambda,
            "lame_mu": m.lame_mu,
            "viscosity": m.viscosity,
            "density": m.density,
        }
    _write_json(
        out_dir / "optimized_materials.json",
        {
            "parts": materials_payload,
            "loss_history": history,
            "objective": objective.descriptor,
        },
    )
    return {"materials": "optimized_materials.json", "iterations": len(history) - 1}


def _centered_rect(region_rect, fg_w: int, fg_h: int) -> Tuple[int, int, int, int]:
    x0, y0, x1, y1 = region_rect
    left = x0 + (x1 - x0 - fg_w) // 2
    top = y0 + (y1 - y0 - fg_h) // 2
    return (left, top, left + fg_w, top + fg_h)


def _build_composite(config: Config, decision: Optional[PlannerDecision], out_dir: Path):
    """Resolve (composite image, mask) from config inputs.

    Precomposed ``composite``+``mask`` files win; otherwise the foreground
    is pasted into the background, centered in the decision's region (or
    the region chosen for the default split when no decision is at hand).
    """
    spec = config.inpaint
    if spec.composite is not None and spec.mask is not None:
        return load_image(spec.composite)[:, :, :3], load_mask(spec.mask)
    if spec.background is None or spec.foreground is None:
        raise ConfigError(
            "[inpaint] needs either composite+mask or background+foreground"
        )
    bg = load_image(spec.background)[:, :, :3]
    fg = load_image(spec.foreground)
    fg_h, fg_w = fg.shape[:2]
    if decision is not None and decision.region_rect is not None:
        region_rect = decision.region_rect
    elif decision is not None:
        rects = split_regions(bg.shape[1], bg.shape[0], decision.split_ratio)
        if decision.region_index >= len(rects):
            raise ConfigError(
                f"decision names region {decision.region_index}, but the split "
                f"{decision.split_ratio!r} yields only {len(rects)} regions"
            )
        region_rect = rects[decision.region_index]
    else:
        region_tags = config.scenario.region_tags if config.scenario else None
        _, region_rect = select_region(
            bg, (fg_w, fg_h), DEFAULT_SPLIT_RATIO, region_tags=region_tags or None
        )
    rect = _centered_rect(region_rect, fg_w, fg_h)
    composite = compose_intermediate(bg, fg, rect)
    return composite.image, composite.mask


def stage_inpaint(
    config: Config,
    out_dir: Path,
    seed: int,
    decision: Optional[PlannerDecision] = None,
) -> dict:
    """Generate frames over the masked composite and pick the best one."""
    if config.inpaint is None:
        raise ConfigError("config has no [inpaint] table; cannot inpaint")
    spec = config.inpaint
    image, mask = _build_composite(config, decision, out_dir)
    if image.shape[:2] != mask.shape:
        raise ConfigError(
            f"composite {image.shape[:2]} and mask {mask.shape} sizes differ"
        )
    save_image(out_dir / "composite.png", image)
    save_mask(out_dir / "mask.png", mask)

    denoiser = make_denoiser(spec.denoiser, **spec.denoiser_options)
    schedule = NoiseSchedule.linear(spec.steps, floor=spec.schedule_floor)
    latent = latent_from_image(image)
    video = inpaint(
        latent,
        mask.astype(np.float64),
        denoiser,
        schedule,
        n_frames=spec.frames,
        seed=seed,
    )
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    frame_files = []
    for i in range(spec.frames):
        name = f"frames/frame_{i:04d}.png"
        save_image(out_dir / name, image_from_latent(video[i]))
        frame_files.append(name)
    masks = extend_mask(mask.astype(np.float64), spec.frames)
    scores = score_frames(video, masks)
    selected = int(np.argmax(scores))
    save_image(out_dir / "selected.png", image_from_latent(video[selected]))
    _write_json(
        out_dir / "selection.json",
        {
            "scores": [float(s) for s in scores],
            "selected_index": selected,
            "selected_frame": frame_files[selected],
            "denoiser": denoiser.descriptor,
            "steps": spec.steps,
            "seed": seed,
        },
    )
    return {
        "composite": "composite.png",
        "mask": "mask.png",
        "frames": frame_files,
        "selected": "selected.png",
        "selection": "selection.json",
    }


def run_pipeline(pcfg: PipelineConfig, backend=None) -> int:
    """Execute the requested mode; returns a process exit status.

    Any stage error is caught, recorded in the manifest (status, failing
    stage, message), and turns into a nonzero status.
    """
    out_dir = pcfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "mode": pcfg.mode,
        "config": str(pcfg.config_path),
        "overrides": list(pcfg.overrides),
        "seed": pcfg.seed,
        "offline": pcfg.offline,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "versions": {
            "mocomp": __version__,
            "numpy": np.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
        "stages": {},
        "timings": {},
        "status": "ok",
    }
    stage = "load_config"
    try:
        config = load_config(pcfg.config_path, overrides=pcfg.overrides)
        decision = None
        if pcfg.mode in ("plan", "pipeline"):
            stage = "plan"
            started = time.perf_counter()
            decision, artifacts = stage_plan(
                config, out_dir, offline=pcfg.offline, backend=backend
            )
            manifest["stages"]["plan"] = artifacts
            manifest["stages"]["plan"]["method"] = decision.method.value
            manifest["timings"]["plan"] = time.perf_counter() - started

        if pcfg.mode == "simulate" or (
            pcfg.mode == "pipeline" and decision.method is Method.PHYS
        ):
            stage = "simulate"
            started = time.perf_counter()
            manifest["stages"]["simulate"] = stage_simulate(config, out_dir)
            manifest["timings"]["simulate"] = time.perf_counter() - started

        if pcfg.mode == "optimize":
            stage = "optimize"
            started = time.perf_counter()
            manifest["stages"]["optimize"] = stage_optimize(config, out_dir)
            manifest["timings"]["optimize"] = time.perf_counter() - started

        if pcfg.mode == "inpaint" or (
            pcfg.mode == "pipeline" and decision.method is Method.MOTION
        ):
            stage = "inpaint"
            started = time.perf_counter()
            manifest["stages"]["inpaint"] = stage_inpaint(
                config, out_dir, seed=pcfg.seed, decision=decision
            )
            manifest["timings"]["inpaint"] = time.perf_counter() - started
    except MocompError as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = str(exc)
        _write_json(out_dir / "manifest.json", manifest)
        return 1
    _write_json(out_dir / "manifest.json", manifest)
    return 0
