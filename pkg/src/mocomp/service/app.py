"""HTTP facade over the pipeline: one POST endpoint per run mode.

Every endpoint takes the same body (config path, output directory,
overrides, seed) and returns the run manifest. Stage failures come back as
HTTP 400 with the failing stage and the error message; the manifest is
still written to the output directory for post-mortems.

The routing backend is a FastAPI dependency so tests can substitute a
scripted one; by default it is built from the ``MOCOMP_PLANNER_*``
environment variables (or absent, in which case planning falls back to the
rule engine).
"""

from __future__ import annotations

import json

from fastapi import Depends, FastAPI, HTTPException

from .. import __version__
from ..pipeline import MODES, PipelineConfig, run_pipeline
from .schemas import HealthResponse, RunFailure, RunRequest, RunResponse

__all__ = ["app", "create_app", "get_backend"]


def get_backend():
    """Chat backend override point; None defers to the environment."""
    return None


def _run_endpoint(mode: str):
    def endpoint(request: RunRequest, backend=Depends(get_backend)) -> RunResponse:
        pcfg = PipelineConfig(
            mode=mode,
            config_path=request.config_path,
            out_dir=request.out_dir,
            overrides=tuple(request.overrides),
            seed=request.seed,
            offline=request.offline,
        )
        status = run_pipeline(pcfg, backend=backend)
        manifest = json.loads((pcfg.out_dir / "manifest.json").read_text())
        if status != 0:
            failure = RunFailure(
                failed_stage=manifest.get("failed_stage", "unknown"),
                error=manifest.get("error", ""),
            )
            raise HTTPException(status_code=400, detail=failure.model_dump())
        return RunResponse(status="ok", out_dir=str(pcfg.out_dir), manifest=manifest)

    endpoint.__name__ = f"run_{mode}"
    endpoint.__doc__ = f"Execute the {mode} mode on a server-side config."
    return endpoint


def create_app() -> FastAPI:
    app = FastAPI(
        title="mocomp",
        version=__version__,
        description=(
            "Motion-aware composition service: scenario routing, MLS-MPM "
            "simulation, material fitting, and masked inpainting."
        ),
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    for mode in MODES:
        app.post(f"/{mode}", response_model=RunResponse)(_run_endpoint(mode))
    return app


app = create_app()
