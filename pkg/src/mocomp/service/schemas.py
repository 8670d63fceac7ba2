"""Request/response bodies for the HTTP service."""

from __future__ import annotations

from typing import Any, Dict, List

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    """A pipeline run: which config to execute and where to write.

    Paths are interpreted on the server's filesystem, so clients should
    send absolute paths unless they share the server's working directory.
    """

    config_path: str = Field(description="Server-side path to the TOML config")
    out_dir: str = Field(description="Server-side directory for artifacts")
    overrides: List[str] = Field(
        default_factory=list,
        description="block.key=value overrides applied before validation",
    )
    seed: int = Field(default=0, description="Master seed for stochastic stages")
    offline: bool = Field(
        default=False,
        description="Force rule-based routing even when a chat backend is configured",
    )


class RunResponse(BaseModel):
    status: str
    out_dir: str
    manifest: Dict[str, Any]


class RunFailure(BaseModel):
    """Payload carried in the HTTP 400 detail when a stage fails."""

    failed_stage: str
    error: str


class HealthResponse(BaseModel):
    status: str
    version: str
