"""HTTP service around the pipeline (FastAPI)."""

from .app import app, create_app, get_backend
from .schemas import HealthResponse, RunFailure, RunRequest, RunResponse

__all__ = [
    "app",
    "create_app",
    "get_backend",
    "HealthResponse",
    "RunFailure",
    "RunRequest",
    "RunResponse",
]
