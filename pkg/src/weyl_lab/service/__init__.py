"""HTTP facade over the core modules (FastAPI + pydantic)."""

from .app import create_app

__all__ = ["create_app"]
