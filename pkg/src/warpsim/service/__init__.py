"""FastAPI service exposing the simulator and harness over HTTP."""

from .app import app, create_app

__all__ = ["app", "create_app"]
