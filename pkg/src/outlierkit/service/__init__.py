"""Service layer: FastAPI application and its request/response models."""

from .app import ServiceSettings, app, create_app, default_cache_path

__all__ = ["ServiceSettings", "app", "create_app", "default_cache_path"]
