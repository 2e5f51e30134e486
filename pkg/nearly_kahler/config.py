"""Configuration module for the nearly Kahler toolkit.
Uses Pydantic Settings for environment variable management.
"""

import math
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from NK_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="NK_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO")

    # Integrator
    tol: float = Field(default=1e-10, gt=0)
    method: str = Field(default="DOP853")
    max_step: float = Field(default=math.inf, gt=0)

    # Stable forms
    class_tol: float = Field(default=1e-9, gt=0)

    # Constraint variety N
    membership_tol: float = Field(default=1e-9, gt=0)

    # Singular initial value problem
    series_order: int = Field(default=20, ge=1)
    series_switch: float = Field(default=0.05, gt=0)
    switch_fraction: float = Field(default=0.25, gt=0, le=0.5)

    # Model matching
    match_tol: float = Field(default=1e-5, gt=0)
    distinct_tol: float = Field(default=1e-4, gt=0)

    # Output
    output_dir: str = Field(default="./data/runs")

    # Worker pool (0 means one worker per core)
    jobs: int = Field(default=0, ge=0)
    seed: int = Field(default=0)


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Convenience function for accessing settings
settings = get_settings()
