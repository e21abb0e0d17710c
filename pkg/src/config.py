"""Toolkit configuration with pydantic-settings."""
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables."""

    model_config = SettingsConfigDict(env_file=".env", env_prefix="MKV_BISMUT_", extra="ignore")

    # Parallelism (must never change results)
    threads: int = 1

    # Reports
    output_dir: str = "runs"

    # Wasserstein diagnostics
    wp_exact_cap: int = 512  # Hungarian assignment is exact up to this N

    # Lions pairings
    lions_generic_cap: int = 4096  # O(N^2) kernels refuse larger ensembles

    # Derivatives and linear algebra
    fd_relative_step: float = 1e-5  # h_fd = step * (1 + ||xi||)
    gram_singular_threshold: float = 1e-10
    sigma_condition_limit: float = 1e12

    # App
    environment: str = "development"
    log_level: str = "INFO"

    # Sentry (error monitoring)
    sentry_dsn: str = ""  # Optional: set to a Sentry DSN to report failed runs


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
