"""Core configuration for the CKA refinement engine."""

from functools import lru_cache
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Engine configuration settings.

    Analysis parameters (thresholds, penalties, kernels) are never read from
    here; they travel as explicit arguments. The command line only consults
    ``LOG_LEVEL``.
    """

    # Service configuration
    PROJECT_NAME: str = "cka-refine"
    VERSION: str = "0.1.0"
    API_V1_PREFIX: str = "/api/v1"
    DEBUG: bool = False

    # HTTP server
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    # Activation sets the HTTP API may read; request paths resolve under it
    DATA_ROOT: Path = Path("data")

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = True

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore"
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
