"""
rnest - Configuration Management
--------------------------------
Settings loaded from the environment (READ_* variables) or a local .env file.
"""

from pathlib import Path

import structlog
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

log = structlog.get_logger(__name__)


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="READ_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = Field("rnest", description="Name used in log output")
    log_level: str = Field("INFO", description="Minimum log level")
    log_json: bool = Field(False, description="Render log events as JSON lines")

    # Experiment defaults
    default_seed: int = Field(20240101, description="Master seed when none is given")
    default_workers: int = Field(1, ge=1, description="Worker processes for repetitions")
    output_dir: Path = Field(Path("results"), description="Directory for CSV/JSON artifacts")
    adaptive_batch: int = Field(1000, ge=1, description="Repetitions between stopping checks")
    confidence: float = Field(0.95, gt=0.0, lt=1.0, description="Default confidence level")


def get_settings() -> Settings:
    """Get settings, falling back to the defaults when the environment is malformed."""
    try:
        return Settings()
    except ValidationError as e:
        log.warning("settings_invalid", error=str(e), fallback="defaults")
        return Settings.model_construct()
