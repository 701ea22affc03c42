"""
Environment-driven runtime settings.

Values come from ``LICALIB_*`` variables or a local ``.env`` file and
only affect how the toolkit runs, never what it computes.
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    """Process-level settings for the command-line tool."""
    log_level: str = Field(default="INFO", description="Root logger level")
    threads: int = Field(default=1, ge=1, description="Default worker cap")
    output_dir: str = Field(default="out", description="Default output directory")

    model_config = SettingsConfigDict(
        env_prefix="LICALIB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )


@lru_cache(maxsize=1)
def get_settings() -> RuntimeSettings:
    """Cached settings instance."""
    return RuntimeSettings()
