import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class SurvShapSettings(BaseSettings):
    """Runtime settings read from the environment or a .env file"""

    model_config = SettingsConfigDict(env_file=".env", env_prefix="SURVSHAP_", extra="ignore")

    log_level: str = Field(default="INFO")
    threads: int = Field(
        default_factory=lambda: os.cpu_count() or 1,
        description="parallel workers, the number of available cores by default",
        ge=1,
    )
    sentry_dsn: str | None = Field(
        default=None, description="error and usage reporting is disabled when unset"
    )
    usage_logging: bool = Field(default=True)
