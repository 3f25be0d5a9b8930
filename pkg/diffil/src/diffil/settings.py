from pathlib import Path

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Default local path: ~/.diffil/runs
_LOCAL_RUN_DIR = Path.home() / ".diffil" / "runs"


class Settings(BaseSettings):
  log_level: str = "INFO"
  # Optional DEBUG-level file sink
  log_file: Path | None = None
  # Loaded from DIFFIL_RUN_DIR; default output root for every command
  run_dir: Path = Field(
    default=_LOCAL_RUN_DIR,
    validation_alias=AliasChoices("DIFFIL_RUN_DIR", "run_dir"),
  )
  # torch intra-op threads; 1 keeps runs bit-reproducible
  num_threads: int = 1

  model_config = SettingsConfigDict(
    env_prefix="DIFFIL_",
    env_file=(".env",),
    extra="ignore",
  )


settings = Settings()
