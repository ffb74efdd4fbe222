from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.utils.errors import InputValidationError

RUN_CONFIG_VERSION = 1


class Settings(BaseSettings):
    """
    Environment-sourced configuration.

    Remote endpoints and credentials live here only; the CLI never
    accepts them as flags.
    """

    # Remote generation backend
    FACEBIAS_BACKEND_URL: Optional[str] = Field(
        None, description="Base URL of a remote generation backend"
    )
    FACEBIAS_HTTP_TIMEOUT: float = Field(60.0, description="HTTP timeout in seconds")

    # Language model (prompt regulator)
    FACEBIAS_LLM_API_KEY: Optional[str] = Field(None, description="API key for LLM provider")
    FACEBIAS_LLM_BASE_URL: Optional[str] = Field(None, description="Chat-completion endpoint")
    FACEBIAS_LLM_MODEL: str = Field("gpt-4", description="Chat-completion model name")

    # Runtime defaults
    FACEBIAS_LOG_LEVEL: str = Field("INFO", description="Log level for stderr JSON logs")
    FACEBIAS_PARALLELISM: int = Field(1, ge=1, description="Concurrent backend requests")
    FACEBIAS_OUTPUT_DIR: str = Field(".", description="Directory all outputs are written under")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


@lru_cache
def get_settings() -> Settings:
    """
    Returns a cached Settings instance.
    """
    return Settings()


class GlobalOptions(BaseModel):
    seed: int = 0
    parallelism: int = Field(1, ge=1)
    output_dir: str = "."
    log_level: str = "INFO"
    model_config = ConfigDict(extra="forbid")


class RunConfig(BaseModel):
    """
    Versioned JSON run configuration.

    Precedence: CLI flag > config file > environment > default.
    Command blocks are free-form parameter mappings keyed by subcommand name.
    """

    version: Literal[1] = RUN_CONFIG_VERSION
    global_options: GlobalOptions = Field(default_factory=GlobalOptions, alias="global")
    commands: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    def command_block(self, name: str) -> Dict[str, Any]:
        return dict(self.commands.get(name, {}))


def default_run_config() -> RunConfig:
    settings = get_settings()
    return RunConfig(
        global_options=GlobalOptions(
            parallelism=settings.FACEBIAS_PARALLELISM,
            output_dir=settings.FACEBIAS_OUTPUT_DIR,
            log_level=settings.FACEBIAS_LOG_LEVEL,
        )
    )


def load_run_config(path: Optional[Path]) -> RunConfig:
    """
    Loads a run-config file, falling back to environment defaults.
    """
    if path is None:
        return default_run_config()

    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InputValidationError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InputValidationError(f"config file is not valid JSON: {e}") from e

    if not isinstance(raw, dict):
        raise InputValidationError("config file must contain a JSON object")

    if raw.get("version") != RUN_CONFIG_VERSION:
        raise InputValidationError(
            f"unsupported config version {raw.get('version')!r}; expected {RUN_CONFIG_VERSION}"
        )

    base = default_run_config().global_options.model_dump()
    base.update(raw.get("global", {}))
    raw["global"] = base

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise InputValidationError(f"invalid config file: {e}") from e
