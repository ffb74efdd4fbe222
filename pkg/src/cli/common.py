from __future__ import annotations

from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional, TypeVar

import typer
from pydantic import ValidationError

from src.backends.base_backend import GenerationBackend
from src.backends.presets import parse_backend_spec, preset
from src.backends.remote_backend import RemoteBackend
from src.backends.synthetic_backend import SyntheticBackend, load_world
from src.config import RUN_CONFIG_VERSION, RunConfig, default_run_config
from src.services.classifier import DemographicClassifier, OracleClassifier, SvmClassifierPair, load_model
from src.services.logger import get_logger
from src.services.report_service import resolve_output, write_effective_config
from src.utils.canonical import to_plain
from src.utils.errors import FacebiasError, InputValidationError

logger = get_logger("cli")

F = TypeVar("F", bound=Callable[..., Any])

EXIT_INTERNAL = 1
EXIT_INVALID = 2


def handle_errors(func: F) -> F:
    """
    Maps failures to exit codes: invalid input 2, anything else 1.
    One structured error record goes to stderr.
    """

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (typer.Exit, typer.Abort):
            raise
        except (InputValidationError, ValidationError) as e:
            payload = e.to_log() if isinstance(e, FacebiasError) else {"error": str(e), "error_code": "INVALID_INPUT"}
            logger.error("Invalid input", extra={"service": "cli", "stage": func.__name__, **payload})
            raise typer.Exit(code=EXIT_INVALID) from e
        except FacebiasError as e:
            logger.error("Command failed", extra={"service": "cli", "stage": func.__name__, **e.to_log()})
            raise typer.Exit(code=EXIT_INTERNAL) from e
        except Exception as e:
            logger.error(
                "Command failed",
                extra={"service": "cli", "stage": func.__name__, "error": str(e), "error_code": "INTERNAL"},
            )
            raise typer.Exit(code=EXIT_INTERNAL) from e

    return wrapper  # type: ignore[return-value]


def _plain(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class CommandOptions:
    """
    Resolves one command's parameters.

    Precedence: CLI flag > config file > environment > built-in default.
    Every resolved value is recorded for the effective-config file.
    """

    def __init__(self, ctx: Optional[typer.Context], command: str) -> None:
        run_config = None
        if ctx is not None and isinstance(ctx.find_root().obj, RunConfig):
            run_config = ctx.find_root().obj
        self.run_config: RunConfig = run_config or default_run_config()
        self.command = command
        self.block = self.run_config.command_block(command)
        self.resolved: Dict[str, Any] = {}
        self.globals: Dict[str, Any] = {}

    def get(self, key: str, flag: Any, default: Any = None) -> Any:
        if flag is not None:
            value = flag
        elif key in self.block:
            value = self.block[key]
        else:
            value = default
        self.resolved[key] = _plain(value)
        return value

    def global_value(self, key: str, flag: Any) -> Any:
        value = flag if flag is not None else getattr(self.run_config.global_options, key)
        self.globals[key] = _plain(value)
        return value

    @property
    def output_dir(self) -> Path:
        return Path(self.globals.get("output_dir", self.run_config.global_options.output_dir))

    def effective(self) -> Dict[str, Any]:
        merged = self.run_config.global_options.model_dump()
        merged.update(self.globals)
        return {
            "version": RUN_CONFIG_VERSION,
            "global": to_plain(merged),
            "commands": {self.command: to_plain(self.resolved)},
        }

    def output(self, path: Path) -> Path:
        return resolve_output(path, self.output_dir)

    def finish(self, report_path: Path) -> None:
        """
        Writes the effective config beside the output and prints the path.
        """
        write_effective_config(report_path, self.effective())
        typer.echo(str(report_path))


def make_backend(spec: str, world: Optional[Path] = None, dim: int = 64, world_seed: int = 0) -> GenerationBackend:
    """
    "sim:<preset>", a custom world file, or "remote" (URL from the environment).
    """
    if world is not None:
        return SyntheticBackend(load_world(world))
    name = parse_backend_spec(spec)
    if name is not None:
        return SyntheticBackend(preset(name, dim=dim, seed=world_seed))
    if spec == "remote":
        return RemoteBackend()
    raise InputValidationError(
        f"unknown backend {spec!r}; use 'sim:<preset>', --world <file>, or 'remote' with FACEBIAS_BACKEND_URL"
    )


def make_classifier(race_model: Optional[Path], gender_model: Optional[Path]) -> DemographicClassifier:
    if race_model is None and gender_model is None:
        return OracleClassifier()
    if race_model is None or gender_model is None:
        raise InputValidationError("--race-model and --gender-model must be given together")
    return SvmClassifierPair(load_model(race_model), load_model(gender_model))
