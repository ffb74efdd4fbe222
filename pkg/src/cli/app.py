from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer

from src.cli.analysis_commands import homogenize, survey_app
from src.cli.audit_commands import audit, compare
from src.cli.common import handle_errors
from src.cli.data_commands import evaluate_command, ingest, simulate, train_command
from src.cli.debias_commands import debias_app
from src.config import load_run_config
from src.services.logger import set_log_level
from src.utils.errors import InputValidationError

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    help="Audit generative image backends for race and gender bias",
)


@app.callback()
@handle_errors
def main(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", help="Versioned JSON run configuration."),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING or ERROR."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Directory all outputs go under."),
) -> None:
    run_config = load_run_config(config)

    overrides = {}
    if log_level is not None:
        overrides["log_level"] = log_level
    if output_dir is not None:
        overrides["output_dir"] = str(output_dir)
    if overrides:
        run_config = run_config.model_copy(
            update={"global_options": run_config.global_options.model_copy(update=overrides)}
        )

    try:
        set_log_level(run_config.global_options.log_level)
    except ValueError as e:
        raise InputValidationError(str(e)) from e

    ctx.obj = run_config


app.command("ingest")(ingest)
app.command("train")(train_command)
app.command("evaluate")(evaluate_command)
app.command("simulate")(simulate)
app.command("audit")(audit)
app.command("compare")(compare)
app.command("homogenize")(homogenize)
app.add_typer(debias_app, name="debias")
app.add_typer(survey_app, name="survey")
