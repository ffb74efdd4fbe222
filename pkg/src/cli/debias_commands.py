from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

import typer
from pydantic import BaseModel, ConfigDict

from src.cli.audit_commands import _enum, make_client
from src.cli.common import CommandOptions, handle_errors
from src.schemas.debias_schemas import RegulatedPrompt, RegulationWording, SamplerState, VariantMode
from src.schemas.demographics import Axis, CountTable
from src.services.debias_service import balanced_batch, load_target, regulate_prompt, sample_variants
from src.services.demographics import chi_square_gof, count_labels
from src.services.report_service import emit_report
from src.utils.errors import InputValidationError

debias_app = typer.Typer(add_completion=False, help="Target-distribution sampling and prompt regulation")


class SampleReport(BaseModel):
    mode: VariantMode
    n: int
    seed: int
    draws: List[str]
    counts: CountTable
    chi_square: Dict[str, float]
    next_state: Optional[SamplerState] = None
    model_config = ConfigDict(frozen=True)


class RegulationReport(BaseModel):
    wording: RegulationWording
    seed: int
    prompts: List[RegulatedPrompt]
    next_state: SamplerState
    model_config = ConfigDict(frozen=True)


@debias_app.command("sample")
@handle_errors
def debias_sample(
    ctx: typer.Context,
    target: Optional[str] = typer.Option(None, "--target", help="uniform or a target JSON file."),
    n: Optional[int] = typer.Option(None, "--n", help="Number of variant draws."),
    mode: Optional[str] = typer.Option(None, "--mode", help="iid or balanced."),
    position: Optional[int] = typer.Option(None, "--position", help="Resume an iid stream at this draw."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """
    Draw variant keys from a target distribution and test the fit
    """
    opts = CommandOptions(ctx, "debias_sample")
    distribution = load_target(opts.get("target", target, "uniform"))
    count = opts.get("n", n, 12_000)
    if count < 1:
        raise InputValidationError("n must be >= 1")
    run_seed = opts.global_value("seed", seed)
    draw_mode = _enum(VariantMode, opts.get("mode", mode, "iid"), "--mode")

    next_state = None
    if draw_mode is VariantMode.BALANCED:
        draws = balanced_batch(distribution, count, run_seed)
    else:
        start = SamplerState(seed=run_seed, position=opts.get("position", position, 0))
        draws, next_state = sample_variants(distribution, count, start)

    counts = count_labels(draws, Axis.CELL)
    report = SampleReport(
        mode=draw_mode,
        n=count,
        seed=run_seed,
        draws=[d.key for d in draws],
        counts=counts,
        chi_square=chi_square_gof(counts, distribution.cells)._asdict(),
        next_state=next_state,
    )
    destination = opts.output(opts.get("out", out, Path("variants.json")))
    emit_report(report, destination, opts.output_dir)
    opts.finish(destination)


@debias_app.command("regulate")
@handle_errors
def debias_regulate(
    ctx: typer.Context,
    prompt: Optional[List[str]] = typer.Option(None, "--prompt", help="Prompt to regulate; repeatable."),
    prompts_file: Optional[Path] = typer.Option(None, "--prompts-file", help="One prompt per line."),
    client: Optional[str] = typer.Option(None, "--client", help="mock or remote."),
    target: Optional[str] = typer.Option(None, "--target", help="uniform or a target JSON file."),
    wording: Optional[str] = typer.Option(None, "--wording", help="profession or person."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """
    Inject missing race and gender into prompts through a language model
    """
    opts = CommandOptions(ctx, "debias_regulate")
    texts = list(opts.get("prompt", prompt) or [])
    source = opts.get("prompts_file", prompts_file)
    if source is not None:
        try:
            lines = Path(source).read_text(encoding="utf-8").splitlines()
        except FileNotFoundError as e:
            raise InputValidationError(f"prompts file not found: {source}") from e
        texts.extend(line for line in lines if line.strip())
    if not texts:
        raise InputValidationError("give --prompt or --prompts-file")

    regulator = make_client(opts.get("client", client, "mock"))
    distribution = load_target(opts.get("target", target, "uniform"))
    phrasing = _enum(RegulationWording, opts.get("wording", wording, "profession"), "--wording")
    state = SamplerState(seed=opts.global_value("seed", seed))

    regulated = []
    for text in texts:
        result, state = regulate_prompt(text, regulator, distribution, state, phrasing)
        regulated.append(result)

    report = RegulationReport(wording=phrasing, seed=state.seed, prompts=regulated, next_state=state)
    destination = opts.output(opts.get("out", out, Path("regulated.json")))
    emit_report(report, destination, opts.output_dir)
    opts.finish(destination)
