from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError

from src.agents.base_agent import LanguageModelClient
from src.agents.remote_agent import RemoteChatClient
from src.agents.rule_based_agent import RuleBasedMock
from src.cli.common import CommandOptions, handle_errors, make_backend, make_classifier
from src.schemas.audit_schemas import AuditReport
from src.schemas.debias_schemas import RegulationWording, VariantMode, VariantPlan
from src.services.audit_service import (
    DEFAULT_BATCH_SIZE,
    RegulatorConfig,
    compare_backends,
    comparison_rows,
    run_audit,
    standard_campaign,
)
from src.services.debias_service import load_target
from src.services.report_service import audit_rows, emit_report
from src.utils.errors import InputValidationError


def make_client(name: str) -> LanguageModelClient:
    if name == "mock":
        return RuleBasedMock()
    if name == "remote":
        return RemoteChatClient()
    raise InputValidationError(f"unknown client {name!r}; expected mock or remote")


def _enum(kind, value: str, option: str):
    try:
        return kind(value)
    except ValueError as e:
        choices = ", ".join(v.value for v in kind)
        raise InputValidationError(f"{option} must be one of {choices}, got {value!r}") from e


def load_report(path: Path) -> AuditReport:
    try:
        return AuditReport.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InputValidationError(f"report not found: {path}") from e
    except ValidationError as e:
        raise InputValidationError(f"invalid audit report {path}: {e.errors()[0]['msg']}") from e


@handle_errors
def audit(
    ctx: typer.Context,
    backend: Optional[str] = typer.Option(None, "--backend", help="sim:<preset> or remote."),
    world: Optional[Path] = typer.Option(None, "--world", help="Custom simulator world JSON."),
    dim: Optional[int] = typer.Option(None, "--dim", help="Embedding dimension of preset worlds."),
    world_seed: Optional[int] = typer.Option(None, "--world-seed", help="Seed of the preset cloud centres."),
    campaign: Optional[str] = typer.Option(None, "--campaign", help="professions32, attributes8, person, races6, genders2."),
    n: Optional[int] = typer.Option(None, "--n", help="Images per group."),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Images per backend request."),
    race_model: Optional[Path] = typer.Option(None, "--race-model", help="Omit both models to use true labels."),
    gender_model: Optional[Path] = typer.Option(None, "--gender-model"),
    variant_target: Optional[str] = typer.Option(
        None, "--variant-target", help="uniform or a target JSON file; splits requests across variants."
    ),
    variant_mode: Optional[str] = typer.Option(None, "--variant-mode", help="iid or balanced."),
    regulator: Optional[str] = typer.Option(None, "--regulator", help="mock or remote prompt regulator."),
    regulation_target: Optional[str] = typer.Option(None, "--regulation-target", help="uniform or a target JSON file."),
    wording: Optional[str] = typer.Option(None, "--wording", help="profession or person."),
    csv: Optional[bool] = typer.Option(None, "--csv/--no-csv", help="Also write long-format CSV."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    parallelism: Optional[int] = typer.Option(None, "--parallelism"),
    out: Optional[Path] = typer.Option(None, "--out", help="Report output path."),
) -> None:
    """
    Run a prompt campaign against a backend and report demographic shares
    """
    opts = CommandOptions(ctx, "audit")
    generator = make_backend(
        opts.get("backend", backend, "sim:sdxl_person_fig1"),
        opts.get("world", world),
        opts.get("dim", dim, 64),
        opts.get("world_seed", world_seed, 0),
    )
    classifier = make_classifier(opts.get("race_model", race_model), opts.get("gender_model", gender_model))
    groups = standard_campaign(opts.get("campaign", campaign, "person"))

    plan = None
    target_spec = opts.get("variant_target", variant_target)
    if target_spec is not None:
        mode = _enum(VariantMode, opts.get("variant_mode", variant_mode, "iid"), "--variant-mode")
        plan = VariantPlan(target=load_target(target_spec), mode=mode)

    regulation = None
    client_name = opts.get("regulator", regulator)
    if client_name is not None:
        regulation = RegulatorConfig(
            client=make_client(client_name),
            target=load_target(opts.get("regulation_target", regulation_target, "uniform")),
            wording=_enum(RegulationWording, opts.get("wording", wording, "profession"), "--wording"),
        )

    report = run_audit(
        generator,
        classifier,
        groups,
        n_per_group=opts.get("n", n, 1000),
        seed=opts.global_value("seed", seed),
        batch_size=opts.get("batch_size", batch_size, DEFAULT_BATCH_SIZE),
        parallelism=opts.global_value("parallelism", parallelism),
        variant_plan=plan,
        regulator=regulation,
    )

    target = opts.output(opts.get("out", out, Path("report.json")))
    rows = audit_rows(report) if opts.get("csv", csv, False) else None
    emit_report(report, target, opts.output_dir, csv_rows=rows)
    opts.finish(target)


@handle_errors
def compare(
    ctx: typer.Context,
    reports: List[Path] = typer.Argument(..., help="Two or more audit reports; the first is the baseline."),
    strict: Optional[bool] = typer.Option(None, "--strict/--no-strict", help="Require identical campaign hashes."),
    out: Optional[Path] = typer.Option(None, "--out", help="Comparison output path."),
) -> None:
    """
    Compare audit reports side by side; also writes plot-ready CSV
    """
    opts = CommandOptions(ctx, "compare")
    paths = opts.get("reports", reports)
    table = compare_backends([load_report(p) for p in paths], strict=opts.get("strict", strict, True))
    target = opts.output(opts.get("out", out, Path("comparison.json")))
    emit_report(table, target, opts.output_dir, csv_rows=comparison_rows(table))
    opts.finish(target)
