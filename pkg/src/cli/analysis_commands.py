from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import typer

from src.cli.common import CommandOptions, handle_errors, make_backend
from src.schemas.audit_schemas import GroupKind, PromptGroup
from src.schemas.demographics import Axis
from src.schemas.records import EmbeddingRecord, HomogenizationScore, stack_embeddings
from src.services.audit_service import build_demographic_prompt
from src.services.classifier import load_model, predict_many
from src.services.embeddings import (
    SUBSAMPLE_LIMIT,
    HomogenizationReport,
    compare_homogenization,
    group_kde,
    score_by_group,
    summarize_scores,
)
from src.services.ingest_service import load_corpus
from src.services.report_service import emit_report
from src.services.survey_stats import analyze_csv, parse_pairs, power_report
from src.tools.lexicons import RACE_CAMPAIGN_PHRASES
from src.utils.errors import InputValidationError
from src.worker.pool import ordered_map


def _race_groups(records: List[EmbeddingRecord], race_model: Optional[Path]) -> Dict[str, List[EmbeddingRecord]]:
    if race_model is not None:
        model = load_model(race_model)
        if model.axis is not Axis.RACE:
            raise InputValidationError("--race-model must be a race model")
        races = [p.category for p in predict_many(model, stack_embeddings(records))] if records else []
    else:
        missing = [r.id for r in records if r.true_label is None]
        if missing:
            raise InputValidationError(f"record {missing[0]!r} has no race label; pass --race-model")
        races = [r.true_label.race.value for r in records]

    groups: Dict[str, List[EmbeddingRecord]] = defaultdict(list)
    for record, race in zip(records, races):
        groups[race].append(record)
    return dict(groups)


def _generate_by_race(spec: str, dim: int, world_seed: int, n: int, seed: int, parallelism: int) -> List[EmbeddingRecord]:
    generator = make_backend(spec, dim=dim, world_seed=world_seed)
    groups = [
        PromptGroup(name=race.value, kind=GroupKind.CUSTOM, prompt=build_demographic_prompt(phrase), tag="race")
        for race, phrase in RACE_CAMPAIGN_PHRASES.items()
    ]
    batches = ordered_map(lambda g: generator.generate(g, None, n, seed), groups, parallelism)
    return [record for batch in batches for record in batch]


@handle_errors
def homogenize(
    ctx: typer.Context,
    input_path: Optional[Path] = typer.Option(None, "--input", help="Corpus of source A."),
    compare_input: Optional[Path] = typer.Option(None, "--compare-input", help="Corpus of source B."),
    backend: Optional[str] = typer.Option(None, "--backend", help="Generate source A from sim:<preset>."),
    compare_backend: Optional[str] = typer.Option(None, "--compare-backend", help="Generate source B from sim:<preset>."),
    corpus_format: Optional[str] = typer.Option(None, "--format", help="jsonl or bin."),
    n: Optional[int] = typer.Option(None, "--n", help="Images per race when generating."),
    dim: Optional[int] = typer.Option(None, "--dim"),
    world_seed: Optional[int] = typer.Option(None, "--world-seed"),
    race_model: Optional[Path] = typer.Option(None, "--race-model", help="Group unlabeled records by predicted race."),
    label_a: Optional[str] = typer.Option(None, "--label-a"),
    label_b: Optional[str] = typer.Option(None, "--label-b"),
    with_kde: Optional[bool] = typer.Option(None, "--kde/--no-kde", help="Add a density curve per group."),
    limit: Optional[int] = typer.Option(None, "--subsample-limit", help="Largest group size scored."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    parallelism: Optional[int] = typer.Option(None, "--parallelism"),
    out: Optional[Path] = typer.Option(None, "--out", help="Summary output path."),
) -> None:
    """
    Per-race homogenization scores, summaries and optional comparison
    """
    opts = CommandOptions(ctx, "homogenize")
    run_seed = opts.global_value("seed", seed)
    workers = opts.global_value("parallelism", parallelism)
    fmt = opts.get("format", corpus_format, "jsonl")
    per_race = opts.get("n", n, 1000)
    size = opts.get("dim", dim, 64)
    centres = opts.get("world_seed", world_seed, 0)
    model_path = opts.get("race_model", race_model)

    def source(path: Optional[Path], spec: Optional[str]) -> Optional[List[EmbeddingRecord]]:
        if path is not None:
            return load_corpus(path, format=fmt)
        if spec is not None:
            return _generate_by_race(spec, size, centres, per_race, run_seed, workers)
        return None

    records_a = source(opts.get("input", input_path), opts.get("backend", backend))
    if records_a is None:
        raise InputValidationError("give --input or --backend")
    records_b = source(opts.get("compare_input", compare_input), opts.get("compare_backend", compare_backend))

    names = [opts.get("label_a", label_a, "a")]
    cap = opts.get("subsample_limit", limit, SUBSAMPLE_LIMIT)
    scores_a = score_by_group(_race_groups(records_a, model_path), cap, run_seed)
    scored: List[Tuple[str, List[HomogenizationScore]]] = [(names[0], scores_a)]
    comparison = None
    if records_b is not None:
        names.append(opts.get("label_b", label_b, "b"))
        scores_b = score_by_group(_race_groups(records_b, model_path), cap, run_seed)
        scored.append((names[1], scores_b))
        comparison = compare_homogenization(scores_a, scores_b, names[0], names[1])

    report = HomogenizationReport(
        sources=names,
        summary={name: summarize_scores(scores) for name, scores in scored},
        kde={name: group_kde(scores) for name, scores in scored} if opts.get("kde", with_kde, False) else {},
        comparison=comparison,
    )
    rows = [
        {"source": name, "group": s.group, "id": s.item_id, "score": s.score}
        for name, scores in scored
        for s in scores
    ]

    target = opts.output(opts.get("out", out, Path("homogenization.json")))
    emit_report(report, target, opts.output_dir, csv_rows=rows)
    opts.finish(target)


survey_app = typer.Typer(add_completion=False, help="Survey response statistics")


@survey_app.command("analyze")
@handle_errors
def survey_analyze(
    ctx: typer.Context,
    input_path: Path = typer.Option(..., "--input", help="CSV with a header row, one response per line."),
    group_col: Optional[str] = typer.Option(None, "--group-col"),
    value_col: Optional[str] = typer.Option(None, "--value-col"),
    pairs: Optional[str] = typer.Option(None, "--pairs", help="Comma-separated a:b group pairs."),
    alpha_normality: Optional[float] = typer.Option(None, "--alpha-normality"),
    t_test: Optional[str] = typer.Option(None, "--t-test", help="welch or student."),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """
    Shapiro-Wilk-gated t-test or Mann-Whitney U per group pair, plus box statistics
    """
    opts = CommandOptions(ctx, "survey_analyze")
    pair_spec = opts.get("pairs", pairs)
    if not pair_spec:
        raise InputValidationError("--pairs is required")
    analysis = analyze_csv(
        opts.get("input", input_path),
        group_col=opts.get("group_col", group_col, "condition"),
        value_col=opts.get("value_col", value_col, "answer"),
        pairs=parse_pairs(pair_spec),
        alpha_normality=opts.get("alpha_normality", alpha_normality, 0.05),
        t_test=opts.get("t_test", t_test, "welch"),
    )
    target = opts.output(opts.get("out", out, Path("survey.json")))
    emit_report(analysis, target, opts.output_dir)
    opts.finish(target)


@survey_app.command("power")
@handle_errors
def survey_power(
    ctx: typer.Context,
    effect_d: Optional[float] = typer.Option(None, "--effect-d", help="Cohen's d."),
    power: Optional[float] = typer.Option(None, "--power"),
    alpha: Optional[float] = typer.Option(None, "--alpha"),
    design: Optional[str] = typer.Option(None, "--design", help="two_sample or paired."),
    out: Optional[Path] = typer.Option(None, "--out"),
) -> None:
    """
    Required sample size for a t-test design and its achieved power
    """
    opts = CommandOptions(ctx, "survey_power")
    report = power_report(
        opts.get("effect_d", effect_d, 0.5),
        opts.get("power", power, 0.8),
        opts.get("alpha", alpha, 0.05),
        opts.get("design", design, "two_sample"),
    )
    target = opts.output(opts.get("out", out, Path("power.json")))
    emit_report(report, target, opts.output_dir)
    opts.finish(target)
