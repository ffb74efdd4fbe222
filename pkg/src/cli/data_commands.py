from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

import typer

from src.cli.common import CommandOptions, handle_errors, make_backend
from src.schemas.audit_schemas import GroupKind, PromptGroup, PromptSpec
from src.schemas.demographics import Axis
from src.schemas.svm_schemas import EvalMetrics, SvmHyperParams
from src.services.classifier import evaluate, format_metrics_table, load_model, save_model, train
from src.services.ingest_service import check_validation_manifest, load_corpus, split, write_corpus
from src.services.report_service import emit_report, write_text_output
from src.utils.errors import InputValidationError
from src.worker.pool import ordered_map


def _parse_gamma(value: str):
    if value == "scale":
        return "scale"
    try:
        return float(value)
    except ValueError as e:
        raise InputValidationError(f"gamma must be 'scale' or a positive number, got {value!r}") from e


@handle_errors
def ingest(
    ctx: typer.Context,
    input_path: Path = typer.Option(..., "--input", help="Corpus to read."),
    corpus_format: Optional[str] = typer.Option(None, "--format", help="jsonl or bin."),
    merge_fairface: Optional[bool] = typer.Option(
        None, "--merge-fairface/--no-merge-fairface", help="Merge East and Southeast Asian labels."
    ),
    laion_filter: Optional[bool] = typer.Option(
        None, "--laion-filter/--no-laion-filter", help="Keep keyword-matching captions with faces >= 100px."
    ),
    expect_fairface_validation: Optional[bool] = typer.Option(
        None,
        "--expect-fairface-validation/--no-expect-fairface-validation",
        help="Fail unless category counts match the FairFace validation manifest.",
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Output corpus path."),
    out_format: Optional[str] = typer.Option(None, "--out-format", help="jsonl or bin."),
) -> None:
    """
    Validate an embedding corpus and write it in canonical form
    """
    opts = CommandOptions(ctx, "ingest")
    source = opts.get("input", input_path)
    records = load_corpus(
        source,
        format=opts.get("format", corpus_format, "jsonl"),
        merge_fairface_labels=opts.get("merge_fairface", merge_fairface, False),
        laion_filter=opts.get("laion_filter", laion_filter, False),
    )

    if opts.get("expect_fairface_validation", expect_fairface_validation, False):
        differences = {k: v for k, v in check_validation_manifest(records).items() if v != 0}
        if differences:
            raise InputValidationError(f"corpus does not match the FairFace validation manifest: {differences}")

    target = opts.output(opts.get("out", out, Path("corpus.jsonl")))
    write_corpus(records, target, format=opts.get("out_format", out_format, "jsonl"))
    opts.finish(target)


@handle_errors
def train_command(
    ctx: typer.Context,
    input_path: Path = typer.Option(..., "--input", help="Labeled training corpus."),
    corpus_format: Optional[str] = typer.Option(None, "--format", help="jsonl or bin."),
    axis: Optional[str] = typer.Option(None, "--axis", help="race or gender."),
    c: Optional[float] = typer.Option(None, "--c", help="Regularization parameter."),
    gamma: Optional[str] = typer.Option(None, "--gamma", help="'scale' or a positive number."),
    tolerance: Optional[float] = typer.Option(None, "--tolerance", help="KKT stopping tolerance."),
    max_passes: Optional[int] = typer.Option(None, "--max-passes", help="Cap on SMO updates per binary."),
    cache_rows: Optional[int] = typer.Option(None, "--cache-rows", help="Kernel rows kept in cache."),
    validation_fraction: Optional[float] = typer.Option(
        None, "--validation-fraction", help="Hold out this share of each cell for evaluation."
    ),
    seed: Optional[int] = typer.Option(None, "--seed"),
    parallelism: Optional[int] = typer.Option(None, "--parallelism"),
    out: Optional[Path] = typer.Option(None, "--out", help="Model output path."),
) -> None:
    """
    Train a one-vs-one RBF SVM on one demographic axis
    """
    opts = CommandOptions(ctx, "train")
    records = load_corpus(opts.get("input", input_path), format=opts.get("format", corpus_format, "jsonl"))
    axis_name = opts.get("axis", axis, "race")
    try:
        resolved_axis = Axis(axis_name)
    except ValueError as e:
        raise InputValidationError(f"axis must be race or gender, got {axis_name!r}") from e
    if resolved_axis is Axis.CELL:
        raise InputValidationError("axis must be race or gender")

    params = SvmHyperParams(
        c=opts.get("c", c, 1.0),
        gamma=_parse_gamma(str(opts.get("gamma", gamma, "scale"))),
        tolerance=opts.get("tolerance", tolerance, 1e-3),
        max_passes=opts.get("max_passes", max_passes, 1_000_000),
        cache_rows=opts.get("cache_rows", cache_rows, 256),
    )
    run_seed = opts.global_value("seed", seed)
    workers = opts.global_value("parallelism", parallelism)

    fraction = opts.get("validation_fraction", validation_fraction)
    validation: List = []
    if fraction:
        records, validation = split(records, 1.0 - fraction, run_seed)

    model = train(records, resolved_axis, params=params, seed=run_seed, parallelism=workers)
    target = opts.output(opts.get("out", out, Path(f"{resolved_axis.value}_model.json")))
    save_model(model, target)

    if validation:
        metrics = {resolved_axis.value: evaluate(model, validation)}
        emit_report(metrics, target.with_name(f"{target.stem}.metrics.json"), opts.output_dir)

    opts.finish(target)


@handle_errors
def evaluate_command(
    ctx: typer.Context,
    input_path: Path = typer.Option(..., "--input", help="Labeled validation corpus."),
    corpus_format: Optional[str] = typer.Option(None, "--format", help="jsonl or bin."),
    race_model: Optional[Path] = typer.Option(None, "--race-model"),
    gender_model: Optional[Path] = typer.Option(None, "--gender-model"),
    validation_fraction: Optional[float] = typer.Option(
        None, "--validation-fraction", help="Evaluate only the held-out split of the corpus."
    ),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Metrics output path."),
) -> None:
    """
    Accuracy, macro precision/recall/F1 and confusion matrices per axis
    """
    opts = CommandOptions(ctx, "evaluate")
    records = load_corpus(opts.get("input", input_path), format=opts.get("format", corpus_format, "jsonl"))
    fraction = opts.get("validation_fraction", validation_fraction)
    if fraction:
        _, records = split(records, 1.0 - fraction, opts.global_value("seed", seed))

    models = [
        m for m in (opts.get("race_model", race_model), opts.get("gender_model", gender_model)) if m is not None
    ]
    if not models:
        raise InputValidationError("give --race-model and/or --gender-model")

    metrics: Dict[str, EvalMetrics] = {}
    for path in models:
        model = load_model(path)
        metrics[model.axis.value] = evaluate(model, records)

    target = opts.output(opts.get("out", out, Path("metrics.json")))
    emit_report(metrics, target, opts.output_dir)
    write_text_output(format_metrics_table(metrics) + "\n", target.with_suffix(".txt"), opts.output_dir)
    opts.finish(target)


@handle_errors
def simulate(
    ctx: typer.Context,
    backend: Optional[str] = typer.Option(None, "--backend", help="sim:<preset>."),
    world: Optional[Path] = typer.Option(None, "--world", help="Custom simulator world JSON."),
    dim: Optional[int] = typer.Option(None, "--dim", help="Embedding dimension of preset worlds."),
    world_seed: Optional[int] = typer.Option(None, "--world-seed", help="Seed of the preset cloud centres."),
    groups: Optional[str] = typer.Option(None, "--groups", help="Comma-separated group names."),
    n: Optional[int] = typer.Option(None, "--n", help="Records per group."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    parallelism: Optional[int] = typer.Option(None, "--parallelism"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output corpus path."),
    out_format: Optional[str] = typer.Option(None, "--out-format", help="jsonl or bin."),
) -> None:
    """
    Draw a labeled corpus from a simulator world
    """
    opts = CommandOptions(ctx, "simulate")
    generator = make_backend(
        opts.get("backend", backend, "sim:uniform"),
        opts.get("world", world),
        opts.get("dim", dim, 64),
        opts.get("world_seed", world_seed, 0),
    )
    config = getattr(generator, "config", None)
    if config is None:
        raise InputValidationError("simulate needs a simulator backend")

    default_groups = ",".join(config.per_group_demographics) or "person"
    names = [g.strip() for g in str(opts.get("groups", groups, default_groups)).split(",") if g.strip()]
    count = opts.get("n", n, 1000)
    if count < 1:
        raise InputValidationError("n must be >= 1")
    run_seed = opts.global_value("seed", seed)

    prompt_groups = [PromptGroup(name=name, kind=GroupKind.CUSTOM, prompt=PromptSpec(text=name)) for name in names]
    batches = ordered_map(
        lambda group: generator.generate(group, None, count, run_seed),
        prompt_groups,
        opts.global_value("parallelism", parallelism),
    )
    records = sorted((r for batch in batches for r in batch), key=lambda r: r.id)

    target = opts.output(opts.get("out", out, Path("simulated.jsonl")))
    write_corpus(records, target, format=opts.get("out_format", out_format, "jsonl"))
    opts.finish(target)
