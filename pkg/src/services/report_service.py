from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from src.schemas.audit_schemas import AuditReport, ComparisonTable
from src.services.logger import get_logger
from src.utils.canonical import canonical_json
from src.utils.errors import InputValidationError

logger = get_logger("report_service")


def _is_empty(report: Any) -> bool:
    if report is None:
        return True
    if isinstance(report, AuditReport):
        return not report.per_group
    if isinstance(report, ComparisonTable):
        return not report.rows
    if isinstance(report, BaseModel):
        return False
    return isinstance(report, (dict, list, tuple)) and len(report) == 0


def resolve_output(path: Path, output_dir: Path) -> Path:
    """
    Resolves `path` against `output_dir`, refusing anything outside it.
    """
    root = Path(output_dir).resolve()
    target = Path(path)
    target = (target if target.is_absolute() else root / target).resolve()
    if target != root and root not in target.parents:
        raise InputValidationError(f"output path {path} is outside the output directory {root}")
    return target


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise InputValidationError(f"cannot write {path}: {e}") from e


def audit_rows(report: AuditReport) -> List[Dict[str, Any]]:
    """
    One row per (group, axis, category) with count and share.
    """
    rows = []
    for group, result in report.per_group.items():
        for axis, table, dist in (
            ("race", result.race_counts, result.race_distribution),
            ("gender", result.gender_counts, result.gender_distribution),
        ):
            for category, count in table.counts.items():
                rows.append(
                    {
                        "group": group,
                        "axis": axis,
                        "backend": report.backend_id,
                        "category": category,
                        "count": count,
                        "share": dist.share(category) if dist is not None else None,
                    }
                )
    return rows


def emit_report(
    report: Any,
    path: Path,
    output_dir: Path = Path("."),
    csv_rows: Optional[Sequence[Dict[str, Any]]] = None,
) -> List[Path]:
    """
    Writes canonical JSON and, when rows are given, a CSV next to it.

    Identical inputs give byte-identical files.
    """
    if _is_empty(report):
        raise InputValidationError("nothing to emit")

    target = resolve_output(path, output_dir)
    _write_text(target, canonical_json(report))
    written = [target]

    if csv_rows is not None:
        csv_path = target.with_suffix(".csv")
        frame = pd.DataFrame(list(csv_rows))
        _write_text(csv_path, frame.to_csv(index=False, lineterminator="\n"))
        written.append(csv_path)

    logger.info(
        "Report written",
        extra={"service": "report", "stage": "emit", "action_details": ", ".join(str(p) for p in written)},
    )
    return written


def write_effective_config(report_path: Path, config: Any) -> Path:
    """
    Writes `<stem>.config.json` beside the main output.
    """
    target = Path(report_path).with_name(f"{Path(report_path).stem}.config.json")
    _write_text(target, canonical_json(config))
    return target


def write_text_output(text: str, path: Path, output_dir: Path = Path(".")) -> Path:
    if not text:
        raise InputValidationError("nothing to emit")
    target = resolve_output(path, output_dir)
    _write_text(target, text)
    return target
