from __future__ import annotations

import math
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.schemas.records import (
    DensityCurve,
    EmbeddingRecord,
    GroupScoreSummary,
    HomogenizationScore,
    stack_embeddings,
)
from src.schemas.survey_schemas import Sample, TestResult
from src.services.logger import get_logger
from src.services.survey_stats import welch_t
from src.utils.errors import DimensionMismatchError, InputValidationError
from src.utils.rng import stream

logger = get_logger("embeddings")

SUBSAMPLE_LIMIT = 10_000
KDE_GRID_POINTS = 512
KDE_PAD_BANDWIDTHS = 5.0
_ROW_BLOCK = 512


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    u = np.asarray(a, dtype=np.float64)
    v = np.asarray(b, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"dimension mismatch: {u.size} vs {v.size}")

    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise InputValidationError("cosine similarity undefined for zero-norm vector")
    return min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv)))


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise InputValidationError("cosine similarity undefined for zero-norm vector")
    return matrix / norms[:, None]


def homogenization_scores(group: Sequence[EmbeddingRecord], group_name: str = "") -> List[HomogenizationScore]:
    """
    For each item, the mean cosine similarity to every other item of the group.

    Output order follows input order. Rows are reduced in fixed blocks so the
    result does not depend on thread count.
    """
    n = len(group)
    if n < 2:
        raise InputValidationError(f"group too small: homogenization needs >= 2 items, got {n}")

    unit = _unit_rows(stack_embeddings(list(group)))
    sums = np.empty(n)
    for start in range(0, n, _ROW_BLOCK):
        block = unit[start:start + _ROW_BLOCK] @ unit.T
        rows = np.arange(block.shape[0])
        block[rows, start + rows] = 0.0
        sums[start:start + block.shape[0]] = block.sum(axis=1)

    scores = np.clip(sums / (n - 1), -1.0, 1.0)
    return [
        HomogenizationScore(item_id=record.id, group=group_name, score=float(score))
        for record, score in zip(group, scores)
    ]


def group_mean_score(scores: Sequence[HomogenizationScore]) -> float:
    if not scores:
        raise InputValidationError("no scores to average")
    return math.fsum(s.score for s in scores) / len(scores)


def subsample(records: Sequence[EmbeddingRecord], limit: int = SUBSAMPLE_LIMIT, seed: int = 0) -> List[EmbeddingRecord]:
    """
    Uniform subsample without replacement, kept in input order.
    """
    if len(records) <= limit:
        return list(records)

    rng = stream(seed, "subsample", len(records), limit)
    keep = np.sort(rng.choice(len(records), size=limit, replace=False))
    logger.info(
        "Group subsampled before scoring",
        extra={"stage": "subsample", "action_details": f"{len(records)} -> {limit} records (seed {seed})"},
    )
    return [records[i] for i in keep]


def scott_bandwidth(samples: Sequence[float]) -> float:
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise InputValidationError("bandwidth required: fewer than 2 samples")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        raise InputValidationError("bandwidth required: sample has zero variance")
    return sd * x.size ** (-1.0 / 5.0)


def default_grid(samples: Sequence[float], bandwidth: float, points: int = KDE_GRID_POINTS) -> List[float]:
    x = np.asarray(samples, dtype=np.float64)
    pad = KDE_PAD_BANDWIDTHS * bandwidth
    return np.linspace(x.min() - pad, x.max() + pad, points).tolist()


def kde(samples: Sequence[float], grid: Optional[Sequence[float]] = None, bandwidth: Optional[float] = None) -> DensityCurve:
    """
    Gaussian kernel density estimate; Scott's rule when no bandwidth is given.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise InputValidationError("no observations")
    if bandwidth is None:
        h = scott_bandwidth(x)
    elif bandwidth <= 0:
        raise InputValidationError("bandwidth must be positive")
    else:
        h = float(bandwidth)

    g = np.asarray(grid if grid is not None else default_grid(x, h), dtype=np.float64)
    if np.any(np.diff(g) < 0):
        raise InputValidationError("grid must be ascending")

    z = (g[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2.0 * math.pi))
    return DensityCurve(grid=g.tolist(), density=density.tolist(), bandwidth=h)


def summarize_scores(scores: Sequence[HomogenizationScore]) -> List[GroupScoreSummary]:
    by_group: Dict[str, List[float]] = defaultdict(list)
    for s in scores:
        by_group[s.group].append(s.score)

    summaries = []
    for group in sorted(by_group):
        values = np.asarray(by_group[group])
        summaries.append(
            GroupScoreSummary(
                group=group,
                n=values.size,
                mean=math.fsum(values) / values.size,
                std=float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
            )
        )
    return summaries


class HomogenizationComparison(BaseModel):
    group: str
    source_a: str
    source_b: str
    mean_a: float
    mean_b: float
    test: TestResult
    model_config = ConfigDict(frozen=True)


def compare_homogenization(
    scores_a: Sequence[HomogenizationScore],
    scores_b: Sequence[HomogenizationScore],
    source_a: str = "a",
    source_b: str = "b",
) -> List[HomogenizationComparison]:
    """
    Per shared group, mean scores of two sources and a Welch t-test between them.
    """
    grouped: Tuple[Dict[str, List[float]], Dict[str, List[float]]] = (defaultdict(list), defaultdict(list))
    for target, scores in zip(grouped, (scores_a, scores_b)):
        for s in scores:
            target[s.group].append(s.score)

    shared = sorted(set(grouped[0]) & set(grouped[1]))
    if not shared:
        raise InputValidationError("no group is scored in both sources")

    comparisons = []
    for group in shared:
        a, b = grouped[0][group], grouped[1][group]
        comparisons.append(
            HomogenizationComparison(
                group=group,
                source_a=source_a,
                source_b=source_b,
                mean_a=math.fsum(a) / len(a),
                mean_b=math.fsum(b) / len(b),
                test=welch_t(Sample(values=a, label=source_a), Sample(values=b, label=source_b)),
            )
        )
    return comparisons


class HomogenizationReport(BaseModel):
    """
    Per-race summaries, optional density curves and an optional comparison
    between two sources.
    """

    sources: List[str]
    summary: Dict[str, List[GroupScoreSummary]]
    kde: Dict[str, Dict[str, DensityCurve]] = Field(default_factory=dict)
    comparison: Optional[List[HomogenizationComparison]] = None
    model_config = ConfigDict(frozen=True)


def score_by_group(
    groups: Dict[str, Sequence[EmbeddingRecord]],
    limit: int = SUBSAMPLE_LIMIT,
    seed: int = 0,
) -> List[HomogenizationScore]:
    """
    Scores every group in name order; groups with fewer than two items are
    skipped with a warning.
    """
    scores: List[HomogenizationScore] = []
    for name in sorted(groups):
        members = list(groups[name])
        if len(members) < 2:
            logger.warning(
                "Group skipped",
                extra={"stage": "homogenize", "action_details": f"group {name!r} has {len(members)} item(s)"},
            )
            continue
        scores.extend(homogenization_scores(subsample(members, limit, seed), group_name=name))
    if not scores:
        raise InputValidationError("group too small: no group has at least 2 items")
    return scores


def group_kde(scores: Sequence[HomogenizationScore]) -> Dict[str, DensityCurve]:
    by_group: Dict[str, List[float]] = defaultdict(list)
    for s in scores:
        by_group[s.group].append(s.score)
    curves = {}
    for group in sorted(by_group):
        try:
            curves[group] = kde(by_group[group])
        except InputValidationError:
            logger.warning("No density for constant scores", extra={"stage": "kde", "action_details": group})
    return curves
