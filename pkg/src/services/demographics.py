from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from src.schemas.demographics import (
    AXIS_KEYS,
    Axis,
    Category,
    CountTable,
    DemographicDistribution,
    axis_of,
    category_key,
    parse_category,
)
from src.utils.errors import AxisMismatchError, InputValidationError


class ChiSquareResult(NamedTuple):
    statistic: float
    p_value: float
    dof: int


def count_labels(labels: Sequence[Category], axis: Optional[Axis] = None) -> CountTable:
    if not labels:
        raise InputValidationError("no observations")

    resolved = axis or axis_of(labels[0])
    for label in labels:
        if axis_of(label) is not resolved:
            raise AxisMismatchError(f"label {label!r} is not on the {resolved.value} axis")

    counts = Counter(category_key(label) for label in labels)
    return CountTable.from_counts(resolved, counts)


def distribution_from_counts(table: CountTable) -> DemographicDistribution:
    if table.total == 0:
        raise InputValidationError("no observations")
    return DemographicDistribution(
        axis=table.axis,
        probabilities={k: c / table.total for k, c in table.counts.items()},
    )


def estimate_distribution(labels: Sequence[Category], axis: Optional[Axis] = None) -> DemographicDistribution:
    """
    Empirical category shares of a label list.
    """
    return distribution_from_counts(count_labels(labels, axis))


def bias_sigma(dist: DemographicDistribution) -> float:
    """
    Population standard deviation of the category shares, in percent.
    """
    shares = np.asarray(dist.vector(), dtype=np.float64) * 100.0
    return float(np.std(shares, ddof=0))


def panel_sigma(dists: Iterable[DemographicDistribution]) -> float:
    """
    RMS distance from parity over every share of every distribution, in
    percent. For gender this is the population sigma of the female
    percentages around 50.
    """
    deviations: List[float] = []
    for dist in dists:
        parity = 100.0 / len(dist.probabilities)
        deviations.extend(100.0 * p - parity for p in dist.vector())
    if not deviations:
        raise InputValidationError("no observations")
    return math.sqrt(math.fsum(d * d for d in deviations) / len(deviations))


def total_variation(p: DemographicDistribution, q: DemographicDistribution) -> float:
    if p.axis is not q.axis:
        raise AxisMismatchError(f"cannot compare {p.axis.value} with {q.axis.value} distribution")
    distance = 0.5 * math.fsum(abs(p.probabilities[k] - q.probabilities[k]) for k in AXIS_KEYS[p.axis])
    return min(1.0, distance)


def chi_square_gof(observed: CountTable, target: DemographicDistribution) -> ChiSquareResult:
    """
    Pearson goodness-of-fit of observed counts against a target distribution.

    Degrees of freedom are the number of positive-probability cells minus one.
    """
    if observed.axis is not target.axis:
        raise AxisMismatchError(f"counts are on {observed.axis.value}, target on {target.axis.value}")
    if observed.total < 1:
        raise InputValidationError("no observations")

    terms: List[float] = []
    for key in AXIS_KEYS[observed.axis]:
        count = observed.counts[key]
        p = target.probabilities[key]
        if p <= 0.0:
            if count > 0:
                raise InputValidationError(f"impossible observation: {count} counts in zero-probability cell {key}")
            continue
        expected = observed.total * p
        terms.append((count - expected) ** 2 / expected)

    dof = len(terms) - 1
    statistic = math.fsum(terms)
    if dof < 1:
        return ChiSquareResult(statistic=0.0, p_value=1.0, dof=0)

    p_value = float(stats.chi2.sf(statistic, dof))
    return ChiSquareResult(statistic=statistic, p_value=min(1.0, max(0.0, p_value)), dof=dof)


def inverse_cdf(dist: DemographicDistribution, u: float) -> Category:
    """
    Category whose cumulative-share interval in the fixed axis order
    contains u in [0, 1). Zero-probability categories are never returned.
    """
    probabilities = np.asarray(dist.vector(), dtype=np.float64)
    cdf = np.cumsum(probabilities)
    index = int(np.searchsorted(cdf, u, side="right"))
    last_positive = int(np.flatnonzero(probabilities > 0)[-1])
    return parse_category(dist.axis, AXIS_KEYS[dist.axis][min(index, last_positive)])
