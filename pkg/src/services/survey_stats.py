from __future__ import annotations

import math
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.schemas.survey_schemas import (
    BoxStats,
    Design,
    PairAnalysis,
    PowerReport,
    Sample,
    SurveyAnalysis,
    TestKind,
    TestResult,
    significance_stars,
)
from src.services.logger import get_logger
from src.utils.errors import InputValidationError

logger = get_logger("survey_stats")

SW_MIN_N = 3
SW_MAX_N = 5000
EXACT_MW_MAX_N = 8


def _values(s: Sample) -> np.ndarray:
    return np.asarray(s.values, dtype=np.float64)


def _pair_label(a: Sample, b: Sample) -> str:
    return f"{a.label} vs {b.label}".strip()


def _result(test: TestKind, statistic: float, p_value: float, n1: int, n2: int = 0, dof=None, label: str = "") -> TestResult:
    p = min(1.0, max(0.0, float(p_value)))
    return TestResult(
        test=test,
        statistic=float(statistic),
        p_value=p,
        n1=n1,
        n2=n2,
        dof=None if dof is None else float(dof),
        significance_stars=significance_stars(p),
        label=label,
    )


def shapiro_wilk(s: Sample) -> TestResult:
    n = s.n
    if n < SW_MIN_N or n > SW_MAX_N:
        raise InputValidationError(f"shapiro-wilk needs {SW_MIN_N} <= n <= {SW_MAX_N}, got n={n}")

    x = _values(s)
    if float(np.ptp(x)) == 0.0:
        raise InputValidationError(f"degenerate sample: {s.label or 'sample'} has zero variance")

    w, p = stats.shapiro(x)
    return _result(TestKind.SHAPIRO_WILK, min(1.0, float(w)), p, n1=n, label=s.label)


def _t_test(a: Sample, b: Sample, equal_var: bool) -> TestResult:
    if a.n < 2 or b.n < 2:
        raise InputValidationError(f"t-test needs n >= 2 per sample, got {a.n} and {b.n}")
    x, y = _values(a), _values(b)
    if float(np.var(x)) == 0.0 and float(np.var(y)) == 0.0:
        raise InputValidationError("degenerate sample: both samples have zero variance")

    outcome = stats.ttest_ind(x, y, equal_var=equal_var)
    return _result(
        TestKind.STUDENT_T if equal_var else TestKind.WELCH_T,
        outcome.statistic,
        outcome.pvalue,
        n1=x.size,
        n2=y.size,
        dof=outcome.df,
        label=_pair_label(a, b),
    )


def welch_t(a: Sample, b: Sample) -> TestResult:
    """
    Unequal-variance t-test; dof is the Welch-Satterthwaite estimate.
    """
    return _t_test(a, b, equal_var=False)


def student_t(a: Sample, b: Sample) -> TestResult:
    return _t_test(a, b, equal_var=True)


def mann_whitney_u(a: Sample, b: Sample) -> TestResult:
    """
    Two-sided test reporting U = min(U1, U2). Exact null distribution for
    small tie-free samples, otherwise the normal approximation with tie and
    continuity corrections.
    """
    x, y = _values(a), _values(b)
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])

    if float(np.ptp(pooled)) == 0.0:
        # every value tied: no ordering evidence either way
        return _result(TestKind.MANN_WHITNEY_U, n1 * n2 / 2.0, 1.0, n1=n1, n2=n2, label=_pair_label(a, b))

    has_ties = np.unique(pooled).size < pooled.size
    exact = n1 <= EXACT_MW_MAX_N and n2 <= EXACT_MW_MAX_N and not has_ties
    outcome = stats.mannwhitneyu(
        x,
        y,
        alternative="two-sided",
        use_continuity=True,
        method="exact" if exact else "asymptotic",
    )
    u1 = float(outcome.statistic)
    u = min(u1, n1 * n2 - u1)
    return _result(TestKind.MANN_WHITNEY_U, u, outcome.pvalue, n1=n1, n2=n2, label=_pair_label(a, b))


NormalityTest = Callable[[Sample], TestResult]


def select_and_test(
    a: Sample,
    b: Sample,
    alpha_normality: float = 0.05,
    t_test: str = "welch",
    normality: NormalityTest = shapiro_wilk,
) -> TestResult:
    """
    t-test when both samples pass the normality gate, Mann-Whitney U otherwise.
    """
    if t_test not in ("welch", "student"):
        raise InputValidationError(f"unknown t-test variant {t_test!r}")

    p_a = normality(a).p_value
    p_b = normality(b).p_value
    if p_a >= alpha_normality and p_b >= alpha_normality:
        return welch_t(a, b) if t_test == "welch" else student_t(a, b)

    logger.info(
        "Normality gate failed, using Mann-Whitney U",
        extra={"stage": "select_test", "action_details": f"sw p-values {p_a:.4g} / {p_b:.4g}"},
    )
    return mann_whitney_u(a, b)


def box_stats(s: Sample) -> BoxStats:
    """
    Quartiles by linear interpolation; whiskers reach the most extreme
    values within 1.5 IQR of the box.
    """
    x = np.sort(_values(s))
    q1, median, q3 = (float(q) for q in np.percentile(x, [25, 50, 75]))
    iqr = q3 - q1
    low, high = q1 - 1.5 * iqr, q3 + 1.5 * iqr

    inside = x[(x >= low) & (x <= high)]
    outliers = x[(x < low) | (x > high)]
    return BoxStats(
        q1=q1,
        median=median,
        q3=q3,
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=[float(v) for v in outliers],
    )


def _check_design(effect_d: float, alpha: float, design) -> Design:
    if not effect_d > 0:
        raise InputValidationError("effect size must be positive")
    if not 0 < alpha < 1:
        raise InputValidationError("alpha must lie in (0, 1)")
    try:
        return Design(design)
    except ValueError as e:
        raise InputValidationError(f"unknown design {design!r}") from e


def sample_size_t(effect_d: float, power: float, alpha: float = 0.05, design="two_sample") -> int:
    """
    Smallest n reaching `power` under the normal approximation; per group
    for two-sample designs, total pairs for paired designs.
    """
    kind = _check_design(effect_d, alpha, design)
    if not 0 < power < 1:
        raise InputValidationError("power must lie in (0, 1)")

    z = float(stats.norm.ppf(1.0 - alpha / 2.0)) + float(stats.norm.ppf(power))
    factor = 2.0 if kind is Design.TWO_SAMPLE else 1.0
    return max(1, math.ceil(factor * z * z / (effect_d * effect_d)))


def power_t(effect_d: float, n: int, alpha: float = 0.05, design="two_sample") -> float:
    kind = _check_design(effect_d, alpha, design)
    if n < 1:
        raise InputValidationError("n must be >= 1")
    scale = math.sqrt(n / 2.0) if kind is Design.TWO_SAMPLE else math.sqrt(n)
    return float(stats.norm.cdf(effect_d * scale - float(stats.norm.ppf(1.0 - alpha / 2.0))))


def power_report(effect_d: float, power: float, alpha: float = 0.05, design="two_sample") -> PowerReport:
    n = sample_size_t(effect_d, power, alpha, design)
    return PowerReport(
        effect_d=effect_d,
        power=power,
        alpha=alpha,
        design=Design(design),
        n=n,
        achieved_power=power_t(effect_d, n, alpha, design),
    )


def parse_pairs(spec: str) -> List[Tuple[str, str]]:
    pairs: List[Tuple[str, str]] = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        left, sep, right = chunk.partition(":")
        if not sep or not left.strip() or not right.strip():
            raise InputValidationError(f"pair {chunk!r} must look like 'groupA:groupB'")
        pairs.append((left.strip(), right.strip()))
    if not pairs:
        raise InputValidationError("no pairs given")
    return pairs


def load_groups(path: Path, group_col: str, value_col: str) -> Dict[str, Sample]:
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as e:
        raise InputValidationError(f"input file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputValidationError(f"cannot parse CSV {path}: {e}") from e

    for column in (group_col, value_col):
        if column not in frame.columns:
            raise InputValidationError(f"column {column!r} not found in {path}")

    values = pd.to_numeric(frame[value_col], errors="coerce")
    bad = frame.index[values.isna()]
    if len(bad) > 0:
        # header is line 1
        raise InputValidationError(f"non-numeric {value_col!r} at line {int(bad[0]) + 2}")

    groups: Dict[str, Sample] = {}
    for name, chunk in values.groupby(frame[group_col].astype(str), sort=True):
        groups[name] = Sample(values=[float(v) for v in chunk], label=name)
    return groups


def analyze_csv(
    path: Path,
    group_col: str,
    value_col: str,
    pairs: Sequence[Tuple[str, str]],
    alpha_normality: float = 0.05,
    t_test: str = "welch",
) -> SurveyAnalysis:
    groups = load_groups(path, group_col, value_col)
    results: List[PairAnalysis] = []

    for left, right in pairs:
        for name in (left, right):
            if name not in groups:
                raise InputValidationError(f"group {name!r} not present in column {group_col!r}")
        a, b = groups[left], groups[right]
        results.append(
            PairAnalysis(
                group_a=left,
                group_b=right,
                result=select_and_test(a, b, alpha_normality=alpha_normality, t_test=t_test),
                box_a=box_stats(a),
                box_b=box_stats(b),
                normality_a=shapiro_wilk(a),
                normality_b=shapiro_wilk(b),
            )
        )

    logger.info(
        "Survey analysis finished",
        extra={"stage": "survey_analyze", "action_details": f"{len(results)} pairs from {path}"},
    )
    return SurveyAnalysis(
        group_col=group_col,
        value_col=value_col,
        t_test=TestKind.WELCH_T if t_test == "welch" else TestKind.STUDENT_T,
        pairs=results,
    )
