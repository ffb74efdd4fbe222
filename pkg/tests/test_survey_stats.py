import itertools
import math

import numpy as np
import pytest
from scipy import stats

from src.schemas import survey_schemas
from src.schemas.survey_schemas import Sample, significance_stars
from src.services.survey_stats import (
    analyze_csv,
    box_stats,
    load_groups,
    mann_whitney_u,
    parse_pairs,
    power_report,
    power_t,
    sample_size_t,
    select_and_test,
    shapiro_wilk,
    student_t,
    welch_t,
)
from src.utils.errors import InputValidationError

Kind = survey_schemas.TestKind


def sample(values, label=""):
    return Sample(values=[float(v) for v in values], label=label)


def fake_normality(p_value):
    def run(s):
        return survey_schemas.TestResult(test=Kind.SHAPIRO_WILK, statistic=0.9, p_value=p_value, n1=s.n)

    return run


def normal_grid(n):
    return stats.norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))


def enumerated_p(u_min, n1, n2):
    ranks = range(1, n1 + n2 + 1)
    total = 0
    hits = 0
    for chosen in itertools.combinations(ranks, n1):
        u = sum(chosen) - n1 * (n1 + 1) / 2
        total += 1
        if u <= u_min:
            hits += 1
    return min(1.0, 2 * hits / total)


# =========================================================
# Mann-Whitney U
# =========================================================
def test_mann_whitney_small_examples():
    result = mann_whitney_u(sample([1, 2], "a"), sample([3, 4], "b"))
    assert result.statistic == 0.0
    assert result.p_value == pytest.approx(1 / 3)
    assert (result.n1, result.n2, result.label) == (2, 2, "a vs b")
    assert mann_whitney_u(sample([1]), sample([2])).p_value == pytest.approx(1.0)


@pytest.mark.parametrize(
    "a,b",
    [
        ([1, 2, 4], [3, 5, 6]),
        ([1], [2, 3, 4, 5]),
        ([2, 9, 11, 14], [1, 3, 4, 5, 6, 7]),
        ([1, 3, 5, 7, 9, 11, 13, 15], [2, 4, 6, 8, 10, 12, 14, 16]),
        ([10, 20, 30, 40, 50], [1, 2, 3, 4, 5, 6, 7]),
    ],
)
def test_exact_p_matches_enumeration(a, b):
    result = mann_whitney_u(sample(a), sample(b))
    ranks = {v: i + 1 for i, v in enumerate(sorted(a + b))}
    u1 = sum(ranks[v] for v in a) - len(a) * (len(a) + 1) / 2
    assert result.statistic == min(u1, len(a) * len(b) - u1)
    assert result.p_value == pytest.approx(enumerated_p(result.statistic, len(a), len(b)))


def test_statistic_is_symmetric():
    a, b = sample([1, 5, 6, 8]), sample([2, 3, 4, 7, 9])
    forward, backward = mann_whitney_u(a, b), mann_whitney_u(b, a)
    assert forward.statistic == backward.statistic
    assert forward.p_value == pytest.approx(backward.p_value)


def test_ties_use_normal_approximation():
    a = [1, 2, 2, 3, 3, 3, 4, 5, 5, 6, 7]
    b = [3, 4, 4, 5, 6, 6, 7, 8, 8, 9]
    result = mann_whitney_u(sample(a), sample(b))
    assert result.test is Kind.MANN_WHITNEY_U
    assert result.statistic <= len(a) * len(b) / 2
    assert 0.0 < result.p_value < 0.05
    assert result.dof is None


def test_identical_multisets_give_p_one():
    assert mann_whitney_u(sample([1, 2, 2, 3]), sample([3, 2, 1, 2])).p_value == pytest.approx(1.0, abs=1e-6)
    all_tied = mann_whitney_u(sample([4, 4, 4]), sample([4, 4]))
    assert all_tied.p_value == 1.0
    assert all_tied.statistic == 3.0


def test_large_separated_samples_are_significant():
    rng = np.random.default_rng(11)
    result = mann_whitney_u(sample(rng.normal(0, 1, 40)), sample(rng.normal(2, 1, 40)))
    assert result.p_value < 1e-6
    assert result.significance_stars == "****"


# =========================================================
# t-tests
# =========================================================
def test_welch_reports_fields():
    rng = np.random.default_rng(0)
    a, b = rng.normal(0.5, 0.1, 30), rng.normal(0.45, 0.3, 45)
    result = welch_t(sample(a, "x"), sample(b, "y"))
    assert result.test is Kind.WELCH_T
    assert (result.n1, result.n2, result.label) == (30, 45, "x vs y")
    # Welch-Satterthwaite lies between the smaller n - 1 and the pooled dof
    assert 29 <= result.dof <= 73


def test_welch_equal_samples_and_location_shift():
    values = [0.2, 0.5, 0.9, 1.4, 2.0]
    same = welch_t(sample(values), sample(values))
    assert same.statistic == pytest.approx(0.0)
    assert same.p_value == pytest.approx(1.0)

    a, b = [1.0, 2.5, 3.1, 4.2], [2.0, 3.9, 4.4, 6.0, 6.1]
    base = welch_t(sample(a), sample(b))
    shifted = welch_t(sample([v + 100 for v in a]), sample([v + 100 for v in b]))
    assert shifted.statistic == pytest.approx(base.statistic)
    assert shifted.p_value == pytest.approx(base.p_value)


def test_student_uses_pooled_dof():
    rng = np.random.default_rng(1)
    result = student_t(sample(rng.normal(0, 1, 12)), sample(rng.normal(3, 1, 15)))
    assert result.test is Kind.STUDENT_T
    assert result.dof == 25
    assert result.statistic < 0


def test_t_tests_reject_degenerate_samples():
    with pytest.raises(InputValidationError, match="n >= 2"):
        welch_t(sample([1.0]), sample([1.0, 2.0]))
    with pytest.raises(InputValidationError, match="zero variance"):
        welch_t(sample([1.0, 1.0]), sample([2.0, 2.0]))
    with pytest.raises(InputValidationError, match="zero variance"):
        student_t(sample([1.0, 1.0]), sample([2.0, 2.0]))


# =========================================================
# Shapiro-Wilk
# =========================================================
def test_shapiro_wilk_accepts_normal_quantile_grid():
    grid = normal_grid(20)
    result = shapiro_wilk(sample(grid, "grid"))
    assert result.test is Kind.SHAPIRO_WILK
    assert 0.95 <= result.statistic <= 1.0
    assert result.p_value > 0.5
    assert (result.n1, result.label) == (20, "grid")


def test_shapiro_wilk_flags_skewed_sample():
    x = np.random.default_rng(2).exponential(1.0, 80)
    assert shapiro_wilk(sample(x)).p_value < 0.05


def test_shapiro_wilk_smallest_sample():
    result = shapiro_wilk(sample([1.0, 2.0, 4.0]))
    assert 0.75 <= result.statistic <= 1.0
    assert 0.0 < result.p_value <= 1.0


def test_shapiro_wilk_bounds():
    with pytest.raises(InputValidationError, match="n=2"):
        shapiro_wilk(sample([1, 2]))
    with pytest.raises(InputValidationError, match="n=5001"):
        shapiro_wilk(sample(range(5001)))
    with pytest.raises(InputValidationError, match="zero variance"):
        shapiro_wilk(sample([3, 3, 3, 3]))


# =========================================================
# Test selection
# =========================================================
def test_routes_to_t_test_when_both_normal():
    a, b = sample([1, 2, 3, 4]), sample([2, 3, 4, 6])
    assert select_and_test(a, b, normality=fake_normality(0.5)).test is Kind.WELCH_T
    assert select_and_test(a, b, t_test="student", normality=fake_normality(0.5)).test is Kind.STUDENT_T


def test_routes_to_mann_whitney_when_either_fails():
    a, b = sample([1, 2, 3, 4]), sample([2, 3, 4, 6])
    assert select_and_test(a, b, normality=fake_normality(0.01)).test is Kind.MANN_WHITNEY_U
    gate = iter([0.5, 0.049])

    def mixed(s):
        return fake_normality(next(gate))(s)

    assert select_and_test(a, b, normality=mixed).test is Kind.MANN_WHITNEY_U


def test_normal_samples_route_to_welch():
    grid = normal_grid(20)
    result = select_and_test(sample(grid, "a"), sample(grid + 0.5, "b"))
    assert result.test is Kind.WELCH_T
    assert result.dof == pytest.approx(38.0)
    assert result.label == "a vs b"


def test_outlier_routes_to_mann_whitney():
    grid = normal_grid(20)
    spoiled = np.append(grid[:-1], 40.0)
    result = select_and_test(sample(grid), sample(spoiled))
    assert result.test is Kind.MANN_WHITNEY_U
    assert result.dof is None
    with pytest.raises(InputValidationError, match="n=2"):
        select_and_test(sample([1, 2]), sample([3, 4]))


def test_unknown_t_test_variant():
    with pytest.raises(InputValidationError, match="unknown t-test"):
        select_and_test(sample([1, 2, 3]), sample([1, 2, 4]), t_test="paired")


@pytest.mark.parametrize(
    "p,stars",
    [(0.05, "ns"), (0.0499, "*"), (0.01, "*"), (0.0099, "**"), (0.001, "**"), (0.0009, "***"), (0.0001, "***"), (0.00009, "****")],
)
def test_significance_stars(p, stars):
    assert significance_stars(p) == stars


# =========================================================
# Box statistics
# =========================================================
def test_box_stats_with_outlier():
    box = box_stats(sample([1, 2, 3, 4, 100]))
    assert (box.q1, box.median, box.q3) == (2.0, 3.0, 4.0)
    assert box.whisker_low == 1.0
    assert box.whisker_high == 4.0
    assert box.outliers == [100.0]


def test_box_stats_single_value():
    box = box_stats(sample([5]))
    assert box.median == box.whisker_low == box.whisker_high == 5.0
    assert box.outliers == []


# =========================================================
# Power analysis
# =========================================================
def test_sample_size_examples():
    assert sample_size_t(0.5, 0.8) == 63
    assert sample_size_t(0.5, 0.8, design="paired") == 32


def test_halving_effect_roughly_quadruples_n():
    ratio = sample_size_t(0.25, 0.8) / sample_size_t(0.5, 0.8)
    assert 3.9 <= ratio <= 4.1


def test_power_grows_with_n():
    powers = [power_t(0.3, n) for n in (10, 20, 50, 100, 400)]
    assert powers == sorted(powers)
    assert powers[-1] > 0.95


def test_power_report_reaches_target():
    report = power_report(0.4, 0.9, alpha=0.01)
    assert report.achieved_power >= 0.9
    assert power_t(0.4, report.n - 1, alpha=0.01) < 0.9


@pytest.mark.parametrize("kwargs", [{"effect_d": 0.0, "power": 0.8}, {"effect_d": 0.5, "power": 1.0}, {"effect_d": 0.5, "power": 0.8, "design": "triple"}])
def test_power_inputs_validated(kwargs):
    with pytest.raises(InputValidationError):
        sample_size_t(**kwargs)


# =========================================================
# CSV analysis
# =========================================================
def test_parse_pairs():
    assert parse_pairs("a:b, c : d") == [("a", "b"), ("c", "d")]
    with pytest.raises(InputValidationError, match="groupA:groupB"):
        parse_pairs("a-b")
    with pytest.raises(InputValidationError, match="no pairs"):
        parse_pairs(" , ")


@pytest.fixture
def survey_csv(tmp_path):
    rng = np.random.default_rng(4)
    lines = ["condition,rating"]
    lines += [f"sdxl,{v:.4f}" for v in rng.normal(3.0, 0.5, 30)]
    lines += [f"sdxl_inc,{v:.4f}" for v in rng.normal(4.0, 0.5, 30)]
    path = tmp_path / "survey.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_analyze_csv(survey_csv):
    analysis = analyze_csv(survey_csv, "condition", "rating", parse_pairs("sdxl:sdxl_inc"))
    [pair] = analysis.pairs
    assert pair.group_a == "sdxl"
    assert pair.result.p_value < 0.001
    assert pair.result.significance_stars in ("***", "****")
    assert pair.box_a.median < pair.box_b.median
    assert analysis.t_test is Kind.WELCH_T


def test_load_groups_errors(survey_csv, tmp_path):
    assert set(load_groups(survey_csv, "condition", "rating")) == {"sdxl", "sdxl_inc"}
    with pytest.raises(InputValidationError, match="column 'score' not found"):
        load_groups(survey_csv, "condition", "score")

    bad = tmp_path / "bad.csv"
    bad.write_text("condition,rating\na,1.0\nb,high\n", encoding="utf-8")
    with pytest.raises(InputValidationError, match="line 3"):
        load_groups(bad, "condition", "rating")


def test_analyze_csv_unknown_group(survey_csv):
    with pytest.raises(InputValidationError, match="'div' not present"):
        analyze_csv(survey_csv, "condition", "rating", [("sdxl", "div")])


def test_power_formula_agrees_with_sample_size():
    n = sample_size_t(0.5, 0.8)
    z = 1.959964 + 0.841621
    assert n == math.ceil(2 * z * z / 0.25)
