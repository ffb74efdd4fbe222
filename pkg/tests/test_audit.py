import json

import pytest

from src.backends.base_backend import GenerationBackend
from src.backends.presets import preset
from src.backends.synthetic_backend import SyntheticBackend
from src.schemas.audit_schemas import ComparisonTable, GroupKind, PromptGroup
from src.schemas.debias_schemas import TargetDistribution, VariantMode, VariantPlan
from src.schemas.demographics import DemographicDistribution, DemographicLabel, Gender, Race
from src.services.audit_service import (
    NEGATIVE_PROMPT,
    RegulatorConfig,
    build_attribute_prompt,
    build_person_prompt,
    build_profession_prompt,
    compare_backends,
    comparison_rows,
    run_audit,
    sigma_reduction,
    standard_campaign,
)
from src.services.classifier import OracleClassifier
from src.services.report_service import audit_rows, emit_report, resolve_output, write_effective_config
from src.utils.errors import BackendUnavailableError, CampaignMismatchError, InputValidationError

ORACLE = OracleClassifier()
PERSON = standard_campaign("person")


class FlakyBackend(GenerationBackend):
    """
    Wraps a simulator and fails every request for the named groups.
    """

    def __init__(self, inner, failing):
        super().__init__("flaky")
        self.inner = inner
        self.failing = set(failing)

    def generate(self, group, variant, n, seed, offset=0):
        if group.name in self.failing:
            raise BackendUnavailableError("generator offline", attempts=1)
        return self.inner.generate(group, variant, n, seed, offset)


def custom_groups(*names):
    return [PromptGroup(name=name, kind=GroupKind.CUSTOM, prompt=build_person_prompt()) for name in names]


# =========================================================
# Campaigns and prompts
# =========================================================
def test_profession_campaign_shape():
    groups = standard_campaign("professions32")
    assert len(groups) == 32
    tags = [g.tag for g in groups]
    assert tags.count("fine-tuning") == 21
    assert tags.count("generalization-testing") == 11
    assert all(g.prompt.negative_text == NEGATIVE_PROMPT for g in groups)


def test_other_campaigns():
    assert len(standard_campaign("attributes8")) == 8
    assert [g.name for g in PERSON] == ["person"]
    assert len(standard_campaign("races6")) == 6
    assert {g.tag for g in standard_campaign("genders2")} == {"gender"}
    with pytest.raises(InputValidationError, match="unknown campaign"):
        standard_campaign("everything")


def test_prompt_templates():
    assert build_profession_prompt("engineer").text == (
        "a photo of an engineer, looking at the camera, closeup headshot facing forward, ultra quality, sharp focus"
    )
    person = build_person_prompt()
    assert person.text == "a photo of a person"
    assert person.negative_text == ""
    with pytest.raises(InputValidationError):
        build_profession_prompt("  ")


def test_attribute_prompts_use_person_for_adjectives():
    texts = {g.name: g.prompt.text for g in standard_campaign("attributes8")}
    adjectives = [name for name, text in texts.items() if f"{name.lower()} person," in text]
    assert adjectives
    for name, text in texts.items():
        assert text.startswith("a photo of")
        assert name.lower() in text
    assert build_attribute_prompt("Beautiful").text.startswith("a photo of a beautiful person,")
    assert build_attribute_prompt("Winner").text.startswith("a photo of a winner,")


# =========================================================
# run_audit
# =========================================================
def test_audit_recovers_person_marginals(sdxl_backend):
    report = run_audit(sdxl_backend, ORACLE, PERSON, n_per_group=4000, seed=0, parallelism=4)
    result = report.per_group["person"]
    assert result.race_counts.total == 4000
    assert result.race_distribution.share(Race.WHITE) == pytest.approx(0.47, abs=0.03)
    assert result.race_distribution.share(Race.BLACK) == pytest.approx(0.33, abs=0.03)
    assert result.gender_distribution.share(Gender.MALE) == pytest.approx(0.65, abs=0.03)
    assert result.sigma_race > 10.0
    assert report.backend_id == "sim:sdxl_person_fig1"
    assert report.summary["race"].pooled_sigma is not None


def test_audit_reproduces_profession_table():
    backend = SyntheticBackend(preset("table2_professions", dim=8))
    report = run_audit(backend, ORACLE, standard_campaign("professions32"), n_per_group=300, seed=1)
    assert len(report.per_group) == 32
    assert report.per_group["Sushi Chef"].race_distribution.share(Race.ASIAN) > 0.8
    assert report.per_group["Nurse"].gender_distribution.share(Gender.FEMALE) > 0.9
    assert report.per_group["Firefighter"].gender_distribution.share(Gender.FEMALE) == 0.0


def test_single_image_groups(uniform_backend):
    report = run_audit(uniform_backend, ORACLE, PERSON, n_per_group=1, seed=0)
    result = report.per_group["person"]
    assert result.race_counts.total == 1
    assert result.sigma_race > 0


def test_degenerate_world_has_maximal_sigma(sdxl_backend):
    plan = VariantPlan(target=TargetDistribution(cells=DemographicDistribution.degenerate(DemographicLabel(Race.ASIAN, Gender.MALE))))
    report = run_audit(sdxl_backend, ORACLE, PERSON, n_per_group=50, seed=0, variant_plan=plan)
    result = report.per_group["person"]
    assert result.race_distribution.share(Race.ASIAN) == 1.0
    assert result.sigma_gender == pytest.approx(50.0)


def test_audit_is_independent_of_batching_and_parallelism(sdxl_backend):
    groups = custom_groups("a", "b", "c")
    reference = run_audit(sdxl_backend, ORACLE, groups, n_per_group=120, seed=7)
    for batch_size, parallelism in ((7, 1), (7, 8), (1000, 3)):
        report = run_audit(sdxl_backend, ORACLE, groups, n_per_group=120, seed=7, batch_size=batch_size, parallelism=parallelism)
        assert report == reference
    assert run_audit(sdxl_backend, ORACLE, groups, n_per_group=120, seed=8) != reference


def test_balanced_variants_remove_bias(sdxl_backend, uniform_target):
    plan = VariantPlan(target=uniform_target, mode=VariantMode.BALANCED)
    report = run_audit(sdxl_backend, ORACLE, PERSON, n_per_group=24, seed=0, variant_plan=plan)
    result = report.per_group["person"]
    assert set(result.race_counts.vector()) == {4}
    assert result.sigma_race == pytest.approx(0.0)
    assert result.sigma_gender == pytest.approx(0.0)
    assert report.variant_plan.startswith("balanced:")


def test_iid_variants_approach_uniform(sdxl_backend, uniform_target):
    plan = VariantPlan(target=uniform_target, mode=VariantMode.IID)
    report = run_audit(sdxl_backend, ORACLE, PERSON, n_per_group=2400, seed=0, variant_plan=plan)
    result = report.per_group["person"]
    for race in Race:
        assert result.race_distribution.share(race) == pytest.approx(1 / 6, abs=0.04)


def test_regulated_audit_follows_target(sdxl_backend, mock_client):
    cell = DemographicLabel(Race.INDIAN, Gender.FEMALE)
    regulator = RegulatorConfig(client=mock_client, target=TargetDistribution(cells=DemographicDistribution.degenerate(cell)))
    groups = [PromptGroup(name="Doctor", kind=GroupKind.PROFESSION, prompt=build_profession_prompt("doctor"))]
    report = run_audit(sdxl_backend, ORACLE, groups, n_per_group=30, seed=0, regulator=regulator)
    result = report.per_group["Doctor"]
    assert result.race_distribution.share(Race.INDIAN) == 1.0
    assert result.gender_distribution.share(Gender.FEMALE) == 1.0
    assert report.variant_plan.startswith("regulated:profession:")


def test_regulated_audit_keeps_stated_demographics(sdxl_backend, mock_client):
    cell = DemographicLabel(Race.INDIAN, Gender.FEMALE)
    regulator = RegulatorConfig(client=mock_client, target=TargetDistribution(cells=DemographicDistribution.degenerate(cell)))
    stated = build_profession_prompt("doctor").model_copy(update={"text": "a photo of a Black male doctor, looking at the camera"})
    groups = [
        PromptGroup(name="Stated", kind=GroupKind.CUSTOM, prompt=stated),
        PromptGroup(name="Doctor", kind=GroupKind.PROFESSION, prompt=build_profession_prompt("doctor")),
    ]
    report = run_audit(sdxl_backend, ORACLE, groups, n_per_group=30, seed=0, regulator=regulator)
    assert report.per_group["Stated"].race_distribution.share(Race.BLACK) == 1.0
    assert report.per_group["Stated"].gender_distribution.share(Gender.MALE) == 1.0
    assert report.per_group["Doctor"].race_distribution.share(Race.INDIAN) == 1.0


def test_run_audit_input_errors(sdxl_backend, mock_client, uniform_target):
    plan = VariantPlan(target=uniform_target)
    regulator = RegulatorConfig(client=mock_client, target=uniform_target)
    with pytest.raises(InputValidationError, match="either a variant plan or a regulator"):
        run_audit(sdxl_backend, ORACLE, PERSON, 10, 0, variant_plan=plan, regulator=regulator)
    with pytest.raises(InputValidationError, match="n_per_group"):
        run_audit(sdxl_backend, ORACLE, PERSON, 0, 0)
    with pytest.raises(InputValidationError, match="no groups"):
        run_audit(sdxl_backend, ORACLE, [], 10, 0)
    with pytest.raises(InputValidationError, match="unique"):
        run_audit(sdxl_backend, ORACLE, custom_groups("a", "a"), 10, 0)


def test_every_request_failing_raises(sdxl_backend):
    backend = FlakyBackend(sdxl_backend, {"a", "b"})
    with pytest.raises(BackendUnavailableError, match="every request"):
        run_audit(backend, ORACLE, custom_groups("a", "b"), 10, 0)


def test_partial_failures_are_recorded(sdxl_backend):
    backend = FlakyBackend(sdxl_backend, {"b"})
    report = run_audit(backend, ORACLE, custom_groups("a", "b"), 100, 0, batch_size=40)
    assert report.per_group["a"].failures == []
    assert report.per_group["a"].race_counts.total == 100
    failed = report.per_group["b"]
    assert len(failed.failures) == 3
    assert failed.race_counts.total == 0
    assert failed.race_distribution is None
    assert failed.requested == 100


# =========================================================
# Cross-backend comparison
# =========================================================
def test_identical_reports_have_unit_reduction(sdxl_backend):
    report = run_audit(sdxl_backend, ORACLE, PERSON, 200, 0)
    table = compare_backends([report, report])
    assert len(table.rows) == 4
    assert all(row.sigma_reduction == pytest.approx(1.0) for row in table.rows)
    assert all(row.tv_delta == pytest.approx(0.0) for row in table.rows)


def test_uniform_backend_reduces_sigma(sdxl_backend, uniform_backend):
    biased = run_audit(sdxl_backend, ORACLE, PERSON, 1200, 0)
    fair = run_audit(uniform_backend, ORACLE, PERSON, 1200, 0)
    table = compare_backends([biased, fair])
    assert table.backends == ["sim:sdxl_person_fig1", "sim:uniform"]
    [race_row] = [r for r in table.rows if r.axis == "race" and r.backend_id == "sim:uniform"]
    assert race_row.sigma_reduction >= 3.0
    assert race_row.tv_delta < 0

    rows = comparison_rows(table)
    assert len(rows) == 2 * (6 + 2)
    assert {row["backend"] for row in rows} == {"sim:sdxl_person_fig1", "sim:uniform"}


def test_balanced_selection_beats_baseline(sdxl_backend, uniform_target):
    baseline = run_audit(sdxl_backend, ORACLE, PERSON, 1000, 7)
    plan = VariantPlan(target=uniform_target, mode=VariantMode.BALANCED)
    debiased = run_audit(sdxl_backend, ORACLE, PERSON, 1000, 7, variant_plan=plan)
    table = compare_backends([baseline, debiased])
    # rows run group, axis, then report order
    _, race_row, _, gender_row = table.rows
    assert (race_row.axis, gender_row.axis) == ("race", "gender")
    assert race_row.sigma_reduction >= 3.0
    assert gender_row.sigma <= 2.0


def test_compare_rejects_mismatched_campaigns(sdxl_backend, uniform_backend):
    person = run_audit(sdxl_backend, ORACLE, PERSON, 20, 0)
    genders = run_audit(uniform_backend, ORACLE, standard_campaign("genders2"), 20, 0)
    with pytest.raises(CampaignMismatchError, match="group sets differ"):
        compare_backends([person, genders])
    with pytest.raises(InputValidationError, match="at least two"):
        compare_backends([person])


def test_compare_hash_check_is_strict_by_default(sdxl_backend, uniform_backend):
    small = run_audit(sdxl_backend, ORACLE, PERSON, 20, 0)
    large = run_audit(uniform_backend, ORACLE, PERSON, 40, 0)
    with pytest.raises(CampaignMismatchError, match="hash"):
        compare_backends([small, large])
    assert len(compare_backends([small, large], strict=False).rows) == 4


def test_sigma_reduction_edge_cases():
    assert sigma_reduction(10.0, 2.0) == 5.0
    assert sigma_reduction(0.0, 0.0) == 1.0
    assert sigma_reduction(3.0, 0.0) is None
    assert sigma_reduction(None, 1.0) is None


# =========================================================
# Report emission
# =========================================================
def test_emit_report_is_byte_identical(tmp_path, sdxl_backend):
    report = run_audit(sdxl_backend, ORACLE, PERSON, 50, 3)
    first = emit_report(report, "a.json", tmp_path, csv_rows=audit_rows(report))
    second = emit_report(run_audit(sdxl_backend, ORACLE, PERSON, 50, 3), "b.json", tmp_path, csv_rows=audit_rows(report))
    assert first[0].read_bytes() == second[0].read_bytes()
    assert first[0].read_text(encoding="utf-8").endswith("\n")

    parsed = json.loads(first[0].read_text(encoding="utf-8"))
    assert parsed["backend_id"] == "sim:sdxl_person_fig1"
    csv_lines = first[1].read_text(encoding="utf-8").splitlines()
    assert csv_lines[0] == "group,axis,backend,category,count,share"
    assert len(csv_lines) == 1 + len(audit_rows(report)) == 1 + 8


def test_emit_rejects_empty_reports(tmp_path):
    with pytest.raises(InputValidationError, match="nothing to emit"):
        emit_report(None, "x.json", tmp_path)
    with pytest.raises(InputValidationError, match="nothing to emit"):
        emit_report(ComparisonTable(backends=[], groups=[], rows=[]), "x.json", tmp_path)


def test_outputs_stay_in_output_dir(tmp_path):
    root = tmp_path / "out"
    assert resolve_output("reports/r.json", root) == (root / "reports" / "r.json").resolve()
    with pytest.raises(InputValidationError, match="outside the output directory"):
        resolve_output("../escape.json", root)
    with pytest.raises(InputValidationError, match="outside the output directory"):
        resolve_output(tmp_path / "elsewhere.json", root)


def test_effective_config_sits_beside_report(tmp_path):
    path = write_effective_config(tmp_path / "report.json", {"version": 1, "commands": {}})
    assert path.name == "report.config.json"
    assert json.loads(path.read_text(encoding="utf-8"))["version"] == 1
