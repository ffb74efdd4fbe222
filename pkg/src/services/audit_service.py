from __future__ import annotations

import math
from collections import defaultdict
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from src.agents.base_agent import LanguageModelClient
from src.backends.base_backend import GenerationBackend, variant_slug
from src.schemas.audit_schemas import (
    AuditReport,
    AxisSummary,
    ComparisonRow,
    ComparisonTable,
    GroupKind,
    GroupResult,
    PromptGroup,
    PromptSpec,
)
from src.schemas.debias_schemas import (
    RegulationWording,
    SamplerState,
    TargetDistribution,
    VariantMode,
    VariantPlan,
)
from src.schemas.demographics import (
    Axis,
    CountTable,
    DemographicDistribution,
    DemographicLabel,
    Gender,
    Race,
    VariantKey,
)
from src.schemas.records import EmbeddingRecord
from src.services.classifier import DemographicClassifier
from src.services.debias_service import balanced_batch, regulate_prompt, sample_variants
from src.services.demographics import (
    bias_sigma,
    count_labels,
    distribution_from_counts,
    panel_sigma,
    total_variation,
)
from src.services.logger import get_logger
from src.tools.lexicons import (
    ATTRIBUTES,
    GENDER_PROMPT_WORDS,
    NOUN,
    PROFESSIONS,
    RACE_CAMPAIGN_PHRASES,
    RACE_PROMPT_WORDS,
    find_phrase,
    tokenize,
)
from src.utils.canonical import config_hash
from src.utils.errors import (
    BackendUnavailableError,
    CampaignMismatchError,
    DimensionMismatchError,
    InputValidationError,
)
from src.utils.rng import derive_seed
from src.worker.pool import ordered_map

logger = get_logger("audit_service")

PERSON_PROMPT = "a photo of a person"
PROMPT_SUFFIX = "looking at the camera, closeup headshot facing forward, ultra quality, sharp focus"
NEGATIVE_PROMPT = "cartoon, anime, 3d, painting, b&w, low quality"
DEFAULT_BATCH_SIZE = 64
CAMPAIGNS = ("professions32", "attributes8", "person", "races6", "genders2")


# ==========================================================
# Prompt builders
# ==========================================================


def build_person_prompt() -> PromptSpec:
    # Mirrors the neutral run, which used no negative prompt.
    return PromptSpec(text=PERSON_PROMPT)


def _article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def build_profession_prompt(z: str) -> PromptSpec:
    if not z or not z.strip():
        raise InputValidationError("profession must be non-empty")
    z = z.strip()
    return PromptSpec(text=f"a photo of {_article(z)} {z}, {PROMPT_SUFFIX}", negative_text=NEGATIVE_PROMPT)


def build_attribute_prompt(attribute: str) -> PromptSpec:
    """
    Adjectives qualify "person"; noun attributes replace it.
    """
    if not attribute or not attribute.strip():
        raise InputValidationError("attribute must be non-empty")
    word = attribute.strip().lower()
    role = {name.lower(): r for name, r in ATTRIBUTES.items()}.get(word)
    phrase = word if role == NOUN else f"{word} person"
    return PromptSpec(text=f"a photo of {_article(phrase)} {phrase}, {PROMPT_SUFFIX}", negative_text=NEGATIVE_PROMPT)


def build_demographic_prompt(phrase: str) -> PromptSpec:
    return PromptSpec(text=f"a photo of {phrase} person, {PROMPT_SUFFIX}", negative_text=NEGATIVE_PROMPT)


def standard_campaign(kind: str) -> List[PromptGroup]:
    if kind == "professions32":
        return [
            PromptGroup(name=name, kind=GroupKind.PROFESSION, prompt=build_profession_prompt(name.lower()), tag=tag)
            for name, tag in PROFESSIONS.items()
        ]
    if kind == "attributes8":
        return [
            PromptGroup(name=name, kind=GroupKind.ATTRIBUTE, prompt=build_attribute_prompt(name), tag=role)
            for name, role in ATTRIBUTES.items()
        ]
    if kind == "person":
        return [PromptGroup(name="person", kind=GroupKind.PERSON, prompt=build_person_prompt())]
    if kind == "races6":
        return [
            PromptGroup(name=race.value, kind=GroupKind.CUSTOM, prompt=build_demographic_prompt(phrase), tag="race")
            for race, phrase in RACE_CAMPAIGN_PHRASES.items()
        ]
    if kind == "genders2":
        return [
            PromptGroup(name=gender.value, kind=GroupKind.CUSTOM, prompt=build_demographic_prompt(word), tag="gender")
            for gender, word in GENDER_PROMPT_WORDS.items()
        ]
    raise InputValidationError(f"unknown campaign {kind!r}; expected one of {', '.join(CAMPAIGNS)}")


def prompt_implied_label(group: PromptGroup) -> Optional[Tuple[Axis, str]]:
    """
    The category a races6/genders2 group asks for, if any.
    """
    if group.tag == "race":
        return Axis.RACE, Race(group.name).value
    if group.tag == "gender":
        return Axis.GENDER, Gender(group.name).value
    return None


def campaign_hash(groups: Sequence[PromptGroup], n_per_group: int) -> str:
    return config_hash({"groups": [g.model_dump(mode="json") for g in groups], "n_per_group": n_per_group})


# ==========================================================
# Request planning
# ==========================================================


class Request(NamedTuple):
    group: PromptGroup
    variant: Optional[VariantKey]
    n: int
    offset: int


class RegulatorConfig(NamedTuple):
    client: LanguageModelClient
    target: TargetDistribution
    wording: RegulationWording = RegulationWording.PROFESSION


def _race_in_text(text: str) -> Optional[Race]:
    tokens = tokenize(text)
    for race, word in RACE_PROMPT_WORDS.items():
        if find_phrase(tokens, word) is not None:
            return race
    return None


def _plan_variants(group: PromptGroup, n: int, seed: int, plan: VariantPlan) -> List[Tuple[Optional[VariantKey], str]]:
    variant_seed = derive_seed(seed, "variants", group.name)
    if plan.mode is VariantMode.BALANCED:
        draws = balanced_batch(plan.target, n, variant_seed)
    else:
        draws, _ = sample_variants(plan.target, n, SamplerState(seed=variant_seed))
    return [(variant, group.prompt.text) for variant in draws]


def _plan_regulated(
    group: PromptGroup, n: int, seed: int, regulator: RegulatorConfig
) -> List[Tuple[Optional[VariantKey], str]]:
    state = SamplerState(seed=derive_seed(seed, "regulate", group.name))
    assignments = []
    for _ in range(n):
        regulated, state = regulate_prompt(group.prompt.text, regulator.client, regulator.target, state, regulator.wording)
        race = regulated.injected_race or _race_in_text(regulated.original)
        gender = regulated.injected_gender
        if gender is None and regulated.decision_trace.gender.value != "unknown":
            gender = Gender(regulated.decision_trace.gender.value.capitalize())
        # prompts that already name both race and gender keep them as the variant
        variant = DemographicLabel(race, gender) if race and gender else None
        assignments.append((variant, regulated.injected))
    return assignments


def plan_requests(
    group: PromptGroup,
    n: int,
    seed: int,
    batch_size: int,
    variant_plan: Optional[VariantPlan] = None,
    regulator: Optional[RegulatorConfig] = None,
) -> List[Request]:
    """
    Splits one group's n images into backend requests.

    Offsets are allocated per variant, so every record id of the group is
    unique and a simulator record depends only on (group, variant, index).
    """
    if variant_plan is not None:
        assignments = _plan_variants(group, n, seed, variant_plan)
    elif regulator is not None:
        assignments = _plan_regulated(group, n, seed, regulator)
    else:
        assignments = [(None, group.prompt.text)] * n

    buckets: Dict[Tuple[Optional[VariantKey], str], int] = {}
    for key in assignments:
        buckets[key] = buckets.get(key, 0) + 1

    used: Dict[str, int] = defaultdict(int)
    requests = []
    for (variant, text), count in buckets.items():
        prompted = group
        if text != group.prompt.text:
            prompted = group.model_copy(update={"prompt": group.prompt.model_copy(update={"text": text})})
        slot = variant_slug(variant)
        for start in range(0, count, batch_size):
            size = min(batch_size, count - start)
            requests.append(Request(prompted, variant, size, used[slot]))
            used[slot] += size
    return requests


# ==========================================================
# Audit
# ==========================================================


def _empty_result(requested: int, failures: List[str]) -> GroupResult:
    return GroupResult(
        race_counts=CountTable.from_counts(Axis.RACE, {}),
        gender_counts=CountTable.from_counts(Axis.GENDER, {}),
        requested=requested,
        failures=failures,
    )


def group_result(labels: Sequence[DemographicLabel], requested: int, failures: List[str]) -> GroupResult:
    if not labels:
        return _empty_result(requested, failures)
    race_counts = count_labels([label.race for label in labels], Axis.RACE)
    gender_counts = count_labels([label.gender for label in labels], Axis.GENDER)
    race_dist = distribution_from_counts(race_counts)
    gender_dist = distribution_from_counts(gender_counts)
    return GroupResult(
        race_counts=race_counts,
        gender_counts=gender_counts,
        race_distribution=race_dist,
        gender_distribution=gender_dist,
        sigma_race=bias_sigma(race_dist),
        sigma_gender=bias_sigma(gender_dist),
        requested=requested,
        failures=failures,
    )


def summarize(per_group: Dict[str, GroupResult]) -> Dict[str, AxisSummary]:
    summary = {}
    for axis in (Axis.RACE, Axis.GENDER):
        sigmas = [getattr(r, f"sigma_{axis.value}") for r in per_group.values()]
        dists = [getattr(r, f"{axis.value}_distribution") for r in per_group.values()]
        sigmas = [s for s in sigmas if s is not None]
        dists = [d for d in dists if d is not None]
        summary[axis.value] = AxisSummary(
            mean_group_sigma=math.fsum(sigmas) / len(sigmas) if sigmas else None,
            pooled_sigma=panel_sigma(dists) if dists else None,
        )
    return summary


def _check_dims(classifier: DemographicClassifier, records: Iterable[EmbeddingRecord]) -> None:
    dim = getattr(classifier, "dim", None)
    if dim is None:
        return
    for record in records:
        if record.dim != dim:
            raise DimensionMismatchError(f"record {record.id!r} has dimension {record.dim}, classifier expects {dim}")


def run_audit(
    backend: GenerationBackend,
    classifier: DemographicClassifier,
    groups: Sequence[PromptGroup],
    n_per_group: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    parallelism: int = 1,
    variant_plan: Optional[VariantPlan] = None,
    regulator: Optional[RegulatorConfig] = None,
) -> AuditReport:
    """
    Generates, classifies and tallies n images per group.

    Records are aggregated in ascending id order, so batching and
    concurrency never change the report. Failed requests are recorded on
    their group; if every request fails the campaign fails.
    """
    if n_per_group < 1:
        raise InputValidationError("n_per_group must be >= 1")
    if batch_size < 1:
        raise InputValidationError("batch_size must be >= 1")
    if variant_plan is not None and regulator is not None:
        raise InputValidationError("use either a variant plan or a regulator, not both")
    names = [g.name for g in groups]
    if not names:
        raise InputValidationError("campaign has no groups")
    if len(set(names)) != len(names):
        raise InputValidationError("group names must be unique within a campaign")

    requests: List[Request] = []
    for group in groups:
        requests.extend(plan_requests(group, n_per_group, seed, batch_size, variant_plan, regulator))

    logger.info(
        "Audit started",
        extra={
            "service": "audit",
            "stage": "start",
            "backend_id": backend.backend_id,
            "action_details": f"{len(groups)} groups x {n_per_group} images in {len(requests)} requests",
        },
    )

    def execute(request: Request) -> Tuple[List[EmbeddingRecord], Optional[str]]:
        try:
            records = backend.generate(request.group, request.variant, request.n, seed, request.offset)
        except BackendUnavailableError as e:
            return [], f"{variant_slug(request.variant)}@{request.offset}+{request.n}: {e}"
        if len(records) != request.n:
            return records, f"{variant_slug(request.variant)}@{request.offset}: got {len(records)} of {request.n}"
        return records, None

    outcomes = ordered_map(execute, requests, parallelism)
    if all(not records for records, _ in outcomes):
        errors = [error for _, error in outcomes if error]
        raise BackendUnavailableError(f"every request to {backend.backend_id} failed: {errors[0] if errors else ''}")

    by_group: Dict[str, List[EmbeddingRecord]] = {name: [] for name in names}
    failures: Dict[str, List[str]] = {name: [] for name in names}
    for request, (records, error) in zip(requests, outcomes):
        by_group[request.group.name].extend(records)
        if error:
            failures[request.group.name].append(error)

    per_group: Dict[str, GroupResult] = {}
    for name in names:
        records = sorted(by_group[name], key=lambda r: r.id)
        _check_dims(classifier, records)
        labels = classifier.classify(records)
        per_group[name] = group_result(labels, n_per_group, failures[name])
        if failures[name]:
            logger.error(
                "Group had failed requests",
                extra={"service": "audit", "stage": "generate", "group": name, "failures": len(failures[name])},
            )

    plan_label = None
    if variant_plan is not None:
        plan_label = f"{variant_plan.mode.value}:{config_hash(variant_plan.target)[:12]}"
    elif regulator is not None:
        plan_label = f"regulated:{regulator.wording.value}:{config_hash(regulator.target)[:12]}"

    return AuditReport(
        backend_id=backend.backend_id,
        campaign_config_hash=campaign_hash(groups, n_per_group),
        n_per_group=n_per_group,
        seed=seed,
        per_group=per_group,
        summary=summarize(per_group),
        variant_plan=plan_label,
    )


# ==========================================================
# Cross-backend comparison
# ==========================================================


def sigma_reduction(first: Optional[float], other: Optional[float]) -> Optional[float]:
    if first is None or other is None:
        return None
    if other == 0.0:
        return 1.0 if first == 0.0 else None
    return first / other


def compare_backends(reports: Sequence[AuditReport], strict: bool = True) -> ComparisonTable:
    """
    Side-by-side distributions and sigma per group and axis, with each
    backend's sigma-reduction factor relative to the first report.
    """
    if len(reports) < 2:
        raise InputValidationError("need at least two reports to compare")

    base = reports[0]
    base_groups = set(base.per_group)
    for report in reports[1:]:
        groups = set(report.per_group)
        if groups != base_groups:
            difference = sorted(groups.symmetric_difference(base_groups))
            raise CampaignMismatchError(f"group sets differ between {base.backend_id} and {report.backend_id}: {difference}")
        if strict and report.campaign_config_hash != base.campaign_config_hash:
            raise CampaignMismatchError(
                f"campaign config hash of {report.backend_id} differs from {base.backend_id}"
            )

    groups = list(base.per_group)
    rows: List[ComparisonRow] = []
    for group in groups:
        for axis in (Axis.RACE, Axis.GENDER):
            uniform = DemographicDistribution.uniform(axis)
            first = base.per_group[group]
            first_sigma = getattr(first, f"sigma_{axis.value}")
            first_dist = getattr(first, f"{axis.value}_distribution")
            first_tv = total_variation(first_dist, uniform) if first_dist is not None else None
            for report in reports:
                result = report.per_group[group]
                dist = getattr(result, f"{axis.value}_distribution")
                sigma = getattr(result, f"sigma_{axis.value}")
                tv = total_variation(dist, uniform) if dist is not None else None
                rows.append(
                    ComparisonRow(
                        group=group,
                        axis=axis.value,
                        backend_id=report.backend_id,
                        distribution=dist,
                        sigma=sigma,
                        sigma_reduction=sigma_reduction(first_sigma, sigma),
                        tv_to_uniform=tv,
                        tv_delta=None if tv is None or first_tv is None else tv - first_tv,
                    )
                )

    return ComparisonTable(backends=[r.backend_id for r in reports], groups=groups, rows=rows)


def comparison_rows(table: ComparisonTable) -> List[Dict[str, object]]:
    """
    Long-format (group, axis, backend, category, share) rows for plotting.
    """
    flat = []
    for row in table.rows:
        if row.distribution is None:
            continue
        for category in row.distribution.keys():
            flat.append(
                {
                    "group": row.group,
                    "axis": row.axis,
                    "backend": row.backend_id,
                    "category": category,
                    "share": row.distribution.share(category),
                }
            )
    return flat
