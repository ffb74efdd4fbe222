from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from src.agents.base_agent import LanguageModelClient
from src.schemas.debias_schemas import (
    GenderAnswer,
    RegulatedPrompt,
    RegulationAnswers,
    RegulationWording,
    SamplerState,
    TargetDistribution,
    YesNo,
)
from src.schemas.demographics import AXIS_KEYS, CELLS, Axis, DemographicDistribution, Gender, Race, VariantKey
from src.services.demographics import inverse_cdf
from src.services.logger import get_logger
from src.tools.lexicons import GENDER_PROMPT_WORDS, RACE_PROMPT_WORDS
from src.utils.errors import InputValidationError, MalformedRegulationResponse
from src.utils.rng import stream

logger = get_logger("debias_service")

WORDING_PHRASES: Dict[RegulationWording, str] = {
    RegulationWording.PROFESSION: "any profession or a social media influencer",
    RegulationWording.PERSON: "any person",
}

_QUERY_HEAD = 'For this text "'
_QUERY_TAIL = '": 1) select using one word'


# ==========================================================
# Variant selection
# ==========================================================


def sample_variant(target: TargetDistribution, state: SamplerState) -> Tuple[VariantKey, SamplerState]:
    """
    One i.i.d. categorical draw over the 12 cells; returns the advanced state.
    """
    u = float(stream(state.seed, "variant", state.position).random())
    return inverse_cdf(target.cells, u), state.advance()


def sample_variants(target: TargetDistribution, n: int, state: SamplerState) -> Tuple[List[VariantKey], SamplerState]:
    draws = []
    for _ in range(n):
        variant, state = sample_variant(target, state)
        draws.append(variant)
    return draws, state


def apportion(target: TargetDistribution, n: int) -> Dict[VariantKey, int]:
    """
    Largest-remainder apportionment of n over the cells; remainder ties go
    to the earlier cell.
    """
    if n < 1:
        raise InputValidationError("n must be >= 1")

    quotas = [n * p for p in target.cells.vector()]
    counts = [math.floor(q) for q in quotas]
    leftover = n - sum(counts)
    order = sorted(range(len(CELLS)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return {cell: count for cell, count in zip(CELLS, counts)}


def balanced_batch(target: TargetDistribution, n: int, seed: int) -> List[VariantKey]:
    counts = apportion(target, n)
    batch = [cell for cell, count in counts.items() for _ in range(count)]
    permutation = stream(seed, "balanced", n).permutation(len(batch))
    return [batch[i] for i in permutation]


def load_target(spec: str) -> TargetDistribution:
    """
    "uniform" or a JSON file mapping "Race/Gender" cell keys to probabilities.
    Cells missing from the file get probability 0.
    """
    if spec == "uniform":
        return TargetDistribution.uniform()

    try:
        raw = json.loads(Path(spec).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InputValidationError(f"target file not found: {spec}") from e
    except json.JSONDecodeError as e:
        raise InputValidationError(f"target file is not valid JSON: {e}") from e

    if not isinstance(raw, dict):
        raise InputValidationError("target file must contain a JSON object")

    unknown = sorted(set(raw) - set(AXIS_KEYS[Axis.CELL]))
    if unknown:
        raise InputValidationError(f"unknown target cells {unknown}; expected keys like 'Asian/Female'")

    try:
        cells = DemographicDistribution(
            axis=Axis.CELL,
            probabilities={k: float(raw.get(k, 0.0)) for k in AXIS_KEYS[Axis.CELL]},
        )
        return TargetDistribution(cells=cells)
    except (ValidationError, TypeError, ValueError) as e:
        raise InputValidationError(f"invalid target distribution: {e}") from e


# ==========================================================
# Prompt regulation
# ==========================================================


def build_regulation_query(prompt: str, wording: RegulationWording = RegulationWording.PROFESSION) -> str:
    return (
        f"{_QUERY_HEAD}{prompt}{_QUERY_TAIL} ['yes','no'] if text includes {WORDING_PHRASES[wording]} "
        "2) find the subject practicing the job. "
        "3) select using one word ['yes','no'] if the text includes any country, nationality, or race or ethnicity. "
        "4) select using one word ['female', 'male', 'unknown'] the subject's gender"
    )


def split_regulation_query(query: str) -> Tuple[str, RegulationWording]:
    """
    Recovers the prompt and wording embedded by build_regulation_query.
    """
    if not query.startswith(_QUERY_HEAD) or _QUERY_TAIL not in query:
        raise InputValidationError("not a regulation query")
    prompt = query[len(_QUERY_HEAD):query.rindex(_QUERY_TAIL)]
    rest = query[query.rindex(_QUERY_TAIL):]
    wording = RegulationWording.PERSON
    if WORDING_PHRASES[RegulationWording.PROFESSION] in rest:
        wording = RegulationWording.PROFESSION
    return prompt, wording


_MARKER = re.compile(r"(?:^|(?<=\s))([1-4])\s*[).:\-]")
_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_GENDER = re.compile(r"\b(female|male|unknown)\b", re.IGNORECASE)
_ARTICLE = re.compile(r"^(?:a|an|the)\s+", re.IGNORECASE)


def _answer_segments(text: str) -> Dict[int, str]:
    segments: Dict[int, str] = {}
    expected = 1
    starts: List[Tuple[int, int, int]] = []
    for match in _MARKER.finditer(text):
        if int(match.group(1)) == expected:
            starts.append((expected, match.start(), match.end()))
            expected += 1
    for i, (number, _, body_start) in enumerate(starts):
        body_end = starts[i + 1][1] if i + 1 < len(starts) else len(text)
        segments[number] = text[body_start:body_end].strip()
    return segments


def parse_regulation(text: str) -> RegulationAnswers:
    """
    Tolerant parse of the four numbered answers; case and surrounding prose
    are ignored.
    """
    segments = _answer_segments(text)

    def pick(number: int, pattern: re.Pattern, field: str) -> str:
        match = pattern.search(segments.get(number, ""))
        if match is None:
            raise MalformedRegulationResponse(text, field)
        return match.group(1).lower()

    has_person = YesNo(pick(1, _YES_NO, "has_person_or_profession"))
    demographic = YesNo(pick(3, _YES_NO, "demographic_specified"))
    gender = GenderAnswer(pick(4, _GENDER, "gender"))

    subject = segments.get(2, "").strip().strip("\"'.,;")
    if has_person is YesNo.YES and not subject:
        raise MalformedRegulationResponse(text, "subject")

    return RegulationAnswers(
        has_person_or_profession=has_person,
        subject=subject,
        demographic_specified=demographic,
        gender=gender,
    )


def _subject_span(prompt: str, subject: str) -> Optional[int]:
    """
    Start index of the subject in the prompt, falling back to its last word.
    """
    phrase = _ARTICLE.sub("", subject.strip())
    candidates = [phrase] + phrase.split()[::-1]
    for candidate in candidates:
        if not candidate:
            continue
        match = re.search(rf"\b{re.escape(candidate)}\b", prompt, re.IGNORECASE)
        if match:
            return match.start()
    return None


def inject_words(prompt: str, subject: str, words: str) -> Optional[str]:
    """
    Inserts `words` directly before the subject, fixing a preceding a/an.
    """
    start = _subject_span(prompt, subject)
    if start is None:
        return None

    head, tail = prompt[:start], prompt[start:]
    article = re.search(r"\b(an?)\s+$", head, re.IGNORECASE)
    if article:
        fixed = "an" if words[:1].lower() in "aeiou" else "a"
        if article.group(1)[0].isupper():
            fixed = fixed.capitalize()
        head = head[:article.start(1)] + fixed + head[article.end(1):]
    return f"{head}{words} {tail}"


def _draw_missing(
    target: TargetDistribution, need_race: bool, need_gender: bool, state: SamplerState
) -> Tuple[Optional[Race], Optional[Gender]]:
    u = float(stream(state.seed, "regulate", state.position).random())
    if need_race and need_gender:
        cell = inverse_cdf(target.cells, u)
        return cell.race, cell.gender
    if need_race:
        return inverse_cdf(target.cells.marginal(Axis.RACE), u), None
    return None, inverse_cdf(target.cells.marginal(Axis.GENDER), u)


def regulate_prompt(
    prompt: str,
    client: LanguageModelClient,
    target: TargetDistribution,
    state: SamplerState,
    wording: RegulationWording = RegulationWording.PROFESSION,
) -> Tuple[RegulatedPrompt, SamplerState]:
    """
    Asks the client the four regulation questions and injects whichever of
    race and gender the prompt leaves open, drawn from the target.
    """
    if not prompt or not prompt.strip():
        raise InputValidationError("prompt must be non-empty")

    raw = client.query(build_regulation_query(prompt, wording))
    answers = parse_regulation(raw)
    unchanged = RegulatedPrompt(original=prompt, injected=prompt, decision_trace=answers)

    need_race = answers.demographic_specified is YesNo.NO
    need_gender = answers.gender is GenderAnswer.UNKNOWN
    if answers.has_person_or_profession is YesNo.NO or not (need_race or need_gender):
        return unchanged, state

    race, gender = _draw_missing(target, need_race, need_gender, state)
    parts = []
    if race is not None:
        parts.append(RACE_PROMPT_WORDS[race])
    if gender is not None:
        parts.append(GENDER_PROMPT_WORDS[gender])
    words = " ".join(parts)
    injected = inject_words(prompt, answers.subject, words)
    if injected is None:
        raise MalformedRegulationResponse(raw, "subject")

    logger.info(
        "Prompt regulated",
        extra={"service": "debias", "stage": "regulate", "action_details": f"injected {words!r}"},
    )
    regulated = RegulatedPrompt(
        original=prompt,
        injected=injected,
        injected_race=race,
        injected_gender=gender,
        decision_trace=answers,
    )
    return regulated, state.advance()
