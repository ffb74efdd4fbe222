from __future__ import annotations

from typing import List, Optional, Sequence

from src.agents.base_agent import LanguageModelClient
from src.schemas.debias_schemas import RegulationWording
from src.services.debias_service import split_regulation_query
from src.tools.lexicons import (
    FEMALE_WORDS,
    MALE_WORDS,
    PERSON_WORDS,
    RACE_NATIONALITY_WORDS,
    SOCIAL_MEDIA_WORDS,
    contains_any,
    find_phrase,
    profession_surface_forms,
    tokenize,
)


def _first_hit(tokens: Sequence[str], phrases: Sequence[str]) -> Optional[tuple]:
    best = None
    for phrase in phrases:
        index = find_phrase(tokens, phrase)
        if index is not None and (best is None or index < best[0]):
            best = (index, phrase)
    return best


class RuleBasedMock(LanguageModelClient):
    """
    Offline, deterministic stand-in for the chat model.

    Answers the regulation query from keyword tables: the profession list,
    a race/nationality lexicon and gendered words.
    """

    def __init__(self) -> None:
        super().__init__(client_name="RuleBasedMock")

    def subject_of(self, tokens: List[str], wording: RegulationWording) -> Optional[str]:
        forms = [form for form, _ in profession_surface_forms()]
        hit = _first_hit(tokens, forms)
        if hit is None:
            hit = _first_hit(tokens, SOCIAL_MEDIA_WORDS)
        if hit is None and wording is RegulationWording.PERSON:
            hit = _first_hit(tokens, PERSON_WORDS)
        return hit[1] if hit else None

    def gender_of(self, tokens: List[str]) -> str:
        female = _first_hit(tokens, FEMALE_WORDS)
        male = _first_hit(tokens, MALE_WORDS)
        if female and (not male or female[0] <= male[0]):
            return "female"
        if male:
            return "male"
        return "unknown"

    def query(self, text: str) -> str:
        prompt, wording = split_regulation_query(text)
        tokens = tokenize(prompt)

        subject = self.subject_of(tokens, wording)
        has_subject = "yes" if subject else "no"
        demographic = "yes" if contains_any(tokens, RACE_NATIONALITY_WORDS) else "no"
        answer = f"1) {has_subject} 2) {subject or 'none'} 3) {demographic} 4) {self.gender_of(tokens)}"

        self.log_action("Regulation query answered", extra={"answer": answer})
        return answer
