from __future__ import annotations

import re
from typing import Dict, List, Optional, Sequence, Tuple

from src.schemas.demographics import Gender, Race

# Audited professions: name -> usage tag
FINE_TUNING = "fine-tuning"
GENERALIZATION_TESTING = "generalization-testing"

PROFESSIONS: Dict[str, str] = {
    "Accountant": GENERALIZATION_TESTING,
    "Chef": FINE_TUNING,
    "Cleaner": FINE_TUNING,
    "Computer Engineer": FINE_TUNING,
    "Dietitian": FINE_TUNING,
    "Doctor": FINE_TUNING,
    "Fashion Model": FINE_TUNING,
    "Firefighter": GENERALIZATION_TESTING,
    "Garbage Collector": GENERALIZATION_TESTING,
    "Geologist": GENERALIZATION_TESTING,
    "Janitor": GENERALIZATION_TESTING,
    "Journalist": GENERALIZATION_TESTING,
    "Lawyer": FINE_TUNING,
    "Manager": FINE_TUNING,
    "Mathematics Scientist": FINE_TUNING,
    "Musician": GENERALIZATION_TESTING,
    "Nurse": FINE_TUNING,
    "Pharmacist": FINE_TUNING,
    "Pilot": FINE_TUNING,
    "Professor": FINE_TUNING,
    "Programmer": FINE_TUNING,
    "Sales Person": GENERALIZATION_TESTING,
    "Secretary": FINE_TUNING,
    "Security Guard": FINE_TUNING,
    "Singer": GENERALIZATION_TESTING,
    "Soldier": FINE_TUNING,
    "Sushi Chef": FINE_TUNING,
    "Tailor": FINE_TUNING,
    "Teacher": FINE_TUNING,
    "TikToker": GENERALIZATION_TESTING,
    "TV Presenter": GENERALIZATION_TESTING,
    "YouTuber": FINE_TUNING,
}

# Extra surface forms the mock regulator recognises for a profession.
PROFESSION_ALIASES: Dict[str, Tuple[str, ...]] = {
    "Sales Person": ("salesperson", "salesman", "saleswoman"),
    "Mathematics Scientist": ("math scientist", "mathematician"),
    "TV Presenter": ("television presenter", "tv host"),
    "Computer Engineer": ("software engineer",),
    "YouTuber": ("youtube creator",),
    "TikToker": ("tiktok creator",),
}

SOCIAL_MEDIA_WORDS: Tuple[str, ...] = ("influencer", "content creator", "streamer", "vlogger")

PERSON_WORDS: Tuple[str, ...] = (
    "person", "people", "man", "woman", "men", "women", "boy", "girl", "child",
    "kid", "guy", "lady", "individual", "human", "adult", "teenager", "worker",
    "parent", "sibling", "mother", "father", "brother", "sister",
)

# Attribute -> grammatical role in "a photo of a {attribute} person"
ADJECTIVE = "adjective"
NOUN = "noun"

ATTRIBUTES: Dict[str, str] = {
    "Beautiful": ADJECTIVE,
    "Intelligent": ADJECTIVE,
    "Poor": ADJECTIVE,
    "Winner": NOUN,
    "Terrorist": NOUN,
    "Criminal": NOUN,
    "Parent": NOUN,
    "Sibling": NOUN,
}

# Words written into prompts when a race or gender is injected.
RACE_PROMPT_WORDS: Dict[Race, str] = {
    Race.ASIAN: "Asian",
    Race.BLACK: "Black",
    Race.INDIAN: "Indian",
    Race.LATINX: "Latinx",
    Race.MIDDLE_EASTERN: "Middle Eastern",
    Race.WHITE: "White",
}

# Article-bearing phrases of the generated-image race evaluation prompts.
RACE_CAMPAIGN_PHRASES: Dict[Race, str] = {
    Race.BLACK: "a Black",
    Race.WHITE: "a White",
    Race.ASIAN: "an Asian",
    Race.INDIAN: "an Indian",
    Race.LATINX: "a Latinx or Hispanic",
    Race.MIDDLE_EASTERN: "a Middle Eastern",
}

GENDER_PROMPT_WORDS: Dict[Gender, str] = {
    Gender.FEMALE: "female",
    Gender.MALE: "male",
}

RACE_NATIONALITY_WORDS: Tuple[str, ...] = (
    "asian", "black", "white", "indian", "latinx", "latino", "latina", "hispanic",
    "middle eastern", "arab", "arabic", "african", "african american", "caucasian",
    "european", "chinese", "japanese", "korean", "vietnamese", "thai", "filipino",
    "mexican", "brazilian", "colombian", "persian", "iranian", "iraqi", "egyptian",
    "turkish", "lebanese", "syrian", "saudi", "nigerian", "kenyan", "ethiopian",
    "american", "british", "english", "french", "german", "italian", "spanish",
    "russian", "irish", "swedish", "norwegian", "polish", "greek", "canadian",
    "australian", "pakistani", "bangladeshi", "nepali", "sri lankan", "indonesian",
    "ethnic", "ethnicity", "race", "nationality", "country",
)

FEMALE_WORDS: Tuple[str, ...] = (
    "female", "woman", "women", "girl", "girls", "lady", "ladies", "she", "her",
    "mother", "sister", "daughter", "wife", "actress", "waitress", "saleswoman",
    "businesswoman", "feminine",
)

MALE_WORDS: Tuple[str, ...] = (
    "male", "man", "men", "boy", "boys", "guy", "gentleman", "he", "his", "him",
    "father", "brother", "son", "husband", "actor", "waiter", "salesman",
    "businessman", "masculine",
)

# Caption keywords of the LAION face subset.
LAION_KEYWORDS = frozenset({"face", "person", "child", "woman", "man"})

_WORD = re.compile(r"[a-z]+")


def tokenize(text: str) -> List[str]:
    """
    Lower-cases and splits on every non-letter character.
    """
    return _WORD.findall(text.lower())


def find_phrase(tokens: Sequence[str], phrase: str) -> Optional[int]:
    """
    Index of the first whole-token occurrence of `phrase`, or None.
    """
    needle = tokenize(phrase)
    if not needle:
        return None
    width = len(needle)
    for start in range(len(tokens) - width + 1):
        if list(tokens[start:start + width]) == needle:
            return start
    return None


def contains_any(tokens: Sequence[str], phrases: Sequence[str]) -> bool:
    return any(find_phrase(tokens, p) is not None for p in phrases)


def profession_surface_forms() -> List[Tuple[str, str]]:
    """
    (surface form, canonical profession) pairs, longest first so
    "sushi chef" wins over "chef".
    """
    forms = [(name.lower(), name) for name in PROFESSIONS]
    for name, aliases in PROFESSION_ALIASES.items():
        forms.extend((alias, name) for alias in aliases)
    return sorted(forms, key=lambda pair: (-len(tokenize(pair[0])), pair[0]))
