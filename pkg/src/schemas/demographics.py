from __future__ import annotations

import math
from enum import Enum
from typing import Dict, List, Mapping, NamedTuple, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

SUM_TOLERANCE = 1e-9


class Race(str, Enum):
    ASIAN = "Asian"
    BLACK = "Black"
    INDIAN = "Indian"
    LATINX = "Latinx"
    MIDDLE_EASTERN = "MiddleEastern"
    WHITE = "White"


class Gender(str, Enum):
    FEMALE = "Female"
    MALE = "Male"


class Axis(str, Enum):
    RACE = "race"
    GENDER = "gender"
    CELL = "cell"


class DemographicLabel(NamedTuple):
    """
    One (race, gender) cell. Tuple ordering follows the fixed enum order.
    """

    race: Race
    gender: Gender

    @property
    def key(self) -> str:
        return f"{self.race.value}/{self.gender.value}"

    @classmethod
    def from_key(cls, key: str) -> "DemographicLabel":
        try:
            race, gender = key.split("/")
            return cls(Race(race), Gender(gender))
        except ValueError as e:
            raise ValueError(f"invalid cell key {key!r}; expected 'Race/Gender'") from e


# SDXL-Inc style variants are addressed by the cell they were tuned on.
VariantKey = DemographicLabel

RACES: Tuple[Race, ...] = tuple(Race)
GENDERS: Tuple[Gender, ...] = tuple(Gender)
CELLS: Tuple[DemographicLabel, ...] = tuple(DemographicLabel(r, g) for r in RACES for g in GENDERS)

Category = Union[Race, Gender, DemographicLabel]


def _order(categories: Tuple) -> Tuple[str, ...]:
    return tuple(c.key if isinstance(c, DemographicLabel) else c.value for c in categories)


AXIS_KEYS: Dict[Axis, Tuple[str, ...]] = {
    Axis.RACE: _order(RACES),
    Axis.GENDER: _order(GENDERS),
    Axis.CELL: _order(CELLS),
}


def category_key(category: Category) -> str:
    if isinstance(category, DemographicLabel):
        return category.key
    return category.value


def axis_of(category: Category) -> Axis:
    if isinstance(category, DemographicLabel):
        return Axis.CELL
    if isinstance(category, Race):
        return Axis.RACE
    if isinstance(category, Gender):
        return Axis.GENDER
    raise TypeError(f"not a demographic category: {category!r}")


def parse_category(axis: Axis, key: str) -> Category:
    if axis is Axis.RACE:
        return Race(key)
    if axis is Axis.GENDER:
        return Gender(key)
    return DemographicLabel.from_key(key)


class DemographicDistribution(BaseModel):
    """
    Probability vector over one axis of the 6x2 taxonomy.

    Every category of the axis is present; shares sum to 1 within 1e-9.
    """

    axis: Axis
    probabilities: Dict[str, float]
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_shares(self) -> "DemographicDistribution":
        expected = set(AXIS_KEYS[self.axis])
        given = set(self.probabilities)
        if given != expected:
            missing = sorted(expected - given)
            extra = sorted(given - expected)
            raise ValueError(f"categories must match axis {self.axis.value}: missing={missing} extra={extra}")

        for key, p in self.probabilities.items():
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise ValueError(f"probability for {key} out of [0, 1]: {p}")

        total = math.fsum(self.probabilities.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {total}, not 1")
        return self

    @classmethod
    def from_mapping(cls, axis: Axis, shares: Mapping[Category, float]) -> "DemographicDistribution":
        return cls(axis=axis, probabilities={category_key(k): float(v) for k, v in shares.items()})

    @classmethod
    def uniform(cls, axis: Axis) -> "DemographicDistribution":
        keys = AXIS_KEYS[axis]
        return cls(axis=axis, probabilities={k: 1.0 / len(keys) for k in keys})

    @classmethod
    def degenerate(cls, category: Category) -> "DemographicDistribution":
        axis = axis_of(category)
        hit = category_key(category)
        return cls(axis=axis, probabilities={k: 1.0 if k == hit else 0.0 for k in AXIS_KEYS[axis]})

    @classmethod
    def from_weights(cls, axis: Axis, weights: Mapping[str, float]) -> "DemographicDistribution":
        """
        Normalises non-negative weights (e.g. printed percentages that do not
        add up to exactly 100) into a distribution.
        """
        total = math.fsum(weights.get(k, 0.0) for k in AXIS_KEYS[axis])
        if total <= 0:
            raise ValueError("weights must have positive total")
        return cls(axis=axis, probabilities={k: weights.get(k, 0.0) / total for k in AXIS_KEYS[axis]})

    def keys(self) -> Tuple[str, ...]:
        return AXIS_KEYS[self.axis]

    def vector(self) -> List[float]:
        return [self.probabilities[k] for k in AXIS_KEYS[self.axis]]

    def share(self, category: Union[Category, str]) -> float:
        key = category if isinstance(category, str) else category_key(category)
        return self.probabilities[key]

    def marginal(self, axis: Axis) -> "DemographicDistribution":
        if self.axis is axis:
            return self
        if self.axis is not Axis.CELL:
            raise ValueError(f"cannot take {axis.value} marginal of a {self.axis.value} distribution")

        sums: Dict[str, List[float]] = {k: [] for k in AXIS_KEYS[axis]}
        for key, p in self.probabilities.items():
            cell = DemographicLabel.from_key(key)
            part = cell.race.value if axis is Axis.RACE else cell.gender.value
            sums[part].append(p)
        return DemographicDistribution(axis=axis, probabilities={k: math.fsum(v) for k, v in sums.items()})

    @classmethod
    def product(cls, race: "DemographicDistribution", gender: "DemographicDistribution") -> "DemographicDistribution":
        """
        Joint over the 12 cells assuming independent race and gender.
        """
        if race.axis is not Axis.RACE or gender.axis is not Axis.GENDER:
            raise ValueError("product needs a race and a gender distribution")
        joint = {
            cell.key: race.share(cell.race) * gender.share(cell.gender)
            for cell in CELLS
        }
        return cls.from_weights(Axis.CELL, joint)


class CountTable(BaseModel):
    """
    Raw category counts; `total` always equals the sum of counts.
    """

    axis: Axis
    counts: Dict[str, int]
    total: int = Field(ge=0)
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_counts(self) -> "CountTable":
        expected = set(AXIS_KEYS[self.axis])
        if set(self.counts) != expected:
            raise ValueError(f"count categories must match axis {self.axis.value}")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if sum(self.counts.values()) != self.total:
            raise ValueError("total must equal the sum of counts")
        return self

    @classmethod
    def from_counts(cls, axis: Axis, counts: Mapping[str, int]) -> "CountTable":
        full = {k: int(counts.get(k, 0)) for k in AXIS_KEYS[axis]}
        return cls(axis=axis, counts=full, total=sum(full.values()))

    def vector(self) -> List[int]:
        return [self.counts[k] for k in AXIS_KEYS[self.axis]]
