from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.demographics import Axis, DemographicDistribution, Gender, Race


class TargetDistribution(BaseModel):
    """
    User-specified distribution over the 12 race x gender cells.
    """

    cells: DemographicDistribution
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_axis(self) -> "TargetDistribution":
        if self.cells.axis is not Axis.CELL:
            raise ValueError("target distribution must be over the 12 race/gender cells")
        return self

    @classmethod
    def uniform(cls) -> "TargetDistribution":
        return cls(cells=DemographicDistribution.uniform(Axis.CELL))


class YesNo(str, Enum):
    YES = "yes"
    NO = "no"


class GenderAnswer(str, Enum):
    FEMALE = "female"
    MALE = "male"
    UNKNOWN = "unknown"


class RegulationAnswers(BaseModel):
    has_person_or_profession: YesNo
    subject: str = ""
    demographic_specified: YesNo
    gender: GenderAnswer
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_subject(self) -> "RegulationAnswers":
        if self.has_person_or_profession is YesNo.YES and not self.subject.strip():
            raise ValueError("subject must be non-empty when a person or profession is present")
        return self


class RegulatedPrompt(BaseModel):
    original: str
    injected: str
    injected_race: Optional[Race] = None
    injected_gender: Optional[Gender] = None
    decision_trace: RegulationAnswers
    model_config = ConfigDict(frozen=True)


class SamplerState(BaseModel):
    """
    Explicit sampler state: a seed plus the number of draws taken so far.

    Draw i is a pure function of (seed, i), so callers can persist and
    resume the stream.
    """

    seed: int
    position: int = Field(0, ge=0)
    model_config = ConfigDict(frozen=True)

    def advance(self, steps: int = 1) -> "SamplerState":
        return SamplerState(seed=self.seed, position=self.position + steps)


class VariantMode(str, Enum):
    IID = "iid"
    BALANCED = "balanced"


class RegulationWording(str, Enum):
    PROFESSION = "profession"
    PERSON = "person"


class VariantPlan(BaseModel):
    """
    Splits every group's requests across the 12 cell variants.
    """

    target: TargetDistribution
    mode: VariantMode = VariantMode.IID
    model_config = ConfigDict(frozen=True)
