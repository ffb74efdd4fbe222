from __future__ import annotations

import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Sample(BaseModel):
    values: List[float] = Field(..., min_length=1)
    label: str = ""
    model_config = ConfigDict(frozen=True)

    @field_validator("values")
    @classmethod
    def check_finite(cls, values: List[float]) -> List[float]:
        if not all(math.isfinite(v) for v in values):
            raise ValueError("sample values must be finite")
        return values

    @property
    def n(self) -> int:
        return len(self.values)


class TestKind(str, Enum):
    WELCH_T = "welch_t"
    STUDENT_T = "student_t"
    MANN_WHITNEY_U = "mann_whitney_u"
    SHAPIRO_WILK = "shapiro_wilk"


def significance_stars(p_value: float) -> str:
    if p_value < 0.0001:
        return "****"
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return "ns"


class TestResult(BaseModel):
    test: TestKind
    statistic: float
    p_value: float = Field(..., ge=0.0, le=1.0)
    n1: int
    n2: int = 0
    dof: Optional[float] = None
    significance_stars: str = "ns"
    label: str = ""
    model_config = ConfigDict(frozen=True)

    # keep pytest from collecting this class
    __test__ = False


class BoxStats(BaseModel):
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: List[float] = Field(default_factory=list)
    model_config = ConfigDict(frozen=True)


class Design(str, Enum):
    TWO_SAMPLE = "two_sample"
    PAIRED = "paired"


class PairAnalysis(BaseModel):
    group_a: str
    group_b: str
    result: TestResult
    box_a: BoxStats
    box_b: BoxStats
    normality_a: Optional[TestResult] = None
    normality_b: Optional[TestResult] = None
    model_config = ConfigDict(frozen=True)


class SurveyAnalysis(BaseModel):
    group_col: str
    value_col: str
    t_test: TestKind = TestKind.WELCH_T
    pairs: List[PairAnalysis]
    model_config = ConfigDict(frozen=True)


class PowerReport(BaseModel):
    effect_d: float = Field(..., gt=0)
    power: float = Field(..., gt=0, lt=1)
    alpha: float = Field(..., gt=0, lt=1)
    design: Design
    n: int = Field(..., ge=1)
    achieved_power: float
    model_config = ConfigDict(frozen=True)
