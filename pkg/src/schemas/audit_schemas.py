from __future__ import annotations

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.schemas.demographics import CountTable, DemographicDistribution

DEFAULT_INFERENCE_STEPS = 40
DEFAULT_GUIDANCE_SCALE = 5.0
DEFAULT_RESOLUTION = 1024


class PromptSpec(BaseModel):
    text: str = Field(..., min_length=1)
    negative_text: str = ""
    inference_steps: int = Field(DEFAULT_INFERENCE_STEPS, ge=1)
    guidance_scale: float = Field(DEFAULT_GUIDANCE_SCALE, gt=0)
    resolution: int = Field(DEFAULT_RESOLUTION, ge=1)
    # None means the backend chooses
    seed: Optional[int] = None
    model_config = ConfigDict(frozen=True, str_strip_whitespace=True)


class GroupKind(str, Enum):
    PERSON = "person"
    PROFESSION = "profession"
    ATTRIBUTE = "attribute"
    CUSTOM = "custom"


class PromptGroup(BaseModel):
    name: str = Field(..., min_length=1)
    kind: GroupKind
    prompt: PromptSpec
    tag: Optional[str] = None
    model_config = ConfigDict(frozen=True)


class GroupResult(BaseModel):
    race_counts: CountTable
    gender_counts: CountTable
    race_distribution: Optional[DemographicDistribution] = None
    gender_distribution: Optional[DemographicDistribution] = None
    sigma_race: Optional[float] = None
    sigma_gender: Optional[float] = None
    requested: int = 0
    failures: List[str] = Field(default_factory=list)
    model_config = ConfigDict(frozen=True)


class AxisSummary(BaseModel):
    mean_group_sigma: Optional[float] = None
    pooled_sigma: Optional[float] = None


class AuditReport(BaseModel):
    """
    Per-group demographic distributions and sigma metrics for one backend.
    """

    backend_id: str
    campaign_config_hash: str
    n_per_group: int
    seed: int
    per_group: Dict[str, GroupResult]
    summary: Dict[str, AxisSummary] = Field(default_factory=dict)
    variant_plan: Optional[str] = None
    model_config = ConfigDict(frozen=True)


class ComparisonRow(BaseModel):
    group: str
    axis: str
    backend_id: str
    distribution: Optional[DemographicDistribution] = None
    sigma: Optional[float] = None
    # sigma of the first report divided by this report's sigma
    sigma_reduction: Optional[float] = None
    tv_to_uniform: Optional[float] = None
    tv_delta: Optional[float] = None


class ComparisonTable(BaseModel):
    backends: List[str]
    groups: List[str]
    rows: List[ComparisonRow]
