from __future__ import annotations

import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.schemas.demographics import DemographicLabel, Gender
from src.utils.errors import DimensionMismatchError


class Source(str, Enum):
    FAIRFACE = "fairface"
    LAION = "laion"
    GENERATED = "generated"
    SYNTHETIC = "synthetic"


class FairFaceRace(str, Enum):
    BLACK = "Black"
    EAST_ASIAN = "EastAsian"
    INDIAN = "Indian"
    LATINX = "Latinx"
    MIDDLE_EASTERN = "MiddleEastern"
    SOUTHEAST_ASIAN = "SoutheastAsian"
    WHITE = "White"


def validate_embedding(values: Tuple[float, ...]) -> Tuple[float, ...]:
    if len(values) < 1:
        raise ValueError("embedding must have dimension >= 1")
    if not all(math.isfinite(v) for v in values):
        raise ValueError("embedding entries must be finite")
    if not any(v != 0.0 for v in values):
        raise ValueError("zero embedding vector rejected")
    return values


class EmbeddingRecord(BaseModel):
    """
    One face: identifier, embedding and optional ground-truth label.
    """

    id: str = Field(..., min_length=1)
    embedding: Tuple[float, ...]
    true_label: Optional[DemographicLabel] = None
    source: Source = Source.SYNTHETIC
    provenance: str = ""
    model_config = ConfigDict(frozen=True)

    @field_validator("embedding")
    @classmethod
    def check_embedding(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        return validate_embedding(value)

    @property
    def dim(self) -> int:
        return len(self.embedding)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.embedding, dtype=np.float64)


class RawFairFaceLabel(BaseModel):
    race7: FairFaceRace
    gender: Gender
    model_config = ConfigDict(frozen=True)


class LaionMetadata(BaseModel):
    id: str
    caption: str
    face_width_px: int = Field(..., ge=1)
    face_height_px: int = Field(..., ge=1)
    model_config = ConfigDict(frozen=True)


class HomogenizationScore(BaseModel):
    item_id: str
    group: str = ""
    score: float = Field(..., ge=-1.0, le=1.0)
    model_config = ConfigDict(frozen=True)


class DensityCurve(BaseModel):
    grid: List[float]
    density: List[float]
    bandwidth: float = Field(..., gt=0)
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_curve(self) -> "DensityCurve":
        if len(self.grid) != len(self.density):
            raise ValueError("grid and density must have equal length")
        if any(b < a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be ascending")
        if any(d < 0 for d in self.density):
            raise ValueError("density must be non-negative")
        return self

    def integral(self) -> float:
        return float(np.trapz(self.density, self.grid))


def stack_embeddings(records: List[EmbeddingRecord]) -> np.ndarray:
    if not records:
        return np.zeros((0, 0))
    dim = records[0].dim
    for record in records:
        if record.dim != dim:
            raise DimensionMismatchError(f"record {record.id} has dimension {record.dim}, expected {dim}")
    return np.asarray([r.embedding for r in records], dtype=np.float64)


class GroupScoreSummary(BaseModel):
    group: str
    n: int = Field(..., ge=1)
    mean: float
    std: float = Field(..., ge=0)
    model_config = ConfigDict(frozen=True)
