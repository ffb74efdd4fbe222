from __future__ import annotations

from typing import List, Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.demographics import Axis

MODEL_FORMAT_VERSION = 1


class SvmHyperParams(BaseModel):
    c: float = Field(1.0, gt=0)
    kernel: Literal["rbf"] = "rbf"
    gamma: Union[Literal["scale"], float] = "scale"
    tolerance: float = Field(1e-3, gt=0)
    # hard cap on SMO pair updates per binary problem
    max_passes: int = Field(1_000_000, ge=1)
    cache_rows: int = Field(256, ge=0)
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_gamma(self) -> "SvmHyperParams":
        if not isinstance(self.gamma, str) and self.gamma <= 0:
            raise ValueError("explicit gamma must be positive")
        return self


class BinarySvm(BaseModel):
    """
    f(x) = sum_i alphas[i] * K(support_vectors[i], x) + bias

    `alphas` are signed (alpha_i * y_i); y = +1 for class_pair[0].
    """

    support_vectors: List[Tuple[float, ...]]
    alphas: List[float]
    bias: float
    gamma: float = Field(..., gt=0)
    class_pair: Tuple[str, str]
    iterations: int = 0
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_lengths(self) -> "BinarySvm":
        if len(self.support_vectors) != len(self.alphas):
            raise ValueError("one alpha per support vector")
        return self


class SvmModel(BaseModel):
    format_version: int = MODEL_FORMAT_VERSION
    axis: Axis
    classes: List[str]
    binaries: List[BinarySvm]
    training_dim: int = Field(..., ge=1)
    gamma: float = Field(..., gt=0)
    params: SvmHyperParams
    seed: int = 0
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_pairs(self) -> "SvmModel":
        k = len(self.classes)
        if len(self.binaries) != k * (k - 1) // 2:
            raise ValueError(f"{k} classes need {k * (k - 1) // 2} binaries, got {len(self.binaries)}")
        if self.format_version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {self.format_version}")
        return self


class EvalMetrics(BaseModel):
    axis: Axis
    classes: List[str]
    accuracy: float = Field(..., ge=0, le=1)
    macro_precision: float = Field(..., ge=0, le=1)
    macro_recall: float = Field(..., ge=0, le=1)
    macro_f1: float = Field(..., ge=0, le=1)
    # rows = true, columns = predicted
    confusion: List[List[int]]
    model_config = ConfigDict(frozen=True)
