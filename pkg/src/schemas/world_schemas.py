from __future__ import annotations

import math
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.schemas.demographics import AXIS_KEYS, Axis, DemographicDistribution, Race


class RaceCloud(BaseModel):
    """Isotropic Gaussian embedding cloud for one race."""

    mean: Tuple[float, ...]
    dispersion: float = Field(..., gt=0)
    model_config = ConfigDict(frozen=True)


class SyntheticWorldConfig(BaseModel):
    """
    Ground truth of a simulated generator.

    Groups missing from `per_group_demographics` fall back to
    `default_demographics`; without a default they are rejected unless the
    request carries an overridden variant.
    """

    name: str = "custom"
    dim: int = Field(..., ge=1)
    per_group_demographics: Dict[str, DemographicDistribution] = Field(default_factory=dict)
    default_demographics: Optional[DemographicDistribution] = None
    per_race_cloud: Dict[Race, RaceCloud]
    # variant cell key -> forced label cell key
    variant_overrides: Dict[str, str] = Field(default_factory=dict)
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_world(self) -> "SyntheticWorldConfig":
        dists = list(self.per_group_demographics.items())
        if self.default_demographics is not None:
            dists.append(("<default>", self.default_demographics))
        for name, dist in dists:
            if dist.axis is not Axis.CELL:
                raise ValueError(f"group {name!r} must be distributed over the 12 race/gender cells")

        missing = [r.value for r in Race if r not in self.per_race_cloud]
        if missing:
            raise ValueError(f"missing embedding clouds for {missing}")
        for race, cloud in self.per_race_cloud.items():
            if len(cloud.mean) != self.dim:
                raise ValueError(f"{race.value} cloud mean has dimension {len(cloud.mean)}, world has {self.dim}")
            if not all(math.isfinite(v) for v in cloud.mean):
                raise ValueError(f"{race.value} cloud mean must be finite")

        cells = set(AXIS_KEYS[Axis.CELL])
        for variant, forced in self.variant_overrides.items():
            if variant not in cells or forced not in cells:
                raise ValueError(f"variant override {variant!r} -> {forced!r} must map cell keys")
        return self
