from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from src.backends.base_backend import GenerationBackend, variant_slug
from src.schemas.audit_schemas import PromptGroup
from src.schemas.demographics import DemographicDistribution, DemographicLabel, VariantKey
from src.schemas.records import EmbeddingRecord, Source
from src.schemas.world_schemas import SyntheticWorldConfig
from src.services.demographics import inverse_cdf
from src.utils.errors import InputValidationError
from src.utils.rng import stream


def load_world(path: Path) -> SyntheticWorldConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return SyntheticWorldConfig.model_validate(raw)
    except FileNotFoundError as e:
        raise InputValidationError(f"world config not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InputValidationError(f"world config is not valid JSON: {e}") from e
    except ValidationError as e:
        raise InputValidationError(f"invalid world config {path}: {e.errors()[0]['msg']}") from e


class SyntheticBackend(GenerationBackend):
    """
    Deterministic simulator: labels drawn from per-group demographics,
    embeddings from per-race Gaussian clouds.

    Record k of a (group, variant, seed) stream uses its own counter-based
    generator, so splitting a request into batches never changes a record.
    """

    def __init__(self, config: SyntheticWorldConfig, backend_id: Optional[str] = None) -> None:
        super().__init__(backend_id or f"sim:{config.name}")
        self.config = config
        self._means = {race: np.asarray(cloud.mean, dtype=np.float64) for race, cloud in config.per_race_cloud.items()}

    def forced_label(self, variant: Optional[VariantKey]) -> Optional[DemographicLabel]:
        if variant is None:
            return None
        forced = self.config.variant_overrides.get(variant.key)
        return DemographicLabel.from_key(forced) if forced else None

    def group_distribution(self, group_name: str) -> DemographicDistribution:
        dist = self.config.per_group_demographics.get(group_name, self.config.default_demographics)
        if dist is None:
            raise InputValidationError(f"unknown group {group_name!r} for simulator {self.config.name!r}")
        return dist

    def generate(
        self,
        group: PromptGroup,
        variant: Optional[VariantKey],
        n: int,
        seed: int,
        offset: int = 0,
    ) -> List[EmbeddingRecord]:
        if n < 0 or offset < 0:
            raise InputValidationError("n and offset must be non-negative")

        forced = self.forced_label(variant)
        dist = None if forced is not None else self.group_distribution(group.name)
        tag = variant_slug(variant)

        records = []
        for index in range(offset, offset + n):
            rng = stream(seed, "sim", group.name, tag, index)
            label = forced if forced is not None else inverse_cdf(dist, float(rng.random()))
            cloud = self.config.per_race_cloud[label.race]
            vector = self._means[label.race] + cloud.dispersion * rng.standard_normal(self.config.dim)
            records.append(
                EmbeddingRecord(
                    id=self.record_id(group, variant, seed, index),
                    embedding=tuple(vector.tolist()),
                    true_label=label,
                    source=Source.SYNTHETIC,
                    provenance=f"synthetic:{self.config.name}",
                )
            )
        return records
