from __future__ import annotations

import re
from abc import ABC, abstractmethod
from typing import List, Optional

from src.schemas.audit_schemas import PromptGroup
from src.schemas.demographics import VariantKey
from src.schemas.records import EmbeddingRecord
from src.services.logger import get_logger


def slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-") or "group"


def variant_slug(variant: Optional[VariantKey]) -> str:
    return "base" if variant is None else slug(variant.key)


class GenerationBackend(ABC):
    """
    Abstract generation backend: prompt in, face embeddings out.

    Implementations return exactly `n` records with fresh ids. `offset` is
    the index of the first record within the (group, variant, seed) stream.
    """

    def __init__(self, backend_id: str) -> None:
        self.backend_id = backend_id
        self.logger = get_logger(f"backend.{backend_id}")

    @abstractmethod
    def generate(
        self,
        group: PromptGroup,
        variant: Optional[VariantKey],
        n: int,
        seed: int,
        offset: int = 0,
    ) -> List[EmbeddingRecord]:
        raise NotImplementedError

    def record_id(self, group: PromptGroup, variant: Optional[VariantKey], seed: int, index: int) -> str:
        return f"{self.backend_id}:{slug(group.name)}:{variant_slug(variant)}:{seed}:{index:07d}"

    def log_action(self, message: str, level: str = "info", **extra) -> None:
        payload = {"service": "backend", "backend_id": self.backend_id, "action_details": message}
        payload.update(extra)
        if level.lower() == "error":
            self.logger.error(message, extra=payload)
        else:
            self.logger.info(message, extra=payload)
