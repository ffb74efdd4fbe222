from __future__ import annotations

from typing import Any, Dict, List, Optional

import httpx

from src.backends.base_backend import GenerationBackend, variant_slug
from src.config import get_settings
from src.schemas.audit_schemas import PromptGroup
from src.schemas.demographics import VariantKey
from src.schemas.records import EmbeddingRecord, Source
from src.utils.errors import BackendUnavailableError, RetryableBackendError
from src.utils.retry import retry
from src.utils.rng import derive_seed

MAX_ATTEMPTS = 3
BACKOFF_SECONDS = 1.0


class RemoteBackend(GenerationBackend):
    """
    Wire client for a generation service.

    POST {base_url}/generate with
    {prompt, negative_prompt, steps, guidance, resolution, seed, variant?, n}
    and expects {"records": [{"id": str, "embedding": [float, ...]}, ...]}.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        client: Optional[httpx.Client] = None,
        max_attempts: int = MAX_ATTEMPTS,
        backoff: float = BACKOFF_SECONDS,
    ) -> None:
        settings = get_settings()
        url = base_url or settings.FACEBIAS_BACKEND_URL
        if not url:
            raise BackendUnavailableError("no backend URL configured (set FACEBIAS_BACKEND_URL)")
        super().__init__(f"remote:{httpx.URL(url).host or 'local'}")
        self.base_url = url.rstrip("/")
        self.client = client or httpx.Client(timeout=settings.FACEBIAS_HTTP_TIMEOUT)
        self.max_attempts = max_attempts
        self._post = retry(
            max_attempts=max_attempts,
            delay=backoff,
            retry_on=(RetryableBackendError,),
            service="remote_backend",
        )(self._post_once)

    def _post_once(self, payload: Dict[str, Any]) -> List[Dict[str, Any]]:
        try:
            response = self.client.post(f"{self.base_url}/generate", json=payload)
        except httpx.HTTPError as e:
            raise RetryableBackendError(f"request failed: {e}") from e

        if response.status_code != 200:
            raise RetryableBackendError(f"backend returned HTTP {response.status_code}")

        try:
            records = response.json()["records"]
        except (ValueError, KeyError, TypeError) as e:
            raise RetryableBackendError("backend response is not a records document") from e
        if not isinstance(records, list):
            raise RetryableBackendError("backend 'records' must be a list")
        return records

    def request_payload(
        self, group: PromptGroup, variant: Optional[VariantKey], n: int, seed: int, offset: int
    ) -> Dict[str, Any]:
        prompt = group.prompt
        request_seed = prompt.seed
        if request_seed is None:
            request_seed = derive_seed(seed, group.name, variant_slug(variant), offset) % 2**32
        payload: Dict[str, Any] = {
            "prompt": prompt.text,
            "negative_prompt": prompt.negative_text,
            "steps": prompt.inference_steps,
            "guidance": prompt.guidance_scale,
            "resolution": prompt.resolution,
            "seed": request_seed,
            "n": n,
        }
        if variant is not None:
            payload["variant"] = variant.key
        return payload

    def generate(
        self,
        group: PromptGroup,
        variant: Optional[VariantKey],
        n: int,
        seed: int,
        offset: int = 0,
    ) -> List[EmbeddingRecord]:
        payload = self.request_payload(group, variant, n, seed, offset)
        try:
            raw = self._post(payload)
        except RetryableBackendError as e:
            self.log_action("Backend unavailable", level="error", group=group.name, error=str(e))
            raise BackendUnavailableError(
                f"{self.backend_id} failed after {self.max_attempts} attempts: {e}",
                attempts=self.max_attempts,
            ) from e

        if len(raw) != n:
            raise BackendUnavailableError(f"{self.backend_id} returned {len(raw)} records, expected {n}")

        records = []
        for i, item in enumerate(raw):
            try:
                embedding = tuple(float(v) for v in item["embedding"])
                remote_id = str(item.get("id", ""))
                records.append(
                    EmbeddingRecord(
                        id=self.record_id(group, variant, seed, offset + i),
                        embedding=embedding,
                        source=Source.GENERATED,
                        provenance=f"{self.base_url}#{remote_id}",
                    )
                )
            except (KeyError, TypeError, ValueError) as e:
                raise BackendUnavailableError(f"{self.backend_id} returned a malformed record at {i}: {e}") from e

        self.log_action("Batch generated", group=group.name, n=n, offset=offset)
        return records
