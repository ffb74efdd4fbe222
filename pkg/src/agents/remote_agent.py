from __future__ import annotations

from typing import Any, Optional

from openai import OpenAI, OpenAIError

from src.agents.base_agent import LanguageModelClient
from src.config import get_settings
from src.utils.errors import LanguageModelError
from src.utils.retry import retry


class RemoteChatClient(LanguageModelClient):
    """
    Chat-completion client for the deployed regulator.

    Endpoint, key and model come from the environment. Temperature is 0 and
    a failed call is retried once.
    """

    def __init__(self, client: Optional[Any] = None, model: Optional[str] = None) -> None:
        super().__init__(client_name="RemoteChatClient")
        settings = get_settings()
        self.model = model or settings.FACEBIAS_LLM_MODEL
        if client is None:
            if not settings.FACEBIAS_LLM_API_KEY:
                raise LanguageModelError("no language-model key configured (set FACEBIAS_LLM_API_KEY)")
            client = OpenAI(
                api_key=settings.FACEBIAS_LLM_API_KEY,
                base_url=settings.FACEBIAS_LLM_BASE_URL or None,
                timeout=settings.FACEBIAS_HTTP_TIMEOUT,
                max_retries=0,
            )
        self.client = client
        self._complete = retry(max_attempts=2, retry_on=(OpenAIError,), service="language_model")(self._complete_once)

    def _complete_once(self, text: str) -> str:
        response = self.client.chat.completions.create(
            model=self.model,
            temperature=0,
            messages=[{"role": "user", "content": text}],
        )
        content = response.choices[0].message.content
        if not content:
            raise OpenAIError("empty completion")
        return content

    def query(self, text: str) -> str:
        if not text:
            raise LanguageModelError("RemoteChatClient received empty input")

        try:
            answer = self._complete(text)
        except OpenAIError as e:
            self.log_action("Regulation query failed", level="error", extra={"error": str(e)})
            raise LanguageModelError(f"language model call failed: {e}", prompt=text) from e

        self.log_action("Regulation query answered", extra={"model": self.model})
        return answer
