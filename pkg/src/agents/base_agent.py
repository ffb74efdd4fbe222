from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Optional

from src.services.logger import get_logger


class LanguageModelClient(ABC):
    """
    Abstract language-model client used by the prompt regulator.

    Provides:
    - Structured logging
    - A single text-in / text-out query method
    """

    def __init__(self, client_name: str):
        self.client_name = client_name
        self.logger = get_logger(client_name)

    @abstractmethod
    def query(self, text: str) -> str:
        """
        Must be implemented by all clients.
        """
        raise NotImplementedError

    def log_action(
        self,
        message: str,
        level: str = "info",
        extra: Optional[dict] = None,
    ) -> None:
        log_payload = {
            "service": "language_model",
            "client_name": self.client_name,
            "action_details": message,
        }

        if extra:
            log_payload.update(extra)

        if level.lower() == "error":
            self.logger.error(message, extra=log_payload)
        else:
            self.logger.info(message, extra=log_payload)
