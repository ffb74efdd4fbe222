from __future__ import annotations

from typing import Optional


class FacebiasError(Exception):
    """
    Root of every error raised by the package.

    `error_code` is stable and appears in structured error logs.
    """

    error_code: str = "FACEBIAS_ERROR"

    def __init__(self, message: str, error_code: Optional[str] = None) -> None:
        super().__init__(message)
        if error_code is not None:
            self.error_code = error_code

    def to_log(self) -> dict:
        return {"error": str(self), "error_code": self.error_code}


# Invalid input (CLI exit 2)


class InputValidationError(FacebiasError, ValueError):
    error_code = "INVALID_INPUT"


class CorpusFormatError(InputValidationError):
    error_code = "CORPUS_FORMAT"

    def __init__(self, message: str, line_number: Optional[int] = None) -> None:
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DimensionMismatchError(InputValidationError):
    error_code = "DIMENSION_MISMATCH"


class AxisMismatchError(InputValidationError):
    error_code = "AXIS_MISMATCH"


class CampaignMismatchError(InputValidationError):
    error_code = "CAMPAIGN_MISMATCH"


class MalformedRegulationResponse(InputValidationError):
    error_code = "MALFORMED_REGULATION_RESPONSE"

    def __init__(self, raw_text: str, field: Optional[str] = None) -> None:
        detail = f" (unresolved field: {field})" if field else ""
        super().__init__(f"malformed regulation response{detail}")
        self.raw_text = raw_text
        self.field = field


# Computation failures (CLI exit 1)


class ComputationError(FacebiasError, RuntimeError):
    error_code = "COMPUTATION_FAILED"


class UnconvergedError(ComputationError):
    error_code = "UNCONVERGED"


class DegenerateDataError(ComputationError):
    error_code = "DEGENERATE_DATA"


# External services


class BackendUnavailableError(FacebiasError, RuntimeError):
    error_code = "BACKEND_UNAVAILABLE"

    def __init__(self, message: str, attempts: int = 0) -> None:
        super().__init__(message)
        self.attempts = attempts


class RetryableBackendError(FacebiasError, RuntimeError):
    """Raised for a single failed request that may succeed on retry."""

    error_code = "BACKEND_RETRYABLE"


class LanguageModelError(FacebiasError, RuntimeError):
    error_code = "LANGUAGE_MODEL_FAILED"

    def __init__(self, message: str, prompt: str = "") -> None:
        super().__init__(message)
        self.prompt = prompt
