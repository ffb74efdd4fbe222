from __future__ import annotations

import hashlib
import json
from typing import Any

from pydantic import BaseModel


def to_plain(value: Any) -> Any:
    """
    Converts pydantic models (recursively) into JSON-ready builtins.
    """
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json", by_alias=True)
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


def canonical_json(value: Any) -> str:
    """
    Key-sorted, indented JSON with a trailing newline.

    Identical inputs always produce byte-identical text.
    """
    return json.dumps(to_plain(value), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def config_hash(value: Any) -> str:
    compact = json.dumps(to_plain(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(compact.encode("utf-8")).hexdigest()
