from __future__ import annotations

import json
import struct
from collections import defaultdict
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from src.schemas.demographics import (
    AXIS_KEYS,
    Axis,
    DemographicLabel,
    GENDERS,
    Gender,
    RACES,
    Race,
)
from src.schemas.records import (
    EmbeddingRecord,
    FairFaceRace,
    LaionMetadata,
    RawFairFaceLabel,
    Source,
)
from src.services.logger import get_logger
from src.tools.lexicons import LAION_KEYWORDS, tokenize
from src.utils.errors import (
    CorpusFormatError,
    DimensionMismatchError,
    InputValidationError,
)
from src.utils.rng import stream

logger = get_logger("ingest_service")

LAION_MIN_FACE_PX = 100
NO_LABEL_CODE = 255

# Six-race validation split of the face dataset after the Asian merge.
FAIRFACE_VALIDATION_COUNTS: Dict[str, int] = {
    Race.BLACK.value: 1556,
    Race.ASIAN.value: 2965,
    Race.INDIAN.value: 1516,
    Race.LATINX.value: 1623,
    Race.MIDDLE_EASTERN.value: 1209,
    Race.WHITE.value: 2085,
    Gender.FEMALE.value: 5162,
    Gender.MALE.value: 5792,
}

_HEADER = struct.Struct("<IQ")
_ID_LENGTH = struct.Struct("<H")


class CorpusFormat(str, Enum):
    JSONL = "jsonl"
    BIN = "bin"


def merge_fairface(label: RawFairFaceLabel) -> DemographicLabel:
    """
    Collapses East and Southeast Asian into Asian; other races map unchanged.
    """
    if label.race7 in (FairFaceRace.EAST_ASIAN, FairFaceRace.SOUTHEAST_ASIAN):
        race = Race.ASIAN
    else:
        race = Race(label.race7.value)
    return DemographicLabel(race, label.gender)


def laion_keep(meta: LaionMetadata) -> bool:
    tokens = set(tokenize(meta.caption))
    has_keyword = not LAION_KEYWORDS.isdisjoint(tokens)
    return has_keyword and meta.face_width_px >= LAION_MIN_FACE_PX and meta.face_height_px >= LAION_MIN_FACE_PX


def _resolve_race(value: str, merge: bool) -> Race:
    try:
        return Race(value)
    except ValueError:
        pass
    if merge:
        try:
            return merge_fairface(RawFairFaceLabel(race7=FairFaceRace(value), gender=Gender.FEMALE)).race
        except ValueError:
            pass
    raise ValueError(f"unknown race {value!r}")


def _label_from(race: Optional[str], gender: Optional[str], merge: bool) -> Optional[DemographicLabel]:
    if race is None and gender is None:
        return None
    if race is None or gender is None:
        raise ValueError("race and gender must be given together")
    return DemographicLabel(_resolve_race(race, merge), Gender(gender))


def _parse_line(raw: Dict[str, Any], merge: bool) -> EmbeddingRecord:
    if not isinstance(raw, dict):
        raise ValueError("record must be a JSON object")
    if "embedding" not in raw or "id" not in raw:
        raise ValueError("record needs 'id' and 'embedding'")
    return EmbeddingRecord(
        id=str(raw["id"]),
        embedding=tuple(raw["embedding"]),
        true_label=_label_from(raw.get("race"), raw.get("gender"), merge),
        source=Source(raw.get("source", Source.SYNTHETIC.value)),
        provenance=str(raw.get("provenance", "")),
    )


def _laion_meta(raw: Dict[str, Any]) -> LaionMetadata:
    return LaionMetadata(
        id=str(raw.get("id", "")),
        caption=str(raw.get("caption", "")),
        face_width_px=raw.get("face_width_px", 0),
        face_height_px=raw.get("face_height_px", 0),
    )


class CorpusAccumulator:
    """
    Enforces id uniqueness and a shared dimension while records stream in.
    """

    def __init__(self) -> None:
        self.records: List[EmbeddingRecord] = []
        self._ids: set = set()
        self._dim: Optional[int] = None

    def add(self, record: EmbeddingRecord, line_number: int) -> None:
        if record.id in self._ids:
            raise CorpusFormatError(f"duplicate id {record.id!r}", line_number)
        if self._dim is None:
            self._dim = record.dim
        elif record.dim != self._dim:
            raise DimensionMismatchError(
                f"line {line_number}: record {record.id!r} has dimension {record.dim}, corpus has {self._dim}"
            )
        self._ids.add(record.id)
        self.records.append(record)


def _load_jsonl(path: Path, merge: bool, laion_filter: bool) -> List[EmbeddingRecord]:
    corpus = CorpusAccumulator()
    dropped = 0
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                if laion_filter and not laion_keep(_laion_meta(raw)):
                    dropped += 1
                    continue
                record = _parse_line(raw, merge)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"malformed JSON: {e.msg}", line_number) from e
            except (ValidationError, ValueError, TypeError) as e:
                raise CorpusFormatError(str(e).splitlines()[0], line_number) from e
            corpus.add(record, line_number)

    if laion_filter:
        logger.info(
            "LAION filter applied",
            extra={"stage": "ingest", "action_details": f"dropped {dropped} records without face keywords or below size"},
        )
    return corpus.records


def _load_bin(path: Path) -> List[EmbeddingRecord]:
    data = path.read_bytes()
    if not data:
        return []
    if len(data) < _HEADER.size:
        raise CorpusFormatError("truncated header")

    dim, count = _HEADER.unpack_from(data, 0)
    if dim < 1:
        raise CorpusFormatError("dimension must be >= 1")

    corpus = CorpusAccumulator()
    offset = _HEADER.size
    vector_bytes = 4 * dim
    for index in range(1, count + 1):
        try:
            (id_length,) = _ID_LENGTH.unpack_from(data, offset)
            offset += _ID_LENGTH.size
            record_id = data[offset:offset + id_length].decode("utf-8")
            offset += id_length
            if offset + vector_bytes + 2 > len(data):
                raise struct.error("record extends past end of file")
            vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
            offset += vector_bytes
            race_code, gender_code = data[offset], data[offset + 1]
            offset += 2
        except (struct.error, UnicodeDecodeError) as e:
            raise CorpusFormatError(f"truncated or corrupt record: {e}", index) from e

        try:
            record = EmbeddingRecord(
                id=record_id,
                embedding=tuple(vector.tolist()),
                true_label=_label_from_codes(race_code, gender_code),
                source=Source.SYNTHETIC,
            )
        except (ValidationError, ValueError) as e:
            raise CorpusFormatError(str(e).splitlines()[0], index) from e
        corpus.add(record, index)

    if offset != len(data):
        raise CorpusFormatError(f"{len(data) - offset} trailing bytes after {count} records")
    return corpus.records


def _label_from_codes(race_code: int, gender_code: int) -> Optional[DemographicLabel]:
    if race_code == NO_LABEL_CODE and gender_code == NO_LABEL_CODE:
        return None
    if race_code >= len(RACES) or gender_code >= len(GENDERS):
        raise ValueError(f"label codes out of range: race={race_code} gender={gender_code}")
    return DemographicLabel(RACES[race_code], GENDERS[gender_code])


def load_corpus(
    path: Path,
    format: str = "jsonl",
    merge_fairface_labels: bool = False,
    laion_filter: bool = False,
) -> List[EmbeddingRecord]:
    """
    Reads and validates an embedding corpus.

    An empty file is a valid, empty corpus.
    """
    path = Path(path)
    try:
        kind = CorpusFormat(format)
    except ValueError as e:
        raise InputValidationError(f"unknown corpus format {format!r}") from e
    if not path.exists():
        raise InputValidationError(f"corpus not found: {path}")

    if kind is CorpusFormat.JSONL:
        records = _load_jsonl(path, merge_fairface_labels, laion_filter)
    else:
        if laion_filter:
            raise InputValidationError("the LAION filter needs caption metadata, which only jsonl corpora carry")
        records = _load_bin(path)

    if not records:
        logger.warning("Empty corpus", extra={"stage": "ingest", "action_details": str(path)})
    else:
        logger.info(
            "Corpus loaded",
            extra={"stage": "ingest", "action_details": f"{len(records)} records of dim {records[0].dim} from {path}"},
        )
    return records


def _record_json(record: EmbeddingRecord) -> str:
    payload: Dict[str, Any] = {
        "id": record.id,
        "embedding": list(record.embedding),
        "source": record.source.value,
        "provenance": record.provenance,
    }
    if record.true_label is not None:
        payload["race"] = record.true_label.race.value
        payload["gender"] = record.true_label.gender.value
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_corpus(records: Sequence[EmbeddingRecord], path: Path, format: str = "jsonl") -> Path:
    path = Path(path)
    try:
        kind = CorpusFormat(format)
    except ValueError as e:
        raise InputValidationError(f"unknown corpus format {format!r}") from e

    path.parent.mkdir(parents=True, exist_ok=True)
    if kind is CorpusFormat.JSONL:
        path.write_text("".join(_record_json(r) + "\n" for r in records), encoding="utf-8")
        return path

    dim = records[0].dim if records else 0
    chunks = [_HEADER.pack(dim, len(records))]
    for record in records:
        if record.dim != dim:
            raise DimensionMismatchError(f"record {record.id!r} has dimension {record.dim}, corpus has {dim}")
        encoded = record.id.encode("utf-8")
        chunks.append(_ID_LENGTH.pack(len(encoded)))
        chunks.append(encoded)
        with np.errstate(over="ignore"):
            values = np.asarray(record.embedding, dtype="<f4")
        if not np.all(np.isfinite(values)):
            raise InputValidationError(f"record {record.id!r} has values outside the float32 range")
        chunks.append(values.tobytes())
        if record.true_label is None:
            chunks.append(bytes([NO_LABEL_CODE, NO_LABEL_CODE]))
        else:
            chunks.append(bytes([RACES.index(record.true_label.race), GENDERS.index(record.true_label.gender)]))
    path.write_bytes(b"".join(chunks))
    return path


def split(
    corpus: Sequence[EmbeddingRecord],
    fraction: float,
    seed: int,
) -> Tuple[List[EmbeddingRecord], List[EmbeddingRecord]]:
    """
    Deterministic train/validation partition, stratified by label cell.

    Each stratum contributes round(fraction * size) records to the train side.
    Both halves keep corpus order.
    """
    if not 0.0 < fraction < 1.0:
        raise InputValidationError(f"fraction must lie strictly between 0 and 1, got {fraction}")

    strata: Dict[str, List[int]] = defaultdict(list)
    for index, record in enumerate(corpus):
        key = record.true_label.key if record.true_label is not None else "unlabeled"
        strata[key].append(index)

    train_idx: List[int] = []
    for key in sorted(strata):
        members = strata[key]
        order = stream(seed, "split", key).permutation(len(members))
        take = int(round(fraction * len(members)))
        train_idx.extend(members[i] for i in order[:take])

    chosen = set(train_idx)
    train = [r for i, r in enumerate(corpus) if i in chosen]
    validation = [r for i, r in enumerate(corpus) if i not in chosen]
    return train, validation


def check_validation_manifest(corpus: Sequence[EmbeddingRecord]) -> Dict[str, int]:
    """
    Observed minus expected count for every race and gender of the
    validation manifest; all zeros means the corpus matches.
    """
    observed = {key: 0 for key in FAIRFACE_VALIDATION_COUNTS}
    for record in corpus:
        if record.true_label is None:
            raise InputValidationError(f"record {record.id!r} has no label")
        observed[record.true_label.race.value] += 1
        observed[record.true_label.gender.value] += 1

    ordered = list(AXIS_KEYS[Axis.RACE]) + list(AXIS_KEYS[Axis.GENDER])
    return {key: observed[key] - FAIRFACE_VALIDATION_COUNTS[key] for key in ordered}
