import json
import sys
from pathlib import Path

import numpy as np
import pytest

# =========================================================
# Add project root to Python path so `import src` works
# =========================================================
PROJECT_ROOT = Path(__file__).resolve().parents[1]
sys.path.append(str(PROJECT_ROOT))

# =========================================================
# Now imports work
# =========================================================
from src.agents.rule_based_agent import RuleBasedMock
from src.backends.presets import preset
from src.backends.synthetic_backend import SyntheticBackend
from src.config import Settings, get_settings
from src.schemas.debias_schemas import TargetDistribution
from src.schemas.demographics import DemographicLabel, Gender, Race
from src.schemas.records import EmbeddingRecord


# =========================================================
# Keep the environment out of every test
# =========================================================
@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    for name in Settings.model_fields:
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


# =========================================================
# Simulator worlds and clients
# =========================================================
@pytest.fixture(scope="session")
def sdxl_backend():
    return SyntheticBackend(preset("sdxl_person_fig1"))


@pytest.fixture(scope="session")
def uniform_backend():
    return SyntheticBackend(preset("uniform"))


@pytest.fixture(scope="session")
def mock_client():
    return RuleBasedMock()


@pytest.fixture(scope="session")
def uniform_target():
    return TargetDistribution.uniform()


# =========================================================
# Small labeled corpora
# =========================================================
def make_record(record_id, embedding, race=None, gender=None):
    label = DemographicLabel(Race(race), Gender(gender)) if race else None
    return EmbeddingRecord(id=record_id, embedding=tuple(float(v) for v in embedding), true_label=label)


@pytest.fixture
def blob_records():
    """
    Two well-separated races, both genders, 20 records each cell.
    """
    rng = np.random.default_rng(3)
    centres = {"Black": np.array([4.0, 0.0, 0.0, 1.0]), "White": np.array([0.0, 4.0, 0.0, 1.0])}
    shift = {"Female": np.array([0.0, 0.0, 3.0, 0.0]), "Male": np.zeros(4)}
    records = []
    for race, centre in centres.items():
        for gender, offset in shift.items():
            for i in range(20):
                vector = centre + offset + 0.2 * rng.standard_normal(4)
                records.append(make_record(f"{race}-{gender}-{i:02d}", vector, race, gender))
    return records


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")
    return path


@pytest.fixture
def corpus_file(tmp_path, blob_records):
    rows = [
        {
            "id": r.id,
            "embedding": list(r.embedding),
            "race": r.true_label.race.value,
            "gender": r.true_label.gender.value,
        }
        for r in blob_records
    ]
    return write_jsonl(tmp_path / "corpus.jsonl", rows)
