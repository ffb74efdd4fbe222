import io
import json
import time

import pytest

from src.config import RunConfig, default_run_config, get_settings, load_run_config
from src.services.logger import MAX_LOG_VALUE_LENGTH, get_logger, set_log_level
from src.utils.errors import InputValidationError
from src.utils.retry import retry
from src.utils.rng import derive_seed, stream
from src.worker.pool import ordered_map


def write_config(tmp_path, content):
    path = tmp_path / "run.json"
    path.write_text(content if isinstance(content, str) else json.dumps(content), encoding="utf-8")
    return path


# =========================================================
# Settings and run configuration
# =========================================================
def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("FACEBIAS_PARALLELISM", "3")
    monkeypatch.setenv("FACEBIAS_OUTPUT_DIR", "/tmp/facebias-out")
    get_settings.cache_clear()
    options = default_run_config().global_options
    assert options.parallelism == 3
    assert options.output_dir == "/tmp/facebias-out"
    assert options.seed == 0


def test_config_file_overrides_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("FACEBIAS_PARALLELISM", "3")
    get_settings.cache_clear()
    path = write_config(tmp_path, {"version": 1, "global": {"parallelism": 6}, "commands": {"audit": {"n": 5}}})
    config = load_run_config(path)
    assert config.global_options.parallelism == 6
    assert config.command_block("audit") == {"n": 5}
    assert config.command_block("train") == {}


def test_no_config_file_uses_defaults():
    assert load_run_config(None) == RunConfig()


@pytest.mark.parametrize(
    "content,message",
    [
        ("{not json", "not valid JSON"),
        ("[1, 2]", "JSON object"),
        ({"global": {}}, "unsupported config version"),
        ({"version": 1, "global": {"colour": "blue"}}, "invalid config file"),
        ({"version": 1, "plugins": []}, "invalid config file"),
    ],
)
def test_config_file_errors(tmp_path, content, message):
    with pytest.raises(InputValidationError, match=message):
        load_run_config(write_config(tmp_path, content))


def test_missing_config_file(tmp_path):
    with pytest.raises(InputValidationError, match="not found"):
        load_run_config(tmp_path / "absent.json")


# =========================================================
# Structured logging
# =========================================================
def capture(logger):
    buffer = io.StringIO()
    logger.handlers[0].setStream(buffer)
    return buffer


def test_logs_are_json_lines():
    logger = get_logger("test_json_logs")
    buffer = capture(logger)
    logger.info("Audit started", extra={"service": "audit", "stage": "start", "backend_id": "sim:uniform"})
    record = json.loads(buffer.getvalue().strip())
    assert record["message"] == "Audit started"
    assert record["level"] == "INFO"
    assert record["service"] == "audit"
    assert record["backend_id"] == "sim:uniform"
    assert "timestamp" in record
    assert record["action_details"] is None


def test_long_values_are_truncated():
    logger = get_logger("test_truncation")
    buffer = capture(logger)
    logger.info("long", extra={"action_details": "x" * (MAX_LOG_VALUE_LENGTH + 50)})
    record = json.loads(buffer.getvalue())
    assert record["action_details"].endswith("...[truncated]")
    assert len(record["action_details"]) == MAX_LOG_VALUE_LENGTH + len("...[truncated]")


def test_log_level_applies_to_existing_loggers():
    logger = get_logger("test_levels")
    buffer = capture(logger)
    try:
        set_log_level("warning")
        logger.info("hidden")
        logger.warning("shown")
        assert [json.loads(line)["message"] for line in buffer.getvalue().splitlines()] == ["shown"]
    finally:
        set_log_level("INFO")
    with pytest.raises(ValueError, match="unknown log level"):
        set_log_level("LOUD")


# =========================================================
# Retry, worker pool and random streams
# =========================================================
def test_retry_until_success():
    calls = []

    @retry(max_attempts=3, retry_on=(ConnectionError,))
    def flaky():
        calls.append(1)
        if len(calls) < 3:
            raise ConnectionError("down")
        return "ok"

    assert flaky() == "ok"
    assert len(calls) == 3


def test_retry_reraises_last_error_and_skips_others():
    calls = []

    @retry(max_attempts=2, retry_on=(ConnectionError,))
    def always_down():
        calls.append(1)
        raise ConnectionError(f"attempt {len(calls)}")

    with pytest.raises(ConnectionError, match="attempt 2"):
        always_down()

    @retry(max_attempts=5, retry_on=(ConnectionError,))
    def broken():
        calls.append(1)
        raise KeyError("bad")

    calls.clear()
    with pytest.raises(KeyError):
        broken()
    assert len(calls) == 1

    with pytest.raises(ValueError):
        retry(max_attempts=0)


def test_ordered_map_keeps_input_order():
    def slow_square(x):
        time.sleep(0.001 * (10 - x))
        return x * x

    assert ordered_map(slow_square, list(range(10)), parallelism=4) == [x * x for x in range(10)]
    assert ordered_map(slow_square, [], parallelism=4) == []
    with pytest.raises(ValueError):
        ordered_map(slow_square, [1], parallelism=0)


def test_ordered_map_raises_first_failure():
    def check(x):
        if x in (3, 7):
            raise RuntimeError(f"failed {x}")
        return x

    with pytest.raises(RuntimeError, match="failed 3"):
        ordered_map(check, list(range(10)), parallelism=3)


def test_streams_are_independent_and_stable():
    first = stream(1, "sim", "person", 5).random(3)
    assert list(first) == list(stream(1, "sim", "person", 5).random(3))
    assert list(first) != list(stream(1, "sim", "person", 6).random(3))
    assert derive_seed(4, "variants", "Doctor") == derive_seed(4, "variants", "Doctor")
    assert derive_seed(4, "variants", "Doctor") != derive_seed(4, "variants", "Nurse")
