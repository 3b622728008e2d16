"""Tests for units, random streams, logging and the error hierarchy."""

import json
import math
import re
from pathlib import Path

import numpy as np
import pytest

from src.utils import StreamFactory, derive_rng, get_logger, parse_quantity
from src.utils.errors import (
    AblatronError,
    MalformedDocumentError,
    NonBracketableError,
    PhysicsError,
    ScenarioError,
    UnstableTrapError,
)
from src.utils.units import from_mj_per_cm2, to_mj_per_cm2


def test_parse_quantity_units():
    """Test unit-suffixed quantities."""
    assert parse_quantity("240 mJ/cm2") == pytest.approx(2400.0)
    assert parse_quantity("25 kHz") == pytest.approx(25e3)
    assert parse_quantity("40 ns") == pytest.approx(40e-9)
    assert parse_quantity("30 deg") == pytest.approx(math.radians(30))
    assert parse_quantity("4e-10 mbar") == pytest.approx(4e-10)
    assert parse_quantity("-400 MHz") == pytest.approx(-400e6)
    assert parse_quantity("1.5") == 1.5


def test_parse_quantity_rejects_garbage():
    """Test malformed quantities."""
    with pytest.raises(MalformedDocumentError):
        parse_quantity("fast", "run.duration")
    with pytest.raises(MalformedDocumentError) as exc:
        parse_quantity("3 parsecs", "geometry.target_trap_distance")
    assert exc.value.key == "geometry.target_trap_distance"


def test_fluence_conversions():
    """Test mJ/cm² <-> J/m²."""
    assert from_mj_per_cm2(240.0) == pytest.approx(2400.0)
    assert to_mj_per_cm2(from_mj_per_cm2(600.0)) == pytest.approx(600.0)


def test_streams_are_reproducible():
    """Test that named streams depend only on seed and name."""
    a = StreamFactory(7).stream("beam").uniform(size=5)
    b = StreamFactory(7).stream("beam").uniform(size=5)

    assert np.array_equal(a, b)


def test_streams_are_independent():
    """Test that consuming one stream leaves another untouched."""
    factory = StreamFactory(7)
    factory.stream("source").uniform(size=1000)
    after = factory.stream("beam").uniform(size=5)

    assert np.array_equal(after, StreamFactory(7).stream("beam").uniform(size=5))
    assert not np.array_equal(after, StreamFactory(7).stream("trap").uniform(size=5))


def test_fresh_and_fork():
    """Test fresh restarts and forked children."""
    factory = StreamFactory(3)
    first = factory.stream("diagnostics").uniform()
    assert factory.fresh("diagnostics").uniform() == first
    assert factory.fork("diagnostics", 0).uniform() != factory.fork("diagnostics", 1).uniform()
    assert derive_rng(3, "diagnostics").uniform() == first


def test_documented_streams_match_code():
    """Test that the architecture stream table names exactly the streams the code draws from."""
    root = Path(__file__).resolve().parent.parent
    used = set()
    for path in [*root.joinpath("src").rglob("*.py"), root / "app.py"]:
        used.update(re.findall(r'(?:stream|derive_rng)\([^)]*?"(\w+)"\)', path.read_text(encoding="utf-8")))
    table = root.joinpath("docs", "ARCHITECTURE.md").read_text(encoding="utf-8")

    assert used == set(re.findall(r"^\| `(\w+)` \|", table, flags=re.MULTILINE))


def test_logger_renders_numpy_context(mocker):
    """Test structured context with numpy values."""
    log = get_logger("tests.render")
    spy = mocker.patch.object(log.logger, "info")

    log.info("Kernel ready", {"rate": np.float64(1.5), "counts": np.arange(3)})

    message = spy.call_args[0][0]
    assert message.startswith("Kernel ready - ")
    assert json.loads(message.split(" - ", 1)[1]) == {"rate": 1.5, "counts": [0, 1, 2]}


def test_logger_record(mocker):
    """Test run lifecycle records."""
    log = get_logger("tests.record")
    spy = mocker.patch.object(log.logger, "info")

    log.record("run-started", "gated", {"seed": np.int64(4)})

    message = spy.call_args[0][0]
    assert message.startswith("RUN: ")
    entry = json.loads(message[len("RUN: "):])
    assert entry["event_type"] == "run-started"
    assert entry["run_id"] == "gated"
    assert entry["details"] == {"seed": 4}
    assert "timestamp" in entry


def test_logger_handlers_attached_once():
    """Test that repeated lookups do not stack handlers."""
    first = get_logger("tests.once")
    second = get_logger("tests.once")

    assert len(second.logger.handlers) == 1
    assert first.logger is second.logger


def test_error_hierarchy():
    """Test kinds and exit codes."""
    assert issubclass(PhysicsError, AblatronError)
    assert UnstableTrapError("q too large").exit_code == 3
    assert UnstableTrapError.kind == "unstable-trap"

    error = NonBracketableError("target too high", 42.0)
    assert error.achievable_rate == 42.0
    assert "42" in str(error)


def test_scenario_error_keeps_context():
    """Test the scenario wrapper."""
    cause = UnstableTrapError("q = 1.2")
    error = ScenarioError("gated", 3.25, cause)

    assert error.scenario == "gated"
    assert error.sim_time == 3.25
    assert error.cause_kind == "unstable-trap"
    assert error.exit_code == 3
    assert "t=3.25" in str(error)
