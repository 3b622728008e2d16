"""Test configuration."""

import pytest
import sys
import os

# Add the repository root to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

os.environ.pop("ABLATRON_SEED", None)
os.environ.pop("ABLATRON_CONFIG", None)

from config.config import parse_config, update_config  # noqa: E402
from src.harness.calibration import calibrate_yield  # noqa: E402
from src.utils.units import from_mj_per_cm2  # noqa: E402

# Operating point of the highest reported loading rate
FAST_FLUENCE = from_mj_per_cm2(240.0)
FAST_REP_RATE = 25e3
FAST_TARGET_RATE = 125.0

# Operating point of the single-ion staircase
SLOW_FLUENCE = from_mj_per_cm2(120.0)
SLOW_REP_RATE = 50e3


@pytest.fixture
def default_config():
    """Configuration with every default."""
    return parse_config("")


@pytest.fixture(scope="session")
def fast_config():
    """240 mJ/cm², 25 kHz, calibrated to 125 ions/s."""
    base = update_config(parse_config(""), {
        "ablation.fluence": FAST_FLUENCE,
        "ablation.rep_rate": FAST_REP_RATE,
    })
    scale = calibrate_yield(FAST_TARGET_RATE, FAST_FLUENCE, FAST_REP_RATE, base)
    return update_config(base, {"source.yield_scale": scale})


@pytest.fixture(scope="session")
def slow_config():
    """120 mJ/cm², 50 kHz, calibrated to 0.1 ions/s."""
    base = update_config(parse_config(""), {
        "ablation.fluence": SLOW_FLUENCE,
        "ablation.rep_rate": SLOW_REP_RATE,
    })
    scale = calibrate_yield(0.1, SLOW_FLUENCE, SLOW_REP_RATE, base)
    return update_config(base, {"source.yield_scale": scale})


@pytest.fixture
def rescale():
    """Rescale a calibrated config to another loading rate (rate ∝ yield_scale)."""
    def _rescale(cfg, rate, reference_rate):
        return update_config(cfg, {"source.yield_scale": cfg.source.yield_scale * rate / reference_rate})
    return _rescale
