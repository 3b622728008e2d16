"""Yield calibration, gas-load calibration, Rydberg rate ceiling and depth scans."""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.config import RunConfig, VacuumParams, update_config
from src.ablation.source import DepthModel, Regime, accumulate_depth, classify_regime
from src.harness.meanfield import expected_loading_rate
from src.harness.scenario import Scenario, run_scenario
from src.utils.errors import NonBracketableError
from src.utils.logging import get_logger

logger = get_logger(__name__)

CALIBRATION_ON_TIME = 20.0
MIN_YIELD_SCALE = 1e-40
MAX_YIELD_SCALE = 1e40
BRACKET_FACTOR = 10.0
MAX_SIMULATED_IONS = 1e6


def calibration_config(cfg: RunConfig, fluence: float, rep_rate: float,
                       on_time: float = CALIBRATION_ON_TIME) -> RunConfig:
    """Continuous mean-field run at the requested operating point."""
    return update_config(cfg, {
        "ablation.fluence": fluence,
        "ablation.rep_rate": rep_rate,
        "mean_field": True,
        "duration": on_time,
        "gating_schedule": (),
        "controller": None,
        "detection.drift_amplitude": 0.0,
    })


def simulated_rate(cfg: RunConfig, yield_scale: float) -> float:
    """Mean-field loading rate of ``cfg`` at ``yield_scale`` (ions/s).

    Bracket points that would fill the crystal with more than
    MAX_SIMULATED_IONS ions use the closed-form expectation instead, which
    the mean-field run reproduces exactly.
    """
    scaled = update_config(cfg, {"source.yield_scale": yield_scale})
    expected = expected_loading_rate(scaled)
    if expected * cfg.duration > MAX_SIMULATED_IONS:
        return expected
    result = run_scenario(Scenario(f"calibration@{yield_scale:.6g}", scaled, outputs=frozenset()))
    return float(result.summary["mean_loading_rate"])


def calibrate_yield(target_rate: float, fluence: float, rep_rate: float, cfg: RunConfig,
                    rtol: float = 0.01, max_iterations: int = 200,
                    on_time: float = CALIBRATION_ON_TIME) -> float:
    """Find the yield scale that reproduces ``target_rate``.

    Bisects on log(yield_scale) with the mean-field simulator, after
    expanding a bracket by decades from the configured scale.

    Args:
        target_rate: Desired loading rate (ions/s)
        fluence: Peak fluence (J/m²)
        rep_rate: Repetition rate (Hz)
        cfg: Base configuration
        rtol: Relative tolerance on the rate
        max_iterations: Bisection limit
        on_time: Simulated on-time per evaluation (s)

    Returns:
        Calibrated yield_scale
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be > 0")
    base = calibration_config(cfg, fluence, rep_rate, on_time)
    if classify_regime(fluence, base.source.plasma_threshold) == Regime.PLASMA:
        logger.warning("Calibrating in the plasma regime", {"fluence_mJ_cm2": fluence / 10.0})

    scale = base.source.yield_scale
    rate = simulated_rate(base, scale)
    lo, hi = (scale, None) if rate < target_rate else (None, scale)
    while hi is None:
        scale *= BRACKET_FACTOR
        if scale > MAX_YIELD_SCALE:
            raise NonBracketableError(f"target {target_rate:g} ions/s cannot be reached", rate)
        rate = simulated_rate(base, scale)
        if rate >= target_rate:
            hi = scale
        else:
            lo = scale
    while lo is None:
        scale /= BRACKET_FACTOR
        if scale < MIN_YIELD_SCALE:
            raise NonBracketableError(f"target {target_rate:g} ions/s is below the rate floor", rate)
        rate = simulated_rate(base, scale)
        if rate < target_rate:
            lo = scale
        else:
            hi = scale

    for _ in range(max_iterations):
        scale = math.sqrt(lo * hi)
        rate = simulated_rate(base, scale)
        if abs(rate - target_rate) <= rtol * target_rate:
            break
        if rate < target_rate:
            lo = scale
        else:
            hi = scale
    else:
        logger.warning("Yield calibration hit the iteration limit", {"scale": scale, "rate": rate})

    logger.record("calibration-converged", "calibrate", {
        "target_rate": target_rate,
        "rate": rate,
        "yield_scale": scale,
        "fluence_mJ_cm2": fluence / 10.0,
        "rep_rate_hz": rep_rate,
    })
    return scale


def calibrate_gas_load(delta_p: float, rep_rate: float, vacuum: VacuumParams) -> float:
    """Per-pulse gas load (mbar·L) that raises the equilibrium pressure by ``delta_p``."""
    if delta_p < 0 or rep_rate <= 0:
        raise ValueError("require delta_p >= 0 and rep_rate > 0")
    return delta_p * vacuum.pump_speed / rep_rate


def rydberg_rate_ceiling(cfg: RunConfig) -> float:
    """Saturated loading rate R_max of the Rydberg channel alone (ions/s).

    The 272 nm laser is switched off and the rate is evaluated at the
    saturation power, where it is exactly half the ceiling.
    """
    p_sat = cfg.photoionization.rydberg_saturation_power
    dark_pi = update_config(cfg, {"pi_laser.power": 0.0, "cooling_laser.power": p_sat})
    return 2.0 * expected_loading_rate(dark_pi)


def depth_scan(cfg: RunConfig, fluences: Sequence[float], n_pulses: int,
               rng: Optional[np.random.Generator] = None,
               noise: float = 0.0) -> List[Tuple[float, float, int]]:
    """Crater depth after ``n_pulses`` at each fluence.

    Args:
        cfg: Configuration holding the depth model
        fluences: Peak fluences (J/m²)
        n_pulses: Pulses per point
        rng: Draws multiplicative Gaussian noise when given
        noise: Relative noise level

    Returns:
        Rows of (fluence_mJ_cm2, depth_um, n_pulses)
    """
    model = DepthModel.from_source(cfg.source)
    rows = []
    for fluence in fluences:
        depth = accumulate_depth(fluence, n_pulses, model)
        if rng is not None and noise > 0:
            depth *= max(0.0, 1.0 + noise * rng.standard_normal())
        rows.append((fluence / 10.0, depth * 1e6, n_pulses))
    return rows
