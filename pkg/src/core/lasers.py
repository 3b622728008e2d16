"""Ablation laser energy curve, photon energies and fluence helpers."""

import math
from typing import Dict, Optional

from config.config import AblationLaserSpec
from src.core.constants import C, EV, H
from src.utils.errors import RateOutOfRangeError


def pulse_energy_at_rate(spec: AblationLaserSpec, f: float) -> float:
    """Pulse energy delivered at repetition rate ``f``.

    Flat up to the knee, a log-log ramp to the inverse-rate corner, then
    constant average power.

    Args:
        spec: Ablation laser description
        f: Repetition rate (Hz)

    Returns:
        Pulse energy (J)
    """
    if not 0 < f <= spec.max_rep_rate:
        raise RateOutOfRangeError(
            f"repetition rate {f!r} Hz outside (0, {spec.max_rep_rate!r}]"
        )
    if f <= spec.knee_rate:
        return spec.max_pulse_energy
    if f < spec.inverse_rate:
        beta = math.log(f / spec.knee_rate) / math.log(spec.inverse_rate / spec.knee_rate)
        beta = min(max(beta, 0.0), 1.0)
        return spec.max_pulse_energy * (spec.knee_rate / f) ** beta
    corner = spec.max_pulse_energy * (spec.knee_rate / spec.inverse_rate)
    return corner * spec.inverse_rate / f


def photon_energy(wavelength: float) -> float:
    """Photon energy hc/λ in eV."""
    if wavelength <= 0:
        raise ValueError("wavelength must be > 0")
    return H * C / wavelength / EV


def peak_fluence(energy: float, spec: AblationLaserSpec) -> float:
    """Peak fluence 2E·cosθ/(πw²) in J/m²."""
    return 2.0 * energy / spec.spot_area


def pulse_energy_for_fluence(fluence: float, spec: AblationLaserSpec) -> float:
    """Inverse of :func:`peak_fluence`."""
    return fluence * spec.spot_area / 2.0


def operating_pulse_energy(spec: AblationLaserSpec) -> float:
    """Pulse energy at the configured operating point.

    A configured fluence wins over the energy curve, even past what the
    laser delivers at ``rep_rate`` (see :func:`capability_shortfall`).
    """
    available = pulse_energy_at_rate(spec, spec.rep_rate)
    if spec.fluence is None:
        return available
    return pulse_energy_for_fluence(spec.fluence, spec)


def capability_shortfall(spec: AblationLaserSpec) -> Optional[Dict[str, float]]:
    """Describe a configured fluence the laser cannot reach at ``rep_rate``.

    Returns:
        Required and available pulse energies, or None when the operating
        point is within the energy curve
    """
    if spec.fluence is None:
        return None
    available = pulse_energy_at_rate(spec, spec.rep_rate)
    energy = pulse_energy_for_fluence(spec.fluence, spec)
    if energy <= available * (1 + 1e-12):
        return None
    return {
        "fluence_mJ_cm2": spec.fluence / 10.0,
        "rep_rate_hz": spec.rep_rate,
        "required_energy_uJ": energy * 1e6,
        "available_energy_uJ": available * 1e6,
    }


def operating_fluence(spec: AblationLaserSpec) -> float:
    """Peak fluence at the configured operating point (J/m²)."""
    if spec.fluence is not None:
        return spec.fluence
    return peak_fluence(pulse_energy_at_rate(spec, spec.rep_rate), spec)
