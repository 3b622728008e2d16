"""Core physics helpers shared by all modules."""

from .lasers import (
    pulse_energy_at_rate,
    photon_energy,
    peak_fluence,
    pulse_energy_for_fluence,
    operating_pulse_energy,
    operating_fluence,
    capability_shortfall,
)

__all__ = [
    'pulse_energy_at_rate',
    'photon_energy',
    'peak_fluence',
    'pulse_energy_for_fluence',
    'operating_pulse_energy',
    'operating_fluence',
    'capability_shortfall',
]
