"""Trap dynamics package."""

from .dynamics import (
    IonBirth,
    IonCrystal,
    NewIon,
    mathieu_q,
    is_stable,
    trap_depth,
    crystal_density,
    volume_from_count,
    count_from_volume,
    attempt_capture,
    capture_mask,
    apply_collision_and_heating_events,
    axial_frequency,
    radial_secular_frequency,
)

__all__ = [
    'IonBirth',
    'IonCrystal',
    'NewIon',
    'mathieu_q',
    'is_stable',
    'trap_depth',
    'crystal_density',
    'volume_from_count',
    'count_from_volume',
    'attempt_capture',
    'capture_mask',
    'apply_collision_and_heating_events',
    'axial_frequency',
    'radial_secular_frequency',
]
