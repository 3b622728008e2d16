"""Diagnostics package: fluorescence, step detection, pressure and camera frames."""

from .fluorescence import (
    FluorescenceTrace,
    LoadingEvent,
    LoadingTimeline,
    RateModel,
    scattering_rate,
    single_ion_rate,
    fluorescence_rate,
    expected_counts,
    synthesize_trace,
    step_scores,
    plateau_levels,
    detect_steps,
)
from .pressure import (
    PressureTrace,
    pressure_step,
    integrate_pressure,
    equilibrium_pressure,
    recovery_time_constant,
)
from .ccd import equilibrium_positions, render_ccd_frame

__all__ = [
    'FluorescenceTrace',
    'LoadingEvent',
    'LoadingTimeline',
    'RateModel',
    'scattering_rate',
    'single_ion_rate',
    'fluorescence_rate',
    'expected_counts',
    'synthesize_trace',
    'step_scores',
    'plateau_levels',
    'detect_steps',
    'PressureTrace',
    'pressure_step',
    'integrate_pressure',
    'equilibrium_pressure',
    'recovery_time_constant',
    'equilibrium_positions',
    'render_ccd_frame',
]
