"""Ablation source package."""

from .gating import GatingSchedule
from .source import (
    Regime,
    PulseSpec,
    AtomBurst,
    TargetState,
    DepthModel,
    classify_regime,
    surface_temperature,
    vapor_pressure,
    atoms_per_pulse,
    emit_burst,
    emit_pulse_train,
    accumulate_depth,
)

__all__ = [
    'GatingSchedule',
    'Regime',
    'PulseSpec',
    'AtomBurst',
    'TargetState',
    'DepthModel',
    'classify_regime',
    'surface_temperature',
    'vapor_pressure',
    'atoms_per_pulse',
    'emit_burst',
    'emit_pulse_train',
    'accumulate_depth',
]
