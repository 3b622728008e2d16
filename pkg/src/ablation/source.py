"""Laser pulse to atom burst conversion.

Surface heating uses the 1-D constant-flux conduction peak rise, the yield
follows Hertz-Knudsen desorption at that temperature, and the crater depth
follows a hinge in fluence.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from config.config import AblationLaserSpec, RunConfig, SourceParams, SpeciesData
from src.ablation.gating import GatingSchedule
from src.core.constants import K_B, MBAR_TO_PA
from src.core.lasers import operating_pulse_energy, peak_fluence
from src.utils.errors import PulseOutsideGateError
from src.utils.logging import get_logger

logger = get_logger(__name__)


class Regime(str, Enum):
    THERMAL = "Thermal"
    PLASMA = "Plasma"


@dataclass(frozen=True)
class PulseSpec:
    """One ablation pulse on the target."""
    energy: float
    duration: float
    spot_area: float
    fluence: float
    time: float = 0.0

    def __post_init__(self):
        if self.energy < 0 or self.duration <= 0 or self.spot_area <= 0 or self.fluence < 0:
            raise ValueError("pulse energy, duration, spot_area and fluence must be positive")
        if self.time < 0:
            raise ValueError("pulse time must be >= 0")

    @classmethod
    def from_laser(cls, laser: AblationLaserSpec, time: float = 0.0,
                   energy: Optional[float] = None) -> "PulseSpec":
        """Pulse at the laser's operating point, or at an explicit energy."""
        if energy is None:
            energy = operating_pulse_energy(laser)
        return cls(
            energy=energy,
            duration=laser.pulse_duration,
            spot_area=laser.spot_area,
            fluence=peak_fluence(energy, laser),
            time=time,
        )

    def at(self, time: float) -> "PulseSpec":
        return replace(self, time=time)


@dataclass(frozen=True)
class AtomBurst:
    """Neutral atoms leaving the target after one pulse (or a pulse train)."""
    n_atoms: float
    emission_time: float
    surface_temperature: float
    ground_fraction: float
    rydberg_fraction: float
    regime: Regime
    metastable_fraction: float = 0.0

    def __post_init__(self):
        if self.n_atoms < 0:
            raise ValueError("n_atoms must be >= 0")
        if self.ground_fraction + self.rydberg_fraction + self.metastable_fraction > 1 + 1e-12:
            raise ValueError("state fractions must not exceed 1")
        if self.regime == Regime.THERMAL and (self.rydberg_fraction > 0 or self.metastable_fraction > 0):
            raise ValueError("thermal bursts carry ground-state atoms only")


@dataclass(frozen=True)
class TargetState:
    """Cumulative state of the ablation target."""
    removed_depth: float = 0.0
    contaminant_coverage: float = 0.0
    pulses_fired: int = 0
    atoms_removed: float = 0.0

    @classmethod
    def fresh(cls, source: SourceParams) -> "TargetState":
        return cls(contaminant_coverage=source.initial_contaminant_coverage)


@dataclass(frozen=True)
class DepthModel:
    """Hinge model of crater depth per pulse versus fluence."""
    threshold: float = 6000.0
    slope: float = 2.5e-15
    melt_churn: float = 0.0

    @classmethod
    def from_source(cls, source: SourceParams) -> "DepthModel":
        return cls(source.depth_threshold, source.depth_slope, source.melt_churn)

    def churn(self, fluence: float) -> float:
        """Bounded sub-threshold surface term (m)."""
        if self.threshold <= 0:
            return self.melt_churn
        return self.melt_churn * min(fluence / self.threshold, 1.0)


def classify_regime(fluence: float, threshold: float = 6000.0) -> Regime:
    """Plasma strictly above the threshold fluence (J/m²)."""
    if fluence < 0:
        raise ValueError("fluence must be >= 0")
    return Regime.PLASMA if fluence > threshold else Regime.THERMAL


def surface_temperature(pulse: PulseSpec, species: SpeciesData, ambient: float) -> float:
    """Peak surface temperature reached during ``pulse`` (K)."""
    if ambient <= 0:
        raise ValueError("ambient temperature must be > 0")
    effusivity = math.sqrt(math.pi * species.density * species.specific_heat
                           * species.thermal_conductivity * pulse.duration)
    return ambient + 2.0 * (1.0 - species.reflectivity_1064) * pulse.fluence / effusivity


def vapor_pressure(T: float, species: SpeciesData) -> float:
    """Equilibrium vapor pressure in mbar."""
    a, b = species.vapor_pressure_coeffs
    return 10.0 ** (a - b / T)


def atoms_per_pulse(T: float, spot_area: float, effective_time: float,
                    species: SpeciesData, yield_scale: float = 1.0) -> float:
    """Mean number of atoms desorbed by one pulse.

    Args:
        T: Surface temperature (K)
        spot_area: Heated area (m²)
        effective_time: Emission time (s)
        species: Target material
        yield_scale: Calibration constant

    Returns:
        Expected atom count (Hertz-Knudsen flux times area and time)
    """
    if T <= 0:
        raise ValueError("temperature must be > 0")
    pressure_pa = vapor_pressure(T, species) * MBAR_TO_PA
    flux = pressure_pa / math.sqrt(2.0 * math.pi * species.mean_mass * K_B * T)
    return yield_scale * spot_area * effective_time * flux


def contaminant_decay_factor(laser: AblationLaserSpec, source: SourceParams) -> float:
    """Per-pulse multiplicative decay of contaminant coverage."""
    fraction = min(laser.spot_area / laser.dither_area, 1.0)
    return 1.0 - source.contaminant_burn_efficiency * fraction


def mean_burst(pulse: PulseSpec, cfg: RunConfig) -> AtomBurst:
    """Expected burst for ``pulse`` without sampling."""
    source = cfg.source
    regime = classify_regime(pulse.fluence, source.plasma_threshold)
    T = surface_temperature(pulse, cfg.species, source.ambient_temperature)
    n_mean = atoms_per_pulse(T, pulse.spot_area, source.effective_time or pulse.duration,
                             cfg.species, source.yield_scale)
    if regime == Regime.PLASMA:
        rydberg, metastable = source.rydberg_fraction, source.metastable_fraction
    else:
        rydberg, metastable = 0.0, 0.0
    return AtomBurst(
        n_atoms=n_mean,
        emission_time=pulse.time,
        surface_temperature=T,
        ground_fraction=1.0 - rydberg - metastable,
        rydberg_fraction=rydberg,
        regime=regime,
        metastable_fraction=metastable,
    )


def advance_target(state: TargetState, n_atoms: float, n_pulses: int,
                   pulse: PulseSpec, cfg: RunConfig) -> TargetState:
    """Target after ``n_pulses`` pulses removed ``n_atoms`` atoms in total."""
    depth = n_atoms * cfg.species.mean_mass / (cfg.species.density * pulse.spot_area)
    decay = contaminant_decay_factor(cfg.ablation, cfg.source) ** n_pulses
    return TargetState(
        removed_depth=state.removed_depth + depth,
        contaminant_coverage=state.contaminant_coverage * decay,
        pulses_fired=state.pulses_fired + n_pulses,
        atoms_removed=state.atoms_removed + n_atoms,
    )


def emit_burst(pulse: PulseSpec, state: TargetState, species: SpeciesData, cfg: RunConfig,
               rng: Optional[np.random.Generator] = None,
               schedule: Optional[GatingSchedule] = None) -> Tuple[AtomBurst, TargetState]:
    """Emit the burst of one pulse and update the target.

    Args:
        pulse: The pulse, with its firing time
        state: Target before the pulse
        species: Target material (normally ``cfg.species``)
        cfg: Run configuration
        rng: Source stream; None gives the mean-field (unsampled) count
        schedule: Gating schedule; defaults to the one in ``cfg``

    Returns:
        Tuple of (burst, updated target state)
    """
    schedule = schedule or GatingSchedule.from_config(cfg)
    if not schedule.is_on(pulse.time):
        raise PulseOutsideGateError(f"pulse at t={pulse.time!r} s falls outside every gate")
    if species is not cfg.species:
        cfg = cfg.model_copy(update={"species": species})
    burst = mean_burst(pulse, cfg)
    if rng is not None:
        burst = replace(burst, n_atoms=float(rng.poisson(burst.n_atoms)))
    return burst, advance_target(state, burst.n_atoms, 1, pulse, cfg)


def emit_pulse_train(n_pulses: int, pulse: PulseSpec, state: TargetState, cfg: RunConfig,
                     rng: Optional[np.random.Generator] = None) -> Tuple[float, TargetState]:
    """Total atoms from ``n_pulses`` identical pulses, for the scenario loop.

    The sum of independent Poisson bursts is one Poisson draw with the summed
    mean, so per-step work does not scale with the number of pulses.
    """
    if n_pulses <= 0:
        return 0.0, state
    mean_total = n_pulses * mean_burst(pulse, cfg).n_atoms
    n_atoms = float(rng.poisson(mean_total)) if rng is not None else mean_total
    return n_atoms, advance_target(state, n_atoms, n_pulses, pulse, cfg)


def accumulate_depth(fluence: float, n_pulses: int, model: DepthModel) -> float:
    """Crater depth after ``n_pulses`` at ``fluence`` (m)."""
    if n_pulses < 0:
        raise ValueError("n_pulses must be >= 0")
    if n_pulses == 0:
        return 0.0
    return n_pulses * max(0.0, model.slope * (fluence - model.threshold)) + model.churn(fluence)
