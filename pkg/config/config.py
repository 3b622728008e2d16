"""Configuration management for the ablatron loading simulator.

A run is described by a flat, sectioned key-value document (INI). Every value
is an SI number or a unit-suffixed quantity; see ``config/ablatron.example.ini``
for the full schema with defaults.
"""

import configparser
import hashlib
import math
import os
import typing
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy import constants

from src.utils.errors import (
    ConfigError,
    InvariantViolationError,
    MalformedDocumentError,
    UnknownIsotopeError,
    UnknownKeyError,
)
from src.utils.units import parse_quantity

U = constants.atomic_mass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class IsotopeData(_Model):
    """One isotope of the target species."""
    label: str
    mass: float = Field(gt=0)
    natural_abundance: float = Field(ge=0, le=1)
    isotope_shift_272: float = 0.0

    @property
    def mass_number(self) -> int:
        return int(round(self.mass / U))


CALCIUM_ISOTOPES: Tuple[IsotopeData, ...] = (
    IsotopeData(label="ca40", mass=39.962591 * U, natural_abundance=0.96941, isotope_shift_272=0.0),
    IsotopeData(label="ca42", mass=41.958618 * U, natural_abundance=0.00647, isotope_shift_272=0.519e9),
    IsotopeData(label="ca43", mass=42.958767 * U, natural_abundance=0.00135, isotope_shift_272=0.690e9),
    IsotopeData(label="ca44", mass=43.955482 * U, natural_abundance=0.02086, isotope_shift_272=1.005e9),
    IsotopeData(label="ca46", mass=45.953689 * U, natural_abundance=0.00004, isotope_shift_272=1.470e9),
    IsotopeData(label="ca48", mass=47.952523 * U, natural_abundance=0.00187, isotope_shift_272=1.880e9),
)

CALCIUM_LEVELS: Dict[str, float] = {
    "ground": 0.0,
    "resonant_272_upper": 4.554076,
    "metastable_1D2": 2.709,
    "ion_S12": 6.11316,
    "ion_P12": 6.11316 + 3.1233517,
    "ion_D32": 6.11316 + 1.6924,
}


class SpeciesData(_Model):
    """Target material: isotopes, levels, vapor pressure and thermal data."""
    name: str = "Ca"
    isotopes: Tuple[IsotopeData, ...] = CALCIUM_ISOTOPES
    ionization_potential: float = Field(default=6.11316, gt=0)
    level_energies: Dict[str, float] = Field(default_factory=lambda: dict(CALCIUM_LEVELS))
    # log10(P[mbar]) = A - B/T
    vapor_pressure_a: float = 7.07
    vapor_pressure_b: float = Field(default=7840.0, gt=0)
    density: float = Field(default=1550.0, gt=0)
    specific_heat: float = Field(default=647.0, gt=0)
    thermal_conductivity: float = Field(default=200.0, gt=0)
    reflectivity_1064: float = Field(default=0.9, ge=0, lt=1)

    @field_validator("isotopes")
    @classmethod
    def _abundances_sum_to_one(cls, isotopes):
        if not isotopes:
            raise ValueError("at least one isotope is required")
        total = math.fsum(iso.natural_abundance for iso in isotopes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"natural abundances must sum to 1 ± 1e-9 (got {total!r})")
        labels = [iso.label for iso in isotopes]
        if len(set(labels)) != len(labels):
            raise ValueError("isotope labels must be unique")
        return isotopes

    @model_validator(mode="after")
    def _bound_levels_below_ip(self):
        for name, energy in self.level_energies.items():
            if energy < 0:
                raise ValueError(f"level {name} must be >= 0 eV")
            if not name.startswith("ion_") and energy >= self.ionization_potential:
                raise ValueError(
                    f"bound level {name} ({energy} eV) must lie below the ionization potential"
                )
        return self

    @property
    def vapor_pressure_coeffs(self) -> Tuple[float, float]:
        return self.vapor_pressure_a, self.vapor_pressure_b

    @property
    def masses(self) -> np.ndarray:
        return np.array([iso.mass for iso in self.isotopes])

    @property
    def abundances(self) -> np.ndarray:
        return np.array([iso.natural_abundance for iso in self.isotopes])

    @property
    def mean_mass(self) -> float:
        return float(np.dot(self.masses, self.abundances))

    def isotope_index(self, isotope: Any) -> int:
        """Index of an isotope given its label or mass number."""
        for i, iso in enumerate(self.isotopes):
            if iso.label == isotope or (isinstance(isotope, (int, np.integer)) and iso.mass_number == isotope):
                return i
        raise UnknownIsotopeError(f"unknown isotope {isotope!r} for species {self.name}")

    def isotope(self, isotope: Any) -> IsotopeData:
        return self.isotopes[self.isotope_index(isotope)]


class AblationLaserSpec(_Model):
    """Pulsed ablation laser and its operating point."""
    wavelength: float = Field(default=1064e-9, gt=0)
    max_pulse_energy: float = Field(default=80e-6, gt=0)
    knee_rate: float = Field(default=3e3, gt=0)
    inverse_rate: float = Field(default=15e3, gt=0)
    max_rep_rate: float = Field(default=200e3, gt=0)
    pulse_duration: float = Field(default=40e-9, gt=0)
    waist: float = Field(default=75e-6, gt=0)
    incidence_angle: float = Field(default=math.radians(30.0), ge=0, lt=math.pi / 2)
    dither_area: float = Field(default=1e-6, gt=0)
    rep_rate: float = Field(default=25e3, gt=0)
    # J/m²; None means the energy curve decides
    fluence: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _rate_ordering(self):
        if not self.knee_rate < self.inverse_rate <= self.max_rep_rate:
            raise ValueError("knee_rate < inverse_rate <= max_rep_rate must hold")
        if self.rep_rate > self.max_rep_rate:
            raise ValueError("rep_rate must not exceed max_rep_rate")
        return self

    @property
    def spot_area(self) -> float:
        return math.pi * self.waist ** 2 / math.cos(self.incidence_angle)


class SourceParams(_Model):
    """Ablation source model parameters."""
    ambient_temperature: float = Field(default=293.15, gt=0)
    plasma_threshold: float = Field(default=6000.0, gt=0)
    rydberg_fraction: float = Field(default=0.0, ge=0, le=1)
    metastable_fraction: float = Field(default=0.0, ge=0, le=1)
    yield_scale: float = Field(default=1.0, gt=0)
    effective_time: Optional[float] = Field(default=None, gt=0)
    depth_threshold: float = Field(default=6000.0, ge=0)
    depth_slope: float = Field(default=2.5e-15, ge=0)
    melt_churn: float = Field(default=0.0, ge=0)
    contaminant_burn_efficiency: float = Field(default=5e-5, ge=0, le=1)
    initial_contaminant_coverage: float = Field(default=0.0, ge=0, le=1)

    @model_validator(mode="after")
    def _fractions(self):
        if self.rydberg_fraction + self.metastable_fraction > 1:
            raise ValueError("rydberg_fraction + metastable_fraction must be <= 1")
        return self


class IonLaserSpec(_Model):
    """Continuous-wave laser addressing atoms or ions at the trap."""
    wavelength: float = Field(gt=0)
    power: float = Field(ge=0)
    waist_at_trap: float = Field(gt=0)
    detuning: float = 0.0
    linewidth: float = Field(default=1e6, ge=0)
    saturation_intensity: float = Field(default=433.0, gt=0)

    @property
    def peak_intensity(self) -> float:
        return 2.0 * self.power / (math.pi * self.waist_at_trap ** 2)


class ChannelParams(_Model):
    """Photo-ionization channel constants."""
    resonant_linewidth: float = Field(default=35e6, gt=0)
    ionization_cross_section: float = Field(default=1e-17, gt=0)
    rydberg_saturation_power: float = Field(default=5e-3, gt=0)
    rydberg_binding: float = Field(default=0.01, ge=0)
    autoionizing_width: float = Field(default=1e-3, gt=0)
    quadrature_nodes: int = Field(default=64, ge=8)


class BeamGeometry(_Model):
    """Target, skimmer and laser geometry."""
    target_trap_distance: float = Field(default=0.13, gt=0)
    aperture_width: float = Field(default=1.0e-3, gt=0)
    aperture_height: float = Field(default=1.5e-3, gt=0)
    beam_pi_laser_angle: float = Field(default=math.radians(12.0), ge=0, lt=math.pi / 2)
    emission_axis_tilt: float = Field(default=0.0, ge=0, lt=math.pi / 2)


class TrapParams(_Model):
    """Linear RF trap and trapped-ion dynamics parameters."""
    r0: float = Field(default=2.35e-3, gt=0)
    drive_frequency: float = Field(default=4.0e6, gt=0)
    rf_amplitude: float = Field(default=200.0, ge=0)
    endcap_voltage: float = Field(default=10.0, gt=0)
    geometric_efficiency: float = Field(default=1.0, gt=0)
    depth_prefactor: float = Field(default=1.0, gt=0)
    endcap_distance: float = Field(default=2.7e-3, gt=0)
    endcap_efficiency: float = Field(default=0.248, gt=0)
    heating_time: float = Field(default=0.2, ge=0)
    # dark transitions per bright ion per second per mbar
    dark_rate_coefficient: float = Field(default=5e6, ge=0)
    dark_dwell: float = Field(default=0.5, ge=0)


class VacuumParams(_Model):
    """Chamber pumping and ablation gas load, in mbar, L and L/s."""
    base_pressure: float = Field(default=4e-10, gt=0)
    pump_speed: float = Field(default=100.0, gt=0)
    chamber_volume: float = Field(default=50.0, gt=0)
    gas_load_per_pulse: float = Field(default=1.5e-8 / 23e3, ge=0)
    contaminant_load_per_pulse: float = Field(default=4e-11, ge=0)


class DetectionParams(_Model):
    """Fluorescence detection and step-detector settings."""
    efficiency: float = Field(default=1e-4, gt=0, le=1)
    background_rate: float = Field(default=200.0, ge=0)
    suppressed_fraction: float = Field(default=0.0, ge=0, le=1)
    window: int = Field(default=4, ge=2)
    threshold_sigma: float = Field(default=6.0, gt=0)
    min_separation: float = Field(default=0.3, ge=0)
    lookback: float = Field(default=2.0, ge=0)
    drift_amplitude: float = Field(default=0.0, ge=0)
    drift_period: float = Field(default=300.0, gt=0)


class ControllerMode(str, Enum):
    GATED = "Gated"
    SINGLE_ION_AUTO_SHUTTER = "SingleIonAutoShutter"
    CONTINUOUS = "Continuous"


class ControllerParams(_Model):
    mode: ControllerMode = ControllerMode.GATED
    target_ion_count: int = Field(default=1, ge=0)
    shutter_latency: float = Field(default=0.05, ge=0)
    settle_time: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def _target(self):
        if self.mode == ControllerMode.SINGLE_ION_AUTO_SHUTTER and self.target_ion_count < 1:
            raise ValueError("target_ion_count must be >= 1 in SingleIonAutoShutter mode")
        return self


def _pi_laser() -> IonLaserSpec:
    return IonLaserSpec(wavelength=272e-9, power=15e-3, waist_at_trap=160e-6,
                        detuning=-400e6, linewidth=15e6, saturation_intensity=2.0e5)


def _cooling_laser() -> IonLaserSpec:
    return IonLaserSpec(wavelength=396.959e-9, power=1e-3, waist_at_trap=0.5e-3,
                        detuning=-10e6, linewidth=1e6, saturation_intensity=433.0)


def _repumper() -> IonLaserSpec:
    return IonLaserSpec(wavelength=866.452e-9, power=1e-3, waist_at_trap=0.5e-3,
                        detuning=0.0, linewidth=1e6, saturation_intensity=3.4)


class RunConfig(_Model):
    """Everything needed to run one deterministic scenario."""
    species: SpeciesData = Field(default_factory=SpeciesData)
    ablation: AblationLaserSpec = Field(default_factory=AblationLaserSpec)
    source: SourceParams = Field(default_factory=SourceParams)
    pi_laser: IonLaserSpec = Field(default_factory=_pi_laser)
    cooling_laser: IonLaserSpec = Field(default_factory=_cooling_laser)
    repumper: IonLaserSpec = Field(default_factory=_repumper)
    photoionization: ChannelParams = Field(default_factory=ChannelParams)
    geometry: BeamGeometry = Field(default_factory=BeamGeometry)
    trap: TrapParams = Field(default_factory=TrapParams)
    vacuum: VacuumParams = Field(default_factory=VacuumParams)
    detection: DetectionParams = Field(default_factory=DetectionParams)
    gating_schedule: Tuple[Tuple[float, float], ...] = ()
    controller: Optional[ControllerParams] = None
    rng_seed: int = Field(default=1, ge=0, lt=2 ** 64)
    time_step: float = Field(default=0.05, gt=0)
    duration: float = Field(default=60.0, gt=0)
    mean_field: bool = False

    @field_validator("gating_schedule")
    @classmethod
    def _sorted_intervals(cls, schedule):
        previous_end = -math.inf
        for start, end in schedule:
            if start < 0 or end <= start:
                raise ValueError(f"interval ({start}, {end}) must satisfy 0 <= on_start < on_end")
            if start < previous_end:
                raise ValueError("gating intervals must be sorted and non-overlapping")
            previous_end = end
        return schedule

    @model_validator(mode="after")
    def _run_invariants(self):
        if self.gating_schedule and self.duration < self.gating_schedule[-1][1]:
            raise ValueError("duration must cover the end of the last gating interval")
        if self.mean_field and self.detection.drift_amplitude > 0:
            raise ValueError("detuning drift requires stochastic mode (mean_field = false)")
        return self

    @property
    def mode(self) -> ControllerMode:
        if self.controller is not None:
            return self.controller.mode
        return ControllerMode.GATED if self.gating_schedule else ControllerMode.CONTINUOUS


# Section name -> RunConfig field holding that section's model
SECTION_FIELDS = {
    "species": "species",
    "ablation": "ablation",
    "source": "source",
    "pi_laser": "pi_laser",
    "cooling_laser": "cooling_laser",
    "repumper": "repumper",
    "photoionization": "photoionization",
    "geometry": "geometry",
    "trap": "trap",
    "vacuum": "vacuum",
    "detection": "detection",
    "controller": "controller",
}
RUN_KEYS = ("rng_seed", "time_step", "duration", "mean_field")
SPECIES_TABLES = ("isotopes", "level_energies")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _model_for(section: str):
    return {
        "species": SpeciesData, "ablation": AblationLaserSpec, "source": SourceParams,
        "pi_laser": IonLaserSpec, "cooling_laser": IonLaserSpec, "repumper": IonLaserSpec,
        "photoionization": ChannelParams, "geometry": BeamGeometry, "trap": TrapParams,
        "vacuum": VacuumParams, "detection": DetectionParams, "controller": ControllerParams,
    }[section]


def _coerce(annotation: Any, raw: str, key: str) -> Any:
    """Convert a raw document value according to the model field type."""
    if typing.get_origin(annotation) is typing.Union:
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        if raw.strip().lower() in ("", "none"):
            return None
        return _coerce(args[0], raw, key)
    if annotation is bool:
        value = raw.strip().lower()
        if value in _TRUE:
            return True
        if value in _FALSE:
            return False
        raise MalformedDocumentError(key, f"not a boolean: {raw!r}")
    if annotation is int:
        value = parse_quantity(raw, key)
        if not float(value).is_integer():
            raise MalformedDocumentError(key, f"not an integer: {raw!r}")
        return int(raw.strip()) if raw.strip().isdigit() else int(value)
    if annotation is float:
        return parse_quantity(raw, key)
    return raw.strip()


def _parse_isotopes(section: Mapping[str, str]) -> list:
    isotopes = []
    for label, raw in section.items():
        key = f"isotopes.{label}"
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) not in (2, 3):
            raise MalformedDocumentError(key, "expected 'mass, abundance[, isotope_shift_272]'")
        shift = parse_quantity(parts[2], key) if len(parts) == 3 else 0.0
        isotopes.append({
            "label": label,
            "mass": parse_quantity(parts[0], key),
            "natural_abundance": parse_quantity(parts[1], key),
            "isotope_shift_272": shift,
        })
    return isotopes


def _parse_gating(section: Mapping[str, str], duration: float) -> list:
    allowed = {"intervals", "on_duration", "off_duration", "start"}
    for name in section:
        if name not in allowed:
            raise UnknownKeyError(f"gating.{name}", f"allowed keys: {sorted(allowed)}")
    if "intervals" in section:
        intervals = []
        text = section["intervals"].strip()
        for chunk in filter(None, (c.strip() for c in text.split(","))):
            if ":" not in chunk:
                raise MalformedDocumentError("gating.intervals", f"expected 'start:end', got {chunk!r}")
            start, end = chunk.split(":", 1)
            intervals.append((parse_quantity(start, "gating.intervals"),
                              parse_quantity(end, "gating.intervals")))
        return intervals
    if "on_duration" in section:
        on = parse_quantity(section["on_duration"], "gating.on_duration")
        off = parse_quantity(section.get("off_duration", "0"), "gating.off_duration")
        t = parse_quantity(section.get("start", "0"), "gating.start")
        if on <= 0 or off < 0:
            raise InvariantViolationError("gating.on_duration", "on_duration > 0 and off_duration >= 0")
        intervals = []
        while t < duration - 1e-12:
            intervals.append((t, min(t + on, duration)))
            if off == 0:
                break
            t += on + off
        return intervals
    return []


def _error_key(loc: Tuple[Any, ...]) -> str:
    if not loc:
        return "run"
    head = loc[0]
    if head in RUN_KEYS:
        return f"run.{head}"
    if head == "gating_schedule":
        return "gating.intervals"
    parts = [str(p) for p in loc if not isinstance(p, int)]
    return ".".join(parts)


def build_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a nested dict into a RunConfig, naming the failing key on error."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        message = first["msg"].removeprefix("Value error, ")
        raise InvariantViolationError(_error_key(tuple(first["loc"])), message) from e


def parse_config(text: str) -> RunConfig:
    """Parse a config document into a validated RunConfig.

    Args:
        text: INI document; an empty document gives all defaults

    Returns:
        Validated RunConfig (ABLATRON_SEED overrides run.rng_seed)
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise MalformedDocumentError("document", str(e).splitlines()[0]) from e

    data: Dict[str, Any] = {}
    known = set(SECTION_FIELDS) | {"run", "isotopes", "levels", "gating"}
    for section in parser.sections():
        if section not in known:
            raise UnknownKeyError(section, f"unknown section; known sections: {sorted(known)}")

    if parser.has_section("run"):
        for name, raw in parser.items("run"):
            if name not in RUN_KEYS:
                raise UnknownKeyError(f"run.{name}", f"allowed keys: {list(RUN_KEYS)}")
            data[name] = _coerce(RunConfig.model_fields[name].annotation, raw, f"run.{name}")

    for section, field_name in SECTION_FIELDS.items():
        if not parser.has_section(section):
            continue
        model = _model_for(section)
        values: Dict[str, Any] = {}
        for name, raw in parser.items(section):
            key = f"{section}.{name}"
            if name not in model.model_fields or (section == "species" and name in SPECIES_TABLES):
                raise UnknownKeyError(key, f"not a field of [{section}]")
            values[name] = _coerce(model.model_fields[name].annotation, raw, key)
        if section in ("pi_laser", "cooling_laser", "repumper"):
            default = RunConfig.model_fields[field_name].default_factory()
            values = {**default.model_dump(), **values}
        data[field_name] = values

    if parser.has_section("isotopes"):
        data.setdefault("species", {})["isotopes"] = _parse_isotopes(dict(parser.items("isotopes")))
    if parser.has_section("levels"):
        levels = dict(CALCIUM_LEVELS)
        for name, raw in parser.items("levels"):
            levels[name] = parse_quantity(raw, f"levels.{name}")
        data.setdefault("species", {})["level_energies"] = levels
    if parser.has_section("gating"):
        duration = data.get("duration", RunConfig.model_fields["duration"].default)
        data["gating_schedule"] = _parse_gating(dict(parser.items("gating")), duration)

    seed_override = os.getenv("ABLATRON_SEED")
    if seed_override:
        try:
            data["rng_seed"] = int(seed_override, 0)
        except ValueError as e:
            raise MalformedDocumentError("ABLATRON_SEED", f"not an integer: {seed_override!r}") from e

    return build_config(data)


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Write ``cfg`` as a config document that parses back to an equal RunConfig."""
    lines = ["[run]"]
    lines += [f"{name} = {_format(getattr(cfg, name))}" for name in RUN_KEYS]
    for section, field_name in SECTION_FIELDS.items():
        model = getattr(cfg, field_name)
        if model is None:
            continue
        lines += ["", f"[{section}]"]
        for name in type(model).model_fields:
            if section == "species" and name in SPECIES_TABLES:
                continue
            lines.append(f"{name} = {_format(getattr(model, name))}")
        if section == "species":
            lines += ["", "[isotopes]"]
            lines += [
                f"{iso.label} = {iso.mass!r}, {iso.natural_abundance!r}, {iso.isotope_shift_272!r}"
                for iso in cfg.species.isotopes
            ]
            lines += ["", "[levels]"]
            lines += [f"{name} = {energy!r}" for name, energy in cfg.species.level_energies.items()]
    lines += ["", "[gating]"]
    lines.append("intervals = " + ", ".join(f"{s!r}:{e!r}" for s, e in cfg.gating_schedule))
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """sha256 of the serialized config."""
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def update_config(cfg: RunConfig, changes: Mapping[str, Any]) -> RunConfig:
    """Return a copy of ``cfg`` with dotted keys replaced and re-validated.

    Args:
        cfg: Base configuration
        changes: Mapping such as ``{"ablation.fluence": 2400.0, "rng_seed": 7}``

    Returns:
        New validated RunConfig
    """
    data = cfg.model_dump()
    for dotted, value in changes.items():
        parts = dotted.split(".")
        if parts[0] == "run":
            parts = parts[1:]
        target = data
        for part in parts[:-1]:
            if not isinstance(target.get(part), dict):
                if part == "controller" and target.get(part) is None:
                    target[part] = {}
                else:
                    raise UnknownKeyError(dotted, "no such section")
            target = target[part]
        if parts[-1] not in target and parts[0] != "controller":
            raise UnknownKeyError(dotted, "no such key")
        target[parts[-1]] = value
    return build_config(data)


def load_config(path: Optional[str] = None) -> RunConfig:
    """Load configuration from a file, ABLATRON_CONFIG, or defaults."""
    path = path or os.getenv("ABLATRON_CONFIG")
    if not path:
        return parse_config("")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise MalformedDocumentError(str(path), f"cannot read config file: {e}") from e
    return parse_config(text)


# Global config instance
config = load_config()
