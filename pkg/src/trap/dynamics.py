"""Linear RF trap: stability, depth, crystal density, capture and ion ensemble."""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.config import BeamGeometry, TrapParams
from src.core.constants import E_CHARGE, ELECTRON_MASS, EPSILON_0
from src.utils.errors import UnstableTrapError
from src.utils.logging import get_logger

logger = get_logger(__name__)

# q boundary of the first stability region for a = 0
Q_STABILITY_LIMIT = 0.908

# Typical photoelectron energy above threshold (eV), sets the birth recoil
PHOTOELECTRON_EXCESS_ENERGY = 1.0


def _omega(trap: TrapParams) -> float:
    return 2.0 * math.pi * trap.drive_frequency


def mathieu_q(trap: TrapParams, mass: float) -> float:
    """Mathieu q = 2·e·η·V_rf/(m·Ω²·r0²)."""
    return 2.0 * E_CHARGE * trap.geometric_efficiency * trap.rf_amplitude / (
        mass * _omega(trap) ** 2 * trap.r0 ** 2)


def is_stable(q: float) -> bool:
    """First-region stability with the DC term neglected."""
    return 0.0 < q < Q_STABILITY_LIMIT


def _require_stable(trap: TrapParams, mass: float) -> float:
    q = mathieu_q(trap, mass)
    if not is_stable(q):
        raise UnstableTrapError(f"Mathieu q = {q:.4g} outside (0, {Q_STABILITY_LIMIT})")
    return q


def trap_depth(trap: TrapParams, mass: float) -> float:
    """Pseudopotential depth κ·q·V_rf·η/8 in eV."""
    q = _require_stable(trap, mass)
    return trap.depth_prefactor * q * trap.rf_amplitude * trap.geometric_efficiency / 8.0


def radial_secular_frequency(trap: TrapParams, mass: float) -> float:
    """Radial secular angular frequency q·Ω/(2√2) in rad/s."""
    return mathieu_q(trap, mass) * _omega(trap) / (2.0 * math.sqrt(2.0))


def axial_frequency(trap: TrapParams, mass: float) -> float:
    """Axial angular frequency from the endcap voltage in rad/s."""
    return math.sqrt(2.0 * E_CHARGE * trap.endcap_efficiency * trap.endcap_voltage
                     / (mass * trap.endcap_distance ** 2))


def crystal_density(trap: TrapParams, mass: float) -> float:
    """Zero-temperature Coulomb crystal density ε0·(ηV)²/(m·Ω²·r0⁴) in ions/m³."""
    _require_stable(trap, mass)
    return EPSILON_0 * (trap.geometric_efficiency * trap.rf_amplitude) ** 2 / (
        mass * _omega(trap) ** 2 * trap.r0 ** 4)


def volume_from_count(count: int, trap: TrapParams, mass: float) -> float:
    if count < 0:
        raise ValueError("count must be >= 0")
    return count / crystal_density(trap, mass)


def count_from_volume(volume: float, trap: TrapParams, mass: float) -> int:
    if volume < 0:
        raise ValueError("volume must be >= 0")
    return int(round(crystal_density(trap, mass) * volume))


@dataclass
class IonBirth:
    """Where and how fast a photo-ion is created."""
    position: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    kinetic_energy: float = 0.0


def capture_mask(y: np.ndarray, z: np.ndarray, kinetic_energy: np.ndarray, trap: TrapParams,
                 mass: Union[float, np.ndarray], geometry: Optional[BeamGeometry] = None,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Vectorized capture decision for ions born at transverse offsets (y, z).

    Args:
        y: Offsets along the photo-ionization laser (m)
        z: Vertical offsets (m)
        kinetic_energy: Birth kinetic energy (eV)
        trap: Trap parameters
        mass: Ion mass, scalar or per ion (kg)
        geometry: If given, ions outside the aperture overlap are never captured
        rng: Adds a photoelectron recoil term when given

    Returns:
        Boolean array
    """
    y, z, ke = np.broadcast_arrays(np.asarray(y, float), np.asarray(z, float),
                                   np.asarray(kinetic_energy, float))
    mass_arr = np.broadcast_to(np.asarray(mass, float), ke.shape)
    q = mathieu_q(trap, mass_arr)
    if np.any((q <= 0) | (q >= Q_STABILITY_LIMIT)):
        raise UnstableTrapError(f"Mathieu q outside (0, {Q_STABILITY_LIMIT}) for some isotope")
    depth = trap.depth_prefactor * q * trap.rf_amplitude * trap.geometric_efficiency / 8.0
    rho_sq = (y ** 2 + z ** 2) / trap.r0 ** 2
    local_depth = depth * np.clip(1.0 - rho_sq, 0.0, None)
    if rng is not None:
        recoil = ELECTRON_MASS / mass_arr * PHOTOELECTRON_EXCESS_ENERGY * rng.uniform(size=ke.shape)
        ke = ke + recoil
    inside = rho_sq < 1.0
    if geometry is not None:
        inside &= (np.abs(y) <= 0.5 * geometry.aperture_width) & (np.abs(z) <= 0.5 * geometry.aperture_height)
    return inside & (ke < local_depth)


def attempt_capture(ion_birth: IonBirth, trap: TrapParams, mass: float,
                    rng: Optional[np.random.Generator] = None,
                    geometry: Optional[BeamGeometry] = None) -> bool:
    """Capture decision for one ion; the axial coordinate of ``position`` is ignored."""
    _, y, z = ion_birth.position
    return bool(capture_mask(np.array([y]), np.array([z]), np.array([ion_birth.kinetic_energy]),
                             trap, mass, geometry, rng)[0])


@dataclass(frozen=True)
class NewIon:
    time: float
    isotope: int = 0


@dataclass
class IonCrystal:
    """Trapped ions held as parallel numpy arrays.

    An ion is dark while ``dark_from <= t < dark_until`` and hot while
    ``t < hot_until``.
    """
    density: float
    heating_time: float = 0.2
    dark_rate_coefficient: float = 0.0
    dark_dwell: float = 0.5
    isotope: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    arrival: np.ndarray = field(default_factory=lambda: np.empty(0))
    hot_until: np.ndarray = field(default_factory=lambda: np.empty(0))
    dark_from: np.ndarray = field(default_factory=lambda: np.empty(0))
    dark_until: np.ndarray = field(default_factory=lambda: np.empty(0))
    hot_windows: List[Tuple[float, float]] = field(default_factory=list)
    dark_windows: List[Tuple[float, float]] = field(default_factory=list)
    dark_events: int = 0

    @classmethod
    def from_trap(cls, trap: TrapParams, mass: float) -> "IonCrystal":
        return cls(
            density=crystal_density(trap, mass),
            heating_time=trap.heating_time,
            dark_rate_coefficient=trap.dark_rate_coefficient,
            dark_dwell=trap.dark_dwell,
        )

    @property
    def count(self) -> int:
        return int(self.isotope.size)

    @property
    def volume(self) -> float:
        return self.count / self.density if self.count else 0.0

    def bright_mask(self, t: float) -> np.ndarray:
        present = self.arrival <= t
        dark = (self.dark_from <= t) & (t < self.dark_until)
        return present & ~dark

    def hot_mask(self, t: float) -> np.ndarray:
        return t < self.hot_until

    def count_at(self, t: float) -> int:
        return int(np.count_nonzero(self.arrival <= t))

    @property
    def ions(self) -> List[dict]:
        """Snapshot of per-ion state at the latest arrival time."""
        t = float(self.arrival.max()) if self.count else 0.0
        bright = self.bright_mask(t)
        return [
            {"isotope": int(iso), "bright": bool(b), "hot_until": float(h)}
            for iso, b, h in zip(self.isotope, bright, self.hot_until)
        ]

    def add_ions(self, ions: Sequence[NewIon]):
        """Append arrivals; each one heats every ion already present."""
        if not ions:
            return
        times = np.array([ion.time for ion in ions], dtype=float)
        n = times.size
        self.isotope = np.concatenate([self.isotope, [ion.isotope for ion in ions]]).astype(np.int64)
        self.arrival = np.concatenate([self.arrival, times])
        self.hot_until = np.concatenate([self.hot_until, np.full(n, -np.inf)])
        self.dark_from = np.concatenate([self.dark_from, np.full(n, np.inf)])
        self.dark_until = np.concatenate([self.dark_until, np.full(n, -np.inf)])
        if self.heating_time > 0:
            until = times + self.heating_time
            self.hot_until[:] = np.maximum(self.hot_until, until.max())
            self.hot_windows.extend(zip(times.tolist(), until.tolist()))


def apply_collision_and_heating_events(crystal: IonCrystal, background_pressure: float, dt: float,
                                       new_ion: Union[None, NewIon, Sequence[NewIon]] = None,
                                       rng: Optional[np.random.Generator] = None,
                                       now: float = 0.0) -> IonCrystal:
    """Advance the crystal over [now − dt, now].

    New ions join first and heat the whole crystal for ``heating_time``.
    Every bright ion then suffers background-gas collisions at rate
    ``dark_rate_coefficient·pressure``; a hit ion goes dark for ``dark_dwell``.
    The crystal is updated in place and returned.

    Args:
        crystal: Ion ensemble
        background_pressure: Pressure during the interval (mbar)
        dt: Interval length (s)
        new_ion: One arrival, several, or None
        rng: Trap stream, required when pressure > 0
        now: End of the interval (s)

    Returns:
        The same IonCrystal
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if new_ion is not None:
        arrivals: Iterable[NewIon] = [new_ion] if isinstance(new_ion, NewIon) else new_ion
        crystal.add_ions(sorted(arrivals, key=lambda a: a.time))

    rate = crystal.dark_rate_coefficient * background_pressure
    if rate <= 0 or crystal.count == 0:
        return crystal
    if rng is None:
        raise ValueError("rng is required for collision sampling")
    start = now - dt
    eligible = np.flatnonzero((crystal.arrival <= now) & (crystal.dark_until <= start))
    if eligible.size == 0:
        return crystal
    # Poisson total over the eligible ions, spread uniformly over them
    hits = int(rng.poisson(rate * dt * eligible.size))
    crystal.dark_events += hits
    if hits:
        struck = rng.choice(eligible, size=min(hits, eligible.size), replace=False)
        onset = np.maximum(start + dt * rng.uniform(size=struck.size), crystal.arrival[struck])
        crystal.dark_from[struck] = onset
        crystal.dark_until[struck] = onset + crystal.dark_dwell
        crystal.dark_windows.extend(zip(onset.tolist(), (onset + crystal.dark_dwell).tolist()))
    return crystal
