"""Atom transport from the target through the skimmers to the trap center."""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from config.config import BeamGeometry, SpeciesData
from src.ablation.source import AtomBurst
from src.core.constants import K_B
from src.utils.logging import get_logger

logger = get_logger(__name__)

MassLike = Union[SpeciesData, float, np.ndarray]


@dataclass
class AtomSample:
    """Per-atom arrays for atoms that reached the trap region.

    ``y`` runs along the photo-ionization laser, ``z`` is vertical.
    """
    velocity: np.ndarray
    isotope: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.velocity)

    @classmethod
    def single(cls, velocity: float, isotope: int = 0, y: float = 0.0, z: float = 0.0) -> "AtomSample":
        return cls(np.array([float(velocity)]), np.array([int(isotope)]),
                   np.array([float(y)]), np.array([float(z)]))

    @classmethod
    def empty(cls) -> "AtomSample":
        return cls(np.empty(0), np.empty(0, dtype=np.int64), np.empty(0), np.empty(0))

    def subset(self, mask: np.ndarray) -> "AtomSample":
        return AtomSample(self.velocity[mask], self.isotope[mask], self.y[mask], self.z[mask])


@dataclass
class ArrivalProfile:
    """Accepted atoms of one burst as they arrive at the trap center."""
    emission_time: float
    times: np.ndarray
    atoms: AtomSample
    n_emitted: int
    n_accepted: int
    n_rejected: int

    @property
    def velocities(self) -> np.ndarray:
        return self.atoms.velocity

    def records(self, bin_width: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Binned (time, flux, mean velocity) records.

        Args:
            bin_width: Histogram bin width (s)

        Returns:
            Bin start times, flux in atoms/s, mean velocity per bin (nan if empty)
        """
        if self.n_accepted == 0:
            return np.empty(0), np.empty(0), np.empty(0)
        t_min = self.emission_time
        n_bins = max(1, int(math.ceil((self.times.max() - t_min) / bin_width + 1e-12)))
        edges = t_min + bin_width * np.arange(n_bins + 1)
        counts, _ = np.histogram(self.times, bins=edges)
        v_sum, _ = np.histogram(self.times, bins=edges, weights=self.velocities)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean_v = np.where(counts > 0, v_sum / np.maximum(counts, 1), np.nan)
        return edges[:-1], counts / bin_width, mean_v


def _mass_of(species: MassLike) -> Union[float, np.ndarray]:
    if isinstance(species, SpeciesData):
        return species.mean_mass
    return species


def acceptance_fraction(geometry: BeamGeometry) -> float:
    """Fraction of a Lambertian emitter's atoms that pass the aperture."""
    area = geometry.aperture_width * geometry.aperture_height
    return area * math.cos(geometry.emission_axis_tilt) / (math.pi * geometry.target_trap_distance ** 2)


def velocity_scale(T: float, mass: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Most probable speed of the gas, sqrt(2kT/m)."""
    return np.sqrt(2.0 * K_B * T / mass)


def mean_flux_velocity(T: float, mass: float) -> float:
    """Analytic mean of the flux-weighted (v³) distribution."""
    return float(gamma_fn(2.5) / gamma_fn(2.0) * velocity_scale(T, mass))


def mean_transit_delay(T: float, mass: float, distance: float) -> float:
    """Analytic mean of distance/v over the flux-weighted distribution."""
    return float(distance * gamma_fn(1.5) / gamma_fn(2.0) / velocity_scale(T, mass))


def sample_velocity(T: float, species: MassLike, rng: np.random.Generator,
                    size: Optional[int] = None) -> Union[float, np.ndarray]:
    """Draw speeds from f(v) ∝ v³·exp(−mv²/2kT).

    With u = mv²/2kT the flux density becomes a Gamma(2) law in u, so one
    gamma draw per atom is enough.

    Args:
        T: Source temperature (K)
        species: SpeciesData (mean mass), a mass in kg, or per-atom masses
        rng: Beam stream
        size: Number of draws when a scalar mass is given

    Returns:
        One speed or an array of speeds (m/s)
    """
    if T <= 0:
        raise ValueError("temperature must be > 0")
    mass = _mass_of(species)
    if size is None and isinstance(mass, np.ndarray):
        size = mass.shape
    u = rng.gamma(2.0, 1.0, size=size)
    # gamma draws are > 0 almost surely; guard the measure-zero case
    u = np.maximum(u, np.finfo(float).tiny)
    v = np.sqrt(2.0 * K_B * T * u / mass)
    return float(v) if size is None else v


def sample_atoms(n: int, T: float, species: SpeciesData, geometry: BeamGeometry,
                 rng: np.random.Generator, velocity_override: Optional[float] = None) -> AtomSample:
    """Velocities, isotopes and aperture positions for ``n`` accepted atoms."""
    if n == 0:
        return AtomSample.empty()
    isotope = rng.choice(len(species.isotopes), size=n, p=species.abundances)
    if velocity_override is not None:
        velocity = np.full(n, float(velocity_override))
    else:
        velocity = sample_velocity(T, species.masses[isotope], rng)
    y = rng.uniform(-0.5 * geometry.aperture_width, 0.5 * geometry.aperture_width, size=n)
    z = rng.uniform(-0.5 * geometry.aperture_height, 0.5 * geometry.aperture_height, size=n)
    return AtomSample(velocity, isotope, y, z)


def arrival_profile(burst: AtomBurst, geometry: BeamGeometry, rng: np.random.Generator,
                    species: Optional[SpeciesData] = None,
                    velocity_override: Optional[float] = None) -> ArrivalProfile:
    """Propagate one burst to the trap center.

    Args:
        burst: Emitted burst (a non-integer mean-field count is rounded)
        geometry: Beam geometry
        rng: Beam stream
        species: Target material; defaults to calcium
        velocity_override: Monochromatic speed instead of thermal sampling

    Returns:
        ArrivalProfile with exact emitted = accepted + rejected bookkeeping
    """
    species = species or SpeciesData()
    n_emitted = int(round(burst.n_atoms))
    n_accepted = int(rng.binomial(n_emitted, acceptance_fraction(geometry))) if n_emitted else 0
    atoms = sample_atoms(n_accepted, burst.surface_temperature, species, geometry, rng,
                         velocity_override)
    times = burst.emission_time + geometry.target_trap_distance / atoms.velocity
    return ArrivalProfile(
        emission_time=burst.emission_time,
        times=times,
        atoms=atoms,
        n_emitted=n_emitted,
        n_accepted=n_accepted,
        n_rejected=n_emitted - n_accepted,
    )
