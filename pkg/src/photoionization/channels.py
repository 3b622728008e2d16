"""Per-atom ionization probabilities for the two loading channels."""

import math
from abc import ABC, abstractmethod
from enum import Enum
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from config.config import BeamGeometry, ChannelParams, IonLaserSpec, RunConfig, SpeciesData
from src.beam.transport import AtomSample
from src.core.constants import C, H
from src.core.lasers import photon_energy
from src.photoionization.rydberg import RydbergLevelModel, autoionizing_line, can_photoionize
from src.utils.errors import UnknownIsotopeError
from src.utils.logging import get_logger

logger = get_logger(__name__)

# Transit integral covers ±3 waists of the Gaussian beam
TRANSIT_HALF_WIDTH_WAISTS = 3.0

# Atoms per block of the transit quadrature
QUADRATURE_CHUNK = 8192


class ChannelKind(str, Enum):
    TWO_PHOTON_272 = "TwoPhoton272"
    RYDBERG_397 = "Rydberg397"


@lru_cache(maxsize=8)
def _legendre_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def doppler_shift(v: Union[float, np.ndarray], deviation_from_perpendicular: float,
                  wavelength: float) -> Union[float, np.ndarray]:
    """Signed Doppler shift v·sin(deviation)/λ in Hz."""
    if wavelength <= 0:
        raise ValueError("wavelength must be > 0")
    return v * math.sin(deviation_from_perpendicular) / wavelength


def excited_fraction(s: np.ndarray, detuning: np.ndarray, linewidth: float) -> np.ndarray:
    """Steady-state upper-level population of a driven two-level atom."""
    return 0.5 * s / (1.0 + s + (2.0 * detuning / linewidth) ** 2)


def _as_sample(atom) -> AtomSample:
    if isinstance(atom, AtomSample):
        return atom
    return AtomSample.single(atom["velocity"], atom.get("isotope", 0),
                             atom.get("y", 0.0), atom.get("transverse_offset", 0.0))


def two_photon_ionization_prob(atom, laser: IonLaserSpec, channel: "IonizationChannel",
                               geometry: BeamGeometry, species: SpeciesData = None,
                               detuning_offset: float = 0.0) -> np.ndarray:
    """Probability that ground-state atoms are ionized crossing the 272 nm beam.

    The resonant step is a Lorentzian in the total detuning (laser detuning +
    isotope shift + Doppler shift); the second photon ionizes with a fixed
    cross-section. The rate is integrated along the straight path through
    the Gaussian beam with Gauss-Legendre quadrature.

    Args:
        atom: AtomSample, or a mapping with velocity, isotope index and transverse_offset
        laser: The 272 nm laser
        channel: Channel constants (linewidth, cross-section)
        geometry: Beam geometry (atom path vs. laser angle)
        species: Isotope table; defaults to calcium
        detuning_offset: Extra detuning (Hz), e.g. wavelength drift

    Returns:
        Array of probabilities in [0, 1]
    """
    atoms = _as_sample(atom)
    species = species or SpeciesData()
    if len(atoms) == 0:
        return np.empty(0)
    if atoms.isotope.min() < 0 or atoms.isotope.max() >= len(species.isotopes):
        raise UnknownIsotopeError(f"isotope index outside species table of {len(species.isotopes)}")
    if laser.power == 0:
        return np.zeros(len(atoms))

    deviation = geometry.beam_pi_laser_angle
    shifts = np.array([iso.isotope_shift_272 for iso in species.isotopes])[atoms.isotope]
    delta = laser.detuning + detuning_offset + shifts + doppler_shift(atoms.velocity, deviation, laser.wavelength)
    linewidth = channel.resonant_linewidth + laser.linewidth

    nodes, weights = _legendre_nodes(channel.quadrature_nodes)
    half_path = TRANSIT_HALF_WIDTH_WAISTS * laser.waist_at_trap / math.cos(deviation)
    along = (half_path * nodes * math.cos(deviation)) ** 2
    photon_energy_j = H * C / laser.wavelength

    exposure = np.empty(len(atoms))
    for lo in range(0, len(atoms), QUADRATURE_CHUNK):
        sl = slice(lo, lo + QUADRATURE_CHUNK)
        radial_sq = along[None, :] + atoms.z[sl, None] ** 2
        intensity = laser.peak_intensity * np.exp(-2.0 * radial_sq / laser.waist_at_trap ** 2)
        rho = excited_fraction(intensity / laser.saturation_intensity, delta[sl, None], linewidth)
        rate = rho * channel.ionization_cross_section * intensity / photon_energy_j
        exposure[sl] = half_path * (rate @ weights) / atoms.velocity[sl]
    return -np.expm1(-exposure)


def rydberg_overlap(z: np.ndarray, cooling: IonLaserSpec) -> np.ndarray:
    """Fraction of the cooling-beam peak seen at vertical offset ``z``."""
    return np.exp(-2.0 * np.asarray(z) ** 2 / cooling.waist_at_trap ** 2)


def autoionizing_resonance(cooling: IonLaserSpec, model: RydbergLevelModel, width: float) -> float:
    """Lorentzian weight of the S→P core resonance at the cooling wavelength."""
    line = autoionizing_line(model, "S12->P12")
    if not line.ionizing:
        return 0.0
    mismatch = photon_energy(cooling.wavelength) - line.photon_energy
    return 1.0 / (1.0 + (2.0 * mismatch / width) ** 2)


def rydberg_loading_rate(P_397: float, R_max: float, P_sat: float) -> float:
    """Saturating loading rate R_max·P/(P + P_sat) in ions/s."""
    if P_397 < 0:
        raise ValueError("P_397 must be >= 0")
    if P_397 == 0:
        return 0.0
    return R_max * P_397 / (P_397 + P_sat)


class IonizationChannel(ABC):
    """Abstract base class for ionization channels."""

    kind: ChannelKind

    def __init__(self, params: ChannelParams):
        """Initialize channel.

        Args:
            params: Channel constants from the run configuration
        """
        self.params = params

    @property
    def resonant_linewidth(self) -> float:
        return self.params.resonant_linewidth

    @property
    def ionization_cross_section(self) -> float:
        return self.params.ionization_cross_section

    @property
    def quadrature_nodes(self) -> int:
        return self.params.quadrature_nodes

    @abstractmethod
    def ionization_probability(self, atoms: AtomSample, cfg: RunConfig,
                               detuning_offset: float = 0.0) -> np.ndarray:
        """Per-atom ionization probability for atoms in this channel's state.

        Args:
            atoms: Atoms crossing the trap region
            cfg: Run configuration (lasers, geometry, species)
            detuning_offset: Extra laser detuning (Hz)

        Returns:
            Array of probabilities in [0, 1]
        """
        pass


class TwoPhotonChannel(IonizationChannel):
    """Resonant two-photon ionization of ground-state atoms at 272 nm."""

    kind = ChannelKind.TWO_PHOTON_272

    def ionization_probability(self, atoms, cfg, detuning_offset=0.0):
        return two_photon_ionization_prob(atoms, cfg.pi_laser, self, cfg.geometry,
                                          cfg.species, detuning_offset)


class RydbergChannel(IonizationChannel):
    """Auto-ionization of Rydberg atoms by the 397 nm cooling laser.

    The repumper plays no part. Resonances are broad, so every isotope is
    treated alike.
    """

    kind = ChannelKind.RYDBERG_397

    @property
    def saturation_power(self) -> float:
        return self.params.rydberg_saturation_power

    def level_model(self, cfg: RunConfig) -> RydbergLevelModel:
        return RydbergLevelModel.from_species(cfg.species, self.params.rydberg_binding)

    def peak_probability(self, cfg: RunConfig) -> float:
        """Probability for an atom on the cooling-beam axis."""
        cooling = cfg.cooling_laser
        if cooling.power == 0:
            return 0.0
        resonance = autoionizing_resonance(cooling, self.level_model(cfg), self.params.autoionizing_width)
        return resonance * cooling.power / (cooling.power + self.saturation_power)

    def ionization_probability(self, atoms, cfg, detuning_offset=0.0):
        peak = self.peak_probability(cfg)
        if peak == 0.0:
            return np.zeros(len(atoms))
        return peak * rydberg_overlap(atoms.z, cfg.cooling_laser)


def metastable_ionization_probability(atoms: AtomSample, cfg: RunConfig) -> np.ndarray:
    """Ionization of atoms left in the metastable ¹D₂ level.

    The resonant 272 nm step starts from the ground state, so only the
    cooling light could ionize these atoms, and only if its photon bridges
    the gap to the continuum.
    """
    level = cfg.species.level_energies.get("metastable_1D2")
    if level is None or not can_photoionize(level, cfg.species.ionization_potential,
                                            cfg.cooling_laser.wavelength):
        return np.zeros(len(atoms))
    cooling = cfg.cooling_laser
    saturation = cfg.photoionization.rydberg_saturation_power
    return cooling.power / (cooling.power + saturation) * rydberg_overlap(atoms.z, cooling)


class ChannelFactory:
    """Factory for creating ionization channels."""

    @staticmethod
    def create_channel(kind: Union[ChannelKind, str], params: ChannelParams) -> IonizationChannel:
        """Create a channel instance.

        Args:
            kind: Channel kind
            params: Channel constants

        Returns:
            IonizationChannel instance
        """
        kind = ChannelKind(kind) if not isinstance(kind, ChannelKind) else kind
        if kind == ChannelKind.TWO_PHOTON_272:
            return TwoPhotonChannel(params)
        if kind == ChannelKind.RYDBERG_397:
            return RydbergChannel(params)
        raise ValueError(f"Unsupported channel kind: {kind}")
