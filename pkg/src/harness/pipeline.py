"""Per-atom loading chain shared by the stochastic loop and the mean-field kernel."""

import math
from typing import Optional

import numpy as np

from config.config import RunConfig
from src.ablation.source import AtomBurst, PulseSpec, mean_burst
from src.beam.transport import AtomSample, acceptance_fraction
from src.core.constants import E_CHARGE
from src.photoionization.channels import (
    ChannelFactory,
    ChannelKind,
    metastable_ionization_probability,
)
from src.trap.dynamics import capture_mask

# Row order of LoadingPipeline.state_probabilities
GROUND, RYDBERG, METASTABLE = 0, 1, 2


class LoadingPipeline:
    """Everything a run needs to turn accepted atoms into trapped ions."""

    def __init__(self, cfg: RunConfig):
        """Initialize pipeline.

        Args:
            cfg: Run configuration; the pulse is fixed at its operating point
        """
        self.cfg = cfg
        self.pulse = PulseSpec.from_laser(cfg.ablation)
        self.burst: AtomBurst = mean_burst(self.pulse, cfg)
        self.acceptance = acceptance_fraction(cfg.geometry)
        self.two_photon = ChannelFactory.create_channel(ChannelKind.TWO_PHOTON_272, cfg.photoionization)
        self.rydberg = ChannelFactory.create_channel(ChannelKind.RYDBERG_397, cfg.photoionization)
        self.masses = cfg.species.masses
        self.trap_mass = cfg.species.isotopes[int(np.argmax(cfg.species.abundances))].mass

    @property
    def state_fractions(self) -> np.ndarray:
        b = self.burst
        return np.array([b.ground_fraction, b.rydberg_fraction, b.metastable_fraction])

    def drift_offset(self, t: np.ndarray) -> np.ndarray:
        """Photo-ionization laser detuning drift (Hz) at times ``t``."""
        detection = self.cfg.detection
        if detection.drift_amplitude == 0:
            return np.zeros_like(t)
        return detection.drift_amplitude * np.sin(2.0 * math.pi * t / detection.drift_period)

    def state_probabilities(self, atoms: AtomSample,
                            arrival_times: Optional[np.ndarray] = None) -> np.ndarray:
        """Ionization probability of every atom for each internal state.

        Returns:
            Array of shape (3, n): ground, Rydberg, metastable rows
        """
        n = len(atoms)
        probs = np.zeros((3, n))
        if n == 0:
            return probs
        fractions = self.state_fractions
        if fractions[GROUND] > 0:
            offset = self.drift_offset(arrival_times) if arrival_times is not None else 0.0
            probs[GROUND] = self.two_photon.ionization_probability(atoms, self.cfg, offset)
        if fractions[RYDBERG] > 0:
            probs[RYDBERG] = self.rydberg.ionization_probability(atoms, self.cfg)
        if fractions[METASTABLE] > 0:
            probs[METASTABLE] = metastable_ionization_probability(atoms, self.cfg)
        return probs

    def kinetic_energy(self, atoms: AtomSample) -> np.ndarray:
        """Kinetic energy inherited by the photo-ion (eV)."""
        return 0.5 * self.masses[atoms.isotope] * atoms.velocity ** 2 / E_CHARGE

    def capture(self, atoms: AtomSample, rng: Optional[np.random.Generator]) -> np.ndarray:
        """Capture mask for ions born from ``atoms``."""
        if len(atoms) == 0:
            return np.zeros(0, dtype=bool)
        return capture_mask(atoms.y, atoms.z, self.kinetic_energy(atoms), self.cfg.trap,
                            self.masses[atoms.isotope], self.cfg.geometry, rng)
