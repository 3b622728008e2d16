"""Mean-field loading: expected yields per accepted atom and fractional bookkeeping."""

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from config.config import RunConfig
from src.beam.transport import sample_atoms
from src.harness.pipeline import LoadingPipeline
from src.utils.logging import get_logger
from src.utils.rng import derive_rng

logger = get_logger(__name__)

KERNEL_SAMPLES = 200_000

_KERNEL_CACHE: Dict[str, "LoadingKernel"] = {}


@dataclass(frozen=True)
class LoadingKernel:
    """Expected outcome per atom that passed the skimmers."""
    ionized_per_accepted: float
    captured_per_accepted: Tuple[float, ...]
    mean_transit_delay: float
    samples: int

    @property
    def total_captured_per_accepted(self) -> float:
        return math.fsum(self.captured_per_accepted)


def kernel_key(cfg: RunConfig, samples: int) -> str:
    """Cache key: everything the kernel depends on, yield and timing excluded."""
    source = cfg.source.model_dump(exclude={"yield_scale", "initial_contaminant_coverage"})
    parts = {
        "species": cfg.species.model_dump(),
        "ablation": cfg.ablation.model_dump(),
        "source": source,
        "pi_laser": cfg.pi_laser.model_dump(),
        "cooling_laser": cfg.cooling_laser.model_dump(),
        "photoionization": cfg.photoionization.model_dump(),
        "geometry": cfg.geometry.model_dump(),
        "trap": cfg.trap.model_dump(),
        "seed": cfg.rng_seed,
        "samples": samples,
    }
    return json.dumps(parts, sort_keys=True, default=str)


def loading_kernel(cfg: RunConfig, pipeline: Optional[LoadingPipeline] = None,
                   samples: int = KERNEL_SAMPLES) -> LoadingKernel:
    """Monte-Carlo estimate of ionization and capture per accepted atom.

    Drawn once from the ``kernel`` stream and cached per configuration.
    """
    key = kernel_key(cfg, samples)
    cached = _KERNEL_CACHE.get(key)
    if cached is not None:
        return cached
    pipeline = pipeline or LoadingPipeline(cfg)
    rng = derive_rng(cfg.rng_seed, "kernel")
    atoms = sample_atoms(samples, pipeline.burst.surface_temperature, cfg.species, cfg.geometry, rng)
    p_ion = pipeline.state_fractions @ pipeline.state_probabilities(atoms)
    captured = p_ion * pipeline.capture(atoms, rng)
    per_isotope = np.bincount(atoms.isotope, weights=captured, minlength=len(cfg.species.isotopes))
    captured_per = (per_isotope / samples).tolist()
    kernel = LoadingKernel(
        ionized_per_accepted=max(float(p_ion.mean()), math.fsum(captured_per)),
        captured_per_accepted=tuple(captured_per),
        mean_transit_delay=float(np.mean(cfg.geometry.target_trap_distance / atoms.velocity)),
        samples=samples,
    )
    _KERNEL_CACHE[key] = kernel
    logger.debug("Loading kernel computed", {
        "ionized_per_accepted": kernel.ionized_per_accepted,
        "captured_per_accepted": kernel.total_captured_per_accepted,
    })
    return kernel


def clear_kernel_cache():
    _KERNEL_CACHE.clear()


def expected_loading_rate(cfg: RunConfig, kernel: Optional[LoadingKernel] = None) -> float:
    """Analytic mean-field capture rate (ions/s) while the gate is open."""
    pipeline = LoadingPipeline(cfg)
    kernel = kernel or loading_kernel(cfg, pipeline)
    return (cfg.ablation.rep_rate * pipeline.burst.n_atoms * pipeline.acceptance
            * kernel.total_captured_per_accepted)


@dataclass
class FractionalLedger:
    """Running expected totals; integer counts are their floors.

    Floors of nested non-decreasing totals keep every ledger difference
    non-negative, so the integer bookkeeping stays exact.
    """
    emitted: float = 0.0
    accepted: float = 0.0
    ionized: float = 0.0
    captured: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def advance(self, n_atoms: float, acceptance: float, kernel: LoadingKernel) -> Dict[str, object]:
        """Add the expectation for ``n_atoms`` emitted atoms.

        Returns:
            Integer increments: emitted, accepted, ionized and captured per isotope
        """
        if self.captured.size == 0:
            self.captured = np.zeros(len(kernel.captured_per_accepted))
        before = self._floors()
        accepted = n_atoms * acceptance
        self.emitted += n_atoms
        self.accepted += accepted
        self.ionized += accepted * kernel.ionized_per_accepted
        self.captured = self.captured + accepted * np.asarray(kernel.captured_per_accepted)
        after = self._floors()
        return {name: after[name] - before[name] for name in after}

    def _floors(self) -> Dict[str, object]:
        captured = np.floor(self.captured).astype(np.int64)
        ionized = max(math.floor(self.ionized), int(captured.sum()))
        accepted = max(math.floor(self.accepted), ionized)
        return {
            "emitted": max(math.floor(self.emitted), accepted),
            "accepted": accepted,
            "ionized": ionized,
            "captured": captured,
        }

    @property
    def expected_captured(self) -> float:
        return float(self.captured.sum()) if self.captured.size else 0.0


def spread_arrivals(pulse_indices: np.ndarray, rep_rate: float, n_ions: int,
                    transit_delay: float) -> np.ndarray:
    """Deterministic arrival times for ``n_ions`` ions spread over a step's pulses."""
    if n_ions == 0 or pulse_indices.size == 0:
        return np.empty(0)
    picks = np.floor((np.arange(n_ions) + 0.5) / n_ions * pulse_indices.size).astype(np.int64)
    return pulse_indices[picks] / rep_rate + transit_delay

