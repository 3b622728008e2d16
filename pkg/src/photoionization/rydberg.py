"""Rydberg level model and energetics gates."""

from dataclasses import dataclass, field
from typing import Dict

from config.config import SpeciesData
from src.core.constants import C, EV, H
from src.core.lasers import photon_energy
from src.utils.errors import UnknownTransitionError

# Core state of Rydberg atoms produced in the plume
RYDBERG_CORE_STATE = "S12"


@dataclass(frozen=True)
class AutoionizingLine:
    transition: str
    photon_energy: float
    wavelength: float
    ionizing: bool


@dataclass(frozen=True)
class RydbergLevelModel:
    """Spectator-electron picture of a Rydberg atom.

    Transition names are ``"<lower>-><upper>"`` with ionic level labels.
    """
    rydberg_binding: float
    ion_transition_energies: Dict[str, float] = field(default_factory=dict)
    core_state: str = RYDBERG_CORE_STATE

    def __post_init__(self):
        if self.rydberg_binding < 0:
            raise ValueError("rydberg_binding must be >= 0")
        for name, energy in self.ion_transition_energies.items():
            if energy <= 0:
                raise ValueError(f"transition {name} energy must be > 0")

    @classmethod
    def from_species(cls, species: SpeciesData, rydberg_binding: float) -> "RydbergLevelModel":
        levels = species.level_energies
        return cls(
            rydberg_binding=rydberg_binding,
            ion_transition_energies={
                "S12->P12": levels["ion_P12"] - levels["ion_S12"],
                "D32->P12": levels["ion_P12"] - levels["ion_D32"],
            },
        )


def _normalize(name: str) -> str:
    return name.replace("→", "->").replace(" ", "")


def autoionizing_photon_energy(model: RydbergLevelModel, core_transition: str) -> float:
    """Photon energy (eV) driving ``core_transition`` with a spectator Rydberg electron.

    The Rydberg electron shifts both core levels equally, so the answer is
    the bare ionic transition energy.
    """
    name = _normalize(core_transition)
    if name not in model.ion_transition_energies:
        raise UnknownTransitionError(
            f"unknown core transition {core_transition!r}; known: {sorted(model.ion_transition_energies)}"
        )
    return model.ion_transition_energies[name]


def autoionizing_line(model: RydbergLevelModel, core_transition: str) -> AutoionizingLine:
    """Photon energy of a core transition and whether it auto-ionizes the atom.

    A line ionizes only if it starts from the core state the Rydberg atoms
    actually have and the excited core lifts the atom above the continuum.
    """
    energy = autoionizing_photon_energy(model, core_transition)
    lower = _normalize(core_transition).split("->")[0]
    ionizing = lower == model.core_state and energy > model.rydberg_binding
    return AutoionizingLine(
        transition=_normalize(core_transition),
        photon_energy=energy,
        wavelength=H * C / (energy * EV),
        ionizing=ionizing,
    )


def can_photoionize(initial_level_energy: float, IP: float, wavelength: float) -> bool:
    """True iff one photon at ``wavelength`` lifts the level above the ionization potential."""
    if not IP > initial_level_energy >= 0:
        raise ValueError("require IP > initial_level_energy >= 0")
    return photon_energy(wavelength) > IP - initial_level_energy
