"""Photo-ionization package: 272 nm two-photon and 397 nm Rydberg channels."""

from .rydberg import (
    RydbergLevelModel,
    AutoionizingLine,
    autoionizing_photon_energy,
    autoionizing_line,
    can_photoionize,
)
from .channels import (
    ChannelKind,
    IonizationChannel,
    TwoPhotonChannel,
    RydbergChannel,
    ChannelFactory,
    doppler_shift,
    two_photon_ionization_prob,
    rydberg_loading_rate,
    rydberg_overlap,
    metastable_ionization_probability,
)

__all__ = [
    'RydbergLevelModel',
    'AutoionizingLine',
    'autoionizing_photon_energy',
    'autoionizing_line',
    'can_photoionize',
    'ChannelKind',
    'IonizationChannel',
    'TwoPhotonChannel',
    'RydbergChannel',
    'ChannelFactory',
    'doppler_shift',
    'two_photon_ionization_prob',
    'rydberg_loading_rate',
    'rydberg_overlap',
    'metastable_ionization_probability',
]
