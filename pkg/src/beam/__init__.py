"""Beam transport package."""

from .transport import (
    AtomSample,
    ArrivalProfile,
    acceptance_fraction,
    sample_velocity,
    sample_atoms,
    arrival_profile,
    mean_flux_velocity,
    mean_transit_delay,
)

__all__ = [
    'AtomSample',
    'ArrivalProfile',
    'acceptance_fraction',
    'sample_velocity',
    'sample_atoms',
    'arrival_profile',
    'mean_flux_velocity',
    'mean_transit_delay',
]
