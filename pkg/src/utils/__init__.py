"""Utilities package for the ablatron loading simulator."""

from datetime import datetime, timezone

__version__ = "0.4.0"


def utcnow() -> datetime:
    """Get current UTC datetime.

    Returns:
        Current UTC datetime with timezone awareness
    """
    return datetime.now(timezone.utc)


from .logging import SimulationLogger, get_logger  # noqa: E402
from .rng import StreamFactory, derive_rng  # noqa: E402
from .units import parse_quantity, to_mj_per_cm2, from_mj_per_cm2  # noqa: E402

__all__ = [
    'SimulationLogger',
    'get_logger',
    'StreamFactory',
    'derive_rng',
    'parse_quantity',
    'to_mj_per_cm2',
    'from_mj_per_cm2',
    'utcnow',
    '__version__',
]
