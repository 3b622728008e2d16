"""Unit-suffixed quantity parsing for config documents.

Values are converted to SI at the boundary, except vacuum quantities which
stay in mbar, litres and litres per second.
"""

import math
import re
from typing import Dict, Optional

from scipy import constants

from .errors import MalformedDocumentError


class UnitParser:
    """Parses numbers such as ``"240 mJ/cm2"`` into SI floats."""

    NUMBER = re.compile(
        r"^\s*(?P<value>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(?P<unit>.*?)\s*$"
    )

    # Multiplier to SI (or to the vacuum convention) for each accepted suffix
    UNITS: Dict[str, float] = {
        "": 1.0,
        # length
        "m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9,
        # area
        "m2": 1.0, "cm2": 1e-4, "mm2": 1e-6, "um2": 1e-12,
        # time
        "s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "min": 60.0,
        # frequency
        "Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9,
        # energy
        "J": 1.0, "mJ": 1e-3, "uJ": 1e-6, "µJ": 1e-6, "eV": 1.0,
        # fluence
        "J/m2": 1.0, "mJ/cm2": 10.0, "J/cm2": 1e4,
        # power and intensity
        "W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "W/m2": 1.0, "mW/cm2": 10.0,
        # angle
        "rad": 1.0, "deg": math.pi / 180.0, "mrad": 1e-3,
        # mass
        "kg": 1.0, "u": constants.atomic_mass,
        # thermal and material
        "K": 1.0, "kg/m3": 1.0, "g/cm3": 1e3, "J/kg/K": 1.0, "W/m/K": 1.0,
        # electrical
        "V": 1.0,
        # vacuum convention
        "mbar": 1.0, "Pa": 1e-2, "L": 1.0, "L/s": 1.0, "mbar L": 1.0,
        "mbar L/s": 1.0, "/mbar/s": 1.0,
        # cross sections and rates
        "1/s": 1.0, "counts/s": 1.0,
    }

    def parse(self, text: str, key: Optional[str] = None) -> float:
        """Parse a quantity.

        Args:
            text: Raw value, optionally followed by a unit suffix
            key: Config key for error reporting

        Returns:
            Value converted to the internal unit
        """
        match = self.NUMBER.match(str(text))
        if match is None:
            raise MalformedDocumentError(key or "<value>", f"not a number: {text!r}")
        unit = match.group("unit").replace("²", "2").replace("³", "3")
        if unit not in self.UNITS:
            raise MalformedDocumentError(key or "<value>", f"unknown unit {unit!r}")
        return float(match.group("value")) * self.UNITS[unit]


unit_parser = UnitParser()


def parse_quantity(text: str, key: Optional[str] = None) -> float:
    """Parse ``text`` with the module-level parser."""
    return unit_parser.parse(text, key)


def to_mj_per_cm2(fluence: float) -> float:
    """Convert J/m² to mJ/cm²."""
    return fluence / 10.0


def from_mj_per_cm2(fluence: float) -> float:
    """Convert mJ/cm² to J/m²."""
    return fluence * 10.0
