"""Unit handling.

Internal units: angular frequency in rad/ps, delay in ps, length in mm,
group-delay mismatch in ps/mm.  Values tagged ``THz`` are ordinary
frequencies and are multiplied by 2*pi on ingestion.
"""
from __future__ import annotations

import math
import re

SPEED_OF_LIGHT_NM_PER_PS = 299_792.458
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

UNIT_CONVENTION = (
    "angular frequency rad/ps; delay ps; length mm; group-delay mismatch ps/mm; "
    "THz inputs are ordinary frequency, multiplied by 2*pi on ingestion"
)

_QUANTITY = re.compile(
    r"^\s*(?P<value>[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)\s*(?P<unit>[A-Za-z/]+(\s+[A-Za-z/]+)?)\s*$"
)

# unit tag -> (dimension, factor to internal unit)
_UNITS = {
    "rad/ps": ("angular_frequency", 1.0),
    "rad/fs": ("angular_frequency", 1e3),
    "THz": ("angular_frequency", 2.0 * math.pi),
    "GHz": ("angular_frequency", 2.0 * math.pi * 1e-3),
    "ps": ("time", 1.0),
    "fs": ("time", 1e-3),
    "mm": ("length", 1.0),
    "um": ("length", 1e-3),
    "cm": ("length", 10.0),
    "ps/mm": ("inverse_velocity", 1.0),
    "fs/mm": ("inverse_velocity", 1e-3),
    "nm": ("wavelength", 1.0),
    "rad": ("angle", 1.0),
    "pi rad": ("angle", math.pi),
    "deg": ("angle", math.pi / 180.0),
}


class UnitError(ValueError):
    pass


def parse_quantity(text: str) -> tuple[float, str]:
    """Split ``"1.35 THz"`` into ``(1.35, "THz")``.  Raises UnitError when untagged."""
    if not isinstance(text, str):
        raise UnitError(f"expected a unit-tagged string, got {text!r}")
    m = _QUANTITY.match(text)
    if m is None:
        raise UnitError(f"cannot parse quantity {text!r}; expected '<number> <unit>'")
    unit = " ".join(m.group("unit").split())
    if unit not in _UNITS:
        raise UnitError(f"unknown unit {unit!r} in {text!r}; known: {', '.join(_UNITS)}")
    return float(m.group("value")), unit


def dimension_of(unit: str) -> str:
    return _UNITS[unit][0]


def to_internal(text: str, dimension: str) -> float:
    """Convert a tagged quantity to internal units, checking its dimension."""
    value, unit = parse_quantity(text)
    dim, factor = _UNITS[unit]
    if dim != dimension:
        raise UnitError(f"{text!r} has dimension {dim}, expected {dimension}")
    return value * factor


def wavelength_to_angular(wavelength_nm: float) -> float:
    return 2.0 * math.pi * SPEED_OF_LIGHT_NM_PER_PS / wavelength_nm


def fwhm_nm_to_sigma(wavelength_nm: float, fwhm_nm: float) -> float:
    """Amplitude standard deviation (rad/ps) for a spectral FWHM given in wavelength."""
    return 2.0 * math.pi * SPEED_OF_LIGHT_NM_PER_PS * fwhm_nm / wavelength_nm**2 * FWHM_TO_SIGMA
