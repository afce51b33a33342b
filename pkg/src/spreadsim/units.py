"""Unit-string parsing for configuration values.

Config documents store plain numbers in SI base units, or strings like
``"31.5 um"`` / ``"0.64 mJ/m^2"`` / ``"-500 rpm"`` which are converted to SI
at parse time. Each config field declares a dimension key from FACTORS.
"""
from __future__ import annotations

import math

from .errors import ConfigError

# dimension -> {unit string: factor to SI}
FACTORS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "speed": {"m/s": 1.0, "mm/s": 1e-3, "um/s": 1e-6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "density": {"kg/m^3": 1.0, "kg/m3": 1.0, "g/cm^3": 1e3},
    "surface_energy": {"J/m^2": 1.0, "J/m2": 1.0, "mJ/m^2": 1e-3, "mJ/m2": 1e-3},
    "energy": {"J": 1.0, "mJ": 1e-3},
    "stiffness": {"N/m": 1.0},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "angular_velocity": {"rad/s": 1.0, "rpm": 2.0 * math.pi / 60.0},
    "frequency": {"Hz": 1.0, "kHz": 1e3},
    "acceleration": {"m/s^2": 1.0, "m/s2": 1.0},
    "dimensionless": {"": 1.0},
}


def parse_quantity(value, dimension, path=""):
    """Convert a config scalar to SI float.

    Accepts int/float (already SI) or a string "<number> <unit>" where the
    unit must belong to the given dimension.
    """
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got boolean {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split()
        if len(parts) == 1:
            # allow e.g. "25mm/s" with no space
            for unit in sorted(FACTORS[dimension], key=len, reverse=True):
                if unit and parts[0].endswith(unit):
                    num = parts[0][: -len(unit)]
                    return _convert(num, unit, dimension, path)
            return _convert(parts[0], "", dimension, path)
        if len(parts) == 2:
            return _convert(parts[0], parts[1], dimension, path)
        raise ConfigError(path, f"cannot parse quantity {value!r}")
    raise ConfigError(path, f"expected a number or quantity string, got {type(value).__name__}")


def _convert(num, unit, dimension, path):
    try:
        x = float(num)
    except ValueError:
        raise ConfigError(path, f"not a number: {num!r}") from None
    table = FACTORS[dimension]
    if unit not in table:
        raise ConfigError(
            path, f"unit {unit!r} not valid for {dimension} (expected one of {sorted(u for u in table if u)})"
        )
    return x * table[unit]
