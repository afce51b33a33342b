"""Named scenario presets.

ti64_fine is the desk-scale baseline (also the empty-document default): the
calibrated 15-45 um Ti-6Al-4V size distribution with the surface energy
raised 8x to 0.64 mJ/m^2, emulating a 0-20 um powder by self-similarity.
ti64_coarse keeps the same PSD at the calibrated 0.08 mJ/m^2. The paper-scale
presets reproduce the full 12 mm bed; they run for hours and are not used by
the test suite. tiny is a sub-minute scenario for self-checks.
"""
import copy

from .errors import ConfigError
from .io import ScenarioConfig, apply_document

GAMMA_COARSE = 0.08e-3   # calibrated surface energy of the 15-45 um powder
GAMMA_FINE = 0.64e-3     # the rounded 8x value used for the emulated fine powder


def _all_classes(**fields):
    return {cls: dict(fields) for cls in
            ("particle_particle", "particle_substrate", "particle_reservoir",
             "particle_roller", "particle_blade")}


PRESETS = {
    # baseline == dataclass defaults (desk-scale roller scenario)
    "ti64_fine": {
        "engine": {"approach_velocity": 150e-3, "engage_standoff": 2.4e-3},
    },
    "smoke": {
        "engine": {"approach_velocity": 150e-3, "engage_standoff": 2.4e-3},
    },
    "ti64_coarse": {
        "powder": {"surface_energy": GAMMA_COARSE},
        "interaction": _all_classes(surface_energy=GAMMA_COARSE),
        "engine": {"approach_velocity": 150e-3, "engage_standoff": 2.4e-3},
    },
    "paper": {
        "powder": {"count": 42000},
        "domain": {
            "bed_length": 12e-3,
            "periodic_width": 1e-3,
            "reservoir": {"length": 4.5e-3, "piston_travel": 1.4e-3},
            "window": {"start": 3e-3, "length": 5e-3},
        },
        "engine": {"step_budget": 20_000_000},
    },
    "paper_blade": {
        "powder": {"count": 21000},
        "domain": {
            "bed_length": 12e-3,
            "periodic_width": 1e-3,
            "reservoir": {"length": 4.5e-3, "piston_travel": 1.0e-3},
            "window": {"start": 3e-3, "length": 5e-3},
        },
        "tool": {"kind": "blade"},
        "kinematics": {"traverse_velocity": 50e-3, "mode": "none"},
        "engine": {"step_budget": 20_000_000},
    },
    "tiny": {
        "powder": {"count": 700},
        "domain": {
            "bed_length": 1.2e-3,
            "periodic_width": 0.3e-3,
            "reservoir": {"length": 1.2e-3, "piston_travel": 0.3e-3},
            "window": {"start": 0.3e-3, "length": 0.6e-3},
        },
        "engine": {"tail_time": 8e-3, "piston_speed": 20e-3,
                   "approach_velocity": 150e-3, "engage_standoff": 1.4e-3},
    },
}


def preset_names():
    return sorted(PRESETS)


def preset_config(name: str) -> ScenarioConfig:
    try:
        doc = copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; "
                          f"known: {', '.join(preset_names())}") from None
    return apply_document(doc, ScenarioConfig())
