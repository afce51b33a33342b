"""Configuration documents, binary snapshots, and result exports.

A scenario is one YAML document; every physical value is either a plain SI
number or a quantity string like "31.5 um". A document may name a preset,
whose fields it overrides. Unknown keys are rejected with path-qualified
errors. Snapshots are little-endian columnar binaries with a CRC32 trailer
and skip-with-warning handling of unknown trailing sections.
"""
from __future__ import annotations

import hashlib
import json
import struct
import warnings
import zlib
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, InvalidInputError, SnapshotFormatError
from .mechanics import InteractionParams, InteractionSet
from .powder import PowderSpec, PsdQuantiles, fit_lognormal_psd
from .units import parse_quantity
from .world import (CompliantCoating, DomainSpec, EvaluationWindow,
                    ReservoirSpec, ToolGeometry, ToolKinematics,
                    frequency_for_equivalent_rpm)


# ---------------------------------------------------------------------------
# configuration dataclasses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowderConfig:
    """Powder description: PSD quantiles or lognormal parameters, plus count."""

    cutoff_diameter: float = 88e-6
    density: float = 4430.0
    surface_energy: float = 0.64e-3
    count: int = 10000
    d10: float | None = 23.4e-6
    d50: float | None = 31.5e-6
    d90: float | None = 43.4e-6
    mu_log: float | None = None
    sigma_log: float | None = None

    def to_spec(self) -> PowderSpec:
        if self.mu_log is not None:
            return PowderSpec(mu_log=self.mu_log, sigma_log=self.sigma_log or 0.0,
                              cutoff_diameter=self.cutoff_diameter,
                              density=self.density, surface_energy=self.surface_energy)
        q = PsdQuantiles(self.d10, self.d50, self.d90)
        return fit_lognormal_psd(q, self.cutoff_diameter, self.density,
                                 self.surface_energy)


@dataclass(frozen=True)
class EngineConfig:
    dt_safety_factor: float = 0.2
    settle_energy_threshold: float = 1e-13
    settle_hold_steps: int = 1000
    settle_check_every: int = 25
    piston_speed: float = 10e-3
    spread_margin: float = 0.3e-3
    tail_time: float = 12e-3
    approach_velocity: float | None = None   # None: dash at traverse velocity
    engage_standoff: float = 2.5e-3
    step_budget: int = 4_000_000
    seed: int = 20260810
    deterministic: bool = True
    workers: int = 0
    gravity: float = 9.8
    log_every: int = 50000


@dataclass(frozen=True)
class MetricsConfig:
    bin_size: float = 100e-6
    voxel_size: float = 2.5e-6


@dataclass(frozen=True)
class OutputConfig:
    snapshot_every: int = 0
    write_vtk: bool = False
    write_field_csv: bool = True
    write_final_snapshot: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    powder: PowderConfig = field(default_factory=PowderConfig)
    interaction: InteractionSet = field(default_factory=InteractionSet)
    domain: DomainSpec = field(default_factory=DomainSpec)
    tool: ToolGeometry = field(default_factory=ToolGeometry)
    kinematics: ToolKinematics = field(default_factory=ToolKinematics)
    engine: EngineConfig = field(default_factory=EngineConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _expect_mapping(node, path):
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected a mapping, got {type(node).__name__}")
    return dict(node)


def _reject_unknown(node, path):
    if node:
        key = sorted(node)[0]
        raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


_REQUIRED = object()


def _take(node, key, path, dimension=None, default=_REQUIRED):
    if key in node:
        value = node.pop(key)
        if dimension is not None:
            return parse_quantity(value, dimension, f"{path}.{key}")
        return value
    if default is _REQUIRED:
        raise ConfigError(f"{path}.{key}", "required key missing")
    return default


def _take_int(node, key, path, default):
    v = _take(node, key, path, None, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    return v


def _take_bool(node, key, path, default):
    v = _take(node, key, path, None, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{path}.{key}", f"expected a boolean, got {v!r}")
    return v


def _positive(value, path):
    if value <= 0:
        raise ConfigError(path, f"must be > 0, got {value!r}")
    return value


def _parse_powder(node, path, base: PowderConfig):
    node = _expect_mapping(node, path)
    quantile_keys = {"d10", "d50", "d90"} & node.keys()
    lognormal_keys = {"mu_log", "sigma_log"} & node.keys()
    if quantile_keys and lognormal_keys:
        raise ConfigError(path, "give either d10/d50/d90 or mu_log/sigma_log, not both")
    out = {}
    if lognormal_keys:
        out["mu_log"] = _take(node, "mu_log", path, "dimensionless")
        out["sigma_log"] = _take(node, "sigma_log", path, "dimensionless", 0.0)
        out["d10"] = out["d50"] = out["d90"] = None
    elif quantile_keys:
        for k in ("d10", "d50", "d90"):
            out[k] = _positive(_take(node, k, path, "length"), f"{path}.{k}")
        out["mu_log"] = out["sigma_log"] = None
    out["cutoff_diameter"] = _positive(
        _take(node, "cutoff_diameter", path, "length", base.cutoff_diameter),
        f"{path}.cutoff_diameter")
    out["density"] = _positive(_take(node, "density", path, "density", base.density),
                               f"{path}.density")
    out["surface_energy"] = _take(node, "surface_energy", path, "surface_energy",
                                  base.surface_energy)
    if out["surface_energy"] < 0:
        raise ConfigError(f"{path}.surface_energy", "must be >= 0")
    out["count"] = _take_int(node, "count", path, base.count)
    if out["count"] < 0:
        raise ConfigError(f"{path}.count", "must be >= 0")
    _reject_unknown(node, path)
    cfg = replace(base, **out)
    try:
        if cfg.count:
            cfg.to_spec()
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None
    return cfg


def _parse_interaction_params(node, path, base: InteractionParams):
    node = _expect_mapping(node, path)
    out = {}
    for key, dim in (("penalty_stiffness", "stiffness"),
                     ("restitution", "dimensionless"),
                     ("friction_coeff", "dimensionless"),
                     ("rolling_friction_coeff", "dimensionless"),
                     ("surface_energy", "surface_energy"),
                     ("hamaker_constant", "energy"),
                     ("adhesion_cutoff_ratio", "dimensionless"),
                     ("tangential_stiffness_ratio", "dimensionless"),
                     ("rolling_threshold", "angular_velocity")):
        if key in node:
            out[key] = _take(node, key, path, dim)
    _reject_unknown(node, path)
    try:
        return replace(base, **out)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_interaction(node, path, base: InteractionSet):
    node = _expect_mapping(node, path)
    out = {}
    for cls in ("particle_particle", "particle_substrate", "particle_reservoir",
                "particle_roller", "particle_blade"):
        if cls in node:
            out[cls] = _parse_interaction_params(node.pop(cls), f"{path}.{cls}",
                                                 getattr(base, cls))
    _reject_unknown(node, path)
    return replace(base, **out)


def _parse_domain(node, path, base: DomainSpec):
    node = _expect_mapping(node, path)
    out = {}
    for key in ("bed_length", "periodic_width", "gap_height", "park_length",
                "overflow_length"):
        if key in node:
            out[key] = _positive(_take(node, key, path, "length"), f"{path}.{key}")
    if "reservoir" in node:
        rnode = _expect_mapping(node.pop("reservoir"), f"{path}.reservoir")
        rout = {}
        for key in ("length", "piston_travel", "seed_margin", "max_seed_height"):
            if key in rnode:
                rout[key] = _take(rnode, key, f"{path}.reservoir", "length")
        _reject_unknown(rnode, f"{path}.reservoir")
        out["reservoir"] = replace(base.reservoir, **rout)
    if "window" in node:
        wnode = _expect_mapping(node.pop("window"), f"{path}.window")
        wout = {}
        for key in ("start", "length"):
            if key in wnode:
                wout[key] = _take(wnode, key, f"{path}.window", "length")
        _reject_unknown(wnode, f"{path}.window")
        out["window"] = replace(base.window, **wout)
    _reject_unknown(node, path)
    try:
        return replace(base, **out)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_tool(node, path, base: ToolGeometry):
    node = _expect_mapping(node, path)
    out = {}
    if "kind" in node:
        out["kind"] = _take(node, "kind", path)
    for key, dim in (("roller_diameter", "length"), ("blade_thickness", "length"),
                     ("blade_height", "length"), ("edge_angle", "dimensionless")):
        if key in node:
            out[key] = _take(node, key, path, dim)
    if "segment_count" in node:
        out["segment_count"] = _take_int(node, "segment_count", path, base.segment_count)
    if "coating" in node:
        cnode = node.pop("coating")
        if cnode is None:
            out["coating"] = None
        else:
            cnode = _expect_mapping(cnode, f"{path}.coating")
            cbase = base.coating or CompliantCoating()
            cout = {}
            for key, dim in (("youngs_modulus", "pressure"), ("thickness", "length"),
                             ("poisson_ratio", "dimensionless"),
                             ("density", "density"),
                             ("damping_ratio", "dimensionless")):
                if key in cnode:
                    cout[key] = _take(cnode, key, f"{path}.coating", dim)
            _reject_unknown(cnode, f"{path}.coating")
            try:
                out["coating"] = replace(cbase, **cout)
            except InvalidInputError as exc:
                raise ConfigError(f"{path}.coating", str(exc)) from None
    _reject_unknown(node, path)
    try:
        return replace(base, **out)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_kinematics(node, path, base: ToolKinematics):
    node = _expect_mapping(node, path)
    out = {}
    if "traverse_velocity" in node:
        out["traverse_velocity"] = _take(node, "traverse_velocity", path, "speed")
    mode = _take(node, "mode", path, None, base.mode)
    out["mode"] = mode
    if "angular_velocity" in node:
        out["angular_velocity"] = _take(node, "angular_velocity", path, "angular_velocity")
    if "amplitude" in node:
        out["amplitude"] = _take(node, "amplitude", path, "angle")
    has_freq = "frequency" in node
    has_eq = "equivalent_rpm" in node
    if has_freq and has_eq:
        raise ConfigError(path, "give either frequency or equivalent_rpm, not both")
    if has_freq:
        out["frequency"] = _take(node, "frequency", path, "frequency")
    if has_eq:
        rpm = _take(node, "equivalent_rpm", path, "dimensionless")
        amplitude = out.get("amplitude", base.amplitude)
        try:
            out["frequency"] = frequency_for_equivalent_rpm(amplitude, rpm)
        except InvalidInputError as exc:
            raise ConfigError(f"{path}.equivalent_rpm", str(exc)) from None
    _reject_unknown(node, path)
    try:
        return replace(base, **out)
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_engine(node, path, base: EngineConfig):
    node = _expect_mapping(node, path)
    out = {}
    for key, dim in (("dt_safety_factor", "dimensionless"),
                     ("settle_energy_threshold", "energy"),
                     ("piston_speed", "speed"), ("spread_margin", "length"),
                     ("tail_time", "time"), ("gravity", "acceleration"),
                     ("engage_standoff", "length")):
        if key in node:
            out[key] = _take(node, key, path, dim)
    if "approach_velocity" in node:
        raw = node.pop("approach_velocity")
        out["approach_velocity"] = None if raw is None else parse_quantity(
            raw, "speed", f"{path}.approach_velocity")
    for key in ("settle_hold_steps", "settle_check_every", "step_budget",
                "seed", "workers", "log_every"):
        if key in node:
            out[key] = _take_int(node, key, path, getattr(base, key))
    if "deterministic" in node:
        out["deterministic"] = _take_bool(node, "deterministic", path, base.deterministic)
    _reject_unknown(node, path)
    for key in ("dt_safety_factor", "piston_speed", "gravity"):
        if key in out:
            _positive(out[key], f"{path}.{key}")
    return replace(base, **out)


def _parse_metrics(node, path, base: MetricsConfig):
    node = _expect_mapping(node, path)
    out = {}
    for key in ("bin_size", "voxel_size"):
        if key in node:
            out[key] = _positive(_take(node, key, path, "length"), f"{path}.{key}")
    _reject_unknown(node, path)
    return replace(base, **out)


def _parse_output(node, path, base: OutputConfig):
    node = _expect_mapping(node, path)
    out = {}
    if "snapshot_every" in node:
        out["snapshot_every"] = _take_int(node, "snapshot_every", path, base.snapshot_every)
    for key in ("write_vtk", "write_field_csv", "write_final_snapshot"):
        if key in node:
            out[key] = _take_bool(node, key, path, getattr(base, key))
    _reject_unknown(node, path)
    return replace(base, **out)


def apply_document(doc: dict, base: ScenarioConfig) -> ScenarioConfig:
    """Apply a (partial) document on top of a base configuration."""
    doc = _expect_mapping(doc, "")
    cfg = ScenarioConfig(
        powder=_parse_powder(doc.pop("powder", None), "powder", base.powder),
        interaction=_parse_interaction(doc.pop("interaction", None), "interaction",
                                       base.interaction),
        domain=_parse_domain(doc.pop("domain", None), "domain", base.domain),
        tool=_parse_tool(doc.pop("tool", None), "tool", base.tool),
        kinematics=_parse_kinematics(doc.pop("kinematics", None), "kinematics",
                                     base.kinematics),
        engine=_parse_engine(doc.pop("engine", None), "engine", base.engine),
        metrics=_parse_metrics(doc.pop("metrics", None), "metrics", base.metrics),
        output=_parse_output(doc.pop("output", None), "output", base.output),
    )
    _reject_unknown(doc, "")
    return cfg


def parse_scenario_document(doc: dict) -> ScenarioConfig:
    """Build a validated ScenarioConfig from a document dictionary."""
    from .presets import preset_config  # deferred: presets are documents too

    doc = _expect_mapping(doc, "")
    preset_name = doc.pop("preset", "ti64_fine")
    return apply_document(doc, preset_config(preset_name))


def parse_scenario_config(text: str) -> ScenarioConfig:
    """Parse a YAML scenario document (empty text = preset defaults)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from None
    if doc is None:
        doc = {}
    return parse_scenario_document(doc)


def load_scenario_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_config(fh.read())


# ---------------------------------------------------------------------------
# rendering and hashing
# ---------------------------------------------------------------------------

def config_to_document(cfg: ScenarioConfig) -> dict:
    """Resolved SI document (no preset reference); parses back to an equal config."""
    p = cfg.powder
    powder = {"cutoff_diameter": p.cutoff_diameter, "density": p.density,
              "surface_energy": p.surface_energy, "count": p.count}
    if p.mu_log is not None:
        powder["mu_log"] = p.mu_log
        powder["sigma_log"] = p.sigma_log
    else:
        powder.update(d10=p.d10, d50=p.d50, d90=p.d90)
    inter = {}
    for cls in ("particle_particle", "particle_substrate", "particle_reservoir",
                "particle_roller", "particle_blade"):
        q = getattr(cfg.interaction, cls)
        inter[cls] = {
            "penalty_stiffness": q.penalty_stiffness, "restitution": q.restitution,
            "friction_coeff": q.friction_coeff,
            "rolling_friction_coeff": q.rolling_friction_coeff,
            "surface_energy": q.surface_energy,
            "hamaker_constant": q.hamaker_constant,
            "adhesion_cutoff_ratio": q.adhesion_cutoff_ratio,
            "tangential_stiffness_ratio": q.tangential_stiffness_ratio,
            "rolling_threshold": q.rolling_threshold}
    d = cfg.domain
    domain = {"bed_length": d.bed_length, "periodic_width": d.periodic_width,
              "gap_height": d.gap_height, "park_length": d.park_length,
              "overflow_length": d.overflow_length,
              "reservoir": {"length": d.reservoir.length,
                            "piston_travel": d.reservoir.piston_travel,
                            "seed_margin": d.reservoir.seed_margin,
                            "max_seed_height": d.reservoir.max_seed_height},
              "window": {"start": d.window.start, "length": d.window.length}}
    t = cfg.tool
    tool = {"kind": t.kind, "roller_diameter": t.roller_diameter,
            "segment_count": t.segment_count, "blade_thickness": t.blade_thickness,
            "blade_height": t.blade_height, "edge_angle": t.edge_angle}
    if t.coating is None:
        tool["coating"] = None
    else:
        c = t.coating
        tool["coating"] = {"youngs_modulus": c.youngs_modulus, "thickness": c.thickness,
                           "poisson_ratio": c.poisson_ratio, "density": c.density,
                           "damping_ratio": c.damping_ratio}
    kin = cfg.kinematics
    kinematics = {"traverse_velocity": kin.traverse_velocity, "mode": kin.mode}
    if kin.mode == "constant_rotation":
        kinematics["angular_velocity"] = kin.angular_velocity
    elif kin.mode == "oscillation":
        kinematics["amplitude"] = kin.amplitude
        kinematics["frequency"] = kin.frequency
    e = cfg.engine
    engine = {k: getattr(e, k) for k in (
        "dt_safety_factor", "settle_energy_threshold", "settle_hold_steps",
        "settle_check_every", "piston_speed", "spread_margin", "tail_time",
        "approach_velocity", "engage_standoff",
        "step_budget", "seed", "deterministic", "workers", "gravity", "log_every")}
    return {"powder": powder, "interaction": inter, "domain": domain, "tool": tool,
            "kinematics": kinematics, "engine": engine,
            "metrics": {"bin_size": cfg.metrics.bin_size,
                        "voxel_size": cfg.metrics.voxel_size},
            "output": {"snapshot_every": cfg.output.snapshot_every,
                       "write_vtk": cfg.output.write_vtk,
                       "write_field_csv": cfg.output.write_field_csv,
                       "write_final_snapshot": cfg.output.write_final_snapshot}}


def render_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_document(cfg), sort_keys=True,
                          default_flow_style=False)


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode()).hexdigest()[:16]


def prepare_hash(cfg: ScenarioConfig) -> str:
    """Hash of everything that shapes the settle+feed phases.

    Spread-only knobs (kinematics, bed-substrate interaction, metrics, output,
    worker count) are excluded so prepared states can be shared across cells
    of a kinematics or substrate study.
    """
    doc = config_to_document(cfg)
    del doc["kinematics"], doc["metrics"], doc["output"]
    del doc["interaction"]["particle_substrate"]
    del doc["engine"]["workers"], doc["engine"]["log_every"]
    del doc["engine"]["approach_velocity"], doc["engine"]["engage_standoff"]
    del doc["engine"]["spread_margin"], doc["engine"]["tail_time"]
    text = yaml.safe_dump(doc, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

SNAPSHOT_MAGIC = b"SPRS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIdQd16sQI")


@dataclass
class Snapshot:
    """Per-particle state captured at one instant."""

    time: float
    width: float
    config_hash: str
    seed: int
    ids: np.ndarray
    pos: np.ndarray
    radius: np.ndarray
    vel: np.ndarray
    angvel: np.ndarray

    @property
    def count(self) -> int:
        return self.ids.size


def snapshot_from_state(state, config_hash_="", seed=0) -> Snapshot:
    n = state.pos.shape[0]
    return Snapshot(time=state.time, width=state.domain.periodic_width,
                    config_hash=config_hash_, seed=seed,
                    ids=np.arange(n, dtype=np.uint64),
                    pos=np.ascontiguousarray(state.pos, dtype="<f8"),
                    radius=np.ascontiguousarray(state.radius, dtype="<f8"),
                    vel=np.ascontiguousarray(state.vel, dtype="<f8"),
                    angvel=np.ascontiguousarray(state.angvel, dtype="<f8"))


def write_snapshot(state, path, config_hash_="", seed=0) -> Snapshot:
    """Write a snapshot of a SimulationState (or a Snapshot) to path."""
    snap = state if isinstance(state, Snapshot) else snapshot_from_state(
        state, config_hash_, seed)
    n = snap.count
    part = b"".join((
        np.ascontiguousarray(snap.ids, dtype="<u8").tobytes(),
        np.ascontiguousarray(snap.pos, dtype="<f8").tobytes(),
        np.ascontiguousarray(snap.radius, dtype="<f8").tobytes(),
        np.ascontiguousarray(snap.vel, dtype="<f8").tobytes(),
        np.ascontiguousarray(snap.angvel, dtype="<f8").tobytes()))
    crc = zlib.crc32(part) & 0xFFFFFFFF
    hash_bytes = snap.config_hash.encode()[:16].ljust(16, b"\0")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, snap.time, n,
                              snap.width, hash_bytes, snap.seed, 2))
        fh.write(struct.pack("<4sQ", b"PART", len(part)))
        fh.write(part)
        fh.write(struct.pack("<4sQ", b"CRCS", 4))
        fh.write(struct.pack("<I", crc))
    return snap


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError("truncated snapshot header")
    magic, version, time_, n, width, hash_bytes, seed, n_sections = \
        _HEADER.unpack_from(raw, 0)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError("not a snapshot file")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    off = _HEADER.size
    part = None
    crc_stored = None
    for _ in range(n_sections):
        if off + 12 > len(raw):
            raise SnapshotFormatError("truncated section table")
        tag, length = struct.unpack_from("<4sQ", raw, off)
        off += 12
        if off + length > len(raw):
            raise SnapshotFormatError(f"truncated section {tag!r}")
        payload = raw[off:off + length]
        off += length
        if tag == b"PART":
            part = payload
        elif tag == b"CRCS":
            crc_stored = struct.unpack("<I", payload)[0]
        else:
            warnings.warn(f"snapshot: skipping unknown section {tag!r}", stacklevel=2)
    if part is None:
        raise SnapshotFormatError("snapshot has no particle section")
    expected = n * (8 + 8 * 3 + 8 + 8 * 3 + 8 * 3)
    if len(part) != expected:
        raise SnapshotFormatError("particle section length mismatch")
    if crc_stored is None or (zlib.crc32(part) & 0xFFFFFFFF) != crc_stored:
        raise SnapshotFormatError("snapshot checksum failure")
    off2 = 0

    def cut(count, dtype, shape):
        nonlocal off2
        nbytes = count * np.dtype(dtype).itemsize
        arr = np.frombuffer(part, dtype=dtype, count=count, offset=off2).reshape(shape)
        off2 += nbytes
        return arr.copy()

    ids = cut(n, "<u8", (n,))
    pos = cut(3 * n, "<f8", (n, 3))
    radius = cut(n, "<f8", (n,))
    vel = cut(3 * n, "<f8", (n, 3))
    angvel = cut(3 * n, "<f8", (n, 3))
    return Snapshot(time=time_, width=width,
                    config_hash=hash_bytes.rstrip(b"\0").decode(), seed=seed,
                    ids=ids, pos=pos, radius=radius, vel=vel, angvel=angvel)


# ---------------------------------------------------------------------------
# visualization export (legacy VTK ASCII) and CSV
# ---------------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def export_visualization(obj, path, provenance=""):
    """Write particles (POLYDATA points) or a packing field (STRUCTURED_POINTS)."""
    from .metrics import PackingFractionField

    if isinstance(obj, PackingFractionField):
        _write_vtk_field(obj, path, provenance)
    else:
        _write_vtk_particles(obj, path, provenance)


def _write_vtk_particles(snap, path, provenance):
    n = snap.pos.shape[0]
    lines = ["# vtk DataFile Version 3.0",
             f"spreadsim particles {provenance}".strip(),
             "ASCII", "DATASET POLYDATA", f"POINTS {n} double"]
    for i in range(n):
        lines.append(f"{_fmt(snap.pos[i, 0])} {_fmt(snap.pos[i, 1])} {_fmt(snap.pos[i, 2])}")
    lines.append(f"POINT_DATA {n}")
    lines.append("SCALARS radius double 1")
    lines.append("LOOKUP_TABLE default")
    for i in range(n):
        lines.append(_fmt(snap.radius[i]))
    lines.append("VECTORS velocity double")
    for i in range(n):
        lines.append(f"{_fmt(snap.vel[i, 0])} {_fmt(snap.vel[i, 1])} {_fmt(snap.vel[i, 2])}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_vtk_field(fieldobj, path, provenance):
    nbx, nby = fieldobj.phi.shape
    b = fieldobj.bin_size
    lines = ["# vtk DataFile Version 3.0",
             f"spreadsim packing field {provenance}".strip(),
             "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {nbx} {nby} 1",
             f"ORIGIN {_fmt(fieldobj.x0 + 0.5 * b)} {_fmt(0.5 * b)} 0",
             f"SPACING {_fmt(b)} {_fmt(b)} {_fmt(b)}",
             f"POINT_DATA {nbx * nby}",
             "SCALARS phi double 1", "LOOKUP_TABLE default"]
    for iy in range(nby):
        for ix in range(nbx):
            lines.append(_fmt(fieldobj.phi[ix, iy]))
    lines.append("SCALARS height double 1")
    lines.append("LOOKUP_TABLE default")
    for iy in range(nby):
        for ix in range(nbx):
            lines.append(_fmt(fieldobj.heights[ix, iy]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_visualization_field(path):
    """Re-import a field written by export_visualization (phi, heights)."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    dims = None
    arrays = {}
    i = 0
    while i < len(tokens):
        line = tokens[i]
        if line.startswith("DIMENSIONS"):
            _, nx, ny, _ = line.split()
            dims = (int(nx), int(ny))
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            i += 1  # LOOKUP_TABLE line
            vals = []
            while len(vals) < dims[0] * dims[1]:
                i += 1
                vals.append(float(tokens[i]))
            arrays[name] = np.array(vals).reshape(dims[1], dims[0]).T
        i += 1
    return arrays["phi"], arrays["height"]


def write_field_csv(fieldobj, path, provenance: dict | None = None):
    """Metric field as CSV with provenance comment lines."""
    lines = [f"# spreadsim {__version__}"]
    for key, val in sorted((provenance or {}).items()):
        lines.append(f"# {key}={val}")
    lines.append(f"# bin_size={_fmt(fieldobj.bin_size)} voxel_size={_fmt(fieldobj.voxel_size)}"
                 f" mean_height={_fmt(fieldobj.mean_height)}"
                 f" phi_mean={_fmt(fieldobj.phi_mean)} phi_std={_fmt(fieldobj.phi_std)}")
    lines.append("bin_ix,bin_iy,x_center,y_center,phi,height")
    xs, ys = fieldobj.bin_centers()
    nbx, nby = fieldobj.phi.shape
    for ix in range(nbx):
        for iy in range(nby):
            lines.append(f"{ix},{iy},{_fmt(xs[ix])},{_fmt(ys[iy])},"
                         f"{_fmt(fieldobj.phi[ix, iy])},{_fmt(fieldobj.heights[ix, iy])}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(summary: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
