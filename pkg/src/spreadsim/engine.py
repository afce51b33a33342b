"""Neighbor search, explicit time integration, and phase orchestration.

Translation uses velocity Verlet; angular velocity an explicit Euler update
(spheres have isotropic inertia, so orientation is not integrated). One force
evaluation per step sees the drifted positions and half-kicked velocities.

Deterministic mode (default) evaluates pair forces in canonical sorted pair
order with a serial reduction, so results are bit-identical for any worker
count. The opt-in fast mode trades that guarantee for a chunked reduction.
"""
from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._nb import resolve_workers, set_num_threads
from .errors import InvalidInputError, NumericalFaultError, PhaseTimeoutError
from .mechanics import InteractionSet
from .world import (SETTLE, FEED, SPREAD, CoatingState, DomainSpec, Schedule,
                    ToolGeometry, ToolKinematics, apply_periodic_wrap)

logger = logging.getLogger("spreadsim")

Z_HIGH = 0.05   # top of the lateral confinement walls (m)


@dataclass
class CellGrid:
    """Linked-cell broadphase parameters."""

    cell_size: float
    cutoff_ratio: float
    skin: float
    width: float
    periodic_y: bool = True


@dataclass
class SimulationState:
    """Struct-of-arrays particle state plus world bindings and contact tables."""

    pos: np.ndarray
    vel: np.ndarray
    angvel: np.ndarray
    radius: np.ndarray
    mass: np.ndarray
    inertia: np.ndarray
    domain: DomainSpec
    tool: ToolGeometry
    kinematics: ToolKinematics
    schedule: Schedule
    coating: CoatingState | None = None
    params: InteractionSet | None = None
    time: float = 0.0
    step_count: int = 0
    # contact bookkeeping (managed by step)
    pair_i: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    pair_j: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    pair_xi: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    wall_xi: np.ndarray | None = None
    _grid: CellGrid | None = None
    _pos_ref: np.ndarray | None = None
    _ws: dict = field(default_factory=dict)
    _accel: np.ndarray | None = None
    _torque: np.ndarray | None = None
    gravity: float = 9.8
    fast_reduction: bool = False

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    def bind(self, params: InteractionSet, gravity=9.8, fast_reduction=False):
        self.params = params
        self.gravity = gravity
        self.fast_reduction = fast_reduction
        return self

    def kinetic_energy(self) -> float:
        """Translational plus rotational kinetic energy."""
        ke = 0.5 * float(np.sum(self.mass * np.sum(self.vel**2, axis=1)))
        ke += 0.5 * float(np.sum(self.inertia * np.sum(self.angvel**2, axis=1)))
        return ke

    def momentum(self) -> np.ndarray:
        return (self.mass[:, None] * self.vel).sum(axis=0)


def critical_timestep(state: SimulationState, params: InteractionSet | None = None,
                      safety_factor: float = 0.2) -> float:
    """Stable explicit step: safety_factor * sqrt(m_min / k_max)."""
    if state.n == 0:
        raise InvalidInputError("critical_timestep needs at least one particle")
    params = params or state.params
    if params is None:
        raise InvalidInputError("no interaction parameters bound to the state")
    m_min = float(np.min(state.mass))
    return safety_factor * math.sqrt(m_min / params.max_stiffness())


def make_cell_grid(state: SimulationState, skin: float | None = None) -> CellGrid:
    cutoff = state.params.particle_particle.adhesion_cutoff_ratio if state.params else 0.01
    d_max = 2.0 * float(np.max(state.radius)) if state.n else 1e-4
    if skin is None:
        skin = 0.15 * d_max
    cell = d_max * (1.0 + cutoff) + skin
    return CellGrid(cell_size=cell, cutoff_ratio=cutoff, skin=skin,
                    width=state.domain.periodic_width)


def build_neighbor_list(state: SimulationState, grid: CellGrid):
    """Candidate pairs (sorted canonically), a superset of all interacting pairs."""
    cap = max(64, 24 * state.n)
    while True:
        pi = np.empty(cap, dtype=np.int64)
        pj = np.empty(cap, dtype=np.int64)
        m = kernels.build_pairs(state.pos, state.radius, grid.width, grid.cell_size,
                                grid.cutoff_ratio, grid.skin, pi, pj)
        if m >= 0:
            break
        cap *= 2
    pi, pj = pi[:m], pj[:m]
    order = np.lexsort((pj, pi))
    return pi[order], pj[order]


def _refresh_neighbors(state: SimulationState):
    grid = state._grid or make_cell_grid(state)
    state._grid = grid
    pi, pj = build_neighbor_list(state, grid)
    xi = np.zeros((pi.size, 3))
    if state.pair_i.size:
        kernels.merge_springs(state.pair_i, state.pair_j, state.pair_xi, pi, pj, xi)
    state.pair_i, state.pair_j, state.pair_xi = pi, pj, xi
    state._pos_ref = state.pos.copy()
    ws = state._ws
    m = pi.size
    if ws.get("pair_cap", -1) < m:
        cap = int(m * 1.3) + 64
        ws["pair_cap"] = cap
        ws["f_pair"] = np.empty((cap, 3))
        ws["ti_pair"] = np.empty((cap, 3))
        ws["tj_pair"] = np.empty((cap, 3))
        ws["fn_pair"] = np.empty(cap)
        ws["ft_pair"] = np.empty(cap)
        ws["active"] = np.empty(cap, dtype=np.int8)


def _ensure_workspace(state: SimulationState):
    ws = state._ws
    n = state.n
    if ws.get("n") != n:
        ws["n"] = n
        ws["force"] = np.zeros((n, 3))
        ws["tool_node"] = np.full(n, -1, dtype=np.int64)
        ws["tool_ft"] = np.zeros(n)
        ws["tool_fr"] = np.zeros(n)
        nseg = state.tool.segment_count if state.tool.kind == "roller" else 1
        ws["traction_t"] = np.zeros(nseg)
        ws["traction_r"] = np.zeros(nseg)
        ws["empty"] = np.zeros(0)
    if state.wall_xi is None or state.wall_xi.shape[0] != n:
        state.wall_xi = np.zeros((n, kernels.N_WALL_BODIES, 3))
    if state._accel is None or state._accel.shape[0] != n:
        state._accel = np.zeros((n, 3))
        state._torque = np.zeros((n, 3))


def _params_arrays(state: SimulationState):
    """Per-class kernel arrays: 0 particle, 1 substrate, 2 reservoir, 3 tool."""
    ps = state.params
    classes = (ps.particle_particle, ps.particle_substrate, ps.particle_reservoir,
               ps.tool_params(state.tool.kind))
    pack = {}
    for name, get in (
            ("k", lambda p: p.penalty_stiffness),
            ("beta", lambda p: p.damping_beta),
            ("mu", lambda p: p.friction_coeff),
            ("mur", lambda p: p.rolling_friction_coeff),
            ("kt", lambda p: p.tangential_stiffness),
            ("pc", lambda p: p.pulloff_coefficient),
            ("ah", lambda p: p.hamaker_constant),
            ("sreg", lambda p: p.vdw_regularization_gap),
            ("cutr", lambda p: p.adhesion_cutoff_ratio),
            ("wreg", lambda p: p.rolling_threshold)):
        pack[name] = np.array([get(p) for p in classes])
    # body -> class: park floor/back/left/right/piston reservoir, bed/end substrate, tool
    pack["body_class"] = np.array([2, 2, 2, 2, 2, 1, 1, 3], dtype=np.int64)
    return pack


def compute_forces(state: SimulationState, t: float):
    """Evaluate all forces/torques at the current positions and velocities."""
    ws = state._ws
    n = state.n
    force = ws["force"]
    force[:] = 0.0
    torque = state._torque
    torque[:] = 0.0
    if n == 0:
        return
    if "params" not in ws:
        ws["params"] = _params_arrays(state)
    pp = state.params.particle_particle
    pk = ws["params"]
    m = state.pair_i.size
    dom = state.domain
    sched = state.schedule.positions(t)

    if m:
        kernels.pair_forces(
            state.pos, state.vel, state.angvel, state.radius, state.mass,
            state.pair_i, state.pair_j, state.pair_xi, dom.periodic_width,
            pp.penalty_stiffness, pp.damping_beta, pp.friction_coeff,
            pp.rolling_friction_coeff, pp.tangential_stiffness,
            pp.pulloff_coefficient, pp.hamaker_constant,
            pp.vdw_regularization_gap, pp.adhesion_cutoff_ratio,
            pp.rolling_threshold, ws["dt"],
            ws["f_pair"][:m], ws["ti_pair"][:m], ws["tj_pair"][:m],
            ws["fn_pair"][:m], ws["ft_pair"][:m], ws["active"][:m])
        if state.fast_reduction:
            nchunk = ws.get("nchunk", 4)
            fbuf = ws.get("fbuf")
            if fbuf is None or fbuf.shape[1] != n:
                fbuf = np.zeros((nchunk, n, 3))
                tbuf = np.zeros((nchunk, n, 3))
                ws["fbuf"], ws["tbuf"] = fbuf, tbuf
            ws["fbuf"][:] = 0.0
            ws["tbuf"][:] = 0.0
            kernels.scatter_pairs_chunked(
                state.pair_i, state.pair_j, ws["f_pair"][:m], ws["ti_pair"][:m],
                ws["tj_pair"][:m], force, torque, ws["fbuf"], ws["tbuf"])
        else:
            kernels.scatter_pairs(state.pair_i, state.pair_j, ws["f_pair"][:m],
                                  ws["ti_pair"][:m], ws["tj_pair"][:m], force, torque)

    # walls and tool
    tool = state.tool
    if tool.kind == "roller":
        tool_kind = kernels.TOOL_ROLLER
        tool_cz = dom.gap_height + tool.roller_radius
        tool_r = tool.roller_radius
        nseg = tool.segment_count
    else:
        tool_kind = kernels.TOOL_BLADE
        tool_cz = 0.0
        tool_r = 0.0
        nseg = 1
    coat = state.coating
    coat_on = 1 if coat is not None else 0
    empty = ws["empty"]
    kernels.wall_forces(
        state.pos, state.vel, state.angvel, state.radius, state.mass, state.wall_xi,
        dom.x_reservoir_start, dom.x_bed_start, dom.x_domain_end,
        -dom.reservoir.piston_travel - 1e-4, Z_HIGH,
        sched.piston_z, sched.piston_v,
        tool_kind, sched.tool_x, sched.tool_vx, tool_cz, tool_r, nseg,
        sched.alpha, sched.omega,
        tool.blade_thickness, tool.blade_height, dom.gap_height,
        coat_on,
        coat.u_r if coat else empty, coat.u_t if coat else empty,
        coat.v_r if coat else empty, coat.v_t if coat else empty,
        pk["body_class"], pk["k"], pk["beta"], pk["mu"], pk["mur"], pk["kt"],
        pk["pc"], pk["ah"], pk["sreg"], pk["cutr"], pk["wreg"],
        ws["dt"], force, torque, ws["tool_node"], ws["tool_ft"], ws["tool_fr"])

    if coat is not None:
        kernels.accumulate_tool_tractions(ws["tool_node"], ws["tool_ft"],
                                          ws["tool_fr"], ws["traction_t"],
                                          ws["traction_r"])
        coat.step(ws["traction_t"], ws["traction_r"], sched.alpha_accel,
                  sched.omega, ws["dt"])

    accel = state._accel
    np.divide(force, state.mass[:, None], out=accel)
    accel[:, 2] -= state.gravity


def prepare_step(state: SimulationState, dt: float, workers: int = 0):
    """Allocate workspaces, set worker threads, and prime the first force pass."""
    if state.params is None:
        state.bind(InteractionSet())
    set_num_threads(resolve_workers(workers))
    _ensure_workspace(state)
    state._ws["dt"] = dt
    if state.n:
        _refresh_neighbors(state)
    compute_forces(state, state.time)


def step(state: SimulationState, dt: float) -> SimulationState:
    """Advance one explicit step (velocity Verlet + Euler for spin)."""
    ws = state._ws
    if "dt" not in ws or ws["dt"] != dt:
        prepare_step(state, dt)
    n = state.n
    t_new = state.time + dt
    if n:
        accel = state._accel
        state.vel += 0.5 * dt * accel
        state.pos += dt * state.vel
        apply_periodic_wrap(state.pos, state.domain.periodic_width)
        skin = state._grid.skin if state._grid else 0.0
        if (state._pos_ref is None or
                kernels.max_displacement_sq(state.pos, state._pos_ref) > (0.45 * skin)**2):
            _refresh_neighbors(state)
    compute_forces(state, t_new)
    if n:
        state.vel += 0.5 * dt * state._accel
        state.angvel += dt * state._torque / state.inertia[:, None]
    state.time = t_new
    state.step_count += 1
    return state


def _audit(state: SimulationState):
    code = kernels.audit_arrays(state.pos, state.vel, state.domain.x_domain_end,
                                -state.domain.reservoir.piston_travel - 1e-4)
    if code == 1:
        raise NumericalFaultError(f"NaN/Inf in state arrays at step {state.step_count}")
    if code == 2:
        raise NumericalFaultError(f"particle escaped the domain at step {state.step_count}")


@dataclass
class PhaseControls:
    """Termination thresholds and budgets shared by the phases."""

    settle_energy_threshold: float = 1e-13
    settle_hold_steps: int = 1000
    settle_check_every: int = 25
    tail_time: float = 12e-3
    step_budget: int = 4_000_000
    audit_every: int = 2000
    log_every: int = 20000


def run_phase(state: SimulationState, phase: str, dt: float,
              controls: PhaseControls | None = None,
              on_step=None, on_step_every: int = 0) -> SimulationState:
    """Step until the phase termination criterion is met.

    settle: mean kinetic energy per particle below threshold for a hold
    window; feed: piston reaches the bed plane; spread: tool past its stop
    position plus a settle tail.
    """
    controls = controls or PhaseControls()
    sched = state.schedule
    t0 = _time.perf_counter()
    steps0 = state.step_count

    def tick(it):
        _maybe_log(state, phase, it, controls, t0, steps0)
        if it % controls.audit_every == 0:
            _audit(state)
        if on_step is not None and on_step_every > 0 and \
                state.step_count % on_step_every == 0:
            on_step(state)

    if phase == SETTLE:
        sched.phase = SETTLE
        if state.n == 0:
            return state
        # the energy criterion only arms after the seeded column has had time
        # to rain down; otherwise the slow initial free fall reads as settled
        drop = max(float(np.max(state.pos[:, 2])) - state.schedule.piston_z0, 0.0)
        t_arm = state.time + 1.2 * math.sqrt(2.0 * drop / max(state.gravity, 1e-12)) \
            if state.gravity > 0 else state.time
        held = 0
        need = max(1, controls.settle_hold_steps // controls.settle_check_every)
        for it in range(controls.step_budget):
            step(state, dt)
            if it % controls.settle_check_every == 0 and state.time >= t_arm:
                ke = state.kinetic_energy() / state.n
                held = held + 1 if ke < controls.settle_energy_threshold else 0
                if held >= need:
                    break
            tick(it)
        else:
            raise PhaseTimeoutError(f"settle exceeded {controls.step_budget} steps", state)
    elif phase == FEED:
        sched.begin_feed(state.time)
        t_end = state.time + sched.feed_duration
        budget = controls.step_budget
        it = 0
        while state.time < t_end:
            if it >= budget:
                raise PhaseTimeoutError(f"feed exceeded {budget} steps", state)
            step(state, dt)
            tick(it)
            it += 1
    elif phase == SPREAD:
        sched.begin_spread(state.time)
        t_end = state.time + sched.spread_duration + controls.tail_time
        budget = controls.step_budget
        it = 0
        while state.time < t_end:
            if it >= budget:
                raise PhaseTimeoutError(f"spread exceeded {budget} steps", state)
            step(state, dt)
            tick(it)
            it += 1
    else:
        raise InvalidInputError(f"unknown phase {phase!r}")
    _audit(state)
    dt_wall = _time.perf_counter() - t0
    rate = (state.step_count - steps0) * max(state.n, 1) / max(dt_wall, 1e-9)
    logger.info("phase=%s done steps=%d t=%.6f wall=%.1fs rate=%.2e particle-steps/s",
                phase, state.step_count - steps0, state.time, dt_wall, rate)
    return state


def _maybe_log(state, phase, it, controls, t0, steps0):
    if it and it % controls.log_every == 0:
        vmax = float(np.max(np.abs(state.vel))) if state.n else 0.0
        contacts = int(np.sum(state._ws["active"][:state.pair_i.size] == 1)) \
            if state.pair_i.size else 0
        rate = (state.step_count - steps0) * max(state.n, 1) / max(
            _time.perf_counter() - t0, 1e-9)
        logger.info("phase=%s step=%d t=%.6f max_v=%.3e contacts=%d rate=%.2e",
                    phase, state.step_count, state.time, vmax, contacts, rate)


def reset_transients(state: SimulationState):
    """Zero friction history and coating deflection.

    Applied at the settle/feed -> spread handoff so a run resumed from a
    prepared-state cache is bit-identical to an uncached run: the quasi-static
    pile reloads its contact springs within a few steps either way.
    """
    state.pair_xi[:] = 0.0
    if state.wall_xi is not None:
        state.wall_xi[:] = 0.0
    if state.coating is not None:
        for arr in (state.coating.u_t, state.coating.v_t,
                    state.coating.u_r, state.coating.v_r):
            arr[:] = 0.0


def mechanical_energy(state: SimulationState) -> dict:
    """Energy audit: kinetic, gravitational, and stored contact-spring energy.

    Wall spring energy covers the flat walls and piston (not the tool), which
    is sufficient for settling scenes where the tool is parked clear.
    """
    pp = state.params.particle_particle
    ke = 0.5 * float(np.sum(state.mass * np.sum(state.vel**2, axis=1)))
    rot = 0.5 * float(np.sum(state.inertia * np.sum(state.angvel**2, axis=1)))
    pe = state.gravity * float(np.sum(state.mass * state.pos[:, 2]))
    elastic = kernels.pair_elastic_energy(
        state.pos, state.radius, state.pair_i, state.pair_j, state.pair_xi,
        state.domain.periodic_width, pp.penalty_stiffness, pp.tangential_stiffness)
    # wall normal springs (piecewise floor, faces, piston) + tangential history
    dom = state.domain
    sched = state.schedule.positions(state.time)
    x, z, r = state.pos[:, 0], state.pos[:, 2], state.radius
    cls = state.params
    for body, (ax, az, bx, bz), prm in (
            (0, (0.0, 0.0, dom.x_reservoir_start, 0.0), cls.particle_reservoir),
            (2, (dom.x_reservoir_start, -dom.reservoir.piston_travel - 1e-4,
                 dom.x_reservoir_start, 0.0), cls.particle_reservoir),
            (3, (dom.x_bed_start, -dom.reservoir.piston_travel - 1e-4,
                 dom.x_bed_start, 0.0), cls.particle_reservoir),
            (4, (dom.x_reservoir_start, sched.piston_z, dom.x_bed_start,
                 sched.piston_z), cls.particle_reservoir),
            (5, (dom.x_bed_start, 0.0, dom.x_domain_end, 0.0), cls.particle_substrate)):
        abx, abz = bx - ax, bz - az
        denom = abx * abx + abz * abz
        t = np.clip(((x - ax) * abx + (z - az) * abz) / denom, 0.0, 1.0)
        qx, qz = ax + t * abx, az + t * abz
        dist = np.hypot(x - qx, z - qz)
        overlap = np.maximum(r - dist, 0.0)
        elastic += 0.5 * prm.penalty_stiffness * float(np.sum(overlap**2))
    if state.wall_xi is not None:
        for body, prm in ((0, cls.particle_reservoir), (1, cls.particle_reservoir),
                          (2, cls.particle_reservoir), (3, cls.particle_reservoir),
                          (4, cls.particle_reservoir), (5, cls.particle_substrate),
                          (6, cls.particle_substrate),
                          (7, cls.tool_params(state.tool.kind))):
            xi = state.wall_xi[:, body, :]
            elastic += 0.5 * prm.tangential_stiffness * float(np.sum(xi**2))
    return {"kinetic": ke, "rotational": rot, "gravitational": pe,
            "elastic": float(elastic),
            "total": ke + rot + pe + float(elastic)}


# ---------------------------------------------------------------------------
# scenario orchestration
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    """Final state, layer metrics, and provenance of one scenario run."""

    state: SimulationState
    field: object
    summary: dict
    provenance: dict
    timings: dict


def scenario_state(config) -> SimulationState:
    """Sample the powder and assemble the initial world for a scenario."""
    from .powder import sample_diameters
    from .world import build_world

    spec = config.powder.to_spec()
    if config.powder.count:
        diameters = sample_diameters(spec, config.powder.count, config.engine.seed)
    else:
        diameters = np.zeros(0)
    state = build_world(config.domain, config.tool, config.kinematics, diameters,
                        spec.density, config.engine.seed + 1,
                        config.engine.piston_speed, config.engine.spread_margin,
                        config.engine.approach_velocity,
                        config.engine.engage_standoff)
    state.bind(config.interaction, gravity=config.engine.gravity,
               fast_reduction=not config.engine.deterministic)
    return state


def _phase_controls(config) -> PhaseControls:
    e = config.engine
    return PhaseControls(
        settle_energy_threshold=e.settle_energy_threshold,
        settle_hold_steps=e.settle_hold_steps,
        settle_check_every=e.settle_check_every,
        tail_time=e.tail_time, step_budget=e.step_budget,
        log_every=e.log_every)


def run_scenario(config, output_dir=None, prepared_dir=None) -> RunResult:
    """Execute settle -> feed -> spread and evaluate the layer metric.

    prepared_dir optionally caches the post-feed state keyed by the
    prepare-relevant part of the configuration, so kinematics/substrate
    studies skip the shared settle and feed phases.
    """
    from pathlib import Path

    from . import io as sio
    from . import metrics as smetrics

    t_wall0 = _time.perf_counter()
    chash = sio.config_hash(config)
    phash = sio.prepare_hash(config)
    controls = _phase_controls(config)
    timings = {}

    state = scenario_state(config)
    if state.n:
        dt = critical_timestep(state, config.interaction,
                               config.engine.dt_safety_factor)
    else:
        dt = 1e-5
    prepare_file = None
    loaded = False
    if prepared_dir is not None:
        prepare_file = Path(prepared_dir) / f"{phash}.snap"
    if prepare_file is not None and prepare_file.exists():
        snap = sio.read_snapshot(prepare_file)
        if snap.count == state.n:
            state.pos = np.ascontiguousarray(snap.pos)
            state.vel = np.ascontiguousarray(snap.vel)
            state.angvel = np.ascontiguousarray(snap.angvel)
            state.time = snap.time
            state.schedule.begin_feed(state.time - state.schedule.feed_duration)
            loaded = True
            logger.info("loaded prepared state %s (t=%.6f)", prepare_file.name, snap.time)
    prepare_step(state, dt, config.engine.workers)
    if not loaded:
        t0 = _time.perf_counter()
        run_phase(state, SETTLE, dt, controls)
        timings["settle_s"] = _time.perf_counter() - t0
        t0 = _time.perf_counter()
        run_phase(state, FEED, dt, controls)
        timings["feed_s"] = _time.perf_counter() - t0
        if prepare_file is not None:
            prepare_file.parent.mkdir(parents=True, exist_ok=True)
            tmp = prepare_file.with_suffix(".tmp")
            sio.write_snapshot(state, tmp, phash, config.engine.seed)
            tmp.replace(prepare_file)
    reset_transients(state)

    snapshot_cb = None
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if config.output.snapshot_every > 0:
            snapdir = out / "snapshots"
            snapdir.mkdir(exist_ok=True)

            def snapshot_cb(s):
                sio.write_snapshot(s, snapdir / f"step_{s.step_count:09d}.snap",
                                   chash, config.engine.seed)

    t0 = _time.perf_counter()
    run_phase(state, SPREAD, dt, controls,
              on_step=snapshot_cb, on_step_every=config.output.snapshot_every)
    timings["spread_s"] = _time.perf_counter() - t0

    field = smetrics.field_from_state(state, config.metrics.bin_size,
                                      config.metrics.voxel_size)
    phi_mean, phi_std = smetrics.summarize(field)
    provenance = {
        "config_hash": chash, "prepare_hash": phash,
        "seed": config.engine.seed, "version": __import__("spreadsim").__version__,
        "deterministic": config.engine.deterministic,
        "workers": config.engine.workers, "dt": dt,
    }
    timings["total_s"] = _time.perf_counter() - t_wall0
    summary = {
        "phi_mean": phi_mean, "phi_std": phi_std,
        "mean_height": field.mean_height,
        "no_layer": bool(field.mean_height < config.metrics.voxel_size),
        "particle_count": state.n, "steps": state.step_count,
        "sim_time": state.time,
        **{f"timing_{k}": v for k, v in timings.items()},
        **provenance,
    }
    if out is not None:
        sio.write_summary_json(summary, out / "summary.json")
        with open(out / "config.yaml", "w", encoding="utf-8") as fh:
            fh.write(sio.render_config(config))
        if config.output.write_field_csv:
            sio.write_field_csv(field, out / "field.csv", provenance)
        if config.output.write_final_snapshot:
            sio.write_snapshot(state, out / "final.snap", chash, config.engine.seed)
        if config.output.write_vtk:
            snap = sio.snapshot_from_state(state, chash, config.engine.seed)
            sio.export_visualization(snap, out / "particles.vtk",
                                     f"config_hash={chash}")
            sio.export_visualization(field, out / "field.vtk",
                                     f"config_hash={chash}")
    return RunResult(state=state, field=field, summary=summary,
                     provenance=provenance, timings=timings)
