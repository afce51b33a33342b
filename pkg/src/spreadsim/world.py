"""Domain geometry, spreading tools, prescribed kinematics, and seeding.

Coordinate frame: x is the spreading direction, y the periodic width
direction, z up. The substrate plane is z = 0. Layout along x: a short park
zone for the tool, the powder reservoir (piston floor below bed level), the
powder bed, then an open overflow run-out closed by an end wall.

Roller sign convention: angular velocity omega < 0 is counter-rotation, i.e.
the bottom surface point moves against the traverse direction. A surface
point at offset r from the roller axis moves with
``v = (v_traverse - omega * r_z, 0, omega * r_x)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InvalidInputError


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReservoirSpec:
    """Piston-fed powder reservoir dimensions."""

    length: float = 1.8e-3
    piston_travel: float = 0.65e-3
    seed_margin: float = 0.05e-3
    max_seed_height: float = 0.05

    def __post_init__(self):
        if self.length <= 0 or self.piston_travel <= 0:
            raise InvalidInputError("reservoir length and piston_travel must be > 0")


@dataclass(frozen=True)
class EvaluationWindow:
    """Metric window as offsets from the bed start."""

    start: float = 0.75e-3
    length: float = 1.5e-3


@dataclass(frozen=True)
class DomainSpec:
    """Full simulation domain along the spreading direction."""

    bed_length: float = 3e-3
    periodic_width: float = 0.5e-3
    gap_height: float = 100e-6
    reservoir: ReservoirSpec = field(default_factory=ReservoirSpec)
    window: EvaluationWindow = field(default_factory=EvaluationWindow)
    park_length: float = 5.5e-3
    overflow_length: float = 7e-3

    def __post_init__(self):
        if self.bed_length <= 0 or self.periodic_width <= 0:
            raise InvalidInputError("bed_length and periodic_width must be > 0")
        if self.gap_height <= 0:
            raise InvalidInputError("gap_height must be > 0")
        if self.window.start < 0 or self.window.length <= 0 or \
                self.window.start + self.window.length > self.bed_length + 1e-12:
            raise InvalidInputError("evaluation window must lie within the bed")

    @property
    def x_reservoir_start(self):
        return self.park_length

    @property
    def x_bed_start(self):
        return self.park_length + self.reservoir.length

    @property
    def x_bed_end(self):
        return self.x_bed_start + self.bed_length

    @property
    def x_domain_end(self):
        return self.x_bed_end + self.overflow_length

    @property
    def window_x0(self):
        return self.x_bed_start + self.window.start

    @property
    def window_x1(self):
        return self.window_x0 + self.window.length


# ---------------------------------------------------------------------------
# tools
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompliantCoating:
    """Reduced-order elastic surface layer on the roller core.

    Each surface node is a damped spring-mass anchored to its core-attached
    reference position; shear stiffness G A / t tangentially and E A / t
    radially, driven by powder contact tractions and by the inertial forcing
    of the prescribed core motion.
    """

    youngs_modulus: float = 5.53e6
    thickness: float = 1e-3
    poisson_ratio: float = 0.49
    density: float = 1200.0
    damping_ratio: float = 0.2

    def __post_init__(self):
        if self.youngs_modulus <= 0 or self.thickness <= 0 or self.density <= 0:
            raise InvalidInputError("coating modulus, thickness and density must be > 0")

    @property
    def shear_modulus(self):
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))


@dataclass(frozen=True)
class ToolGeometry:
    """Spreading tool: a polygonized roller or a sharp-edged blade."""

    kind: str = "roller"
    roller_diameter: float = 10e-3
    segment_count: int = 125
    blade_thickness: float = 2e-3
    blade_height: float = 3e-3
    edge_angle: float = 90.0
    coating: CompliantCoating | None = None

    def __post_init__(self):
        if self.kind not in ("roller", "blade"):
            raise InvalidInputError(f"unknown tool kind {self.kind!r}")
        if self.kind == "roller":
            if self.roller_diameter <= 0 or self.segment_count < 3:
                raise InvalidInputError("roller needs a positive diameter and >= 3 segments")
        else:
            if self.blade_thickness <= 0 or self.blade_height <= 0:
                raise InvalidInputError("blade needs positive thickness and height")
            if abs(self.edge_angle - 90.0) > 1e-9:
                raise InvalidInputError("only a 90 degree blade front edge is supported")
            if self.coating is not None:
                raise InvalidInputError("coatings are only supported on rollers")

    @property
    def roller_radius(self):
        return 0.5 * self.roller_diameter

    @property
    def chord_length(self):
        return 2.0 * self.roller_radius * math.sin(math.pi / self.segment_count)

    @property
    def polygon_max_deviation(self):
        """Radial sag of an inscribed chord midpoint below the true circle."""
        return self.roller_radius * (1.0 - math.cos(math.pi / self.segment_count))

    def check_resolution(self, d10: float):
        """Warn when the polygon facets deviate enough for particles to feel them."""
        if self.kind != "roller":
            return
        bound = (math.pi * self.roller_radius / self.segment_count) ** 2 / (2.0 * self.roller_radius)
        assert self.polygon_max_deviation < bound, "polygonization deviates beyond the chord bound"
        if self.polygon_max_deviation >= 0.5 * d10:
            warnings.warn(
                f"roller facet deviation {self.polygon_max_deviation:.2e} m is not small "
                f"against D10/2 = {0.5 * d10:.2e} m; increase segment_count",
                stacklevel=2)


@dataclass(frozen=True)
class ToolKinematics:
    """Traverse plus rotational motion program, active during the spread phase."""

    traverse_velocity: float = 25e-3
    mode: str = "constant_rotation"
    angular_velocity: float = -500.0 * 2.0 * math.pi / 60.0
    amplitude: float = 0.0
    frequency: float = 0.0

    def __post_init__(self):
        if self.traverse_velocity <= 0:
            raise InvalidInputError("traverse_velocity must be > 0")
        if self.mode not in ("constant_rotation", "oscillation", "none"):
            raise InvalidInputError(f"unknown kinematics mode {self.mode!r}")
        if self.mode == "oscillation" and (self.amplitude < 0 or self.frequency < 0):
            raise InvalidInputError("oscillation amplitude and frequency must be >= 0")

    def angular_velocity_at(self, t_local: float) -> float:
        if self.mode == "constant_rotation":
            return self.angular_velocity
        if self.mode == "oscillation":
            return oscillation_velocity(t_local, self.amplitude, self.frequency)
        return 0.0

    def angular_displacement_at(self, t_local: float) -> float:
        if self.mode == "constant_rotation":
            return self.angular_velocity * t_local
        if self.mode == "oscillation":
            return oscillation_displacement(t_local, self.amplitude, self.frequency)
        return 0.0

    @property
    def peak_angular_speed(self) -> float:
        if self.mode == "constant_rotation":
            return abs(self.angular_velocity)
        if self.mode == "oscillation":
            return self.amplitude * 2.0 * math.pi * self.frequency
        return 0.0


def oscillation_velocity(t, amplitude, frequency):
    """Angular velocity of the oscillation program, A 2 pi f cos(2 pi f t)."""
    return amplitude * 2.0 * math.pi * frequency * math.cos(2.0 * math.pi * frequency * t)


def oscillation_displacement(t, amplitude, frequency):
    """Angular displacement companion, A sin(2 pi f t)."""
    return amplitude * math.sin(2.0 * math.pi * frequency * t)


def equivalent_rpm(amplitude, frequency):
    """Constant rotation speed whose surface speed equals the oscillation peak."""
    return amplitude * frequency * 60.0


def frequency_for_equivalent_rpm(amplitude, rpm):
    """Invert equivalent_rpm for a given amplitude."""
    if amplitude <= 0:
        raise InvalidInputError("amplitude must be > 0 to derive a frequency")
    return rpm / (60.0 * amplitude)


def tool_surface_velocity(point, center, traverse_velocity, omega):
    """Rigid-body velocity of a roller surface point (world frame)."""
    p = np.asarray(point, dtype=float)
    c = np.asarray(center, dtype=float)
    rx, rz = p[0] - c[0], p[2] - c[2]
    return np.array([traverse_velocity - omega * rz, 0.0, omega * rx])


# ---------------------------------------------------------------------------
# compliant coating state
# ---------------------------------------------------------------------------

class CoatingState:
    """Per-node displacement state of the compliant roller surface.

    Displacements are stored in the corotating node basis (tangential t, radial
    r). The prescribed core motion enters as inertial forcing, so a coating too
    soft to drag its own surface mass through the programmed oscillation lags
    or overshoots, mirroring the stiffness study of the full model.
    """

    def __init__(self, coating: CompliantCoating, roller_radius, width, segment_count):
        self.coating = coating
        n = segment_count
        area = 2.0 * math.pi * roller_radius / n * width
        self.radius = roller_radius
        self.k_t = coating.shear_modulus * area / coating.thickness
        self.k_r = coating.youngs_modulus * area / coating.thickness
        self.mass = coating.density * area * coating.thickness
        self.c_t = 2.0 * coating.damping_ratio * math.sqrt(self.k_t * self.mass)
        self.c_r = 2.0 * coating.damping_ratio * math.sqrt(self.k_r * self.mass)
        self.u_t = np.zeros(n)
        self.v_t = np.zeros(n)
        self.u_r = np.zeros(n)
        self.v_r = np.zeros(n)
        self._warned = False

    def natural_frequency_t(self):
        return math.sqrt(self.k_t / self.mass)

    def step(self, traction_t, traction_r, alpha_accel, omega, dt):
        """Advance node springs by dt (symplectic Euler).

        alpha_accel is the prescribed angular acceleration (tangential base
        forcing R * alpha''), omega the current spin (centrifugal radial term).
        """
        force_t = -self.k_t * self.u_t - self.c_t * self.v_t + traction_t \
            - self.mass * self.radius * alpha_accel
        force_r = -self.k_r * self.u_r - self.c_r * self.v_r + traction_r \
            + self.mass * self.radius * omega * omega
        self.v_t += force_t / self.mass * dt
        self.v_r += force_r / self.mass * dt
        self.u_t += self.v_t * dt
        self.u_r += self.v_r * dt
        if not self._warned and np.max(np.abs(self.u_r)) > self.coating.thickness:
            warnings.warn("coating radial displacement exceeds layer thickness; "
                          "solution quality degraded", stacklevel=2)
            self._warned = True

    def surface_angle_offset(self, node=0):
        """Angular lead/lag of a surface node relative to the prescribed rotation."""
        return self.u_t[node] / self.radius


def compliant_coating_step(state: CoatingState, traction_t, traction_r,
                           alpha_accel, omega, dt):
    """Module-level wrapper so the coating update is callable without the class."""
    state.step(traction_t, traction_r, alpha_accel, omega, dt)
    return state


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------

SETTLE, FEED, SPREAD = "settle", "feed", "spread"


@dataclass
class SchedulePositions:
    piston_z: float
    piston_v: float
    tool_x: float
    tool_vx: float
    alpha: float
    omega: float
    alpha_accel: float


class Schedule:
    """Prescribed piston and tool motion, advanced phase by phase.

    Phase boundaries are event-driven (the settle termination is an energy
    criterion), so begin_feed/begin_spread record the transition times as the
    engine reaches them. A roller parks entirely left of the reservoir so the
    seeding rain falls clear of it; the spread phase then opens with an
    approach dash at approach_velocity, and rotation starts at the engage
    position just before the heap.
    """

    PARK_CLEARANCE = 0.3e-3

    def __init__(self, domain: DomainSpec, tool: ToolGeometry,
                 kinematics: ToolKinematics, piston_speed, spread_margin,
                 approach_velocity=None, engage_standoff=2.5e-3):
        self.domain = domain
        self.tool = tool
        self.kinematics = kinematics
        self.piston_speed = piston_speed
        if tool.kind == "roller":
            self.tool_x0 = domain.x_reservoir_start - tool.roller_radius \
                - self.PARK_CLEARANCE
            self.engage_x = max(domain.x_reservoir_start - engage_standoff,
                                self.tool_x0)
        else:
            self.tool_x0 = domain.x_reservoir_start - 0.05e-3
            self.engage_x = self.tool_x0
        self.tool_x_stop = domain.x_bed_end + spread_margin
        self.approach_velocity = approach_velocity or kinematics.traverse_velocity
        self.piston_z0 = -domain.reservoir.piston_travel
        self.t_feed = math.inf
        self.t_spread = math.inf
        self.phase = SETTLE

    def begin_feed(self, t):
        self.phase = FEED
        self.t_feed = t

    def begin_spread(self, t):
        self.phase = SPREAD
        self.t_spread = t

    @property
    def feed_duration(self):
        return self.domain.reservoir.piston_travel / self.piston_speed

    @property
    def approach_duration(self):
        return (self.engage_x - self.tool_x0) / self.approach_velocity

    @property
    def spread_duration(self):
        return self.approach_duration + \
            (self.tool_x_stop - self.engage_x) / self.kinematics.traverse_velocity

    def positions(self, t) -> SchedulePositions:
        # piston
        if t < self.t_feed:
            pz, pv = self.piston_z0, 0.0
        else:
            pz = self.piston_z0 + self.piston_speed * (t - self.t_feed)
            if pz >= 0.0:
                pz, pv = 0.0, 0.0
            else:
                pv = self.piston_speed
        # tool
        if t < self.t_spread:
            return SchedulePositions(pz, pv, self.tool_x0, 0.0, 0.0, 0.0, 0.0)
        tl = t - self.t_spread
        t_app = self.approach_duration
        if tl < t_app:
            x = self.tool_x0 + self.approach_velocity * tl
            return SchedulePositions(pz, pv, x, self.approach_velocity, 0.0, 0.0, 0.0)
        k = self.kinematics
        tk = tl - t_app   # rotation program time, zero at engagement
        x = self.engage_x + k.traverse_velocity * tk
        if x >= self.tool_x_stop:
            # traverse finished: tool parks past the bed, rotation stops
            alpha = k.angular_displacement_at(
                (self.tool_x_stop - self.engage_x) / k.traverse_velocity)
            return SchedulePositions(pz, pv, self.tool_x_stop, 0.0, alpha, 0.0, 0.0)
        alpha = k.angular_displacement_at(tk)
        omega = k.angular_velocity_at(tk)
        if k.mode == "oscillation":
            two_pi_f = 2.0 * math.pi * k.frequency
            alpha_accel = -k.amplitude * two_pi_f**2 * math.sin(two_pi_f * tk)
        else:
            alpha_accel = 0.0
        return SchedulePositions(pz, pv, x, k.traverse_velocity, alpha, omega, alpha_accel)


# ---------------------------------------------------------------------------
# seeding / world construction
# ---------------------------------------------------------------------------

def apply_periodic_wrap(positions, width):
    """Wrap y coordinates into [0, width)."""
    positions[:, 1] %= width
    return positions


def seed_positions(domain: DomainSpec, tool: ToolGeometry, tool_x0, diameters, seed):
    """Jittered-grid positions above the lowered piston, clear of the tool.

    Cell pitch tracks the largest sampled diameter so no two seeds overlap;
    cells that would intersect the parked tool now or after the piston lift
    are skipped. Raises CapacityError when the column would exceed the
    configured seed height limit or a whole layer is blocked by the tool.
    """
    n = len(diameters)
    if n == 0:
        return np.zeros((0, 3))
    d_max = float(np.max(diameters))
    cell = 1.05 * d_max
    jitter = 0.02 * cell
    res = domain.reservoir
    x_lo = domain.x_reservoir_start + res.seed_margin + 0.5 * cell
    x_hi = domain.x_bed_start - res.seed_margin - 0.5 * cell
    if x_hi <= x_lo:
        raise CapacityError("reservoir too short for the sampled particle sizes")
    nx = int((x_hi - x_lo) / cell) + 1
    ny = max(1, int(domain.periodic_width / cell))
    dy = domain.periodic_width / ny
    if dy < cell - 1e-15:
        ny = max(1, ny - 1)
        dy = domain.periodic_width / ny
    z0 = -res.piston_travel + 0.5 * cell + res.seed_margin
    rng = np.random.default_rng(seed)

    if tool.kind == "roller":
        cx = tool_x0
        cz = domain.gap_height + tool.roller_radius
        keep_out = tool.roller_radius + 2.0 * cell

        def blocked(x, z):
            for lift in (0.0, res.piston_travel):
                if math.hypot(x - cx, z + lift - cz) < keep_out:
                    return True
            return False
    else:
        x_max = tool_x0 + cell
        z_max = domain.gap_height + tool.blade_height + cell

        def blocked(x, z):
            return x < x_max + cell and z + res.piston_travel < z_max

    pos = np.empty((n, 3))
    placed = 0
    iz = 0
    while placed < n:
        z = z0 + iz * cell
        if z > res.max_seed_height:
            raise CapacityError(
                f"seed column exceeded max_seed_height={res.max_seed_height} m "
                f"after placing {placed}/{n} particles")
        placed_before = placed
        for iy in range(ny):
            for ix in range(nx):
                if placed >= n:
                    break
                x = x_lo + ix * cell
                if blocked(x, z):
                    continue
                j = rng.uniform(-jitter, jitter, size=3)
                pos[placed, 0] = x + j[0]
                pos[placed, 1] = (0.5 + iy) * dy + j[1]
                pos[placed, 2] = z + j[2]
                placed += 1
        if placed == placed_before:
            raise CapacityError(
                f"parked tool blocks all seed cells at z={z:.4g} m "
                f"({placed}/{n} placed); enlarge the reservoir or park zone")
        iz += 1
    apply_periodic_wrap(pos, domain.periodic_width)
    return pos


def build_world(domain: DomainSpec, tool: ToolGeometry, kinematics: ToolKinematics,
                diameters, density, seed, piston_speed, spread_margin,
                approach_velocity=None, engage_standoff=2.5e-3):
    """Assemble the initial simulation state: seeded powder, walls, parked tool."""
    from .engine import SimulationState  # deferred: engine imports this module

    diameters = np.asarray(diameters, dtype=float)
    schedule = Schedule(domain, tool, kinematics, piston_speed, spread_margin,
                        approach_velocity, engage_standoff)
    if diameters.size:
        tool.check_resolution(float(np.percentile(diameters, 10)))
    pos = seed_positions(domain, tool, schedule.tool_x0, diameters, seed)
    radius = 0.5 * diameters
    mass = 4.0 / 3.0 * math.pi * radius**3 * density
    inertia = 0.4 * mass * radius**2
    coating = None
    if tool.kind == "roller" and tool.coating is not None:
        coating = CoatingState(tool.coating, tool.roller_radius,
                               domain.periodic_width, tool.segment_count)
    return SimulationState(
        pos=pos, vel=np.zeros_like(pos), angvel=np.zeros_like(pos),
        radius=radius, mass=mass, inertia=inertia,
        domain=domain, tool=tool, kinematics=kinematics,
        schedule=schedule, coating=coating)
