"""Pairwise contact force and torque laws.

A contact between two spheres (or a sphere and a wall) produces four
contributions entering the momentum balance: a linear spring-dashpot normal
force, a history-spring Coulomb friction force, a constant-torque rolling
resistance, and a DMT-style adhesive force (constant pull-off in contact,
regularized van-der-Waals attraction across small gaps, zero beyond a cutoff).

All laws are implemented as scalar numba cores so the batched engine kernels
and the single-pair API below evaluate bit-identical arithmetic.

Sign conventions: the unit normal n points from body j toward body i; forces
returned act on body i (the caller applies Newton's third law for j);
attractive normal components are negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._nb import njit
from .errors import DegenerateGeometryError, InvalidInputError


@dataclass(frozen=True)
class InteractionParams:
    """Contact-law constants for one pair class (e.g. particle-particle).

    tangential_stiffness_ratio scales the friction spring relative to the
    normal penalty stiffness (1.0 reproduces the conventional equal-stiffness
    default). rolling_threshold is the relative angular speed below which the
    rolling torque is regularized to zero.
    """

    penalty_stiffness: float = 0.34
    restitution: float = 0.4
    friction_coeff: float = 0.4
    rolling_friction_coeff: float = 0.07
    surface_energy: float = 0.64e-3
    hamaker_constant: float = 40e-20
    adhesion_cutoff_ratio: float = 0.01
    tangential_stiffness_ratio: float = 1.0
    rolling_threshold: float = 1e-2

    def __post_init__(self):
        if self.penalty_stiffness <= 0.0:
            raise InvalidInputError("penalty_stiffness must be > 0")
        if not (0.0 < self.restitution <= 1.0):
            raise InvalidInputError("restitution must be in (0, 1]")
        for name in ("friction_coeff", "rolling_friction_coeff", "surface_energy",
                     "hamaker_constant", "adhesion_cutoff_ratio",
                     "tangential_stiffness_ratio", "rolling_threshold"):
            if getattr(self, name) < 0.0:
                raise InvalidInputError(f"{name} must be >= 0")

    @property
    def damping_beta(self) -> float:
        """Damping ratio giving the configured restitution for the LSD model."""
        ln_e = math.log(self.restitution)
        return abs(ln_e) / math.sqrt(math.pi**2 + ln_e**2)

    @property
    def tangential_stiffness(self) -> float:
        return self.tangential_stiffness_ratio * self.penalty_stiffness

    @property
    def pulloff_coefficient(self) -> float:
        """Pull-off force per unit effective radius: 4 pi gamma."""
        return 4.0 * math.pi * self.surface_energy

    @property
    def vdw_regularization_gap(self) -> float:
        """Gap below which the vdW branch saturates so F(0+) equals the pull-off force."""
        if self.surface_energy <= 0.0 or self.hamaker_constant <= 0.0:
            return math.inf
        return math.sqrt(self.hamaker_constant / (24.0 * math.pi * self.surface_energy))


@dataclass(frozen=True)
class InteractionSet:
    """Independent parameter sets per pair class.

    The substrate class covers the bed floor and end wall, the reservoir class
    the feed hardware (park floor, reservoir walls, piston); roller and blade
    classes apply to whichever tool is active.
    """

    particle_particle: InteractionParams = field(default_factory=InteractionParams)
    particle_substrate: InteractionParams = field(default_factory=InteractionParams)
    particle_reservoir: InteractionParams = field(default_factory=InteractionParams)
    particle_roller: InteractionParams = field(
        default_factory=lambda: InteractionParams(friction_coeff=0.8))
    particle_blade: InteractionParams = field(default_factory=InteractionParams)

    def tool_params(self, kind: str) -> InteractionParams:
        return self.particle_roller if kind == "roller" else self.particle_blade

    def max_stiffness(self) -> float:
        return max(p.penalty_stiffness for p in
                   (self.particle_particle, self.particle_substrate,
                    self.particle_reservoir, self.particle_roller,
                    self.particle_blade))


@dataclass
class ContactState:
    """Friction history for one active contact pair."""

    tangential_spring_displacement: np.ndarray = field(
        default_factory=lambda: np.zeros(3))
    pair: tuple = (0, 0)


@dataclass
class ParticleState:
    """Single rigid sphere: kinematics plus mass properties."""

    position: np.ndarray
    velocity: np.ndarray
    angular_velocity: np.ndarray
    radius: float
    mass: float
    inertia: float

    @classmethod
    def from_radius(cls, radius, density, position=(0.0, 0.0, 0.0),
                    velocity=(0.0, 0.0, 0.0), angular_velocity=(0.0, 0.0, 0.0)):
        mass = 4.0 / 3.0 * math.pi * radius**3 * density
        return cls(position=np.asarray(position, dtype=float),
                   velocity=np.asarray(velocity, dtype=float),
                   angular_velocity=np.asarray(angular_velocity, dtype=float),
                   radius=float(radius), mass=mass, inertia=0.4 * mass * radius**2)


@dataclass
class PlaneWall:
    """Infinite plane with outward normal and a rigid surface motion."""

    point: np.ndarray
    normal: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float)


@dataclass
class PairForceResult:
    """Forces and torques acting on particle i from one interaction."""

    normal_force: np.ndarray
    tangential_force: np.ndarray
    adhesive_force: np.ndarray
    rolling_torque: np.ndarray
    contact_point_offset: np.ndarray
    overlap: float
    contact_state: ContactState

    @property
    def total_force(self) -> np.ndarray:
        return self.normal_force + self.tangential_force + self.adhesive_force

    @property
    def torque(self) -> np.ndarray:
        return self.rolling_torque + np.cross(self.contact_point_offset,
                                              self.tangential_force)


def effective_pair_properties(r_i, r_j, m_i, m_j):
    """Reduced radius and mass of a pair; pass r_j = inf (or None) for a wall."""
    if r_i <= 0.0 or m_i <= 0.0:
        raise InvalidInputError("radius and mass must be positive")
    if r_j is None or m_j is None or math.isinf(r_j) or math.isinf(m_j):
        return float(r_i), float(m_i)
    if r_j <= 0.0 or m_j <= 0.0:
        raise InvalidInputError("radius and mass must be positive")
    return r_i * r_j / (r_i + r_j), m_i * m_j / (m_i + m_j)


# ---------------------------------------------------------------------------
# numba scalar cores (shared with the batched engine kernels)
# ---------------------------------------------------------------------------

@njit(cache=True)
def normal_force_scalar(overlap, overlap_rate, k, beta, m_eff):
    # Zero outside contact; inside, the unclamped spring-dashpot sum. The
    # dashpot may transmit a brief tensile tail while overlap > 0, which is
    # required for the closed-form damping to reproduce the configured
    # restitution exactly; no tension is transmitted once separated.
    if overlap <= 0.0:
        return 0.0
    c = 2.0 * beta * math.sqrt(m_eff * k)
    return k * overlap + c * overlap_rate


@njit(cache=True)
def adhesion_force_scalar(gap, r_eff, pulloff_coeff, hamaker, s_reg, cutoff_ratio):
    # gap < 0 means overlap. Constant pull-off in contact; A_H R / (6 s^2)
    # attraction outside with s floored at s_reg for continuity at gap = 0.
    f_pull = pulloff_coeff * r_eff
    if f_pull <= 0.0:
        return 0.0
    if gap <= 0.0:
        return -f_pull
    if gap > cutoff_ratio * r_eff:
        return 0.0
    if hamaker <= 0.0:
        return 0.0
    s = gap if gap > s_reg else s_reg
    return -hamaker * r_eff / (6.0 * s * s)


@njit(cache=True)
def pair_force_core(nx, ny, nz, overlap,
                    vix, viy, viz, wix, wiy, wiz,
                    vjx, vjy, vjz, wjx, wjy, wjz,
                    li, lj, r_eff, m_eff,
                    xx, xy, xz,
                    k, beta, mu, mu_r, k_t,
                    pulloff_coeff, hamaker, s_reg, cutoff_ratio, w_reg,
                    dt):
    """Evaluate all force laws for one interaction.

    n points from j to i; li/lj are the center-to-contact lever arms
    (lj = 0 for walls, whose full surface velocity arrives in vj). (xx, xy,
    xz) is the incoming tangential spring displacement, returned updated.
    Returns force on i, torque on i, torque on j, the new spring, and the
    scalar diagnostics (f_n, |f_t|, f_adh).
    """
    # contact-point velocity of i relative to j
    rvx = vix + (wiy * (-li * nz) - wiz * (-li * ny)) - vjx - (wjy * (lj * nz) - wjz * (lj * ny))
    rvy = viy + (wiz * (-li * nx) - wix * (-li * nz)) - vjy - (wjz * (lj * nx) - wjx * (lj * nz))
    rvz = viz + (wix * (-li * ny) - wiy * (-li * nx)) - vjz - (wjx * (lj * ny) - wjy * (lj * nx))
    vn = rvx * nx + rvy * ny + rvz * nz
    overlap_rate = -vn

    f_n = normal_force_scalar(overlap, overlap_rate, k, beta, m_eff)
    f_n_abs = abs(f_n)

    ftx = 0.0
    fty = 0.0
    ftz = 0.0
    ft_mag = 0.0
    tix = 0.0
    tiy = 0.0
    tiz = 0.0
    tjx = 0.0
    tjy = 0.0
    tjz = 0.0
    if overlap > 0.0:
        # integrate the friction spring in the current tangent plane
        vtx = rvx - vn * nx
        vty = rvy - vn * ny
        vtz = rvz - vn * nz
        xx += vtx * dt
        xy += vty * dt
        xz += vtz * dt
        xdn = xx * nx + xy * ny + xz * nz
        xx -= xdn * nx
        xy -= xdn * ny
        xz -= xdn * nz
        ftx = -k_t * xx
        fty = -k_t * xy
        ftz = -k_t * xz
        ft_mag = math.sqrt(ftx * ftx + fty * fty + ftz * ftz)
        cap = mu * f_n_abs
        if ft_mag > cap:
            scale = cap / ft_mag if ft_mag > 0.0 else 0.0
            ftx *= scale
            fty *= scale
            ftz *= scale
            if k_t > 0.0:
                xx = -ftx / k_t
                xy = -fty / k_t
                xz = -ftz / k_t
            ft_mag = cap
        # rolling resistance opposing the relative spin
        if mu_r > 0.0:
            wrx = wix - wjx
            wry = wiy - wjy
            wrz = wiz - wjz
            wmag = math.sqrt(wrx * wrx + wry * wry + wrz * wrz)
            if wmag > w_reg:
                tr = mu_r * r_eff * f_n_abs / wmag
                tix -= tr * wrx
                tiy -= tr * wry
                tiz -= tr * wrz
                tjx += tr * wrx
                tjy += tr * wry
                tjz += tr * wrz
    else:
        xx = 0.0
        xy = 0.0
        xz = 0.0

    f_a = adhesion_force_scalar(-overlap, r_eff, pulloff_coeff, hamaker,
                                s_reg, cutoff_ratio)

    fx = (f_n + f_a) * nx + ftx
    fy = (f_n + f_a) * ny + fty
    fz = (f_n + f_a) * nz + ftz
    # friction torque: r_CG x f_t on each body
    tix += (-li) * (ny * ftz - nz * fty)
    tiy += (-li) * (nz * ftx - nx * ftz)
    tiz += (-li) * (nx * fty - ny * ftx)
    tjx += lj * (ny * (-ftz) - nz * (-fty))
    tjy += lj * (nz * (-ftx) - nx * (-ftz))
    tjz += lj * (nx * (-fty) - ny * (-ftx))
    return (fx, fy, fz, tix, tiy, tiz, tjx, tjy, tjz,
            xx, xy, xz, f_n, ft_mag, f_a)


# ---------------------------------------------------------------------------
# single-interaction API
# ---------------------------------------------------------------------------

def normal_contact_force(overlap, overlap_rate, params: InteractionParams,
                         r_eff, m_eff):
    """Spring-dashpot normal force along the contact normal (scalar)."""
    return normal_force_scalar(overlap, overlap_rate, params.penalty_stiffness,
                               params.damping_beta, m_eff)


def adhesion_force(gap, r_eff, params: InteractionParams):
    """Attractive (<= 0) DMT force for a given surface gap (negative = overlap)."""
    return adhesion_force_scalar(gap, r_eff, params.pulloff_coefficient,
                                 params.hamaker_constant,
                                 params.vdw_regularization_gap,
                                 params.adhesion_cutoff_ratio)


def tangential_friction_force(rel_tangential_velocity, contact_state: ContactState,
                              normal_force_mag, params: InteractionParams, dt):
    """Advance the friction spring by dt and return (force vector, new state)."""
    v_t = np.asarray(rel_tangential_velocity, dtype=float)
    xi = contact_state.tangential_spring_displacement + v_t * dt
    k_t = params.tangential_stiffness
    f_t = -k_t * xi
    cap = params.friction_coeff * abs(normal_force_mag)
    mag = float(np.linalg.norm(f_t))
    if mag > cap:
        f_t *= cap / mag if mag > 0.0 else 0.0
        xi = -f_t / k_t if k_t > 0.0 else xi
    return f_t, ContactState(tangential_spring_displacement=xi,
                             pair=contact_state.pair)


def rolling_resistance_torque(rel_angular_velocity, normal_force_mag, r_eff,
                              params: InteractionParams):
    """Constant-torque rolling resistance opposing the relative spin."""
    w = np.asarray(rel_angular_velocity, dtype=float)
    mag = float(np.linalg.norm(w))
    if mag <= params.rolling_threshold or params.rolling_friction_coeff == 0.0:
        return np.zeros(3)
    return -params.rolling_friction_coeff * r_eff * abs(normal_force_mag) * w / mag


def assemble_pair(particle_i: ParticleState, particle_j_or_wall, params: InteractionParams,
                  contact_state: ContactState | None = None, dt: float = 0.0) -> PairForceResult:
    """Full force/torque assembly for one sphere-sphere or sphere-wall pair."""
    if contact_state is None:
        contact_state = ContactState()
    p_i = particle_i
    if isinstance(particle_j_or_wall, PlaneWall):
        wall = particle_j_or_wall
        n = wall.normal
        dist = float(np.dot(p_i.position - wall.point, n))
        overlap = p_i.radius - dist
        r_eff, m_eff = p_i.radius, p_i.mass
        li = p_i.radius - 0.5 * overlap if overlap > 0.0 else p_i.radius
        lj = 0.0
        v_j = wall.velocity
        w_j = wall.angular_velocity
    else:
        p_j = particle_j_or_wall
        d_vec = p_i.position - p_j.position
        dist = float(np.linalg.norm(d_vec))
        if dist == 0.0:
            raise DegenerateGeometryError("coincident particle centers")
        n = d_vec / dist
        overlap = p_i.radius + p_j.radius - dist
        r_eff, m_eff = effective_pair_properties(p_i.radius, p_j.radius,
                                                 p_i.mass, p_j.mass)
        li = p_i.radius - 0.5 * overlap if overlap > 0.0 else p_i.radius
        lj = p_j.radius - 0.5 * overlap if overlap > 0.0 else p_j.radius
        v_j = p_j.velocity
        w_j = p_j.angular_velocity

    xi = contact_state.tangential_spring_displacement
    out = pair_force_core(
        n[0], n[1], n[2], overlap,
        p_i.velocity[0], p_i.velocity[1], p_i.velocity[2],
        p_i.angular_velocity[0], p_i.angular_velocity[1], p_i.angular_velocity[2],
        v_j[0], v_j[1], v_j[2], w_j[0], w_j[1], w_j[2],
        li, lj, r_eff, m_eff,
        xi[0], xi[1], xi[2],
        params.penalty_stiffness, params.damping_beta, params.friction_coeff,
        params.rolling_friction_coeff, params.tangential_stiffness,
        params.pulloff_coefficient, params.hamaker_constant,
        params.vdw_regularization_gap, params.adhesion_cutoff_ratio,
        params.rolling_threshold, dt)
    (fx, fy, fz, tix, tiy, tiz, _tjx, _tjy, _tjz,
     xx, xy, xz, f_n, _ft_mag, f_a) = out
    f_total = np.array([fx, fy, fz])
    f_normal = f_n * n
    f_adh = f_a * n
    f_tan = f_total - f_normal - f_adh
    r_cg = -li * n
    torque_i = np.array([tix, tiy, tiz])
    rolling = torque_i - np.cross(r_cg, f_tan)
    new_state = ContactState(tangential_spring_displacement=np.array([xx, xy, xz]),
                             pair=contact_state.pair)
    return PairForceResult(normal_force=f_normal, tangential_force=f_tan,
                           adhesive_force=f_adh, rolling_torque=rolling,
                           contact_point_offset=r_cg, overlap=overlap,
                           contact_state=new_state)
