"""Batched numba kernels for the engine hot loop.

Determinism contract: per-pair and per-particle parallel loops write only to
slots they own, so results are independent of the worker count; the scatter
that accumulates pair forces onto particles runs serially in canonical pair
order. The opt-in "fast" reduction accumulates into per-chunk buffers instead,
which makes results depend on the chunk count.

Wall bodies are indexed 0..7: park floor, back wall, reservoir left face,
reservoir right face, piston, bed floor, end wall, tool. All walls are 2D
segments in the x-z plane extruded along the periodic y direction.
"""
import math

import numpy as np

from ._nb import njit, prange
from .mechanics import pair_force_core

N_WALL_BODIES = 8
BODY_TOOL = 7
TOOL_NONE, TOOL_ROLLER, TOOL_BLADE = -1, 0, 1


# ---------------------------------------------------------------------------
# neighbor search
# ---------------------------------------------------------------------------

@njit(cache=True)
def build_pairs(pos, radius, width, cell, cutoff_ratio, skin, pi_out, pj_out):
    """Linked-cell candidate pair enumeration (serial, order-stable).

    Emits every unordered pair whose center distance is below
    (r_i + r_j) (1 + cutoff_ratio) + skin, minimum-imaged in y. Returns the
    pair count, or -1 when the output capacity is exhausted.
    """
    n = pos.shape[0]
    if n < 2:
        return 0
    xmin = pos[0, 0]
    xmax = pos[0, 0]
    zmin = pos[0, 2]
    zmax = pos[0, 2]
    for i in range(n):
        x = pos[i, 0]
        z = pos[i, 2]
        if x < xmin:
            xmin = x
        if x > xmax:
            xmax = x
        if z < zmin:
            zmin = z
        if z > zmax:
            zmax = z
    nx = int((xmax - xmin) / cell) + 1
    nz = int((zmax - zmin) / cell) + 1
    ny = int(width / cell)
    if ny < 3:
        ny = 1
    celly = width / ny

    cid = np.empty(n, dtype=np.int64)
    for i in range(n):
        ix = int((pos[i, 0] - xmin) / cell)
        if ix >= nx:
            ix = nx - 1
        iy = int(pos[i, 1] / celly)
        if iy >= ny:
            iy = ny - 1
        if iy < 0:
            iy = 0
        iz = int((pos[i, 2] - zmin) / cell)
        if iz >= nz:
            iz = nz - 1
        cid[i] = (iz * ny + iy) * nx + ix
    ncell = nx * ny * nz
    count = np.zeros(ncell + 1, dtype=np.int64)
    for i in range(n):
        count[cid[i] + 1] += 1
    for c in range(ncell):
        count[c + 1] += count[c]
    order = np.empty(n, dtype=np.int64)
    fill = count[:ncell].copy()
    for i in range(n):
        order[fill[cid[i]]] = i
        fill[cid[i]] += 1

    cap = pi_out.shape[0]
    m = 0
    half_y = 0.5 * width
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                c = (iz * ny + iy) * nx + ix
                a0 = count[c]
                a1 = count[c + 1]
                # within-cell pairs
                for a in range(a0, a1):
                    i = order[a]
                    for b in range(a + 1, a1):
                        j = order[b]
                        dx = pos[i, 0] - pos[j, 0]
                        dy = pos[i, 1] - pos[j, 1]
                        if dy > half_y:
                            dy -= width
                        elif dy < -half_y:
                            dy += width
                        dz = pos[i, 2] - pos[j, 2]
                        reach = (radius[i] + radius[j]) * (1.0 + cutoff_ratio) + skin
                        if dx * dx + dy * dy + dz * dz < reach * reach:
                            if m >= cap:
                                return -1
                            if i < j:
                                pi_out[m] = i
                                pj_out[m] = j
                            else:
                                pi_out[m] = j
                                pj_out[m] = i
                            m += 1
                # half-shell neighbors
                for off in range(13):
                    ox = _HALF_SHELL[off, 0]
                    oy = _HALF_SHELL[off, 1]
                    oz = _HALF_SHELL[off, 2]
                    jx = ix + ox
                    jz = iz + oz
                    if jx < 0 or jx >= nx or jz < 0 or jz >= nz:
                        continue
                    jy = iy + oy
                    if ny == 1:
                        if oy != 0:
                            continue
                        jy = 0
                    else:
                        if jy < 0:
                            jy += ny
                        elif jy >= ny:
                            jy -= ny
                    c2 = (jz * ny + jy) * nx + jx
                    b0 = count[c2]
                    b1 = count[c2 + 1]
                    for a in range(a0, a1):
                        i = order[a]
                        for b in range(b0, b1):
                            j = order[b]
                            dx = pos[i, 0] - pos[j, 0]
                            dy = pos[i, 1] - pos[j, 1]
                            if dy > half_y:
                                dy -= width
                            elif dy < -half_y:
                                dy += width
                            dz = pos[i, 2] - pos[j, 2]
                            reach = (radius[i] + radius[j]) * (1.0 + cutoff_ratio) + skin
                            if dx * dx + dy * dy + dz * dz < reach * reach:
                                if m >= cap:
                                    return -1
                                if i < j:
                                    pi_out[m] = i
                                    pj_out[m] = j
                                else:
                                    pi_out[m] = j
                                    pj_out[m] = i
                                m += 1
    return m


_HALF_SHELL = np.array([
    (1, 0, 0),
    (-1, 1, 0), (0, 1, 0), (1, 1, 0),
    (-1, -1, 1), (0, -1, 1), (1, -1, 1),
    (-1, 0, 1), (0, 0, 1), (1, 0, 1),
    (-1, 1, 1), (0, 1, 1), (1, 1, 1),
], dtype=np.int64)


@njit(cache=True)
def merge_springs(old_i, old_j, old_xi, new_i, new_j, new_xi):
    """Carry tangential springs from the old sorted pair list to the new one."""
    a = 0
    na = old_i.size
    for p in range(new_i.size):
        ni = new_i[p]
        nj = new_j[p]
        while a < na and (old_i[a] < ni or (old_i[a] == ni and old_j[a] < nj)):
            a += 1
        if a < na and old_i[a] == ni and old_j[a] == nj:
            new_xi[p, 0] = old_xi[a, 0]
            new_xi[p, 1] = old_xi[a, 1]
            new_xi[p, 2] = old_xi[a, 2]


@njit(cache=True)
def max_displacement_sq(pos, ref):
    best = 0.0
    for i in range(pos.shape[0]):
        dx = pos[i, 0] - ref[i, 0]
        dy = pos[i, 1] - ref[i, 1]
        dz = pos[i, 2] - ref[i, 2]
        d2 = dx * dx + dy * dy + dz * dz
        if d2 > best:
            best = d2
    return best


# ---------------------------------------------------------------------------
# pair forces
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def pair_forces(pos, vel, angvel, radius, mass, pair_i, pair_j, pair_xi, width,
                k, beta, mu, mu_r, k_t, pulloff_coeff, hamaker, s_reg,
                cutoff_ratio, w_reg, dt,
                f_out, ti_out, tj_out, fn_out, ft_out, active_out):
    """Evaluate particle-particle forces for every candidate pair."""
    half_y = 0.5 * width
    for p in prange(pair_i.size):
        i = pair_i[p]
        j = pair_j[p]
        dx = pos[i, 0] - pos[j, 0]
        dy = pos[i, 1] - pos[j, 1]
        if dy > half_y:
            dy -= width
        elif dy < -half_y:
            dy += width
        dz = pos[i, 2] - pos[j, 2]
        d2 = dx * dx + dy * dy + dz * dz
        ri = radius[i]
        rj = radius[j]
        r_eff = ri * rj / (ri + rj)
        reach = ri + rj + cutoff_ratio * r_eff
        if d2 >= reach * reach or d2 == 0.0:
            f_out[p, 0] = 0.0
            f_out[p, 1] = 0.0
            f_out[p, 2] = 0.0
            ti_out[p, 0] = 0.0
            ti_out[p, 1] = 0.0
            ti_out[p, 2] = 0.0
            tj_out[p, 0] = 0.0
            tj_out[p, 1] = 0.0
            tj_out[p, 2] = 0.0
            fn_out[p] = 0.0
            ft_out[p] = 0.0
            active_out[p] = 0
            pair_xi[p, 0] = 0.0
            pair_xi[p, 1] = 0.0
            pair_xi[p, 2] = 0.0
            continue
        d = math.sqrt(d2)
        nx = dx / d
        ny = dy / d
        nz = dz / d
        overlap = ri + rj - d
        if overlap > 0.0:
            li = ri - 0.5 * overlap
            lj = rj - 0.5 * overlap
        else:
            li = ri
            lj = rj
        m_eff = mass[i] * mass[j] / (mass[i] + mass[j])
        out = pair_force_core(
            nx, ny, nz, overlap,
            vel[i, 0], vel[i, 1], vel[i, 2],
            angvel[i, 0], angvel[i, 1], angvel[i, 2],
            vel[j, 0], vel[j, 1], vel[j, 2],
            angvel[j, 0], angvel[j, 1], angvel[j, 2],
            li, lj, r_eff, m_eff,
            pair_xi[p, 0], pair_xi[p, 1], pair_xi[p, 2],
            k, beta, mu, mu_r, k_t,
            pulloff_coeff, hamaker, s_reg, cutoff_ratio, w_reg, dt)
        f_out[p, 0] = out[0]
        f_out[p, 1] = out[1]
        f_out[p, 2] = out[2]
        ti_out[p, 0] = out[3]
        ti_out[p, 1] = out[4]
        ti_out[p, 2] = out[5]
        tj_out[p, 0] = out[6]
        tj_out[p, 1] = out[7]
        tj_out[p, 2] = out[8]
        pair_xi[p, 0] = out[9]
        pair_xi[p, 1] = out[10]
        pair_xi[p, 2] = out[11]
        fn_out[p] = out[12]
        ft_out[p] = out[13]
        active_out[p] = 1 if overlap > 0.0 else 0


@njit(cache=True)
def scatter_pairs(pair_i, pair_j, f, ti, tj, force, torque):
    """Serial Newton's-third-law accumulation in canonical pair order."""
    for p in range(pair_i.size):
        i = pair_i[p]
        j = pair_j[p]
        force[i, 0] += f[p, 0]
        force[i, 1] += f[p, 1]
        force[i, 2] += f[p, 2]
        force[j, 0] -= f[p, 0]
        force[j, 1] -= f[p, 1]
        force[j, 2] -= f[p, 2]
        torque[i, 0] += ti[p, 0]
        torque[i, 1] += ti[p, 1]
        torque[i, 2] += ti[p, 2]
        torque[j, 0] += tj[p, 0]
        torque[j, 1] += tj[p, 1]
        torque[j, 2] += tj[p, 2]


@njit(parallel=True, cache=True)
def scatter_pairs_chunked(pair_i, pair_j, f, ti, tj, force, torque, fbuf, tbuf):
    """Opt-in fast reduction: per-chunk buffers summed in chunk order.

    Results depend on the chunk count, so this path is excluded from the
    deterministic mode.
    """
    nchunk = fbuf.shape[0]
    m = pair_i.size
    step = (m + nchunk - 1) // nchunk
    for c in prange(nchunk):
        lo = c * step
        hi = min(lo + step, m)
        for p in range(lo, hi):
            i = pair_i[p]
            j = pair_j[p]
            for d in range(3):
                fbuf[c, i, d] += f[p, d]
                fbuf[c, j, d] -= f[p, d]
                tbuf[c, i, d] += ti[p, d]
                tbuf[c, j, d] += tj[p, d]
    for c in range(nchunk):
        for i in range(force.shape[0]):
            for d in range(3):
                force[i, d] += fbuf[c, i, d]
                torque[i, d] += tbuf[c, i, d]


# ---------------------------------------------------------------------------
# wall and tool forces
# ---------------------------------------------------------------------------

@njit(cache=True)
def _seg_closest(px, pz, ax, az, bx, bz):
    abx = bx - ax
    abz = bz - az
    denom = abx * abx + abz * abz
    if denom == 0.0:
        return ax, az
    t = ((px - ax) * abx + (pz - az) * abz) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return ax + t * abx, az + t * abz


@njit(parallel=True, cache=True)
def wall_forces(pos, vel, angvel, radius, mass, wall_xi,
                res_start, res_end, x_end, z_min, z_high,
                piston_z, piston_v,
                tool_kind, tool_x, tool_vx, tool_cz, tool_r, nseg, alpha, omega,
                blade_thickness, blade_height, gap_height,
                coat_on, coat_ur, coat_ut, coat_vr, coat_vt,
                body_class,
                k_arr, beta_arr, mu_arr, mur_arr, kt_arr,
                pc_arr, ah_arr, sreg_arr, cutr_arr, wreg_arr,
                dt, force, torque, tool_node, tool_ft, tool_fr):
    """Particle-wall contacts for the seven static/piston walls plus the tool.

    Accumulates directly into force/torque rows (one owner per row) and stages
    the single tool contact per particle for the coating traction pass.
    """
    n = pos.shape[0]
    dphi = 2.0 * math.pi / nseg if nseg > 0 else 0.0
    for i in prange(n):
        px = pos[i, 0]
        py = pos[i, 1]
        pz = pos[i, 2]
        r = radius[i]
        m = mass[i]
        reach = 1.2 * r
        tool_node[i] = -1
        tool_ft[i] = 0.0
        tool_fr[i] = 0.0
        hit0 = False
        hit1 = False
        hit2 = False
        hit3 = False
        hit4 = False
        hit5 = False
        hit6 = False
        hit7 = False
        for body in range(N_WALL_BODIES):
            # cheap prefilters per body
            if body == 0:
                if pz > reach or px > res_start + reach:
                    continue
                qx, qz = _seg_closest(px, pz, 0.0, 0.0, res_start, 0.0)
            elif body == 1:
                if px > reach:
                    continue
                qx, qz = _seg_closest(px, pz, 0.0, 0.0, 0.0, z_high)
            elif body == 2:
                if pz > reach or abs(px - res_start) > reach:
                    continue
                qx, qz = _seg_closest(px, pz, res_start, z_min, res_start, 0.0)
            elif body == 3:
                if pz > reach or abs(px - res_end) > reach:
                    continue
                qx, qz = _seg_closest(px, pz, res_end, z_min, res_end, 0.0)
            elif body == 4:
                if pz > piston_z + reach or px < res_start - reach or px > res_end + reach:
                    continue
                qx, qz = _seg_closest(px, pz, res_start, piston_z, res_end, piston_z)
            elif body == 5:
                if pz > reach or px < res_end - reach:
                    continue
                qx, qz = _seg_closest(px, pz, res_end, 0.0, x_end, 0.0)
            elif body == 6:
                if px < x_end - reach:
                    continue
                qx, qz = _seg_closest(px, pz, x_end, 0.0, x_end, z_high)
            else:
                if tool_kind == TOOL_NONE:
                    continue
                if tool_kind == TOOL_ROLLER:
                    dxp = px - tool_x
                    dzp = pz - tool_cz
                    rho2 = dxp * dxp + dzp * dzp
                    outer = tool_r + reach
                    inner = tool_r - 6.0 * r
                    if rho2 > outer * outer or rho2 < inner * inner:
                        continue
                    theta = math.atan2(dzp, dxp)
                    rel = theta - alpha
                    k0 = int(math.floor(rel / dphi))
                    best = 1e30
                    qx = 0.0
                    qz = 0.0
                    for kk in range(k0 - 1, k0 + 2):
                        a0 = alpha + kk * dphi
                        a1 = a0 + dphi
                        v0x = tool_x + tool_r * math.cos(a0)
                        v0z = tool_cz + tool_r * math.sin(a0)
                        v1x = tool_x + tool_r * math.cos(a1)
                        v1z = tool_cz + tool_r * math.sin(a1)
                        cx, cz2 = _seg_closest(px, pz, v0x, v0z, v1x, v1z)
                        dd = (px - cx) * (px - cx) + (pz - cz2) * (pz - cz2)
                        if dd < best:
                            best = dd
                            qx = cx
                            qz = cz2
                else:
                    bx = tool_x
                    if px < bx - blade_thickness - reach or px > bx + reach:
                        continue
                    if pz > gap_height + blade_height + reach:
                        continue
                    best = 1e30
                    qx = 0.0
                    qz = 0.0
                    # front face, bottom face, back face
                    for sseg in range(3):
                        if sseg == 0:
                            ax, az, bx2, bz2 = bx, gap_height, bx, gap_height + blade_height
                        elif sseg == 1:
                            ax, az, bx2, bz2 = bx - blade_thickness, gap_height, bx, gap_height
                        else:
                            ax, az, bx2, bz2 = (bx - blade_thickness, gap_height,
                                                bx - blade_thickness, gap_height + blade_height)
                        cx, cz2 = _seg_closest(px, pz, ax, az, bx2, bz2)
                        dd = (px - cx) * (px - cx) + (pz - cz2) * (pz - cz2)
                        if dd < best:
                            best = dd
                            qx = cx
                            qz = cz2

            dx = px - qx
            dz = pz - qz
            dist = math.sqrt(dx * dx + dz * dz)
            if dist == 0.0:
                continue
            cls = body_class[body]
            gcut = cutr_arr[cls] * r
            node = -1
            if body == BODY_TOOL and tool_kind == TOOL_ROLLER and coat_on == 1:
                thq = math.atan2(qz - tool_cz, qx - tool_x)
                node = int(math.floor((thq - alpha) / dphi)) % nseg
                dist -= coat_ur[node]
            overlap = r - dist
            if overlap <= -gcut:
                continue
            nx = dx / math.sqrt(dx * dx + dz * dz)
            nz = dz / math.sqrt(dx * dx + dz * dz)
            # wall surface velocity at the contact point
            vjx = 0.0
            vjz = 0.0
            wjy = 0.0
            if body == 4:
                vjz = piston_v
            elif body == BODY_TOOL:
                if tool_kind == TOOL_ROLLER:
                    vjx = tool_vx - omega * (qz - tool_cz)
                    vjz = omega * (qx - tool_x)
                    wjy = -omega
                    if coat_on == 1:
                        thq = math.atan2(qz - tool_cz, qx - tool_x)
                        tx = -math.sin(thq)
                        tz = math.cos(thq)
                        vjx += coat_vt[node] * tx + coat_vr[node] * math.cos(thq)
                        vjz += coat_vt[node] * tz + coat_vr[node] * math.sin(thq)
                else:
                    vjx = tool_vx
            li = r - 0.5 * overlap if overlap > 0.0 else r
            out = pair_force_core(
                nx, 0.0, nz, overlap,
                vel[i, 0], vel[i, 1], vel[i, 2],
                angvel[i, 0], angvel[i, 1], angvel[i, 2],
                vjx, 0.0, vjz, 0.0, wjy, 0.0,
                li, 0.0, r, m,
                wall_xi[i, body, 0], wall_xi[i, body, 1], wall_xi[i, body, 2],
                k_arr[cls], beta_arr[cls], mu_arr[cls], mur_arr[cls], kt_arr[cls],
                pc_arr[cls], ah_arr[cls], sreg_arr[cls], cutr_arr[cls],
                wreg_arr[cls], dt)
            force[i, 0] += out[0]
            force[i, 1] += out[1]
            force[i, 2] += out[2]
            torque[i, 0] += out[3]
            torque[i, 1] += out[4]
            torque[i, 2] += out[5]
            wall_xi[i, body, 0] = out[9]
            wall_xi[i, body, 1] = out[10]
            wall_xi[i, body, 2] = out[11]
            if body == 0:
                hit0 = True
            elif body == 1:
                hit1 = True
            elif body == 2:
                hit2 = True
            elif body == 3:
                hit3 = True
            elif body == 4:
                hit4 = True
            elif body == 5:
                hit5 = True
            elif body == 6:
                hit6 = True
            else:
                hit7 = True
                if coat_on == 1 and node >= 0:
                    thq = math.atan2(qz - tool_cz, qx - tool_x)
                    tx = -math.sin(thq)
                    tz = math.cos(thq)
                    tool_node[i] = node
                    tool_ft[i] = -(out[0] * tx + out[2] * tz)
                    tool_fr[i] = -(out[0] * math.cos(thq) + out[2] * math.sin(thq))
        if not hit0:
            wall_xi[i, 0, 0] = 0.0
            wall_xi[i, 0, 1] = 0.0
            wall_xi[i, 0, 2] = 0.0
        if not hit1:
            wall_xi[i, 1, 0] = 0.0
            wall_xi[i, 1, 1] = 0.0
            wall_xi[i, 1, 2] = 0.0
        if not hit2:
            wall_xi[i, 2, 0] = 0.0
            wall_xi[i, 2, 1] = 0.0
            wall_xi[i, 2, 2] = 0.0
        if not hit3:
            wall_xi[i, 3, 0] = 0.0
            wall_xi[i, 3, 1] = 0.0
            wall_xi[i, 3, 2] = 0.0
        if not hit4:
            wall_xi[i, 4, 0] = 0.0
            wall_xi[i, 4, 1] = 0.0
            wall_xi[i, 4, 2] = 0.0
        if not hit5:
            wall_xi[i, 5, 0] = 0.0
            wall_xi[i, 5, 1] = 0.0
            wall_xi[i, 5, 2] = 0.0
        if not hit6:
            wall_xi[i, 6, 0] = 0.0
            wall_xi[i, 6, 1] = 0.0
            wall_xi[i, 6, 2] = 0.0
        if not hit7:
            wall_xi[i, 7, 0] = 0.0
            wall_xi[i, 7, 1] = 0.0
            wall_xi[i, 7, 2] = 0.0


@njit(cache=True)
def accumulate_tool_tractions(tool_node, tool_ft, tool_fr, traction_t, traction_r):
    traction_t[:] = 0.0
    traction_r[:] = 0.0
    for i in range(tool_node.size):
        node = tool_node[i]
        if node >= 0:
            traction_t[node] += tool_ft[i]
            traction_r[node] += tool_fr[i]


# ---------------------------------------------------------------------------
# integration and audits
# ---------------------------------------------------------------------------

@njit(cache=True)
def audit_arrays(pos, vel, x_end, z_min):
    """Return 0 when healthy, 1 on NaN/Inf, 2 when a particle left the domain."""
    for i in range(pos.shape[0]):
        for d in range(3):
            if not math.isfinite(pos[i, d]) or not math.isfinite(vel[i, d]):
                return 1
        if pos[i, 0] < -1e-6 or pos[i, 0] > x_end + 1e-6 or pos[i, 2] < z_min - 1e-6:
            return 2
    return 0


@njit(cache=True)
def pair_elastic_energy(pos, radius, pair_i, pair_j, pair_xi, width, k, k_t):
    """Stored spring energy (normal + tangential) over the candidate pairs."""
    half_y = 0.5 * width
    e = 0.0
    for p in range(pair_i.size):
        i = pair_i[p]
        j = pair_j[p]
        dx = pos[i, 0] - pos[j, 0]
        dy = pos[i, 1] - pos[j, 1]
        if dy > half_y:
            dy -= width
        elif dy < -half_y:
            dy += width
        dz = pos[i, 2] - pos[j, 2]
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        overlap = radius[i] + radius[j] - d
        if overlap > 0.0:
            e += 0.5 * k * overlap * overlap
        e += 0.5 * k_t * (pair_xi[p, 0]**2 + pair_xi[p, 1]**2 + pair_xi[p, 2]**2)
    return e


# ---------------------------------------------------------------------------
# packing metric rasterization
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def rasterize_spheres(px, py, pz, radius, x0, width, voxel, occ):
    """Mark voxels whose centers fall inside any sphere (periodic in y)."""
    nx, ny, nz = occ.shape
    for p in prange(px.size):
        x = px[p]
        y = py[p]
        z = pz[p]
        r = radius[p]
        r2 = r * r
        ix0 = int(math.floor((x - r - x0) / voxel - 0.5))
        ix1 = int(math.ceil((x + r - x0) / voxel - 0.5))
        iy0 = int(math.floor((y - r) / voxel - 0.5))
        iy1 = int(math.ceil((y + r) / voxel - 0.5))
        iz0 = int(math.floor((z - r) / voxel - 0.5))
        iz1 = int(math.ceil((z + r) / voxel - 0.5))
        if iz0 < 0:
            iz0 = 0
        for ix in range(max(ix0, 0), min(ix1, nx - 1) + 1):
            cx = x0 + (ix + 0.5) * voxel
            ddx = (cx - x) * (cx - x)
            if ddx > r2:
                continue
            for iy in range(iy0, iy1 + 1):
                cy = (iy + 0.5) * voxel
                ddy = (cy - y) * (cy - y)
                if ddx + ddy > r2:
                    continue
                iyw = iy % ny
                for iz in range(iz0, min(iz1, nz - 1) + 1):
                    cz = (iz + 0.5) * voxel
                    if ddx + ddy + (cz - z) * (cz - z) <= r2:
                        occ[ix, iyw, iz] = True


@njit(cache=True)
def bin_volumes_and_heights(occ, vpb, voxel, volumes, heights):
    """Aggregate occupied voxels into per-bin volumes and top heights."""
    nx, ny, nz = occ.shape
    nbx = volumes.shape[0]
    nby = volumes.shape[1]
    for bx in range(nbx):
        for by in range(nby):
            cnt = 0
            top = 0
            for ix in range(bx * vpb, (bx + 1) * vpb):
                for iy in range(by * vpb, (by + 1) * vpb):
                    col_top = 0
                    for iz in range(nz - 1, -1, -1):
                        if occ[ix, iy, iz]:
                            col_top = iz + 1
                            break
                    if col_top > top:
                        top = col_top
                    for iz in range(col_top):
                        if occ[ix, iy, iz]:
                            cnt += 1
            volumes[bx, by] = cnt * voxel * voxel * voxel
            heights[bx, by] = top * voxel
