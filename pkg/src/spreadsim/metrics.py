"""Spatially resolved packing-fraction layer quality metric.

The evaluation window is split into square bins (100 um default) across the
spreading and width directions. Particle volume per bin is integrated by
counting cubic voxel centers (2.5 um default) inside spheres; per-bin layer
height is the top of the highest occupied voxel column in the bin. Each bin's
packing fraction is its particle volume divided by bin area times the actual
mean layer height over the window (not the nominal gap height).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InconsistentStateError, InvalidInputError


@dataclass
class PackingFractionField:
    """Per-bin packing fraction and layer height over the evaluation window."""

    bin_size: float
    voxel_size: float
    x0: float
    phi: np.ndarray       # (nbx, nby)
    heights: np.ndarray   # (nbx, nby), meters
    volumes: np.ndarray   # (nbx, nby), m^3
    mean_height: float
    width: float

    @property
    def phi_mean(self) -> float:
        return float(np.mean(self.phi)) if self.phi.size else 0.0

    @property
    def phi_std(self) -> float:
        return float(np.std(self.phi)) if self.phi.size else 0.0

    def bin_centers(self):
        nbx, nby = self.phi.shape
        xs = self.x0 + (np.arange(nbx) + 0.5) * self.bin_size
        ys = (np.arange(nby) + 0.5) * self.bin_size
        return xs, ys


def _check_grid(window_length, width, bin_size, voxel_size):
    if bin_size <= 0 or voxel_size <= 0:
        raise InvalidInputError("bin and voxel sizes must be > 0")
    ratio = bin_size / voxel_size
    if abs(ratio - round(ratio)) > 1e-9:
        raise InvalidInputError("voxel size must divide bin size")
    nbx = window_length / bin_size
    if abs(nbx - round(nbx)) > 1e-9 or round(nbx) < 1:
        raise InvalidInputError("bin size must divide the window length")
    nby = width / bin_size
    if abs(nby - round(nby)) > 1e-9 or round(nby) < 1:
        raise InvalidInputError("bin size must divide the periodic width")
    return int(round(nbx)), int(round(nby)), int(round(ratio))


def _rasterize(positions, radii, x0, window_length, width, voxel_size, vpb, nbx, nby):
    sel = (positions[:, 0] + radii > x0) & (positions[:, 0] - radii < x0 + window_length)
    px = positions[sel, 0]
    py = positions[sel, 1]
    pz = positions[sel, 2]
    pr = radii[sel]
    nx = nbx * vpb
    ny = nby * vpb
    if px.size:
        z_top = float(np.max(pz + pr))
        nz = max(1, int(np.ceil(z_top / voxel_size)) + 1)
    else:
        nz = 1
    occ = np.zeros((nx, ny, nz), dtype=np.bool_)
    if px.size:
        kernels.rasterize_spheres(px, py, pz, pr, x0, width, voxel_size, occ)
    return occ, int(px.size)


def packing_fraction_field(positions, radii, window_x0, window_length, width,
                           bin_size=100e-6, voxel_size=2.5e-6) -> PackingFractionField:
    """Voxel-integrated packing fraction field over [window_x0, window_x0+length)."""
    positions = np.asarray(positions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    nbx, nby, vpb = _check_grid(window_length, width, bin_size, voxel_size)
    occ, n_in = _rasterize(positions, radii, window_x0, window_length, width,
                           voxel_size, vpb, nbx, nby)
    volumes = np.zeros((nbx, nby))
    heights = np.zeros((nbx, nby))
    kernels.bin_volumes_and_heights(occ, vpb, voxel_size, volumes, heights)
    mean_height = float(np.mean(heights))
    if mean_height <= 0.0:
        if n_in and float(np.sum(volumes)) > 0.0:
            raise InconsistentStateError("particles present but mean layer height is zero")
        phi = np.zeros((nbx, nby))
    else:
        phi = volumes / (bin_size * bin_size * mean_height)
    return PackingFractionField(bin_size=bin_size, voxel_size=voxel_size,
                                x0=window_x0, phi=phi, heights=heights,
                                volumes=volumes, mean_height=mean_height,
                                width=width)


def layer_height_field(positions, radii, window_x0, window_length, width,
                       bin_size=100e-6, voxel_size=2.5e-6) -> np.ndarray:
    """Per-bin layer heights (top of the highest occupied voxel column)."""
    if window_length <= 0:
        raise InvalidInputError("evaluation window must have positive length")
    field = packing_fraction_field(positions, radii, window_x0, window_length,
                                   width, bin_size, voxel_size)
    return field.heights


def summarize(field: PackingFractionField):
    """Mean and population standard deviation of the packing fraction field."""
    if field.phi.size < 1:
        raise InvalidInputError("summarize needs at least one bin")
    return field.phi_mean, field.phi_std


def field_from_state(state, bin_size=100e-6, voxel_size=2.5e-6) -> PackingFractionField:
    """Evaluate the metric over the domain's configured evaluation window."""
    dom = state.domain
    return packing_fraction_field(state.pos, state.radius, dom.window_x0,
                                  dom.window.length, dom.periodic_width,
                                  bin_size, voxel_size)
