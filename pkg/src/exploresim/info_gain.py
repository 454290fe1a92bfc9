"""Information gain along sensor rays and two-stage viewpoint sampling.

Gain for a viewpoint is defined over a fixed angular slice grid: the sweep
around a frontier cluster is cut into narrow azimuth slices, per-slice ray
gains are computed once, and each candidate yaw scores the window of slices
inside its field of view.  Per-yaw direct evaluation uses the same grid, so
window aggregation is exact rather than an approximation.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .blocks import PredictedBlock
from .geometry import wrap_angle

R_ROBOT = 0.3


@dataclass
class Viewpoint:
    position: np.ndarray
    yaw: float                       # wrapped to (-pi, pi]
    gain: float                     # predicted information gain, voxel count


@dataclass
class SamplerParams:
    radii: tuple = (1.0, 1.5, 2.0)
    angular_step: float = math.radians(20.0)
    heights: tuple = (1.0,)
    n_yaws: int = 9                  # yaw samples per position
    yaw_span: float = math.radians(160.0)   # total span centered on bearing
    slice_width: float = math.radians(10.0)
    n_keep: int = 10                 # retained top viewpoints
    ray_stride: int = 2

    def __post_init__(self):
        if self.n_keep < 1:
            raise ValueError("n_keep must be >= 1")
        if min(self.radii) <= 0 or self.angular_step <= 0 or \
                self.slice_width <= 0 or self.n_yaws < 1 or self.ray_stride < 1:
            raise ValueError("sampler parameters must be positive")


class PredictionOverlay:
    """Full-map view of predicted occupancy, newest block wins on overlap."""

    def __init__(self, vmap):
        self._vmap = vmap
        self.pred = np.full(vmap.dims, -1, dtype=np.int8)
        self.covered = np.zeros(vmap.dims, dtype=bool)

    def add_block(self, block: PredictedBlock):
        """Overlay one predicted block; its footprint replaces older data."""
        vmap = self._vmap
        off = (block.origin - vmap.origin) / vmap.resolution
        i0 = np.rint(off).astype(np.int64)
        if not np.allclose(off, i0, atol=1e-6):
            raise ValueError("predicted block is not aligned to the map grid")
        bdims = np.asarray(block.probs.shape)
        lo = np.maximum(i0, 0)
        hi = np.minimum(i0 + bdims, np.asarray(vmap.dims))
        if np.any(lo >= hi):
            return
        src = tuple(slice(lo[a] - i0[a], hi[a] - i0[a]) for a in range(3))
        dst = tuple(slice(lo[a], hi[a]) for a in range(3))
        trin = block.trinary()
        self.pred[dst] = np.where(block.mask[src], trin[src], -1)
        self.covered[dst] = block.mask[src]


_NO_PRED = np.full((1, 1, 1), -1, dtype=np.int8)
_NO_COVER = np.zeros((1, 1, 1), dtype=bool)


def predicted_gain_ray(vmap, overlay, start, end) -> int:
    """Unknown-voxel count along start->end per the prediction-aware rule.

    Stops at map exit or an observed-occupied voxel; an unknown voxel that
    is predicted occupied still counts but terminates the ray.
    """
    g0 = vmap.world_to_grid(start)
    g1 = vmap.world_to_grid(end)
    if overlay is None:
        return int(_kernels.gain_ray(vmap.trinary, _NO_COVER, _NO_PRED,
                                     g0[0], g0[1], g0[2], g1[0], g1[1], g1[2],
                                     False))
    return int(_kernels.gain_ray(vmap.trinary, overlay.covered, overlay.pred,
                                 g0[0], g0[1], g0[2], g1[0], g1[1], g1[2],
                                 True))


def classical_gain_ray(vmap, start, end) -> int:
    """Unknown-voxel count until observed-occupied or map exit."""
    return predicted_gain_ray(vmap, None, start, end)


@functools.lru_cache(maxsize=16)
def _clearance_offsets(r_robot: float, resolution: float):
    n = int(math.ceil(r_robot / resolution))
    offs = []
    for a in range(-n, n + 1):
        for b in range(-n, n + 1):
            for c in range(-n, n + 1):
                if (a * a + b * b + c * c) * resolution ** 2 <= r_robot ** 2:
                    offs.append((a, b, c))
    return np.array(offs, dtype=np.int64)


def position_is_admissible(vmap, p, r_robot: float = R_ROBOT) -> bool:
    """Known-free voxel with no observed-occupied voxel within r_robot."""
    if not vmap.in_bounds_point(p):
        return False
    v = vmap.world_to_voxel(p)
    trin = vmap.trinary
    if trin[v[0], v[1], v[2]] != 0:
        return False
    offs = _clearance_offsets(r_robot, vmap.resolution)
    w = v[None, :] + offs
    dims = np.asarray(vmap.dims)
    inb = np.all(w >= 0, axis=1) & np.all(w < dims[None, :], axis=1)
    w = w[inb]
    return not np.any(trin[w[:, 0], w[:, 1], w[:, 2]] == 1)


def _slice_pattern(params, camera):
    """Intra-slice (azimuth offset, elevation) grid, azimuth-major."""
    n_az = max(1, int(round(camera.cols / params.ray_stride *
                            params.slice_width / camera.hfov)))
    az = (np.arange(n_az) + 0.5) * params.slice_width / n_az
    el = np.linspace(-camera.vfov / 2, camera.vfov / 2,
                     camera.rows)[::params.ray_stride]
    aa, ee = np.meshgrid(az, el, indexing="ij")
    return aa.ravel(), ee.ravel()


def _slice_ray_dirs(az_lo, params, camera):
    """Unit directions for one azimuth slice (fixed intra-slice pattern)."""
    return _slices_ray_dirs(np.array([az_lo]), params, camera)[0]


def _slices_ray_dirs(az_los, params, camera):
    """(n_slices, n_rays, 3) unit directions, one row per azimuth slice."""
    az_off, el = _slice_pattern(params, camera)
    aa = np.asarray(az_los, dtype=float)[:, None] + az_off[None, :]
    ee = np.broadcast_to(el[None, :], aa.shape)
    return np.stack([np.cos(ee) * np.cos(aa),
                     np.cos(ee) * np.sin(aa),
                     np.sin(ee)], axis=-1)


def _gains_per_ray(vmap, overlay, pos, dirs, max_range):
    ends = pos[None, :] + dirs * max_range
    g0 = vmap.world_to_grid(pos)
    ge = (ends - vmap.origin[None, :]) / vmap.resolution
    out = np.empty(len(ge), dtype=np.int64)
    if overlay is None:
        _kernels.gain_rays_batch(vmap.trinary, _NO_COVER, _NO_PRED,
                                 g0, np.ascontiguousarray(ge), False, out)
    else:
        _kernels.gain_rays_batch(vmap.trinary, overlay.covered, overlay.pred,
                                 g0, np.ascontiguousarray(ge), True, out)
    return out


def _gain_of_rays(vmap, overlay, pos, dirs, max_range):
    return int(_gains_per_ray(vmap, overlay, pos, dirs, max_range).sum())


def _fov_slice_count(params, camera) -> int:
    n = camera.hfov / params.slice_width
    if abs(n - round(n)) > 1e-9:
        raise ValueError("camera hfov must be a multiple of the slice width")
    return int(round(n))


def gain_at_yaw(vmap, overlay, position, yaw, camera,
                params: SamplerParams) -> int:
    """Direct per-yaw gain over the slice-grid rays inside the FOV."""
    pos = np.asarray(position, dtype=float)
    n_fov = _fov_slice_count(params, camera)
    dirs = _slices_ray_dirs(
        yaw - camera.hfov / 2 + np.arange(n_fov) * params.slice_width,
        params, camera)
    return _gain_of_rays(vmap, overlay, pos, dirs.reshape(-1, 3),
                         camera.max_range)


def yaw_gains(vmap, overlay, position, bearing, camera,
              params: SamplerParams):
    """(yaws, gains) for the m candidate yaws around `bearing`.

    Per-slice gains are computed once over the whole sweep; each yaw's gain
    is the sum of the slices inside its FOV window.
    """
    pos = np.asarray(position, dtype=float)
    n_fov = _fov_slice_count(params, camera)
    if params.n_yaws > 1:
        step = params.yaw_span / (params.n_yaws - 1)
        k = step / params.slice_width
        if abs(k - round(k)) > 1e-9:
            raise ValueError("yaw step must be a multiple of the slice width")
        k = int(round(k))
    else:
        k = 0
    n_slices = n_fov + k * (params.n_yaws - 1)
    s0 = bearing - params.yaw_span / 2 - camera.hfov / 2
    dirs = _slices_ray_dirs(s0 + np.arange(n_slices) * params.slice_width,
                            params, camera)
    per_ray = _gains_per_ray(vmap, overlay, pos, dirs.reshape(-1, 3),
                             camera.max_range)
    slice_g = per_ray.reshape(n_slices, -1).sum(axis=1)
    csum = np.concatenate([[0], np.cumsum(slice_g)])
    yaws = bearing - params.yaw_span / 2 + \
        np.arange(params.n_yaws) * (k * params.slice_width)
    gains = csum[np.arange(params.n_yaws) * k + n_fov] - \
        csum[np.arange(params.n_yaws) * k]
    return yaws, gains


def sample_viewpoints(cluster, vmap, overlay, camera,
                      params: SamplerParams | None = None,
                      r_robot: float = R_ROBOT):
    """Top-N_vp viewpoints around a frontier cluster, sorted by gain.

    Stage 1 samples positions on cylindrical shells around the centroid and
    keeps the admissible ones; stage 2 scores candidate yaws per position via
    the sliding slice window and keeps the best yaw.
    """
    if params is None:
        params = SamplerParams()
    if cluster.size == 0:
        raise ValueError("empty cluster")
    centroid = np.asarray(cluster.centroid, dtype=float)
    out = []
    angles = np.arange(0.0, 2 * math.pi - 1e-9, params.angular_step)
    for r in params.radii:
        for a in angles:
            for h in params.heights:
                pos = np.array([centroid[0] + r * math.cos(a),
                                centroid[1] + r * math.sin(a), h])
                if not position_is_admissible(vmap, pos, r_robot):
                    continue
                bearing = math.atan2(centroid[1] - pos[1],
                                     centroid[0] - pos[0])
                yaws, gains = yaw_gains(vmap, overlay, pos, bearing,
                                        camera, params)
                best = int(np.argmax(gains))
                out.append(Viewpoint(pos, wrap_angle(float(yaws[best])),
                                     float(gains[best])))
    out.sort(key=lambda v: -v.gain)
    return out[:params.n_keep]
