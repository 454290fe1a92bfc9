"""Probabilistic occupancy grid: log-odds ray integration, trinary export,
exact grid traversal, and block extraction."""

from __future__ import annotations

import math
from typing import List, Sequence, Tuple

import numpy as np

from . import _kernels
from .blocks import BLOCK_DIMS, BLOCK_RES, OccupancyBlock
from .geometry import Aabb, Pose

# Standard inverse sensor model defaults; see module docs.
HIT_LOGODDS = 0.85
MISS_LOGODDS = -0.4
CLAMP_MIN = -2.0
CLAMP_MAX = 3.5
OCC_THRESHOLD = 0.5
FREE_THRESHOLD = -0.5

# Nudge applied to hit endpoints so surface points falling exactly on a
# voxel boundary land in the voxel behind the surface.
_HIT_NUDGE_M = 1e-6


class SensorOutsideMap(ValueError):
    pass


class VoxelMap:
    """Clamped log-odds 3-D occupancy grid.

    Trinary export is a pure function of log-odds: >= occ_threshold -> 1,
    <= free_threshold -> 0, else -1.  Fresh voxels (log-odds 0) export -1.
    """

    def __init__(self, origin, resolution: float, dims,
                 hit_logodds: float = HIT_LOGODDS,
                 miss_logodds: float = MISS_LOGODDS,
                 clamp_min: float = CLAMP_MIN,
                 clamp_max: float = CLAMP_MAX,
                 occ_threshold: float = OCC_THRESHOLD,
                 free_threshold: float = FREE_THRESHOLD):
        self.origin = np.asarray(origin, dtype=float)
        self.resolution = float(resolution)
        self.dims = tuple(int(d) for d in dims)
        if any(d <= 0 for d in self.dims):
            raise ValueError(f"non-positive dims {dims}")
        self.hit_logodds = hit_logodds
        self.miss_logodds = miss_logodds
        self.clamp_min = clamp_min
        self.clamp_max = clamp_max
        self.occ_threshold = occ_threshold
        self.free_threshold = free_threshold
        self.logodds = np.zeros(self.dims, dtype=np.float64)
        self._trinary = np.full(self.dims, -1, dtype=np.int8)
        self._mark = np.zeros(self.dims, dtype=np.int8)

    # -- coordinate helpers -------------------------------------------------

    def world_to_grid(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.origin) / self.resolution

    def world_to_voxel(self, p) -> np.ndarray:
        return np.floor(self.world_to_grid(p)).astype(np.int64)

    def voxel_center(self, v) -> np.ndarray:
        return self.origin + (np.asarray(v, dtype=float) + 0.5) * self.resolution

    def in_bounds_voxel(self, v) -> bool:
        v = np.asarray(v)
        return bool(np.all(v >= 0) and np.all(v < np.asarray(self.dims)))

    def in_bounds_point(self, p) -> bool:
        g = self.world_to_grid(p)
        return bool(np.all(g >= 0) and np.all(g < np.asarray(self.dims)))

    # -- trinary ------------------------------------------------------------

    @property
    def trinary(self) -> np.ndarray:
        """Cached trinary view (int8); do not mutate."""
        return self._trinary

    def trinary_of(self, v) -> int:
        return int(self._trinary[tuple(v)])

    def recompute_trinary(self) -> np.ndarray:
        """Pure recomputation from log-odds (used by tests)."""
        out = np.full(self.dims, -1, dtype=np.int8)
        out[self.logodds >= self.occ_threshold] = 1
        out[self.logodds <= self.free_threshold] = 0
        return out

    # -- operations ---------------------------------------------------------

    def integrate_scan(self, sensor_pose: Pose, rays: Sequence[Tuple[np.ndarray, bool]]) -> Aabb | None:
        """Integrate one depth scan.

        rays: iterable of (endpoint, hit_flag).  Voxels traversed before an
        endpoint receive the miss increment; hit endpoints receive the hit
        increment.  Returns the tight Aabb of changed voxels, or None when
        nothing changed.
        """
        p = np.asarray(sensor_pose.position, dtype=float)
        if not self.in_bounds_point(p):
            raise SensorOutsideMap("sensor outside map")
        if len(rays) == 0:
            return None
        ends = np.array([e for e, _ in rays], dtype=float)
        hits = np.array([bool(h) for _, h in rays], dtype=np.bool_)
        dirs = ends - p[None, :]
        norms = np.linalg.norm(dirs, axis=1)
        nz = norms > 0
        # nudge hit endpoints past grid-aligned surfaces
        push = np.zeros_like(ends)
        push[nz & hits] = dirs[nz & hits] / norms[nz & hits, None] * _HIT_NUDGE_M
        g_ends = (ends + push - self.origin[None, :]) / self.resolution
        g0 = self.world_to_grid(p)
        bbox = _kernels.integrate_rays(
            self.logodds, self._trinary, self._mark,
            g0[0], g0[1], g0[2],
            np.ascontiguousarray(g_ends[:, 0]),
            np.ascontiguousarray(g_ends[:, 1]),
            np.ascontiguousarray(g_ends[:, 2]),
            hits, self.hit_logodds, self.miss_logodds,
            self.clamp_min, self.clamp_max,
            self.occ_threshold, self.free_threshold)
        if bbox[0] < 0:
            return None
        return Aabb(bbox[:3], bbox[3:])

    def traverse(self, start, end) -> np.ndarray:
        """Ordered voxels crossed by the segment start->end.

        start must be inside the map; traversal clips at the map boundary.
        A zero-length segment yields the single containing voxel.
        """
        if not self.in_bounds_point(start):
            raise ValueError("traverse start outside map")
        g0 = self.world_to_grid(start)
        g1 = self.world_to_grid(end)
        nx, ny, nz = self.dims
        out = np.empty((nx + ny + nz + 3, 3), dtype=np.int32)
        n = _kernels.ray_voxels(g0[0], g0[1], g0[2], g1[0], g1[1], g1[2],
                                nx, ny, nz, out)
        return out[:n].copy()

    def extract_block(self, center) -> OccupancyBlock:
        """Trinary block (80 x 80 x 24 at 0.1 m) horizontally centered near
        `center` and vertically anchored at the map's ground plane.

        The block grid is snapped to the map voxel grid so predictions can
        be overlaid voxel-for-voxel.  Regions outside the map fill with -1.
        """
        bx, by, bz = BLOCK_DIMS
        c = np.asarray(center, dtype=float)
        # snap the low corner to the map grid
        i0 = int(round((c[0] - self.origin[0]) / self.resolution)) - bx // 2
        j0 = int(round((c[1] - self.origin[1]) / self.resolution)) - by // 2
        k0 = 0
        origin = self.origin + np.array([i0, j0, k0], dtype=float) * self.resolution
        values = np.full(BLOCK_DIMS, -1, dtype=np.int8)
        if abs(self.resolution - BLOCK_RES) < 1e-12:
            xs = slice(max(0, i0), min(self.dims[0], i0 + bx))
            ys = slice(max(0, j0), min(self.dims[1], j0 + by))
            zs = slice(max(0, k0), min(self.dims[2], k0 + bz))
            if xs.start < xs.stop and ys.start < ys.stop and zs.start < zs.stop:
                values[xs.start - i0:xs.stop - i0,
                       ys.start - j0:ys.stop - j0,
                       zs.start - k0:zs.stop - k0] = self._trinary[xs, ys, zs]
        else:
            # generic nearest-voxel sampling for non-native resolutions
            ii, jj, kk = np.meshgrid(np.arange(bx), np.arange(by), np.arange(bz),
                                     indexing="ij")
            pts = origin[None, None, None, :] + \
                (np.stack([ii, jj, kk], axis=-1) + 0.5) * BLOCK_RES
            g = np.floor((pts - self.origin) / self.resolution).astype(np.int64)
            ok = np.all(g >= 0, axis=-1) & np.all(
                g < np.asarray(self.dims)[None, None, None, :], axis=-1)
            gi = np.clip(g[..., 0], 0, self.dims[0] - 1)
            gj = np.clip(g[..., 1], 0, self.dims[1] - 1)
            gk = np.clip(g[..., 2], 0, self.dims[2] - 1)
            values = np.where(ok, self._trinary[gi, gj, gk], -1).astype(np.int8)
        return OccupancyBlock(values, origin=origin, resolution=BLOCK_RES)

    def snapshot_trinary(self) -> np.ndarray:
        """Read-only copy for concurrent gain evaluation."""
        return self._trinary.copy()
