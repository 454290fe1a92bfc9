"""Grid path search on the inflated known-free space."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from . import _kernels
from .info_gain import R_ROBOT


class UnreachableGoal(RuntimeError):
    pass


# Planning inflation: voxel-center distance that guarantees the robot body
# (radius R_ROBOT) stays clear of occupied voxel boxes anywhere in the voxel.
R_PLAN = 0.4


def navigable_mask(vmap, r_robot: float = R_ROBOT) -> np.ndarray:
    """Known-free voxels at least r_robot from any observed-occupied voxel.

    Unknown voxels are not traversable but are not inflated, so paths may
    run along the frontier.
    """
    trin = vmap.trinary
    occ = trin == 1
    if occ.any():
        dist = ndimage.distance_transform_edt(
            ~occ, sampling=vmap.resolution)
        clear = dist >= r_robot
    else:
        clear = np.ones(vmap.dims, dtype=bool)
    return (trin == 0) & clear


def _flat(vmap, v):
    nx, ny, nz = vmap.dims
    return (int(v[0]) * ny + int(v[1])) * nz + int(v[2])


def _nearest_navigable(nav, v, max_r=5):
    if nav[tuple(v)]:
        return np.asarray(v)
    dims = nav.shape
    best, best_d = None, None
    for r in range(1, max_r + 1):
        lo = np.maximum(np.asarray(v) - r, 0)
        hi = np.minimum(np.asarray(v) + r + 1, dims)
        sub = nav[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        cand = np.argwhere(sub) + lo
        if len(cand):
            d = ((cand - np.asarray(v)) ** 2).sum(axis=1)
            i = int(np.argmin(d))
            if best is None or d[i] < best_d:
                best, best_d = cand[i], d[i]
            return best
    return best


class DistanceField:
    """Single-source shortest-path distances from a robot position over the
    26-connected navigable grid; queried per goal voxel."""

    def __init__(self, vmap, source_pos, r_robot: float = R_ROBOT,
                 nav: np.ndarray | None = None):
        self.vmap = vmap
        self.nav = navigable_mask(vmap, r_robot) if nav is None else nav
        src = _nearest_navigable(self.nav, vmap.world_to_voxel(source_pos))
        if src is None:
            raise UnreachableGoal("source position has no navigable voxel")
        self.source_voxel = np.asarray(src)
        self.dist, self.parent = _kernels.dijkstra_grid(
            self.nav, _flat(vmap, src), vmap.resolution)

    def distance_to(self, pos) -> float:
        """Path length in meters to the voxel at pos; inf if unreachable."""
        v = self.vmap.world_to_voxel(pos)
        if not self.vmap.in_bounds_voxel(v):
            return float("inf")
        d = float(self.dist[_flat(self.vmap, v)])
        return d if d < _kernels.INF / 2 else float("inf")

    def path_to(self, pos) -> np.ndarray:
        """Voxel path source->pos, inclusive; raises when unreachable."""
        v = self.vmap.world_to_voxel(pos)
        if not math.isfinite(self.distance_to(pos)):
            raise UnreachableGoal("no grid path to goal")
        ny, nz = self.vmap.dims[1], self.vmap.dims[2]
        out = []
        f = _flat(self.vmap, v)
        while f >= 0:
            out.append((f // (ny * nz), (f // nz) % ny, f % nz))
            f = int(self.parent[f])
        return np.array(out[::-1], dtype=np.int64)


def _segment_navigable(vmap, nav, a, b) -> bool:
    for v in vmap.traverse(a, b):
        if not nav[v[0], v[1], v[2]]:
            return False
    return True


def simplify_path(vmap, nav, voxel_path, endpoints=None) -> np.ndarray:
    """Greedy line-of-sight shortcutting of a voxel path.

    Returns waypoints in meters; consecutive waypoints have a navigable
    straight segment between them.  `endpoints` optionally overrides the
    first/last waypoint with exact world positions.
    """
    pts = [vmap.voxel_center(v) for v in voxel_path]
    if endpoints is not None:
        pts[0] = np.asarray(endpoints[0], dtype=float)
        if len(pts) > 1:
            pts[-1] = np.asarray(endpoints[1], dtype=float)
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_navigable(vmap, nav, pts[i], pts[j]):
            j -= 1
        out.append(pts[j])
        i = j
    return np.array(out)
