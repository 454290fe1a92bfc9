"""Door detection on the occupancy map, semantic-object lifecycle, and
room/corridor frontier classification.

Doors are found in two stages: a horizontal occupancy projection is scanned
with an edge detector and a probabilistic line transform for collinear wall
segments separated by a door-sized gap, then the gap is verified in 3-D by
measuring the free span and free height between the flanking wall columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

W_MIN = 0.7
W_MAX = 1.1
H_MIN = 1.8
SLICE_Z = (0.3, 1.8)          # projection band, meters above the floor
CONFIRM_DIST = 1.0            # meters; confirmation proximity to the center

# line-transform tuning (voxels)
_MIN_LINE_LEN = 10
_MAX_LINE_GAP = 2
_COLLINEAR_TOL = 2.0
_PARALLEL_TOL = math.sin(math.radians(10.0))
_DEDUP_DIST = 0.5


@dataclass
class SemanticObject:
    id: int
    center: np.ndarray            # 3-D gap center, meters
    direction: np.ndarray         # horizontal unit normal of the wall plane
    width: float                  # measured free span, meters
    cls: str = "door"
    status: str = "to_be_confirmed"   # to_be_confirmed | confirmed | rejected


class SemanticRegistry:
    def __init__(self):
        self.objects: dict[int, SemanticObject] = {}
        self._next_id = 0

    def add_candidates(self, candidates) -> list:
        """Register new candidates, deduplicating by center proximity."""
        added = []
        for cand in candidates:
            dup = False
            for obj in self.objects.values():
                if np.linalg.norm(obj.center[:2] - cand.center[:2]) < _DEDUP_DIST:
                    dup = True
                    break
            if dup:
                continue
            cand.id = self._next_id
            self._next_id += 1
            self.objects[cand.id] = cand
            added.append(cand)
        return added

    def set_status(self, oid: int, status: str):
        obj = self.objects[oid]
        if obj.status == "rejected":
            raise ValueError("rejected objects cannot change status")
        obj.status = status

    def unconfirmed(self) -> list:
        return [o for o in self.objects.values()
                if o.status == "to_be_confirmed"]

    def confirmed(self) -> list:
        return [o for o in self.objects.values() if o.status == "confirmed"]


def _z_band(vmap):
    k_lo = int(math.ceil(SLICE_Z[0] / vmap.resolution))
    k_hi = min(int(math.floor(SLICE_Z[1] / vmap.resolution)), vmap.dims[2])
    return k_lo, k_hi


def _column_occupied(trin, i, j, k_lo, k_hi) -> bool:
    nx, ny, _ = trin.shape
    if not (0 <= i < nx and 0 <= j < ny):
        return False
    return bool(np.any(trin[i, j, k_lo:k_hi] == 1))


def _column_free_height(trin, i, j, resolution) -> float:
    """Contiguous known-free height from just above the floor voxel."""
    nx, ny, nz = trin.shape
    if not (0 <= i < nx and 0 <= j < ny):
        return 0.0
    col = trin[i, j]
    k = 1
    while k < nz and col[k] == 0:
        k += 1
    return k * resolution


def check_gap(vmap, center, direction, w_min=W_MIN, w_max=W_MAX,
              h_min=H_MIN):
    """Verify a candidate gap in 3-D (stage 2).

    Marches along the wall from the gap center to the first occupied column
    on each side; accepts when the free span lies within the door width
    range and the free height of the in-gap columns reaches h_min.  Returns
    (ok, refined center, span) with the center re-centered in the span.
    """
    trin = vmap.trinary
    res = vmap.resolution
    k_lo, k_hi = _z_band(vmap)
    n = np.asarray(direction, dtype=float)[:2]
    n = n / np.linalg.norm(n)
    u = np.array([-n[1], n[0]])
    c = np.asarray(center, dtype=float)

    def col_at(s, t):
        p = c[:2] + s * u + t * n
        i = int(math.floor((p[0] - vmap.origin[0]) / res))
        j = int(math.floor((p[1] - vmap.origin[1]) / res))
        return i, j

    def occupied(s):
        # tolerate one voxel of wall-plane offset
        for t in (-res, 0.0, res):
            if _column_occupied(trin, *col_at(s, t), k_lo, k_hi):
                return True
        return False

    max_steps = int(math.ceil(1.5 * w_max / res))
    s_pos = s_neg = None
    for step in range(1, max_steps + 1):
        if s_pos is None and occupied(step * res):
            s_pos = step * res
        if s_neg is None and occupied(-step * res):
            s_neg = step * res
        if s_pos is not None and s_neg is not None:
            break
    if s_pos is None or s_neg is None or occupied(0.0):
        return False, c, 0.0
    span = s_pos + s_neg - res
    if not (w_min - res / 2 <= span <= w_max + res / 2):
        return False, c, span
    refined = c.copy()
    refined[:2] = c[:2] + (s_pos - s_neg) / 2.0 * u
    # free height across the columns inside the gap
    for s in np.arange(-s_neg + res, s_pos - res / 2, res):
        h = _column_free_height(trin, *col_at(float(s), 0.0), res)
        if h < h_min:
            return False, refined, span
    return True, refined, span


def detect_doors(vmap, cluster, w_min=W_MIN, w_max=W_MAX,
                 h_min=H_MIN, window_m=3.0) -> list:
    """Door candidates near a frontier cluster (both stages applied).

    Returned objects have placeholder ids; the registry assigns real ids.
    """
    trin = vmap.trinary
    res = vmap.resolution
    k_lo, k_hi = _z_band(vmap)
    cw = int(round(window_m / res))
    cx, cy = [int(v) for v in
              np.floor((np.asarray(cluster.centroid[:2]) -
                        vmap.origin[:2]) / res)]
    x0, x1 = max(0, cx - cw), min(vmap.dims[0], cx + cw)
    y0, y1 = max(0, cy - cw), min(vmap.dims[1], cy + cw)
    if x1 - x0 < _MIN_LINE_LEN or y1 - y0 < _MIN_LINE_LEN:
        return []

    occ_count = (trin[x0:x1, y0:y1, k_lo:k_hi] == 1).sum(axis=2)
    band = k_hi - k_lo
    img = ((occ_count >= max(2, band // 3)) * 255).astype(np.uint8)
    edges = cv2.Canny(img, 50, 150)
    lines = cv2.HoughLinesP(edges, 1, math.pi / 180.0, threshold=8,
                            minLineLength=_MIN_LINE_LEN,
                            maxLineGap=_MAX_LINE_GAP)
    if lines is None:
        return []
    # cv2 reports (x=column index, y=row index); rows are map-x here
    segs = []
    for (xa, ya, xb, yb) in np.asarray(lines).reshape(-1, 4):
        a = np.array([ya, xa], dtype=float)
        b = np.array([yb, xb], dtype=float)
        if np.linalg.norm(b - a) < _MIN_LINE_LEN - 1:
            continue
        segs.append((a, b))

    cands = []
    seen = []
    for ai in range(len(segs)):
        for bi in range(ai + 1, len(segs)):
            a1, a2 = segs[ai]
            b1, b2 = segs[bi]
            da = (a2 - a1) / np.linalg.norm(a2 - a1)
            db = (b2 - b1) / np.linalg.norm(b2 - b1)
            if abs(da[0] * db[1] - da[1] * db[0]) > _PARALLEL_TOL:
                continue
            # perpendicular offset of segment B from line A
            perp = np.array([-da[1], da[0]])
            mid_b = (b1 + b2) / 2.0
            if abs((mid_b - a1) @ perp) > _COLLINEAR_TOL:
                continue
            pa = sorted([(a1 - a1) @ da, (a2 - a1) @ da])
            pb = sorted([(b1 - a1) @ da, (b2 - a1) @ da])
            if pb[0] > pa[1]:
                gap_px = pb[0] - pa[1]
                mid_s = (pa[1] + pb[0]) / 2.0
            elif pa[0] > pb[1]:
                gap_px = pa[0] - pb[1]
                mid_s = (pb[1] + pa[0]) / 2.0
            else:
                continue
            gap_m = gap_px * res
            if not (w_min - res <= gap_m <= w_max + res):
                continue
            center_px = a1 + mid_s * da
            center = np.array([
                vmap.origin[0] + (x0 + center_px[0] + 0.5) * res,
                vmap.origin[1] + (y0 + center_px[1] + 0.5) * res,
                (k_lo + k_hi) / 2.0 * res])
            normal = np.array([perp[0], perp[1], 0.0])
            ok, refined, span = check_gap(vmap, center, normal,
                                          w_min, w_max, h_min)
            if not ok:
                continue
            if any(np.linalg.norm(refined[:2] - s[:2]) < _DEDUP_DIST
                   for s in seen):
                continue
            seen.append(refined)
            cands.append(SemanticObject(-1, refined, normal / np.linalg.norm(normal),
                                        span))
    return cands


def recheck_objects(vmap, registry: SemanticRegistry) -> list:
    """Drop unconfirmed candidates that no longer pass the 3-D gap check.

    Confirmed objects persist regardless of later map noise.
    """
    removed = []
    for obj in list(registry.unconfirmed()):
        ok, refined, span = check_gap(vmap, obj.center, obj.direction)
        if ok:
            obj.center = refined
            obj.width = span
        else:
            removed.append(obj.id)
            del registry.objects[obj.id]
    return removed


def _in_fov(pose, camera, point) -> bool:
    d = np.asarray(point, dtype=float) - pose.position
    r = np.linalg.norm(d)
    if r < 1e-9 or r > camera.max_range:
        return False
    az = math.atan2(d[1], d[0]) - pose.yaw
    az = math.atan2(math.sin(az), math.cos(az))
    el = math.asin(np.clip(d[2] / r, -1.0, 1.0))
    return abs(az) <= camera.hfov / 2 and abs(el) <= camera.vfov / 2


def try_confirm(vmap, registry: SemanticRegistry, robot_pose, camera) -> list:
    """Resolve candidates the robot has arrived at: confirm when the gap
    still verifies with the object in view, otherwise reject.  Returns the
    (id, status) transitions made."""
    out = []
    for obj in list(registry.unconfirmed()):
        # the hold pose sits exactly CONFIRM_DIST from the center, so allow
        # the navigation arrival tolerance on top of it
        d = np.linalg.norm(robot_pose.position[:2] - obj.center[:2])
        if d > CONFIRM_DIST + 0.3:
            continue
        if not _in_fov(robot_pose, camera, obj.center):
            continue
        ok, refined, span = check_gap(vmap, obj.center, obj.direction)
        if ok:
            obj.center = refined
            obj.width = span
            registry.set_status(obj.id, "confirmed")
        else:
            registry.set_status(obj.id, "rejected")
        out.append((obj.id, obj.status))
    return out


def _door_blocked_cells(vmap, obj):
    """Voxel mask cells closed off by a confirmed door plane."""
    res = vmap.resolution
    n = obj.direction[:2] / np.linalg.norm(obj.direction[:2])
    u = np.array([-n[1], n[0]])
    half = obj.width / 2.0 + res
    c = obj.center[:2]
    r = int(math.ceil((half + res) / res)) + 1
    ci = int(math.floor((c[0] - vmap.origin[0]) / res))
    cj = int(math.floor((c[1] - vmap.origin[1]) / res))
    cells = []
    for i in range(max(0, ci - r), min(vmap.dims[0], ci + r + 1)):
        for j in range(max(0, cj - r), min(vmap.dims[1], cj + r + 1)):
            p = vmap.origin[:2] + (np.array([i, j]) + 0.5) * res
            d = p - c
            if abs(d @ n) <= res and abs(d @ u) <= half:
                cells.append((i, j))
    return cells


def classify_frontier(cluster, mode, registry: SemanticRegistry, vmap,
                      robot_pos) -> str:
    """Label a frontier cluster "room" or "corridor".

    Room iff the behavior mode is in-room (EnterAOI/ExploreAOI) and the
    cluster is reachable from the robot through known-free space without
    crossing any confirmed door plane.
    """
    if str(mode) not in ("EnterAOI", "ExploreAOI"):
        return "corridor"
    free = vmap.trinary == 0
    for obj in registry.confirmed():
        for (i, j) in _door_blocked_cells(vmap, obj):
            free[i, j, :] = False
    labels, _ = ndimage.label(free, structure=np.ones((3, 3, 3), dtype=int))
    rv = vmap.world_to_voxel(robot_pos)
    if not vmap.in_bounds_voxel(rv) or labels[rv[0], rv[1], rv[2]] == 0:
        return "corridor"
    # nearest cluster cell to the centroid stands in for the cluster
    cells = cluster.cells
    cm = cells.mean(axis=0)
    cell = cells[int(np.argmin(((cells - cm) ** 2).sum(axis=1)))]
    lab = labels[cell[0], cell[1], cell[2]]
    return "room" if lab == labels[rv[0], rv[1], rv[2]] and lab != 0 else "corridor"
