"""Procedural ground-truth indoor worlds, a depth camera model, and
coverage metrics.

World layout: a corridor along +x with k rooms off its +y side, each room
connected by exactly one doorway in the shared wall.  Floor and ceiling
slabs bound the free space vertically so every camera ray terminates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .geometry import Box, Pose


@dataclass
class WorldConfig:
    n_rooms: int = 2
    corridor_width: float = 2.0
    corridor_extra: float = 1.0      # corridor length beyond the last room
    room_width_range: tuple = (3.0, 4.0)
    room_depth_range: tuple = (3.0, 4.0)
    door_width_range: tuple = (0.75, 1.05)
    door_height: float = 2.0
    height: float = 2.4
    wall_thickness: float = 0.1
    slab_thickness: float = 0.1
    resolution: float = 0.1
    max_x: float = 30.0
    max_y: float = 20.0


@dataclass
class Door:
    center: np.ndarray       # (x, y) of the gap center, mid-wall
    normal: np.ndarray       # horizontal unit normal, corridor -> room
    width: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)


@dataclass
class CameraModel:
    hfov: float = math.radians(90.0)
    vfov: float = math.radians(60.0)
    max_range: float = 4.5
    rows: int = 9
    cols: int = 33

    def __post_init__(self):
        if not (0.0 < self.hfov < math.pi):
            raise ValueError("hfov must be in (0, pi)")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")

    def ray_directions(self, yaw: float, stride: int = 1) -> np.ndarray:
        az = np.linspace(-self.hfov / 2, self.hfov / 2, self.cols)[::stride]
        el = np.linspace(-self.vfov / 2, self.vfov / 2, self.rows)[::stride]
        aa, ee = np.meshgrid(az + yaw, el, indexing="ij")
        d = np.stack([np.cos(ee) * np.cos(aa),
                      np.cos(ee) * np.sin(aa),
                      np.sin(ee)], axis=-1)
        return d.reshape(-1, 3)


class InfeasibleWorld(ValueError):
    pass


@dataclass
class World:
    bounds: Box
    boxes: list          # solid geometry (walls, slabs, fillers)
    rooms: list          # (x0, y0, x1, y1) interior rectangles
    doors: list          # Door
    seed: int
    resolution: float = 0.1
    _gt: np.ndarray | None = field(default=None, repr=False)
    _observable: np.ndarray | None = field(default=None, repr=False)

    # -- ground truth -------------------------------------------------------

    @property
    def dims(self):
        ext = self.bounds.hi - self.bounds.lo
        return tuple(int(round(e / self.resolution)) for e in ext)

    def ground_truth(self) -> np.ndarray:
        """Trinary ground truth on the world grid: 1 occupied, 0 free."""
        if self._gt is None:
            nx, ny, nz = self.dims
            xs = self.bounds.lo[0] + (np.arange(nx) + 0.5) * self.resolution
            ys = self.bounds.lo[1] + (np.arange(ny) + 0.5) * self.resolution
            zs = self.bounds.lo[2] + (np.arange(nz) + 0.5) * self.resolution
            gt = np.zeros((nx, ny, nz), dtype=np.int8)
            for b in self.boxes:
                ix = (xs > b.lo[0]) & (xs < b.hi[0])
                iy = (ys > b.lo[1]) & (ys < b.hi[1])
                iz = (zs > b.lo[2]) & (zs < b.hi[2])
                gt[np.ix_(ix, iy, iz)] = 1
            self._gt = gt
        return self._gt

    def observable_mask(self) -> np.ndarray:
        """Voxels that count toward coverage: free space plus the one-voxel
        occupied shell adjacent to it (wall interiors are unobservable)."""
        if self._observable is None:
            gt = self.ground_truth()
            free = gt == 0
            near_free = ndimage.binary_dilation(
                free, structure=ndimage.generate_binary_structure(3, 1))
            self._observable = free | (near_free & (gt == 1))
        return self._observable

    def free_space_connected(self) -> bool:
        free = self.ground_truth() == 0
        _, n = ndimage.label(free)
        return n <= 1

    def point_in_free_space(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        if not self.bounds.contains(p, -margin):
            return False
        for b in self.boxes:
            if b.distance(p) <= margin:
                return False
        return True

    def clearance(self, p) -> float:
        """Distance from p to the nearest solid box or outer bound."""
        p = np.asarray(p, dtype=float)
        d = min(b.distance(p) for b in self.boxes)
        inner = np.minimum(p - self.bounds.lo, self.bounds.hi - p)
        return float(min(d, np.min(inner)))

    def start_pose(self) -> Pose:
        """Corridor entry pose used by the exploration runs."""
        if self.rooms:
            # midway between the outer wall and the corridor/room divider
            y = (self.bounds.lo[1] + self.rooms[0][1] - 0.1) / 2.0
        else:
            y = (self.bounds.lo[1] + self.bounds.hi[1]) / 2.0
        p = np.array([self.bounds.lo[0] + 0.8, y, 1.0])
        return Pose(p, 0.0)


def generate_world(seed: int, config: WorldConfig | None = None) -> World:
    """Deterministic procedural corridor-with-rooms world."""
    cfg = config or WorldConfig()
    rng = np.random.default_rng(seed)
    wt = cfg.wall_thickness
    k = cfg.n_rooms

    # all geometry is snapped to the voxel grid so the rasterized occupancy
    # equals the true solid geometry exactly
    res = cfg.resolution

    def snap(v):
        return np.round(np.asarray(v, dtype=float) / res) * res

    room_widths = snap(rng.uniform(*cfg.room_width_range, size=k))
    room_depth = float(snap(rng.uniform(*cfg.room_depth_range)))
    door_widths = snap(rng.uniform(*cfg.door_width_range, size=k))

    lx = wt + float(np.sum(room_widths)) + k * wt + cfg.corridor_extra + wt
    ly = wt + cfg.corridor_width + wt + room_depth + wt
    h = cfg.height
    if lx > cfg.max_x:
        raise InfeasibleWorld(
            f"rooms do not fit: required x extent {lx:.2f} m exceeds max_x {cfg.max_x:.2f} m")
    if ly > cfg.max_y:
        raise InfeasibleWorld(
            f"rooms do not fit: required y extent {ly:.2f} m exceeds max_y {cfg.max_y:.2f} m")
    volume = lx * ly * h
    if not (50.0 <= volume <= 500.0):
        raise InfeasibleWorld(
            f"world volume {volume:.1f} m^3 outside [50, 500]: adjust n_rooms or corridor_extra")

    boxes = []
    # floor and ceiling
    boxes.append(Box([0, 0, 0], [lx, ly, cfg.slab_thickness]))
    boxes.append(Box([0, 0, h - cfg.slab_thickness], [lx, ly, h]))
    # perimeter
    boxes.append(Box([0, 0, 0], [wt, ly, h]))
    boxes.append(Box([lx - wt, 0, 0], [lx, ly, h]))
    boxes.append(Box([0, 0, 0], [lx, wt, h]))
    boxes.append(Box([0, ly - wt, 0], [lx, ly, h]))

    yw0 = wt + cfg.corridor_width          # divider wall low y
    yw1 = yw0 + wt
    y_room_hi = yw1 + room_depth

    rooms = []
    doors = []
    x = wt
    z0 = cfg.slab_thickness
    z_door = z0 + cfg.door_height
    for i in range(k):
        x0 = x + wt                        # room interior start (after partition)
        x1 = x0 + room_widths[i]
        # partition wall before the room
        boxes.append(Box([x, yw1, 0], [x + wt, ly - wt, h]))
        # door gap position within the room span, margin from room corners
        w = door_widths[i]
        margin = 0.3
        gap0 = float(snap(rng.uniform(x0 + margin, x1 - margin - w)))
        gap1 = gap0 + w
        cx = gap0 + w / 2
        # divider wall segments around the gap, plus lintel above the door
        boxes.append(Box([x0 - wt, yw0, 0], [gap0, yw1, h]))
        boxes.append(Box([gap1, yw0, 0], [x1 + wt, yw1, h]))
        boxes.append(Box([gap0, yw0, z_door], [gap1, yw1, h]))
        rooms.append((x0, yw1, x1, y_room_hi))
        doors.append(Door([cx, (yw0 + yw1) / 2.0], [0.0, 1.0], w))
        x = x1
    # final partition wall and solid filler over the remaining strip
    boxes.append(Box([x, yw1, 0], [x + wt, ly - wt, h]))
    if x + wt < lx - wt - 1e-9:
        boxes.append(Box([x + wt, yw0, 0], [lx - wt, ly - wt, h]))

    world = World(bounds=Box([0, 0, 0], [lx, ly, h]), boxes=boxes, rooms=rooms,
                  doors=doors, seed=int(seed), resolution=cfg.resolution)
    return world


def render_depth(world: World, pose: Pose, camera: CameraModel, stride: int = 1):
    """Simulated depth scan: list of (endpoint, hit_flag) per camera ray.

    Pure function of (world, pose, camera).  Each ray reports the first box
    intersection within max range, or the max-range point as a miss.
    """
    p = pose.position.astype(float)
    dirs = camera.ray_directions(pose.yaw, stride=stride)
    eps = 1e-12
    d = np.where(np.abs(dirs) < eps, eps, dirs)
    lo = np.array([b.lo for b in world.boxes])   # (B,3)
    hi = np.array([b.hi for b in world.boxes])
    t1 = (lo[None, :, :] - p[None, None, :]) / d[:, None, :]
    t2 = (hi[None, :, :] - p[None, None, :]) / d[:, None, :]
    tnear = np.max(np.minimum(t1, t2), axis=2)
    tfar = np.min(np.maximum(t1, t2), axis=2)
    valid = (tnear <= tfar) & (tfar > 0) & (tnear > 0) & (tnear <= camera.max_range)
    tnear = np.where(valid, tnear, np.inf)
    t_hit = np.min(tnear, axis=1)
    hit = np.isfinite(t_hit)
    t = np.where(hit, t_hit, camera.max_range)
    ends = p[None, :] + dirs * t[:, None]
    return [(ends[i], bool(hit[i])) for i in range(len(ends))]


def coverage(vmap, world: World) -> float:
    """Fraction of observable ground-truth voxels whose belief is known."""
    if vmap.dims != world.dims or abs(vmap.resolution - world.resolution) > 1e-12:
        raise ValueError("map and world bounds/resolution mismatch")
    if not np.allclose(vmap.origin, world.bounds.lo):
        raise ValueError("map and world origin mismatch")
    obs = world.observable_mask()
    total = int(obs.sum())
    if total == 0:
        return 0.0
    known = int(((vmap.trinary != -1) & obs).sum())
    return known / total


# -- world file format --------------------------------------------------------

def save_world(path, world: World) -> None:
    lines = []
    b = world.bounds
    lines.append("SEED %d" % world.seed)
    lines.append("BOUNDS %.6f %.6f %.6f %.6f %.6f %.6f" %
                 (b.lo[0], b.lo[1], b.lo[2], b.hi[0], b.hi[1], b.hi[2]))
    for r in world.rooms:
        lines.append("ROOM %.6f %.6f %.6f %.6f" % tuple(r))
    for dr in world.doors:
        lines.append("DOOR %.6f %.6f %.6f %.6f %.6f" %
                     (dr.center[0], dr.center[1], dr.normal[0], dr.normal[1], dr.width))
    for bx in world.boxes:
        lines.append("BOX %.6f %.6f %.6f %.6f %.6f %.6f" %
                     (bx.lo[0], bx.lo[1], bx.lo[2], bx.hi[0], bx.hi[1], bx.hi[2]))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_world(path, resolution: float = 0.1) -> World:
    seed = 0
    bounds = None
    rooms = []
    doors = []
    boxes = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            tag, vals = parts[0], [float(v) for v in parts[1:]]
            if tag == "SEED":
                seed = int(vals[0])
            elif tag == "BOUNDS":
                bounds = Box(vals[:3], vals[3:])
            elif tag == "ROOM":
                rooms.append(tuple(vals))
            elif tag == "DOOR":
                doors.append(Door(vals[:2], vals[2:4], vals[4]))
            elif tag == "BOX":
                boxes.append(Box(vals[:3], vals[3:]))
            else:
                raise ValueError(f"unknown world record {tag!r}")
    if bounds is None:
        raise ValueError("world file missing BOUNDS")
    return World(bounds=bounds, boxes=boxes, rooms=rooms, doors=doors,
                 seed=seed, resolution=resolution)


def make_map_for_world(world: World, **kwargs):
    from .voxel_map import VoxelMap
    return VoxelMap(world.bounds.lo, world.resolution, world.dims, **kwargs)
