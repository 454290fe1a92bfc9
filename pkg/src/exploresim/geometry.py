"""Small geometric helpers shared across the engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def unwrap_sequence(angles):
    """Unwrap a sequence of angles so adjacent differences are <= pi."""
    out = [float(angles[0])]
    for a in angles[1:]:
        out.append(out[-1] + wrap_angle(float(a) - out[-1]))
    return out


@dataclass
class Pose:
    """Position plus yaw; the only orientation freedom the sensor has."""

    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)


@dataclass
class Aabb:
    """Inclusive integer voxel bounding box."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=np.int64)
        self.max = np.asarray(self.max, dtype=np.int64)
        if np.any(self.min > self.max):
            raise ValueError(f"Aabb min {self.min} exceeds max {self.max}")

    def dilated(self, r: int) -> "Aabb":
        return Aabb(self.min - r, self.max + r)

    def clipped(self, dims) -> "Aabb":
        dims = np.asarray(dims, dtype=np.int64)
        return Aabb(np.clip(self.min, 0, dims - 1), np.clip(self.max, 0, dims - 1))

    def intersects(self, other: "Aabb") -> bool:
        return bool(np.all(self.min <= other.max) and np.all(other.min <= self.max))

    def contains_voxel(self, v) -> bool:
        v = np.asarray(v)
        return bool(np.all(v >= self.min) and np.all(v <= self.max))

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))


@dataclass
class Box:
    """Axis-aligned box in world coordinates (meters)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - margin) and np.all(p <= self.hi + margin))

    def distance(self, p) -> float:
        """Distance from a point to the box surface (0 inside)."""
        p = np.asarray(p, dtype=float)
        d = np.maximum(np.maximum(self.lo - p, p - self.hi), 0.0)
        return float(np.linalg.norm(d))


def point_box_clearance(p, boxes) -> float:
    """Min distance from p to any box in the list (inf if none)."""
    best = math.inf
    for b in boxes:
        d = b.distance(p)
        if d < best:
            best = d
    return best
