"""Trinary occupancy blocks and their binary file format.

File layout: magic "SEERBLK1", three u32 little-endian dims (x, y, z),
then int8 trinary values with x varying fastest.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

BLOCK_MAGIC = b"SEERBLK1"

# Fixed prediction block geometry: 8 m x 8 m x 2.4 m at 0.1 m resolution.
BLOCK_DIMS = (80, 80, 24)
BLOCK_RES = 0.1


@dataclass
class OccupancyBlock:
    """Trinary {-1 unknown, 0 free, 1 occupied} voxel block.

    values is indexed [x, y, z].  origin is the world position of the
    low corner of voxel (0,0,0), kept so predictions can be mapped back
    onto the map grid.
    """

    values: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    resolution: float = BLOCK_RES

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int8)
        self.origin = np.asarray(self.origin, dtype=float)
        bad = ~np.isin(self.values, (-1, 0, 1))
        if bad.any():
            raise ValueError("block values must be in {-1, 0, 1}")

    @property
    def dims(self):
        return self.values.shape

    def unknown_mask(self) -> np.ndarray:
        return self.values == -1


@dataclass
class PredictedBlock:
    """Per-voxel occupancy probabilities for a subset of an input block.

    mask marks the voxels that carry a prediction; it never covers a voxel
    that was known in the input block.
    """

    probs: np.ndarray
    mask: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    resolution: float = BLOCK_RES

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.probs.shape != self.mask.shape:
            raise ValueError("probs/mask shape mismatch")
        if np.any(self.probs < 0.0) or np.any(self.probs > 1.0):
            raise ValueError("probabilities outside [0, 1]")
        self.origin = np.asarray(self.origin, dtype=float)

    def trinary(self, occ_prob: float = 0.65, free_prob: float = 0.35) -> np.ndarray:
        """Trinary view for gain lookup; uncertain predictions stay unknown."""
        out = np.full(self.probs.shape, -1, dtype=np.int8)
        out[self.mask & (self.probs > occ_prob)] = 1
        out[self.mask & (self.probs < free_prob)] = 0
        return out


def write_block(path, block: OccupancyBlock) -> None:
    nx, ny, nz = block.dims
    with open(path, "wb") as f:
        f.write(BLOCK_MAGIC)
        f.write(struct.pack("<III", nx, ny, nz))
        f.write(np.ascontiguousarray(block.values.ravel(order="F")).tobytes())


def read_block(path) -> OccupancyBlock:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != BLOCK_MAGIC:
            raise ValueError(f"bad block magic {magic!r}")
        nx, ny, nz = struct.unpack("<III", f.read(12))
        data = np.frombuffer(f.read(nx * ny * nz), dtype=np.int8)
        if data.size != nx * ny * nz:
            raise ValueError("truncated block file")
    values = data.reshape((nx, ny, nz), order="F")
    return OccupancyBlock(values.copy())
