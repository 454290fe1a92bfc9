"""Reader for trinary occupancy block files.

Layout: magic "SEERBLK1", three little-endian u32 dims (x, y, z), then
int8 trinary values {-1 unknown, 0 free, 1 occupied} with x varying
fastest.
"""

from __future__ import annotations

import struct

import numpy as np

BLOCK_MAGIC = b"SEERBLK1"


def read_block(path) -> np.ndarray:
    """Returns the (nx, ny, nz) int8 value array, indexed [x, y, z]."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != BLOCK_MAGIC:
            raise ValueError(f"bad block magic {magic!r} in {path}")
        hdr = f.read(12)
        if len(hdr) != 12:
            raise ValueError(f"truncated block header in {path}")
        nx, ny, nz = struct.unpack("<III", hdr)
        data = np.frombuffer(f.read(nx * ny * nz), dtype=np.int8)
        if data.size != nx * ny * nz:
            raise ValueError(f"truncated block body in {path}")
    values = data.reshape((nx, ny, nz), order="F").copy()
    if not np.isin(values, (-1, 0, 1)).all():
        raise ValueError(f"block values outside {{-1,0,1}} in {path}")
    return values
