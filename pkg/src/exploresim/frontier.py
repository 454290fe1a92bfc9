"""Incremental frontier detection, region-growing clustering, and
PCA-based splitting of elongated clusters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import Aabb

# Largest covariance eigenvalue allowed before a cluster is bisected;
# corresponds to a 1.0 m standard deviation along the principal axis.
LAMBDA_SPLIT = 1.0
MIN_CLUSTER_CELLS = 5


@dataclass
class FrontierCluster:
    id: int
    cells: np.ndarray                  # (N,3) voxel coordinates
    centroid: np.ndarray               # meters
    bbox: Aabb
    label: str = "unlabeled"           # unlabeled | room | corridor
    viewpoints: list = field(default_factory=list)
    active: bool = True                # False: sensor-shadow noise, kept only
                                       # so incremental bookkeeping stays exact

    @property
    def size(self) -> int:
        return len(self.cells)


def _is_frontier_cell(trin, v) -> bool:
    i, j, k = int(v[0]), int(v[1]), int(v[2])
    nx, ny, nz = trin.shape
    if trin[i, j, k] != 0:
        return False
    if i > 0 and trin[i - 1, j, k] == -1:
        return True
    if i < nx - 1 and trin[i + 1, j, k] == -1:
        return True
    if j > 0 and trin[i, j - 1, k] == -1:
        return True
    if j < ny - 1 and trin[i, j + 1, k] == -1:
        return True
    if k > 0 and trin[i, j, k - 1] == -1:
        return True
    if k < nz - 1 and trin[i, j, k + 1] == -1:
        return True
    return False


def _grow_clusters(cells) -> list:
    """Group cells ((N,3) array or set of voxel tuples, possibly with
    duplicates) into 26-connected components."""
    if isinstance(cells, np.ndarray):
        arr = cells.astype(np.int64, copy=False)
    elif cells:
        arr = np.array(sorted(cells), dtype=np.int64)
    else:
        return []
    if len(arr) == 0:
        return []
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    shape = tuple(hi - lo + 1)
    # 1D dedupe/sort on flattened indices; flat order is the lexicographic
    # cell order, so cluster enumeration stays deterministic
    flat = np.unique(np.ravel_multi_index((arr - lo).T, shape))
    arr = np.stack(np.unravel_index(flat, shape), axis=1) + lo
    mask = np.zeros(shape, dtype=bool)
    mask.ravel()[flat] = True
    lab, n = ndimage.label(mask, structure=np.ones((3, 3, 3), dtype=bool))
    at = lab.ravel()[flat]
    order = np.argsort(at, kind="stable")
    bounds = np.searchsorted(at[order], np.arange(1, n + 2))
    return [arr[order[bounds[i]:bounds[i + 1]]] for i in range(n)]


def _frontier_mask_box(trin, lo, hi) -> np.ndarray:
    """Boolean frontier mask for the inclusive voxel box [lo, hi]."""
    dims = np.asarray(trin.shape)
    pl = np.maximum(np.asarray(lo) - 1, 0)
    ph = np.minimum(np.asarray(hi) + 1, dims - 1)
    sub = trin[pl[0]:ph[0] + 1, pl[1]:ph[1] + 1, pl[2]:ph[2] + 1]
    unk = sub == -1
    adj = np.zeros(sub.shape, dtype=bool)
    adj[:-1, :, :] |= unk[1:, :, :]
    adj[1:, :, :] |= unk[:-1, :, :]
    adj[:, :-1, :] |= unk[:, 1:, :]
    adj[:, 1:, :] |= unk[:, :-1, :]
    adj[:, :, :-1] |= unk[:, :, 1:]
    adj[:, :, 1:] |= unk[:, :, :-1]
    m = (sub == 0) & adj
    off = np.asarray(lo) - pl
    sz = np.asarray(hi) - np.asarray(lo)
    return m[off[0]:off[0] + sz[0] + 1, off[1]:off[1] + sz[1] + 1,
             off[2]:off[2] + sz[2] + 1]


def _split_by_pca(cells, lambda_split_vox2: float) -> list:
    """Recursively bisect a cell array by the plane through the centroid
    normal to the principal axis while the largest covariance eigenvalue
    (in voxel^2 units) exceeds the threshold."""
    out = []
    stack = [cells]
    while stack:
        c = stack.pop()
        if len(c) < 2:
            out.append(c)
            continue
        mean = c.mean(axis=0)
        cov = np.cov((c - mean).T)
        vals, vecs = np.linalg.eigh(cov)
        if vals[-1] <= lambda_split_vox2:
            out.append(c)
            continue
        axis = vecs[:, -1]
        proj = (c - mean) @ axis
        a = c[proj <= 0]
        b = c[proj > 0]
        if len(a) == 0 or len(b) == 0:
            out.append(c)
            continue
        stack.append(a)
        stack.append(b)
    return out


class FrontierRegistry:
    """Holds the live frontier clusters; mutated only by the runtime loop."""

    def __init__(self, lambda_split: float = LAMBDA_SPLIT,
                 min_cells: int = MIN_CLUSTER_CELLS):
        self.clusters: dict[int, FrontierCluster] = {}
        self.lambda_split = lambda_split
        self.min_cells = min_cells
        self._next_id = 0

    def _new_cluster(self, cells, vmap) -> FrontierCluster:
        cid = self._next_id
        self._next_id += 1
        centroid = vmap.voxel_center(cells.mean(axis=0))
        bbox = Aabb(cells.min(axis=0), cells.max(axis=0))
        return FrontierCluster(cid, cells, centroid, bbox,
                               active=len(cells) >= self.min_cells)

    def all_cells(self) -> set:
        s = set()
        for c in self.clusters.values():
            s.update(map(tuple, c.cells))
        return s

    def update(self, vmap, changed: Aabb | None):
        """Incremental update over a changed (already dilated) voxel box.

        Removes clusters intersecting the box whose cell sets are stale, and
        grows new clusters from fresh frontier cells inside the box plus the
        still-valid cells of removed clusters.  Returns (removed ids, added
        clusters).
        """
        if changed is None:
            return [], []
        trin = vmap.trinary
        changed = changed.clipped(vmap.dims)
        lo, hi = changed.min, changed.max
        fmask = _frontier_mask_box(trin, lo, hi)

        removed = []
        seeds = []
        covered = np.zeros(fmask.shape, dtype=bool)
        if self.clusters:
            live = list(self.clusters.items())
            bmin = np.array([cl.bbox.min for _, cl in live])
            bmax = np.array([cl.bbox.max for _, cl in live])
            hits = np.all(bmin <= hi, axis=1) & np.all(lo <= bmax, axis=1)
        else:
            live, hits = [], np.zeros(0, dtype=bool)
        for idx in np.flatnonzero(hits):
            cid, cl = live[idx]
            cells = cl.cells
            inbox = np.all((cells >= lo) & (cells <= hi), axis=1)
            inb = cells[inbox]
            rel = (inb - lo).T
            ok = fmask[rel[0], rel[1], rel[2]] if len(inb) else \
                np.zeros(0, dtype=bool)
            if ok.all():
                covered[rel[0], rel[1], rel[2]] = True
                continue
            removed.append(cid)
            del self.clusters[cid]
            # out-of-box cells are untouched, hence still frontier
            seeds.append(cells[~inbox])
            seeds.append(inb[ok])

        seeds.append(np.argwhere(fmask & ~covered) + lo)
        seeds = np.concatenate(seeds) if seeds else np.zeros((0, 3), int)

        added = []
        lam_vox2 = self.lambda_split / (vmap.resolution ** 2)
        for comp in _grow_clusters(seeds):
            for part in _split_by_pca(comp, lam_vox2):
                cl = self._new_cluster(part, vmap)
                self.clusters[cl.id] = cl
                added.append(cl)
        return removed, added

    def active_clusters(self) -> list:
        return [c for c in self.clusters.values() if c.active]


def detect_all_frontiers(vmap) -> list:
    """From-scratch detection over the whole map (oracle for the
    incremental path; also used to bootstrap)."""
    reg = FrontierRegistry()
    dims = vmap.dims
    box = Aabb((0, 0, 0), (dims[0] - 1, dims[1] - 1, dims[2] - 1))
    reg.update(vmap, box)
    return list(reg.clusters.values())
