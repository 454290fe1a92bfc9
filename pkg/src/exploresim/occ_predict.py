"""Pluggable occupancy prediction over trinary blocks, the training loss
functions, weight file IO, and training-pair generation.

Weights file layout ("SEERNET1"): magic, u32 layer count, then per layer
u32 x 5 shape (out, in, kx, ky, kz) followed by float32 little-endian
kernel and bias.  Kernel values are stored x-fastest: kx varies fastest,
then ky, kz, in, out.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .blocks import BLOCK_DIMS, BLOCK_RES, OccupancyBlock, PredictedBlock

NET_MAGIC = b"SEERNET1"
PROB_EPS = 1e-7

# fixed tiny conv net architecture: (out, in, kx, ky, kz)
TINYNET_SHAPES = ((8, 3, 3, 3, 3), (8, 8, 3, 3, 3), (1, 8, 1, 1, 1))

SLAB_EXTRAPOLATION_RANGE_M = 2.0


@dataclass
class LossWeights:
    w_occ: float = 2.0
    w_struct: float = 1.0
    alpha: float = 5.0
    beta: float = 2.0

    def __post_init__(self):
        for v in (self.w_occ, self.w_struct, self.alpha, self.beta):
            if v < 0:
                raise ValueError("loss weights must be nonnegative")


# -- losses -------------------------------------------------------------------

def loss_occ(pred: PredictedBlock | np.ndarray, target: OccupancyBlock,
             input_block: OccupancyBlock, alpha: float = 5.0) -> float:
    """Weighted binary cross-entropy over voxels with a known target.

    Weight 0 where the target is unknown, alpha where the input was unknown
    and the target occupied, 1 otherwise.  Normalized by the total voxel
    count N.
    """
    probs = pred.probs if isinstance(pred, PredictedBlock) else np.asarray(pred)
    tar = target.values
    inp = input_block.values
    lam = np.ones(tar.shape)
    lam[tar == -1] = 0.0
    lam[(inp == -1) & (tar == 1)] = alpha
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    t = (tar == 1).astype(float)
    bce = t * np.log(p) + (1.0 - t) * np.log(1.0 - p)
    return float(-(lam * bce).sum() / tar.size)


def loss_struct(pred: PredictedBlock | np.ndarray, target: OccupancyBlock,
                beta: float = 2.0) -> float:
    """Weighted L1 between per-column occupied counts (prediction
    thresholded at 0.5), weight beta where the target column is more than
    half occupied."""
    probs = pred.probs if isinstance(pred, PredictedBlock) else np.asarray(pred)
    tar = target.values
    nz = tar.shape[2]
    pred_occ = (probs > 0.5).sum(axis=2)
    tar_occ = (tar == 1).sum(axis=2)
    phi = np.where(tar_occ > nz / 2.0, beta, 1.0)
    return float((phi * np.abs(pred_occ - tar_occ)).sum() /
                 (tar.shape[0] * tar.shape[1]))


def loss_total(pred, target: OccupancyBlock, input_block: OccupancyBlock,
               w: LossWeights | None = None) -> float:
    w = w or LossWeights()
    return (w.w_occ * loss_occ(pred, target, input_block, w.alpha) +
            w.w_struct * loss_struct(pred, target, w.beta))


# -- weight file IO -----------------------------------------------------------

def _pack_kernel(k: np.ndarray) -> np.ndarray:
    # (out,in,kx,ky,kz) -> flat with kx fastest, then ky, kz, in, out
    return np.ascontiguousarray(k.transpose(0, 1, 4, 3, 2)).ravel(order="C")


def _unpack_kernel(flat: np.ndarray, shape) -> np.ndarray:
    o, i, kx, ky, kz = shape
    return flat.reshape(o, i, kz, ky, kx).transpose(0, 1, 4, 3, 2).copy()


def write_weights(path, layers) -> None:
    """layers: list of (kernel (out,in,kx,ky,kz) float array, bias (out,))."""
    with open(path, "wb") as f:
        f.write(NET_MAGIC)
        f.write(struct.pack("<I", len(layers)))
        for kern, bias in layers:
            kern = np.asarray(kern, dtype=np.float32)
            bias = np.asarray(bias, dtype=np.float32)
            if kern.ndim != 5 or bias.shape != (kern.shape[0],):
                raise ValueError(f"bad layer shapes {kern.shape} / {bias.shape}")
            f.write(struct.pack("<IIIII", *kern.shape))
            f.write(_pack_kernel(kern).astype("<f4").tobytes())
            f.write(bias.astype("<f4").tobytes())


def read_weights(path):
    with open(path, "rb") as f:
        if f.read(8) != NET_MAGIC:
            raise ValueError("bad weights magic")
        (n_layers,) = struct.unpack("<I", f.read(4))
        layers = []
        for li in range(n_layers):
            hdr = f.read(20)
            if len(hdr) != 20:
                raise ValueError(f"truncated weights file at layer {li}")
            shape = struct.unpack("<IIIII", hdr)
            nk = int(np.prod(shape))
            raw = f.read(nk * 4)
            if len(raw) != nk * 4:
                raise ValueError(f"truncated kernel at layer {li}")
            kern = _unpack_kernel(np.frombuffer(raw, dtype="<f4").astype(np.float32),
                                  shape)
            raw = f.read(shape[0] * 4)
            if len(raw) != shape[0] * 4:
                raise ValueError(f"truncated bias at layer {li}")
            bias = np.frombuffer(raw, dtype="<f4").astype(np.float32)
            layers.append((kern, bias))
    return layers


def validate_tinynet(layers) -> None:
    if len(layers) != len(TINYNET_SHAPES):
        raise ValueError(f"expected {len(TINYNET_SHAPES)} layers, got {len(layers)}")
    for li, ((kern, bias), shape) in enumerate(zip(layers, TINYNET_SHAPES)):
        if tuple(kern.shape) != shape:
            raise ValueError(f"layer {li}: shape {tuple(kern.shape)} != {shape}")


def one_hot_block(values: np.ndarray) -> np.ndarray:
    """Trinary -> 3 channels: 0 unknown, 1 free, 2 occupied."""
    out = np.zeros((3,) + values.shape, dtype=np.float32)
    out[0] = values == -1
    out[1] = values == 0
    out[2] = values == 1
    return out


def tinynet_forward(layers, block: OccupancyBlock) -> PredictedBlock:
    """Deterministic forward pass of the fixed 3-layer 3-D conv net.

    Input is the one-hot trinary block; convolutions are cross-correlations
    with zero padding; output is the logistic of the final channel.
    """
    validate_tinynet(layers)
    x = one_hot_block(block.values).astype(np.float64)
    for li, (kern, bias) in enumerate(layers):
        out_ch = kern.shape[0]
        y = np.empty((out_ch,) + x.shape[1:], dtype=np.float64)
        for o in range(out_ch):
            acc = np.zeros(x.shape[1:], dtype=np.float64)
            for i in range(kern.shape[1]):
                acc += ndimage.correlate(x[i], kern[o, i].astype(np.float64),
                                         mode="constant", cval=0.0)
            y[o] = acc + bias[o]
        x = np.maximum(y, 0.0) if li < len(layers) - 1 else y
    probs = 1.0 / (1.0 + np.exp(-x[0]))
    return PredictedBlock(probs, block.unknown_mask(),
                          origin=block.origin, resolution=block.resolution)


# -- predictors ---------------------------------------------------------------

class NullPredictor:
    """Predicts nothing; gain reduces to the classical estimate."""

    def predict(self, block: OccupancyBlock, context=None) -> PredictedBlock:
        z = np.zeros(block.dims)
        return PredictedBlock(z, np.zeros(block.dims, dtype=bool),
                              origin=block.origin, resolution=block.resolution)


class OracleSimPredictor:
    """Perfect predictor backed by the simulator ground truth."""

    def __init__(self, world):
        self.world = world
        self._gt = world.ground_truth()

    def predict(self, block: OccupancyBlock, context=None) -> PredictedBlock:
        gt = self._gt
        dims = np.asarray(gt.shape)
        # map block voxels onto world voxels
        bx, by, bz = block.dims
        ii, jj, kk = np.meshgrid(np.arange(bx), np.arange(by), np.arange(bz),
                                 indexing="ij")
        pts = block.origin[None, None, None, :] + \
            (np.stack([ii, jj, kk], axis=-1) + 0.5) * block.resolution
        g = np.floor((pts - self.world.bounds.lo) / self.world.resolution).astype(int)
        inside = np.all(g >= 0, axis=-1) & np.all(g < dims[None, None, None, :], axis=-1)
        gi = np.clip(g[..., 0], 0, dims[0] - 1)
        gj = np.clip(g[..., 1], 0, dims[1] - 1)
        gk = np.clip(g[..., 2], 0, dims[2] - 1)
        probs = np.where(gt[gi, gj, gk] == 1, 1.0, 0.0)
        mask = block.unknown_mask() & inside
        probs = np.where(mask, probs, 0.0)
        return PredictedBlock(probs, mask, origin=block.origin,
                              resolution=block.resolution)


class SlabExtrapolationPredictor:
    """Copies the trinary value of the nearest known voxel along the inward
    horizontal direction (toward the block center), up to a fixed horizon."""

    def __init__(self, d_max: float = SLAB_EXTRAPOLATION_RANGE_M):
        self.d_max = d_max

    def predict(self, block: OccupancyBlock, context=None) -> PredictedBlock:
        vals = block.values
        bx, by, bz = block.dims
        probs = np.zeros(block.dims)
        mask = np.zeros(block.dims, dtype=bool)
        cx, cy = (bx - 1) / 2.0, (by - 1) / 2.0
        max_steps = int(self.d_max / block.resolution)
        unknown = np.argwhere(vals == -1)
        if len(unknown) == 0:
            return PredictedBlock(probs, mask, origin=block.origin,
                                  resolution=block.resolution)
        i0, j0, k0 = unknown[:, 0], unknown[:, 1], unknown[:, 2]
        dx = cx - i0
        dy = cy - j0
        n = np.maximum(np.abs(dx), np.abs(dy))
        alive = n > 1e-9
        n = np.where(alive, n, 1.0)
        ux, uy = dx / n, dy / n
        x = i0.astype(float)
        y = j0.astype(float)
        for _ in range(max_steps):
            if not alive.any():
                break
            x = np.where(alive, x + ux, x)
            y = np.where(alive, y + uy, y)
            ii = np.rint(x).astype(np.int64)
            jj = np.rint(y).astype(np.int64)
            inb = (ii >= 0) & (ii < bx) & (jj >= 0) & (jj < by)
            alive &= inb
            v = np.full(len(unknown), -1, dtype=vals.dtype)
            a = alive.nonzero()[0]
            v[a] = vals[ii[a], jj[a], k0[a]]
            hit = alive & (v != -1)
            h = hit.nonzero()[0]
            mask[i0[h], j0[h], k0[h]] = True
            probs[i0[h], j0[h], k0[h]] = (v[h] == 1).astype(float)
            alive &= ~hit
        return PredictedBlock(probs, mask, origin=block.origin,
                              resolution=block.resolution)


class TinyConvNetPredictor:
    """Forward pass of the fixed tiny 3-D conv net loaded from a file."""

    def __init__(self, weights_path):
        layers = read_weights(weights_path)
        validate_tinynet(layers)
        self.layers = layers

    def predict(self, block: OccupancyBlock, context=None) -> PredictedBlock:
        return tinynet_forward(self.layers, block)


def make_predictor(kind: str, world=None, weights_path=None):
    kind = kind.lower()
    if kind == "null":
        return NullPredictor()
    if kind in ("oracle", "oraclesim"):
        if world is None:
            raise ValueError("oracle predictor needs the simulator world")
        return OracleSimPredictor(world)
    if kind in ("slab", "slabextrapolation"):
        return SlabExtrapolationPredictor()
    if kind in ("tinynet", "tinyconvnet"):
        if weights_path is None:
            raise ValueError("tinynet predictor needs a weights file")
        return TinyConvNetPredictor(weights_path)
    raise ValueError(f"unknown predictor kind {kind!r}")


# -- training pairs -----------------------------------------------------------

def make_training_pair(world, scan_poses, rng, camera=None, center=None):
    """Build one (input, target) block pair from simulated scans.

    Target integrates every scan; input integrates a random 50% subset and
    is then cut by a random vertical plane through the block center (one
    side forced unknown).
    """
    from .sim_world import CameraModel, make_map_for_world, render_depth

    camera = camera or CameraModel()
    if center is None:
        center = (world.bounds.lo + world.bounds.hi) / 2.0

    def build(poses):
        m = make_map_for_world(world)
        for pose in poses:
            m.integrate_scan(pose, render_depth(world, pose, camera))
        return m.extract_block(center)

    tar = build(scan_poses)
    n = len(scan_poses)
    keep = rng.choice(n, size=max(1, n // 2), replace=False)
    inp = build([scan_poses[i] for i in sorted(keep)])

    phi = rng.uniform(0.0, np.pi)
    nxv, nyv = np.cos(phi), np.sin(phi)
    bx, by, _ = inp.dims
    ii, jj = np.meshgrid(np.arange(bx) - (bx - 1) / 2.0,
                         np.arange(by) - (by - 1) / 2.0, indexing="ij")
    cut = (ii * nxv + jj * nyv) > 0
    vals = inp.values.copy()
    vals[cut, :] = -1
    inp = OccupancyBlock(vals, origin=inp.origin, resolution=inp.resolution)
    return inp, tar
