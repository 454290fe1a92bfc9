"""Fixed three-layer 3-D conv net and its portable weights format.

Weights layout: magic "SEERNET1", u32 layer count, then per layer five
u32 kernel dims (out, in, kx, ky, kz), the float32 kernel with kx
varying fastest (then ky, kz, in, out), and the float32 bias.  All
little-endian.
"""

from __future__ import annotations

import struct

import numpy as np
import torch

NET_MAGIC = b"SEERNET1"

# (out, in, kx, ky, kz) per layer; ReLU between layers, logistic output
TINYNET_SHAPES = ((8, 3, 3, 3, 3), (8, 8, 3, 3, 3), (1, 8, 1, 1, 1))


class TinyNet(torch.nn.Module):
    def __init__(self):
        super().__init__()
        convs = []
        for out_ch, in_ch, kx, ky, kz in TINYNET_SHAPES:
            convs.append(torch.nn.Conv3d(in_ch, out_ch, (kx, ky, kz),
                                         padding=(kx // 2, ky // 2, kz // 2)))
        self.convs = torch.nn.ModuleList(convs)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (B, 3, nx, ny, nz) one-hot input; returns (B, nx, ny, nz)
        logits."""
        for conv in self.convs[:-1]:
            x = torch.relu(conv(x))
        return self.convs[-1](x)[:, 0]


def one_hot(values: np.ndarray) -> torch.Tensor:
    """Trinary (nx, ny, nz) -> (3, nx, ny, nz) channels: unknown, free,
    occupied."""
    out = np.zeros((3,) + values.shape, dtype=np.float32)
    out[0] = values == -1
    out[1] = values == 0
    out[2] = values == 1
    return torch.from_numpy(out)


def predict_probs(model: TinyNet, values: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        logits = model(one_hot(values)[None])
    return torch.sigmoid(logits)[0].double().numpy()


def model_layers(model: TinyNet):
    """[(kernel (out,in,kx,ky,kz) float32, bias (out,) float32), ...]"""
    return [(conv.weight.detach().numpy().astype(np.float32),
             conv.bias.detach().numpy().astype(np.float32))
            for conv in model.convs]


def export_weights(model: TinyNet, path) -> None:
    layers = model_layers(model)
    with open(path, "wb") as f:
        f.write(NET_MAGIC)
        f.write(struct.pack("<I", len(layers)))
        for li, ((kern, bias), shape) in enumerate(zip(layers,
                                                       TINYNET_SHAPES)):
            if tuple(kern.shape) != shape or bias.shape != (shape[0],):
                raise ValueError(
                    f"layer {li}: shape {tuple(kern.shape)}/{bias.shape} "
                    f"does not match {shape}")
            f.write(struct.pack("<IIIII", *kern.shape))
            flat = np.ascontiguousarray(kern.transpose(0, 1, 4, 3, 2)).ravel()
            f.write(flat.astype("<f4").tobytes())
            f.write(bias.astype("<f4").tobytes())


def import_weights(path) -> TinyNet:
    with open(path, "rb") as f:
        if f.read(8) != NET_MAGIC:
            raise ValueError("bad weights magic")
        (n_layers,) = struct.unpack("<I", f.read(4))
        if n_layers != len(TINYNET_SHAPES):
            raise ValueError(f"expected {len(TINYNET_SHAPES)} layers, "
                             f"got {n_layers}")
        model = TinyNet()
        for li in range(n_layers):
            hdr = f.read(20)
            if len(hdr) != 20:
                raise ValueError(f"truncated weights file at layer {li}")
            shape = struct.unpack("<IIIII", hdr)
            if shape != TINYNET_SHAPES[li]:
                raise ValueError(f"layer {li}: unexpected shape {shape}")
            nk = int(np.prod(shape))
            buf = f.read(nk * 4)
            if len(buf) != nk * 4:
                raise ValueError(f"truncated kernel at layer {li}")
            raw = np.frombuffer(buf, dtype="<f4")
            o, i, kx, ky, kz = shape
            kern = raw.reshape(o, i, kz, ky, kx).transpose(0, 1, 4, 3, 2)
            bbuf = f.read(o * 4)
            if len(bbuf) != o * 4:
                raise ValueError(f"truncated bias at layer {li}")
            braw = np.frombuffer(bbuf, dtype="<f4")
            with torch.no_grad():
                model.convs[li].weight.copy_(
                    torch.from_numpy(kern.copy().astype(np.float32)))
                model.convs[li].bias.copy_(
                    torch.from_numpy(braw.copy().astype(np.float32)))
    return model
