"""Loss functions over trinary occupancy blocks.

`loss_occ` / `loss_struct` / `loss_total` are the exact evaluation
metrics (float64, thresholded column counts).  `training_loss` is the
differentiable objective used for gradient steps: the same masked BCE
plus a column-count term with expected (summed-probability) counts in
place of the hard threshold, with identical lambda/phi masking.
"""

from __future__ import annotations

import numpy as np
import torch

PROB_EPS = 1e-7


def _np(x):
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy()
    return np.asarray(x)


def lambda_mask(inp: np.ndarray, tar: np.ndarray, alpha: float) -> np.ndarray:
    """Per-voxel BCE weight: 0 where the target is unknown, alpha where
    the input was unknown and the target occupied, 1 otherwise."""
    lam = np.ones(tar.shape)
    lam[tar == -1] = 0.0
    lam[(inp == -1) & (tar == 1)] = alpha
    return lam


def loss_occ(probs, tar, inp, alpha: float = 5.0) -> float:
    probs, tar, inp = _np(probs).astype(np.float64), _np(tar), _np(inp)
    lam = lambda_mask(inp, tar, alpha)
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    t = (tar == 1).astype(np.float64)
    bce = t * np.log(p) + (1.0 - t) * np.log(1.0 - p)
    return float(-(lam * bce).sum() / tar.size)


def loss_struct(probs, tar, beta: float = 2.0) -> float:
    probs, tar = _np(probs), _np(tar)
    nz = tar.shape[2]
    pred_occ = (probs > 0.5).sum(axis=2)
    tar_occ = (tar == 1).sum(axis=2)
    phi = np.where(tar_occ > nz / 2.0, beta, 1.0)
    return float((phi * np.abs(pred_occ - tar_occ)).sum() /
                 (tar.shape[0] * tar.shape[1]))


def loss_total(probs, tar, inp, w_occ: float = 2.0, w_struct: float = 1.0,
               alpha: float = 5.0, beta: float = 2.0) -> float:
    return (w_occ * loss_occ(probs, tar, inp, alpha) +
            w_struct * loss_struct(probs, tar, beta))


def training_loss(logits: torch.Tensor, tar: torch.Tensor, lam: torch.Tensor,
                  phi: torch.Tensor, w_occ: float,
                  w_struct: float) -> torch.Tensor:
    """Differentiable batch objective.

    logits/tar/lam: (B, nx, ny, nz); phi: (B, nx, ny) column weights.
    The column term of the exact loss counts unknown-target voxels as
    not-occupied, so its differentiable stand-in is a one-sided hinge on
    exactly those voxels: probability above the 0.5 counting threshold
    is penalized, probability below it carries no gradient and leaves
    the BCE term alone.  Known-target voxels are already driven to the
    right side of the threshold by the BCE term.
    """
    n_vox = float(np.prod(tar.shape[1:]))
    bce = torch.nn.functional.binary_cross_entropy_with_logits(
        logits, tar, reduction="none")
    occ = (lam * bce).sum(dim=(1, 2, 3)) / n_vox
    unknown_tar = (lam == 0).float()
    over = torch.relu(torch.sigmoid(logits) - 0.5) * unknown_tar
    struct = (phi * over.sum(dim=3)).sum(dim=(1, 2)) / \
        float(tar.shape[1] * tar.shape[2])
    return (w_occ * occ + w_struct * struct).mean()
