"""Training loop: block pairs in, weights file and metrics CSV out."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .blocks import read_block
from .losses import lambda_mask, loss_total, training_loss
from .model import TinyNet, export_weights, one_hot

log = logging.getLogger(__name__)

MIN_PAIRS = 50
HOLDOUT_FRACTION = 0.1


class TrainDataError(ValueError):
    pass


@dataclass
class TrainConfig:
    pairs_dir: str
    out_path: str = "weights.net"
    metrics_path: str = "metrics.csv"
    epochs: int = 10
    batch_size: int = 8
    lr: float = 1e-3
    lr_decay: float = 0.1
    lr_step_epochs: int = 5
    w_occ: float = 2.0
    w_struct: float = 1.0
    alpha: float = 5.0
    beta: float = 2.0
    seed: int = 0
    min_pairs: int = MIN_PAIRS

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for v in (self.w_occ, self.w_struct, self.alpha, self.beta):
            if v < 0:
                raise ValueError("loss weights must be nonnegative")


@dataclass
class Pair:
    name: str
    inp: np.ndarray
    tar: np.ndarray


def load_pairs(pairs_dir) -> list[Pair]:
    """Loads .in/.tar block pairs sorted by filename; corrupt or
    incomplete pairs are skipped with a warning."""
    pairs_dir = Path(pairs_dir)
    out = []
    for inp_path in sorted(pairs_dir.glob("*.in")):
        tar_path = inp_path.with_suffix(".tar")
        try:
            if not tar_path.exists():
                raise ValueError(f"missing target for {inp_path.name}")
            inp = read_block(inp_path)
            tar = read_block(tar_path)
            if inp.shape != tar.shape:
                raise ValueError("input/target dims differ")
        except ValueError as e:
            log.warning("skipping pair %s: %s", inp_path.stem, e)
            continue
        out.append(Pair(inp_path.stem, inp, tar))
    if not out:
        raise TrainDataError(f"no readable block pairs in {pairs_dir}")
    return out


def split_pairs(pairs: list[Pair]):
    """Deterministic split: the last 10% of pairs (by filename order)
    are held out."""
    n_hold = max(1, int(len(pairs) * HOLDOUT_FRACTION))
    return pairs[:-n_hold], pairs[-n_hold:]


def _batch_tensors(pairs: list[Pair], cfg: TrainConfig):
    x = torch.stack([one_hot(p.inp) for p in pairs])
    tar = torch.from_numpy(
        np.stack([(p.tar == 1) for p in pairs]).astype(np.float32))
    lam = torch.from_numpy(
        np.stack([lambda_mask(p.inp, p.tar, cfg.alpha)
                  for p in pairs]).astype(np.float32))
    nz = pairs[0].tar.shape[2]
    counts = np.stack([(p.tar == 1).sum(axis=2) for p in pairs])
    phi = torch.from_numpy(
        np.where(counts > nz / 2.0, cfg.beta, 1.0).astype(np.float32))
    return x, tar, lam, phi


def eval_loss(model: TinyNet, pairs: list[Pair], cfg: TrainConfig) -> float:
    """Mean exact (thresholded) total loss over a pair list."""
    from .model import predict_probs
    vals = [loss_total(predict_probs(model, p.inp), p.tar, p.inp,
                       cfg.w_occ, cfg.w_struct, cfg.alpha, cfg.beta)
            for p in pairs]
    return float(np.mean(vals))


def train(cfg: TrainConfig):
    """Returns (model, metrics rows); writes the weights file and a
    metrics CSV with one row per epoch."""
    pairs = load_pairs(cfg.pairs_dir)
    if len(pairs) < cfg.min_pairs:
        raise TrainDataError(
            f"need at least {cfg.min_pairs} pairs, found {len(pairs)}")
    train_pairs, held_out = split_pairs(pairs)

    torch.manual_seed(cfg.seed)
    torch.set_num_threads(1)
    model = TinyNet()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.StepLR(
        opt, step_size=cfg.lr_step_epochs, gamma=cfg.lr_decay)
    gen = torch.Generator().manual_seed(cfg.seed)

    rows = [("epoch", "lr", "train_loss", "holdout_loss")]
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = torch.randperm(len(train_pairs), generator=gen).tolist()
        for i in range(0, len(order), cfg.batch_size):
            batch = [train_pairs[j] for j in order[i:i + cfg.batch_size]]
            x, tar, lam, phi = _batch_tensors(batch, cfg)
            opt.zero_grad()
            loss = training_loss(model(x), tar, lam, phi,
                                 cfg.w_occ, cfg.w_struct)
            loss.backward()
            opt.step()
        sched.step()
        model.eval()
        tr = eval_loss(model, train_pairs, cfg)
        ho = eval_loss(model, held_out, cfg)
        rows.append((epoch, f"{opt.param_groups[0]['lr']:.6g}",
                     f"{tr:.6f}", f"{ho:.6f}"))
        log.info("epoch %d: train %.4f held-out %.4f", epoch, tr, ho)

    export_weights(model, cfg.out_path)
    Path(cfg.metrics_path).write_text(
        "\n".join(",".join(str(c) for c in r) for r in rows) + "\n")
    return model, rows
