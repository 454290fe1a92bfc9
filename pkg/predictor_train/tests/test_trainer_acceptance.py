"""Trainer acceptance: cross-implementation agreement with the
exploration engine and end-to-end training quality.

Prints one verdict line per property:

    ACCEPTANCE <property>: PASS|FAIL <details>
"""

import numpy as np
import pytest
import torch

from predictor_train.losses import loss_occ, loss_struct, loss_total
from predictor_train.model import (TinyNet, export_weights, import_weights,
                                   model_layers, predict_probs)
from predictor_train.train import TrainConfig, load_pairs, split_pairs, train

core = pytest.importorskip("exploresim.occ_predict")
core_blocks = pytest.importorskip("exploresim.blocks")


def _verdict(capsys, name, ok, detail=""):
    with capsys.disabled():
        print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"{name}: {detail}"


def test_loss_parity_with_core(capsys):
    """Trainer and engine loss functions agree within 1e-6 on shared
    random and hand-built fixtures."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        dims = tuple(rng.integers(2, 7, size=3))
        inp = rng.integers(-1, 2, size=dims).astype(np.int8)
        tar = rng.integers(-1, 2, size=dims).astype(np.int8)
        probs = rng.uniform(0.0, 1.0, size=dims)
        c_in = core_blocks.OccupancyBlock(inp)
        c_tar = core_blocks.OccupancyBlock(tar)
        worst = max(
            worst,
            abs(loss_occ(probs, tar, inp) - core.loss_occ(probs, c_tar, c_in)),
            abs(loss_struct(probs, tar) - core.loss_struct(probs, c_tar)),
            abs(loss_total(probs, tar, inp) -
                core.loss_total(probs, c_tar, c_in)))
    # hand fixture: alpha up-weights unknown-input occupied voxels
    inp = -np.ones((1, 1, 1), dtype=np.int8)
    tar = np.ones((1, 1, 1), dtype=np.int8)
    probs = np.array([[[0.8]]])
    worst = max(worst, abs(
        loss_occ(probs, tar, inp, alpha=5.0) -
        core.loss_occ(probs, core_blocks.OccupancyBlock(tar),
                      core_blocks.OccupancyBlock(inp), alpha=5.0)))
    ok = worst < 1e-6
    _verdict(capsys, "loss-parity", ok,
             f"worst disagreement {worst:.2e} over 20 random + hand "
             f"fixtures (need <1e-6)")


def test_weights_roundtrip_and_zero_model(capsys, tmp_path):
    """Export -> reimport is bit-exact, and a zeroed model exports a file
    the engine reads as the uniform-0.5 predictor."""
    torch.manual_seed(1)
    model = TinyNet()
    path = tmp_path / "w.net"
    export_weights(model, path)
    back = import_weights(path)
    ok = all(np.array_equal(k1, k2) and np.array_equal(b1, b2)
             for (k1, b1), (k2, b2) in zip(model_layers(model),
                                           model_layers(back)))
    path2 = tmp_path / "w2.net"
    export_weights(back, path2)
    ok = ok and path.read_bytes() == path2.read_bytes()

    zero = TinyNet()
    with torch.no_grad():
        for conv in zero.convs:
            conv.weight.zero_()
            conv.bias.zero_()
    zpath = tmp_path / "zero.net"
    export_weights(zero, zpath)
    pred = core.make_predictor("tinynet", weights_path=zpath)
    vals = np.full((10, 10, 6), -1, dtype=np.int8)
    vals[0, :, :] = 0
    pb = pred.predict(core_blocks.OccupancyBlock(vals))
    ok = ok and np.allclose(pb.probs, 0.5)
    _verdict(capsys, "weights-roundtrip", ok,
             "export/reimport bit-exact; zeroed model -> uniform 0.5 "
             "in the engine")


def test_forward_parity_with_core(capsys, tmp_path):
    """Engine forward on exported weights matches the trainer forward
    within 1e-4 on 10 random blocks."""
    torch.manual_seed(2)
    model = TinyNet()
    path = tmp_path / "w.net"
    export_weights(model, path)
    pred = core.make_predictor("tinynet", weights_path=path)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        vals = rng.integers(-1, 2, size=(20, 20, 12)).astype(np.int8)
        pb = pred.predict(core_blocks.OccupancyBlock(vals))
        probs = predict_probs(model, vals)
        worst = max(worst, float(np.abs(pb.probs - probs).max()))
    ok = worst < 1e-4
    _verdict(capsys, "forward-parity", ok,
             f"worst |engine - trainer| prob diff {worst:.2e} over 10 "
             f"blocks (need <1e-4)")


def test_trained_beats_constant_half(capsys, tmp_path, pairs_dir):
    """Training on simulator-generated pairs pushes the held-out total
    loss below the constant-0.5 predictor's."""
    cfg = TrainConfig(pairs_dir=str(pairs_dir),
                      out_path=str(tmp_path / "w.net"),
                      metrics_path=str(tmp_path / "m.csv"),
                      epochs=10, seed=0)
    model, rows = train(cfg)
    _, held_out = split_pairs(load_pairs(pairs_dir))
    trained = float(np.mean(
        [loss_total(predict_probs(model, p.inp), p.tar, p.inp)
         for p in held_out]))
    baseline = float(np.mean(
        [loss_total(np.full(p.tar.shape, 0.5), p.tar, p.inp)
         for p in held_out]))
    ok = trained < baseline and float(rows[-1][3]) == pytest.approx(trained)
    _verdict(capsys, "trained-beats-constant-half", ok,
             f"held-out loss {trained:.4f} vs constant-0.5 "
             f"{baseline:.4f} over {len(held_out)} pairs")
