"""Trainer internals: data loading, split rule, weight export, CLI."""

import struct

import numpy as np
import pytest
import torch

from predictor_train.blocks import read_block
from predictor_train.cli import EXIT_CONFIG, EXIT_OK, cli_dispatch
from predictor_train.model import (TINYNET_SHAPES, TinyNet, export_weights,
                                   import_weights, model_layers)
from predictor_train.train import (TrainConfig, TrainDataError, load_pairs,
                                   split_pairs, train)


def write_block_file(path, values):
    values = np.asarray(values, dtype=np.int8)
    with open(path, "wb") as f:
        f.write(b"SEERBLK1")
        f.write(struct.pack("<III", *values.shape))
        f.write(np.ascontiguousarray(values.ravel(order="F")).tobytes())


def make_pairs(dirpath, n, dims=(6, 6, 4), seed=0):
    rng = np.random.default_rng(seed)
    for i in range(n):
        write_block_file(dirpath / f"pair_{i:05d}.in",
                         rng.integers(-1, 2, size=dims))
        write_block_file(dirpath / f"pair_{i:05d}.tar",
                         rng.integers(-1, 2, size=dims))


class TestBlockReader:
    def test_roundtrip_x_fastest(self, tmp_path):
        vals = np.zeros((2, 2, 1), dtype=np.int8)
        vals[1, 0, 0] = 1
        write_block_file(tmp_path / "b.blk", vals)
        raw = (tmp_path / "b.blk").read_bytes()
        assert list(np.frombuffer(raw[20:], dtype=np.int8)) == [0, 1, 0, 0]
        assert np.array_equal(read_block(tmp_path / "b.blk"), vals)

    def test_bad_magic_and_truncation(self, tmp_path):
        p = tmp_path / "bad.blk"
        p.write_bytes(b"XXXXXXXX" + b"\0" * 12)
        with pytest.raises(ValueError, match="magic"):
            read_block(p)
        write_block_file(p, np.zeros((4, 4, 4), dtype=np.int8))
        p.write_bytes(p.read_bytes()[:-10])
        with pytest.raises(ValueError, match="truncated"):
            read_block(p)


class TestLoadPairs:
    def test_corrupt_pair_skipped_with_warning(self, tmp_path, caplog):
        make_pairs(tmp_path, 3)
        (tmp_path / "pair_00001.in").write_bytes(b"garbage!" + b"\0" * 20)
        with caplog.at_level("WARNING"):
            pairs = load_pairs(tmp_path)
        assert [p.name for p in pairs] == ["pair_00000", "pair_00002"]
        assert "pair_00001" in caplog.text

    def test_missing_target_skipped(self, tmp_path):
        make_pairs(tmp_path, 2)
        (tmp_path / "pair_00000.tar").unlink()
        assert [p.name for p in load_pairs(tmp_path)] == ["pair_00001"]

    def test_all_corrupt_is_error(self, tmp_path):
        make_pairs(tmp_path, 2)
        for f in tmp_path.glob("*.in"):
            f.write_bytes(b"garbage!" + b"\0" * 20)
        with pytest.raises(TrainDataError):
            load_pairs(tmp_path)

    def test_split_is_last_tenth_by_name(self, tmp_path):
        make_pairs(tmp_path, 20)
        tr, ho = split_pairs(load_pairs(tmp_path))
        assert [p.name for p in ho] == ["pair_00018", "pair_00019"]
        assert len(tr) == 18

    def test_too_few_pairs_rejected(self, tmp_path):
        make_pairs(tmp_path, 10)
        cfg = TrainConfig(pairs_dir=str(tmp_path), epochs=1)
        with pytest.raises(TrainDataError, match="50"):
            train(cfg)


class TestWeightExport:
    def test_shape_mismatch_names_layer(self, tmp_path):
        model = TinyNet()
        model.convs[1] = torch.nn.Conv3d(8, 4, 3, padding=1)
        with pytest.raises(ValueError, match="layer 1"):
            export_weights(model, tmp_path / "w.net")

    def test_file_size_arithmetic(self, tmp_path):
        model = TinyNet()
        export_weights(model, tmp_path / "w.net")
        expect = 8 + 4 + sum(20 + 4 * (int(np.prod(s)) + s[0])
                             for s in TINYNET_SHAPES)
        assert (tmp_path / "w.net").stat().st_size == expect

    def test_roundtrip_bit_exact(self, tmp_path):
        torch.manual_seed(3)
        model = TinyNet()
        export_weights(model, tmp_path / "w.net")
        back = import_weights(tmp_path / "w.net")
        for (k1, b1), (k2, b2) in zip(model_layers(model),
                                      model_layers(back)):
            assert np.array_equal(k1, k2)
            assert np.array_equal(b1, b2)

    def test_truncated_reports_layer(self, tmp_path):
        export_weights(TinyNet(), tmp_path / "w.net")
        data = (tmp_path / "w.net").read_bytes()
        (tmp_path / "w.net").write_bytes(data[:len(data) // 2])
        with pytest.raises(ValueError, match="layer"):
            import_weights(tmp_path / "w.net")


class TestTrainLoop:
    def test_same_seed_same_weights(self, tmp_path):
        make_pairs(tmp_path, 12, dims=(8, 8, 6))
        outs = []
        for name in ("a.net", "b.net"):
            cfg = TrainConfig(pairs_dir=str(tmp_path),
                              out_path=str(tmp_path / name),
                              metrics_path=str(tmp_path / (name + ".csv")),
                              epochs=2, seed=7, min_pairs=10)
            train(cfg)
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]

    def test_metrics_rows_per_epoch(self, tmp_path):
        make_pairs(tmp_path, 12, dims=(8, 8, 6))
        cfg = TrainConfig(pairs_dir=str(tmp_path),
                          out_path=str(tmp_path / "w.net"),
                          metrics_path=str(tmp_path / "m.csv"),
                          epochs=3, seed=0, min_pairs=10)
        train(cfg)
        lines = (tmp_path / "m.csv").read_text().strip().splitlines()
        assert lines[0] == "epoch,lr,train_loss,holdout_loss"
        assert len(lines) == 4

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(pairs_dir="x", epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(pairs_dir="x", alpha=-1.0)


class TestCli:
    def test_missing_pairs_dir_exits_2(self, tmp_path):
        assert cli_dispatch(["--pairs", str(tmp_path / "nope")]) == \
            EXIT_CONFIG

    def test_too_few_pairs_exits_2(self, tmp_path):
        make_pairs(tmp_path, 5)
        assert cli_dispatch(["--pairs", str(tmp_path)]) == EXIT_CONFIG

    def test_unknown_flag_exits_2(self):
        assert cli_dispatch(["--bogus"]) == EXIT_CONFIG
