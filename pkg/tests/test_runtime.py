"""Closed-loop runtime: full exploration runs, benchmarks, gain-error study."""

import numpy as np
import pytest

from exploresim.occ_predict import make_predictor
from exploresim.runtime import (BENCH_CSV_HEADER, RunConfig, benchmark_csv,
                                eval_gain_error, run_benchmark,
                                run_experiment)
from exploresim.sim_world import WorldConfig, generate_world

SMALL = WorldConfig(n_rooms=1, room_width_range=(3.0, 3.5),
                    room_depth_range=(3.0, 3.5))


def small_world(seed):
    return generate_world(seed, SMALL)


@pytest.fixture(scope="module")
def frontier_run():
    return run_experiment(small_world(1), "Frontier",
                          config=RunConfig(timeout_s=240.0))


@pytest.fixture(scope="module")
def seer_run():
    return run_experiment(small_world(1), "SEER",
                          config=RunConfig(timeout_s=240.0))


def test_frontier_run_covers_world(frontier_run):
    rep = frontier_run
    assert not rep.collision
    assert rep.coverage >= 0.95
    assert rep.success
    assert rep.path_m > 1.0
    assert rep.time_s > 0


def test_clearance_checked_every_tick(frontier_run, seer_run):
    for rep in (frontier_run, seer_run):
        assert rep.min_clearance >= 0.3
        assert len(rep.cycle_ms) == int(round(rep.time_s / 0.1))


def test_coverage_curve_monotone(frontier_run):
    cov = [c for _, c in frontier_run.coverage_curve]
    assert all(b >= a - 1e-12 for a, b in zip(cov, cov[1:]))
    ts = [t for t, _ in frontier_run.coverage_curve]
    assert all(b >= a for a, b in zip(ts, ts[1:]))


def test_runs_are_deterministic(frontier_run):
    rep2 = run_experiment(small_world(1), "Frontier",
                          config=RunConfig(timeout_s=240.0))
    assert rep2.events == frontier_run.events
    assert rep2.time_s == frontier_run.time_s
    assert rep2.path_m == frontier_run.path_m
    assert rep2.coverage == frontier_run.coverage


def test_seer_succeeds_and_orders_modes(seer_run):
    rep = seer_run
    assert rep.success and not rep.collision
    modes = []
    for e in rep.events:
        for tok in e.split():
            if tok.startswith("mode="):
                modes.append(tok[5:])
    assert "NavigateToSOI" in modes
    if "ExploreAOI" in modes:
        assert modes.index("NavigateToSOI") < modes.index("ExploreAOI")
    detect = [i for i, e in enumerate(rep.events) if "soi_detected" in e]
    confirm = [i for i, e in enumerate(rep.events) if "soi_confirmed" in e]
    if confirm:
        assert detect and min(detect) < min(confirm)


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        run_experiment(small_world(1), "Greedy")


def test_benchmark_rows_and_summary():
    worlds = [small_world(1), small_world(3)]
    cfg = RunConfig(timeout_s=240.0)
    reports, summary = run_benchmark(worlds, ["Frontier", "SEER"],
                                     repeats=1, config=cfg)
    assert len(reports) == 4
    for m in ("Frontier", "SEER"):
        assert summary[m]["n"] == 2
        ok = [r for r in reports if r.method == m and r.success]
        if ok:
            times = [r.time_s for r in ok]
            assert summary[m]["time"]["avg"] == pytest.approx(np.mean(times))
            assert summary[m]["time"]["std"] == pytest.approx(np.std(times))
            assert summary[m]["time"]["min"] == min(times)
            assert summary[m]["time"]["max"] == max(times)
        assert summary[m]["success_rate"] == len(ok) / 2


def test_benchmark_identical_repeats_zero_std():
    reports, summary = run_benchmark([small_world(1)], ["Frontier"],
                                     repeats=2,
                                     config=RunConfig(timeout_s=240.0))
    assert len(reports) == 2
    assert reports[0].csv_row() == reports[1].csv_row()
    if summary["Frontier"]["success_rate"] == 1.0:
        assert summary["Frontier"]["time"]["std"] == 0.0
        assert summary["Frontier"]["path"]["std"] == 0.0


def test_benchmark_all_failures_handled():
    reports, summary = run_benchmark([small_world(1)], ["Frontier"],
                                     repeats=1,
                                     config=RunConfig(timeout_s=3.0))
    assert all(not r.success for r in reports)
    assert summary["Frontier"]["success_rate"] == 0.0
    assert summary["Frontier"]["time"]["avg"] == ""


def test_benchmark_csv_format():
    reports, _ = run_benchmark([small_world(1)], ["Frontier"], repeats=1,
                               config=RunConfig(timeout_s=5.0))
    text = benchmark_csv(reports)
    lines = text.strip().split("\n")
    assert lines[0] == BENCH_CSV_HEADER == \
        "method,seed,time_s,path_m,success,coverage"
    assert len(lines) == 1 + len(reports)
    for row in lines[1:]:
        parts = row.split(",")
        assert len(parts) == 6
        assert parts[0] == "Frontier"
        assert parts[4] in ("0", "1")
        float(parts[2]), float(parts[3]), float(parts[5])


def test_eval_gain_error_oracle_beats_classical():
    world = small_world(2)
    pred = make_predictor("oracle", world=world)
    e_cls, e_pred, n = eval_gain_error(world, pred, n_samples=40,
                                       config=RunConfig(timeout_s=240.0))
    assert n >= 20
    assert e_cls > 0
    assert e_pred <= e_cls


def test_eval_gain_error_null_predictor_matches_classical():
    world = small_world(2)
    e_cls, e_pred, n = eval_gain_error(world, make_predictor("null"),
                                       n_samples=20,
                                       config=RunConfig(timeout_s=240.0))
    assert n >= 10
    assert e_pred == pytest.approx(e_cls)
