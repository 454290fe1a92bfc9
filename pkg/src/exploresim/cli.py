"""Command-line entry points for worlds, exploration runs, benchmarks,
gain-error studies, training-data export, predictor evaluation, and plots.

Options may come from a flat key=value config file (``--config``); explicit
flags override file values.  Exit codes: 0 success, 2 configuration error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .geometry import Pose
from .occ_predict import (loss_occ, loss_struct, loss_total, make_predictor,
                          make_training_pair)
from .blocks import read_block, write_block
from .runtime import RunConfig, benchmark_csv, eval_gain_error, \
    run_benchmark, run_experiment
from .sim_world import InfeasibleWorld, generate_world, load_world, save_world
from .traj_opt import Limits

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_METHOD_NAMES = {"frontier": "Frontier", "frontierutil": "FrontierUtil",
                 "frontierpred": "FrontierPred", "seer": "SEER"}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    """Flat key=value file; blank lines and '#' comments ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


_FLAGS = (
    ("--seed", int, "world / RNG seed"),
    ("--world", str, "world file written by gen-world"),
    ("--method", str, "comma-separated method names"),
    ("--predictor", str, "null | oracle | slab | tinynet"),
    ("--weights", str, "SEERNET1 weights file for the tinynet predictor"),
    ("--repeats", int, "benchmark repeats / training pair count"),
    ("--out", str, "output directory"),
    ("--max-vel", float, "velocity limit, m/s"),
    ("--max-acc", float, "acceleration limit, m/s^2"),
    ("--timeout-s", float, "simulated-time budget per run, seconds"),
    ("--config", str, "key=value config file (flags override it)"),
)

COMMANDS = ("gen-world", "explore", "benchmark", "eval-gain",
            "train-data", "predict-eval", "plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exploresim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        for flag, typ, hlp in _FLAGS:
            p.add_argument(flag, type=typ, default=None, help=hlp)
    return parser


def _merge_options(args) -> dict:
    opts = {}
    if args.config is not None:
        opts.update(load_config(args.config))
    for flag, typ, _ in _FLAGS:
        key = flag.lstrip("-").replace("-", "_")
        val = getattr(args, key)
        if val is not None:
            opts[key] = val
        elif key in opts and typ is not str:
            try:
                opts[key] = typ(opts[key])
            except ValueError:
                raise ConfigError(f"config key {key}: not a {typ.__name__}")
    return opts


def _out_dir(opts) -> Path:
    out = Path(opts.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _get_seed(opts) -> int:
    if "seed" not in opts:
        raise ConfigError("--seed is required")
    return int(opts["seed"])


def _get_world(opts):
    if "world" in opts:
        path = Path(opts["world"])
        if not path.exists():
            raise ConfigError(f"world file not found: {path}")
        return load_world(path)
    return generate_world(_get_seed(opts))


def _get_methods(opts, default="seer") -> list:
    names = str(opts.get("method", default)).split(",")
    out = []
    for n in names:
        key = n.strip().lower()
        if key not in _METHOD_NAMES:
            raise ConfigError(f"unknown method {n!r}; choose from "
                              f"{sorted(_METHOD_NAMES)}")
        out.append(_METHOD_NAMES[key])
    return out


def _get_predictor(opts, world, default=None):
    kind = opts.get("predictor", default)
    if kind is None:
        return None
    try:
        return make_predictor(kind, world=world,
                              weights_path=opts.get("weights"))
    except (ValueError, OSError) as e:
        raise ConfigError(str(e))


def _run_config(opts) -> RunConfig:
    cfg = RunConfig()
    if "timeout_s" in opts:
        cfg.timeout_s = float(opts["timeout_s"])
    v = float(opts.get("max_vel", cfg.limits.v_max))
    a = float(opts.get("max_acc", cfg.limits.a_max))
    cfg.limits = Limits(v, a)
    cfg.behavior.v_max = v
    return cfg


# -- commands ------------------------------------------------------------------

def _cmd_gen_world(opts) -> int:
    seed = _get_seed(opts)
    world = generate_world(seed)
    path = _out_dir(opts) / f"world_{seed}.txt"
    save_world(path, world)
    print(path)
    return EXIT_OK


def _write_report(out: Path, rep) -> None:
    lines = [f"method={rep.method}", f"seed={rep.seed}",
             f"time_s={rep.time_s}", f"path_m={rep.path_m:.3f}",
             f"success={int(rep.success)}", f"coverage={rep.coverage:.4f}",
             f"collision={int(rep.collision)}",
             f"min_clearance={rep.min_clearance:.3f}",
             f"reason={rep.reason}"]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    (out / "events.log").write_text("\n".join(rep.events) + "\n")
    rows = ["t,x,y,z,yaw"] + [
        f"{t},{x:.6f},{y:.6f},{z:.6f},{yaw:.6f}"
        for (t, x, y, z, yaw) in rep.poses]
    (out / "trajectory.csv").write_text("\n".join(rows) + "\n")
    rows = ["t,coverage"] + [f"{t},{c:.6f}" for t, c in rep.coverage_curve]
    (out / "coverage.csv").write_text("\n".join(rows) + "\n")


def _cmd_explore(opts) -> int:
    world = _get_world(opts)
    method = _get_methods(opts)[0]
    rep = run_experiment(world, method, _get_predictor(opts, world),
                         _run_config(opts))
    out = _out_dir(opts)
    _write_report(out, rep)
    print(f"method={rep.method} seed={rep.seed} time_s={rep.time_s} "
          f"path_m={rep.path_m:.2f} success={int(rep.success)} "
          f"coverage={rep.coverage:.4f}")
    return EXIT_OK


def _cmd_benchmark(opts) -> int:
    world = _get_world(opts)
    methods = _get_methods(opts, default="frontier,seer")
    repeats = int(opts.get("repeats", 1))
    predictors = {}
    pred = _get_predictor(opts, world)
    if pred is not None:
        for m in methods:
            predictors[m] = pred
    reports, summary = run_benchmark([world], methods, repeats, predictors,
                                     _run_config(opts))
    out = _out_dir(opts)
    (out / "benchmark.csv").write_text(benchmark_csv(reports))
    lines = ["method,time_min,time_max,time_avg,time_std,"
             "path_min,path_max,path_avg,path_std,success_rate"]
    for m in methods:
        s = summary[m]
        cells = [s["time"][k] for k in ("min", "max", "avg", "std")] + \
                [s["path"][k] for k in ("min", "max", "avg", "std")]
        fmt = ",".join("" if c == "" else f"{c:.3f}" for c in cells)
        lines.append(f"{m},{fmt},{s['success_rate']:.3f}")
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _cmd_eval_gain(opts) -> int:
    world = _get_world(opts)
    pred = _get_predictor(opts, world, default="oracle")
    n = int(opts.get("n_samples", 50))
    e_cls, e_pred, used = eval_gain_error(world, pred, n, _run_config(opts))
    out = _out_dir(opts)
    text = (f"classical_pct={e_cls:.3f}\npredicted_pct={e_pred:.3f}\n"
            f"n_samples={used}\n")
    (out / "gain_error.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def _sample_scan_poses(world, rng, n=12):
    lo, hi = world.bounds.lo, world.bounds.hi
    poses = []
    guard = 0
    while len(poses) < n and guard < 10000:
        guard += 1
        p = rng.uniform(lo[:2] + 0.4, hi[:2] - 0.4)
        pos = np.array([p[0], p[1], 1.0])
        if not world.point_in_free_space(pos, margin=0.35):
            continue
        poses.append(Pose(pos, float(rng.uniform(-np.pi, np.pi))))
    if len(poses) < n:
        raise RuntimeError("could not sample scan poses in free space")
    return poses


def _cmd_train_data(opts) -> int:
    seed = _get_seed(opts)
    count = int(opts.get("repeats", 50))
    out = _out_dir(opts) / "pairs"
    out.mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    made = 0
    wseed = seed
    while made < count:
        try:
            world = generate_world(wseed)
        except InfeasibleWorld:
            wseed += 1
            continue
        wseed += 1
        poses = _sample_scan_poses(world, rng)
        center = rng.uniform(world.bounds.lo + 1.0, world.bounds.hi - 1.0)
        center[2] = 0.0
        inp, tar = make_training_pair(world, poses, rng, center=center)
        write_block(out / f"pair_{made:05d}.in", inp)
        write_block(out / f"pair_{made:05d}.tar", tar)
        made += 1
    print(f"{made} pairs written to {out}")
    return EXIT_OK


def _cmd_predict_eval(opts) -> int:
    pairs = Path(opts.get("pairs_dir", Path(opts.get("out", ".")) / "pairs"))
    ins = sorted(pairs.glob("*.in"))
    if not ins:
        raise ConfigError(f"no .in block files under {pairs}")
    pred = _get_predictor(opts, None, default="null")
    rows = ["pair,loss_occ,loss_struct,loss_total"]
    sums = np.zeros(3)
    n = 0
    for inp_path in ins:
        tar_path = inp_path.with_suffix(".tar")
        if not tar_path.exists():
            continue
        inp = read_block(inp_path)
        tar = read_block(tar_path)
        pb = pred.predict(inp)
        lo = loss_occ(pb, tar, inp)
        ls = loss_struct(pb, tar)
        lt = loss_total(pb, tar, inp)
        rows.append(f"{inp_path.stem},{lo:.6f},{ls:.6f},{lt:.6f}")
        sums += (lo, ls, lt)
        n += 1
    if n == 0:
        raise ConfigError(f"no .in/.tar pairs under {pairs}")
    rows.append(f"mean,{sums[0]/n:.6f},{sums[1]/n:.6f},{sums[2]/n:.6f}")
    out = _out_dir(opts)
    (out / "predict_eval.csv").write_text("\n".join(rows) + "\n")
    print(rows[-1])
    return EXIT_OK


def write_ppm(path, rgb: np.ndarray) -> None:
    """Binary, uncompressed P6 image from an (H, W, 3) uint8 array."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(rgb.tobytes())


def _cmd_plot(opts) -> int:
    world = _get_world(opts)
    out = _out_dir(opts)
    traj_path = out / "trajectory.csv"
    gt = world.ground_truth()
    k = int(round((1.0 - world.bounds.lo[2]) / world.resolution))
    occ = gt[:, :, min(k, gt.shape[2] - 1)] == 1
    nx, ny = occ.shape
    img = np.full((ny, nx, 3), 255, dtype=np.uint8)
    rows, cols = np.nonzero(occ.T)
    img[ny - 1 - rows, cols] = (40, 40, 40)
    if traj_path.exists():
        pts = np.loadtxt(traj_path, delimiter=",", skiprows=1, ndmin=2)
        xy = (pts[:, 1:3] - world.bounds.lo[:2]) / world.resolution
        ij = np.clip(np.floor(xy).astype(int), 0, [nx - 1, ny - 1])
        img[ny - 1 - ij[:, 1], ij[:, 0]] = (200, 30, 30)
        img[ny - 1 - ij[0, 1], ij[0, 0]] = (30, 160, 30)
        img[ny - 1 - ij[-1, 1], ij[-1, 0]] = (30, 30, 200)
    # upscale for visibility
    img = np.repeat(np.repeat(img, 4, axis=0), 4, axis=1)
    path = out / "map.ppm"
    write_ppm(path, img)
    print(path)
    return EXIT_OK


_HANDLERS = {
    "gen-world": _cmd_gen_world,
    "explore": _cmd_explore,
    "benchmark": _cmd_benchmark,
    "eval-gain": _cmd_eval_gain,
    "train-data": _cmd_train_data,
    "predict-eval": _cmd_predict_eval,
    "plot": _cmd_plot,
}


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_CONFIG
    try:
        opts = _merge_options(args)
        return _HANDLERS[args.command](opts)
    except (ConfigError, InfeasibleWorld) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:                     # noqa: BLE001
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
