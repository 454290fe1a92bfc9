"""Closed-loop exploration runtime, planner variants, and benchmark metrics.

The robot is kinematic: it tracks planned trajectories exactly, advancing by
one fixed tick per step.  All methods share the sense->map->frontier
pipeline and differ only in goal selection:

  Frontier      nearest cluster by grid path length
  FrontierUtil  utility (gain / travel time) with classical gain
  FrontierPred  utility with prediction-truncated gain
  SEER          full behavior state machine with door semantics
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .behavior import (MODE_CONFIRM, MODE_DONE, BehaviorParams, BgsmState,
                       NavGoal, step_bgsm)
from .frontier import FrontierRegistry
from .geometry import Pose, wrap_angle
from .info_gain import PredictionOverlay, R_ROBOT, SamplerParams, \
    sample_viewpoints
from .occ_predict import NullPredictor
from .pathing import R_PLAN, DistanceField, UnreachableGoal
from .semantics import (SemanticRegistry, classify_frontier, detect_doors,
                        recheck_objects, try_confirm)
from .sim_world import CameraModel, coverage, make_map_for_world, render_depth
from .traj_opt import (CorridorFailure, Limits, Trajectory, YawParams,
                       optimize_yaw, plan_position, search_yaw)

METHODS = ("Frontier", "FrontierUtil", "FrontierPred", "SEER")

BENCH_CSV_HEADER = "method,seed,time_s,path_m,success,coverage"


@dataclass
class RunConfig:
    dt: float = 0.1
    timeout_s: float = 600.0
    replan_s: float = 2.0
    coverage_stop: float = 0.99
    success_coverage: float = 0.95
    stall_s: float = 30.0
    r_robot: float = R_ROBOT
    camera: CameraModel = field(default_factory=CameraModel)
    limits: Limits = field(default_factory=Limits)
    # the long radius lets viewpoints see ceiling-level frontier cells
    # within the limited vertical field of view
    sampler: SamplerParams = field(default_factory=lambda: SamplerParams(
        radii=(1.0, 2.0, 3.0), n_keep=5))
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    yaw: YawParams = field(default_factory=YawParams)


@dataclass
class ExperimentReport:
    method: str
    seed: int
    time_s: float = 0.0
    path_m: float = 0.0
    success: bool = False
    coverage: float = 0.0
    collision: bool = False
    min_clearance: float = float("inf")
    reason: str = ""
    coverage_curve: list = field(default_factory=list)
    events: list = field(default_factory=list)
    cycle_ms: list = field(default_factory=list)
    poses: list = field(default_factory=list)    # (t, x, y, z, yaw) per tick
    max_knot_residual: float = 0.0               # worst C2 mismatch planned

    def csv_row(self) -> str:
        return (f"{self.method},{self.seed},{self.time_s:.1f},"
                f"{self.path_m:.3f},{int(self.success)},{self.coverage:.4f}")


class _QuinticYaw:
    """Rest-to-rest quintic yaw slew from yaw0 through a signed delta."""

    def __init__(self, yaw0: float, delta: float, duration: float):
        T = max(duration, 0.1)
        coeffs = np.zeros((1, 3, 6))
        coeffs[0, 0, 0] = yaw0
        coeffs[0, 0, 3] = 10.0 * delta / T ** 3
        coeffs[0, 0, 4] = -15.0 * delta / T ** 4
        coeffs[0, 0, 5] = 6.0 * delta / T ** 5
        self._traj = Trajectory(coeffs, np.array([T]))

    def yaw(self, t: float) -> float:
        return float(self._traj.position(t)[0])


def _yaw_profile(yaw0: float, yaw1: float, duration: float) -> _QuinticYaw:
    return _QuinticYaw(yaw0, wrap_angle(yaw1 - yaw0), duration)


def _hold_trajectory(position, duration: float) -> Trajectory:
    coeffs = np.zeros((1, 3, 6))
    coeffs[0, :, 0] = np.asarray(position, dtype=float)
    return Trajectory(coeffs, np.array([duration]))


class Explorer:
    """Per-run state of one exploration experiment."""

    def __init__(self, world, method: str, predictor=None,
                 config: RunConfig | None = None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.world = world
        self.method = method
        self.cfg = config or RunConfig()
        self.predictor = predictor or NullPredictor()
        self.vmap = make_map_for_world(world)
        self.frontiers = FrontierRegistry()
        self.semantics = SemanticRegistry()
        self.bgsm = BgsmState()
        self.uses_prediction = method in ("FrontierPred", "SEER") and \
            not isinstance(self.predictor, NullPredictor)
        self.overlay = PredictionOverlay(self.vmap) if self.uses_prediction \
            else None
        self.pose = world.start_pose()
        self.vel = np.zeros(3)
        self.acc = np.zeros(3)
        self.t = 0.0
        self.traj = None
        self.yaw_prof = None
        self.traj_t = 0.0
        self.goal: NavGoal | None = None
        self.last_replan = -1e9
        self.last_progress = 0.0
        self.report = ExperimentReport(method, world.seed)
        self._predicted_for: set[int] = set()
        self._pred_t: dict = {}
        self._spin_left = 2        # two half turns seed the frontier field
        self._finished = False
        self._new_clusters: list = []

    # -- sensing ------------------------------------------------------------

    def _sense(self):
        rays = render_depth(self.world, self.pose, self.cfg.camera)
        box = self.vmap.integrate_scan(self.pose, rays)
        if box is not None:
            removed, added = self.frontiers.update(
                self.vmap, box.dilated(1).clipped(self.vmap.dims))
            self._new_clusters.extend(
                c for c in added if c.active)
            self._predicted_for.difference_update(removed)

    def _predict_new(self):
        if self.overlay is None:
            return
        for cl in self._new_clusters:
            if cl.id in self._predicted_for or \
                    cl.id not in self.frontiers.clusters:
                continue
            self._predicted_for.add(cl.id)
            block = self.vmap.extract_block(cl.centroid)
            # cluster ids churn every scan; skip re-predicting a block
            # footprint refreshed within the current replan interval
            key = tuple(np.round(block.origin / self.vmap.resolution)
                        .astype(np.int64))
            if self.t - self._pred_t.get(key, -1e9) < self.cfg.replan_s:
                continue
            self._pred_t[key] = self.t
            pb = self.predictor.predict(block)
            self.overlay.add_block(pb)

    def _update_semantics(self):
        if self.method != "SEER":
            return
        removed = recheck_objects(self.vmap, self.semantics)
        for oid in removed:
            self.report.events.append(f"t={self.t:.1f} soi_removed id={oid}")
        for cl in self._new_clusters:
            if cl.id not in self.frontiers.clusters:
                continue
            cands = detect_doors(self.vmap, cl)
            for obj in self.semantics.add_candidates(cands):
                self.report.events.append(
                    f"t={self.t:.1f} soi_detected id={obj.id} "
                    f"p=({obj.center[0]:.2f},{obj.center[1]:.2f})")
        if self.bgsm.mode == MODE_CONFIRM:
            for oid, status in try_confirm(self.vmap, self.semantics,
                                           self.pose, self.cfg.camera):
                self.report.events.append(
                    f"t={self.t:.1f} soi_{status} id={oid}")

    # -- planning -----------------------------------------------------------

    def _ensure_viewpoints(self, max_age_s: float = 8.0):
        """Sample viewpoints for new clusters; refresh stale gain scores."""
        overlay = self.overlay
        for cl in self.frontiers.active_clusters():
            if cl.viewpoints and \
                    self.t - getattr(cl, "_vp_t", 0.0) < max_age_s:
                continue
            try:
                vps = sample_viewpoints(
                    cl, self.vmap, overlay, self.cfg.camera,
                    self.cfg.sampler, self.cfg.r_robot)
            except ValueError:
                vps = []
            # a zero-gain viewpoint cannot clear anything; goals built on
            # them make the robot camp in place
            cl.viewpoints = [vp for vp in vps if vp.gain >= 1.0]
            cl._vp_t = self.t

    def _classify_clusters(self):
        if self.method != "SEER":
            return
        for cl in self.frontiers.active_clusters():
            cl.label = classify_frontier(cl, self.bgsm.mode, self.semantics,
                                         self.vmap, self.pose.position)

    def _fallback_goal(self, dist_field) -> NavGoal | None:
        """Approach the reachable navigable voxel nearest to a frontier."""
        best = None
        for cl in self.frontiers.active_clusters():
            cells = cl.cells[:: max(1, len(cl.cells) // 8)]
            for cell in cells:
                c = self.vmap.voxel_center(cell)
                for dx in (-0.4, 0.0, 0.4):
                    for dy in (-0.4, 0.0, 0.4):
                        p = c + np.array([dx, dy, 0.0])
                        d = dist_field.distance_to(p)
                        if not math.isfinite(d) or d < 1e-9:
                            continue
                        v = self.vmap.world_to_voxel(p)
                        if not dist_field.nav[v[0], v[1], v[2]]:
                            continue
                        if best is None or d < best[0]:
                            yaw = math.atan2(c[1] - p[1], c[0] - p[0])
                            best = (d, Pose(self.vmap.voxel_center(v), yaw),
                                    cl.id)
        if best is None:
            return None
        return NavGoal("frontier_cell", best[1], cluster_id=best[2])

    def _select_goal(self, dist_field) -> NavGoal | None:
        clusters = self.frontiers.active_clusters()
        if self.method == "SEER":
            self.bgsm, goal = step_bgsm(self.bgsm, clusters, self.semantics,
                                        self.pose, self.vmap,
                                        self.cfg.behavior, dist_field)
            if self.bgsm.mode == MODE_DONE:
                return None
            if goal is not None and goal.kind == "viewpoint":
                return goal
            if goal is None:
                return self._fallback_goal(dist_field)
            return goal
        candidates = [c for c in clusters if c.viewpoints]
        if not candidates:
            return self._fallback_goal(dist_field)
        if self.method == "Frontier":
            best = None
            for cl in candidates:
                for vp in cl.viewpoints:
                    d = dist_field.distance_to(vp.position)
                    if math.isfinite(d) and (best is None or d < best[0]):
                        best = (d, vp, cl.id)
            if best is None:
                return self._fallback_goal(dist_field)
            return NavGoal("viewpoint", Pose(best[1].position, best[1].yaw),
                           cluster_id=best[2], value=-best[0])
        # utility-based variants
        best = None
        for cl in candidates:
            for vp in cl.viewpoints:
                d = dist_field.distance_to(vp.position)
                if not math.isfinite(d):
                    continue
                val = self.cfg.behavior.v_max * vp.gain / \
                    max(d, self.vmap.resolution)
                if best is None or val > best[0]:
                    best = (val, vp, cl.id)
        if best is None:
            return self._fallback_goal(dist_field)
        return NavGoal("viewpoint", Pose(best[1].position, best[1].yaw),
                       cluster_id=best[2], value=best[0])

    def _plan_to(self, goal: NavGoal, dist_field) -> bool:
        try:
            traj, _ = plan_position(
                (self.pose.position, self.vel, self.acc),
                goal.pose.position, self.vmap, self.cfg.limits,
                self.cfg.r_robot, dist_field)
        except (UnreachableGoal, CorridorFailure) as e:
            self.report.events.append(
                f"t={self.t:.1f} plan_failed goal={goal.kind} err={e}")
            return False
        self.traj = traj
        self.traj_t = 0.0
        self.report.max_knot_residual = max(self.report.max_knot_residual,
                                            traj.knot_residuals())
        if self.method == "SEER" and traj.duration > 0.3:
            soi = None
            if self.bgsm.active_soi is not None:
                soi = self.semantics.objects.get(self.bgsm.active_soi)
            gamma = search_yaw(traj, soi, self.vmap, self.overlay,
                               self.cfg.camera, self.cfg.yaw, self.pose.yaw)
            # steer the final knot toward the goal yaw so arrival checks pass
            gamma[-1] = self.pose.yaw + wrap_angle(
                goal.pose.yaw - self.pose.yaw)
            self.yaw_prof = optimize_yaw(gamma, traj.times, self.cfg.yaw,
                                         (self.pose.yaw, gamma[-1]))
        else:
            self.yaw_prof = _yaw_profile(self.pose.yaw, goal.pose.yaw,
                                         traj.duration)
        self.goal = goal
        self.report.events.append(
            f"t={self.t:.1f} " + goal.log_line(self.bgsm.mode))
        return True

    def _goal_invalid(self) -> bool:
        g = self.goal
        if g is None:
            return True
        # viewpoint goals are not tied to cluster ids: incremental clustering
        # reassigns ids every scan, and the periodic replan re-evaluates them
        if g.soi_id is not None:
            obj = self.semantics.objects.get(g.soi_id)
            if obj is None or obj.status == "rejected":
                return True
        return False

    def _replan(self):
        self._predict_new()
        self._update_semantics()
        self._new_clusters = []
        self._ensure_viewpoints()
        self._classify_clusters()
        try:
            dist_field = DistanceField(self.vmap, self.pose.position, R_PLAN)
        except UnreachableGoal:
            return          # map too young; keep holding
        goal = self._select_goal(dist_field)
        visited = set()
        for attempt in range(3):
            # a viewpoint we already occupy has spent its gain: resample the
            # cluster with the current map and pick again
            if goal is None or goal.kind != "viewpoint":
                break
            dp = np.linalg.norm(goal.pose.position - self.pose.position)
            dy = abs(wrap_angle(goal.pose.yaw - self.pose.yaw))
            if dp > 0.3 or dy > 0.3:
                break
            cl = self.frontiers.clusters.get(goal.cluster_id)
            if attempt == 0 and cl is not None:
                cl._vp_t = -1e9
                self._ensure_viewpoints()
                goal = self._select_goal(dist_field)
            else:
                if goal.cluster_id is not None:
                    visited.add(goal.cluster_id)
                goal = self._select_goal_deferred(dist_field, visited)
        if goal is None:
            if not self.frontiers.active_clusters():
                self._finished = True
                self.report.reason = "done"
            return
        if not self._plan_to(goal, dist_field):
            # defer this cluster/SOI once and try the next-best
            deferred = set()
            if goal.cluster_id is not None:
                deferred.add(goal.cluster_id)
            for _ in range(4):
                goal = self._select_goal_deferred(dist_field, deferred)
                if goal is None:
                    break
                if self._plan_to(goal, dist_field):
                    return
                if goal.cluster_id is not None:
                    deferred.add(goal.cluster_id)

    def _select_goal_deferred(self, dist_field, deferred):
        clusters = [c for c in self.frontiers.active_clusters()
                    if c.id not in deferred]
        if self.method == "SEER":
            self.bgsm, goal = step_bgsm(self.bgsm, clusters, self.semantics,
                                        self.pose, self.vmap,
                                        self.cfg.behavior, dist_field,
                                        deferred)
            return goal
        saved = self.method
        best = None
        for cl in clusters:
            for vp in cl.viewpoints:
                d = dist_field.distance_to(vp.position)
                if not math.isfinite(d):
                    continue
                key = -d if saved == "Frontier" else \
                    self.cfg.behavior.v_max * vp.gain / max(d, 0.1)
                if best is None or key > best[0]:
                    best = (key, vp, cl.id)
        if best is None:
            return None
        return NavGoal("viewpoint", Pose(best[1].position, best[1].yaw),
                       cluster_id=best[2], value=best[0])

    # -- main loop ----------------------------------------------------------

    def _advance(self):
        dt = self.cfg.dt
        if self.traj is None:
            return
        self.traj_t = min(self.traj_t + dt, self.traj.duration)
        p_new = self.traj.position(self.traj_t)
        self.vel = self.traj.velocity(self.traj_t)
        self.acc = self.traj.acceleration(self.traj_t)
        yaw = self.yaw_prof.yaw(self.traj_t) if self.yaw_prof else \
            self.pose.yaw
        step = float(np.linalg.norm(p_new - self.pose.position))
        self.report.path_m += step
        if step > 1e-6:
            self.last_progress = self.t
        self.pose = Pose(p_new, wrap_angle(yaw))
        if self.traj_t >= self.traj.duration - 1e-9:
            self.traj = None     # arrived; next tick replans

    def step(self):
        t0 = time.perf_counter()
        self._sense()
        if self._spin_left > 0:
            if self.traj is None:
                self._spin_left -= 1
                self.traj = _hold_trajectory(self.pose.position, 3.0)
                self.yaw_prof = _QuinticYaw(self.pose.yaw, math.pi, 3.0)
        elif self.traj is None or self._goal_invalid() or \
                (self.t - self.last_replan) >= self.cfg.replan_s:
            self.last_replan = self.t
            self._replan()
        self._advance()
        self.t += self.cfg.dt
        p = self.pose.position
        self.report.poses.append(
            (round(self.t, 3), p[0], p[1], p[2], self.pose.yaw))
        clear = self.world.clearance(p)
        self.report.min_clearance = min(self.report.min_clearance, clear)
        if clear < self.cfg.r_robot:
            self.report.collision = True
        self.report.cycle_ms.append((time.perf_counter() - t0) * 1e3)

    def run(self) -> ExperimentReport:
        rep = self.report
        next_cov = 0.0
        while True:
            self.step()
            if self.t >= next_cov:
                c = coverage(self.vmap, self.world)
                rep.coverage_curve.append((round(self.t, 3), c))
                rep.coverage = c
                next_cov += 2.0
            if rep.collision:
                rep.reason = "collision"
                break
            if rep.coverage >= self.cfg.coverage_stop:
                rep.reason = "coverage"
                break
            if self._finished:
                break
            if self.t >= self.cfg.timeout_s:
                rep.reason = "timeout"
                break
            if self.t - self.last_progress > self.cfg.stall_s and \
                    self.t > 20.0:
                rep.reason = "stalled"
                break
        rep.time_s = round(self.t, 3)
        rep.coverage = coverage(self.vmap, self.world)
        rep.coverage_curve.append((rep.time_s, rep.coverage))
        rep.success = (not rep.collision) and \
            rep.coverage >= self.cfg.success_coverage
        rep.events.append(f"t={rep.time_s:.1f} end reason={rep.reason} "
                          f"coverage={rep.coverage:.3f}")
        return rep


def run_experiment(world, method: str, predictor=None,
                   config: RunConfig | None = None) -> ExperimentReport:
    return Explorer(world, method, predictor, config).run()


# -- benchmark ----------------------------------------------------------------

def _stats(vals):
    if not vals:
        return {"min": "", "max": "", "avg": "", "std": ""}
    a = np.asarray(vals, dtype=float)
    return {"min": float(a.min()), "max": float(a.max()),
            "avg": float(a.mean()), "std": float(a.std())}


def run_benchmark(worlds, methods, repeats: int = 1, predictors=None,
                  config: RunConfig | None = None):
    """Run every (world, method) cell `repeats` times.

    Returns (reports, summary) where summary maps method -> stats over time
    and path length of successful runs plus the success rate over all runs.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    predictors = predictors or {}
    reports = []
    for world in worlds:
        for method in methods:
            for _ in range(repeats):
                rep = run_experiment(world, method,
                                     predictors.get(method), config)
                reports.append(rep)
    summary = {}
    for method in methods:
        rows = [r for r in reports if r.method == method]
        ok = [r for r in rows if r.success]
        summary[method] = {
            "time": _stats([r.time_s for r in ok]),
            "path": _stats([r.path_m for r in ok]),
            "success_rate": len(ok) / len(rows) if rows else 0.0,
            "n": len(rows),
        }
    return reports, summary


def benchmark_csv(reports) -> str:
    out = io.StringIO()
    out.write(BENCH_CSV_HEADER + "\n")
    for r in reports:
        out.write(r.csv_row() + "\n")
    return out.getvalue()


# -- information-gain error study ---------------------------------------------

def _ground_truth_gain(vmap, world, pose, camera, stride=2) -> int:
    """Unknown voxels the sensor would actually update from `pose`."""
    rays = render_depth(world, pose, camera, stride=stride)
    total = 0
    trin = vmap.trinary
    for end, _hit in rays:
        for v in vmap.traverse(pose.position, end):
            if trin[v[0], v[1], v[2]] == 1:
                break
            if trin[v[0], v[1], v[2]] == -1:
                total += 1
    return total


def _fov_gain(vmap, overlay, pose, camera, stride=2) -> int:
    from .info_gain import _gain_of_rays
    dirs = camera.ray_directions(pose.yaw, stride=stride)
    return _gain_of_rays(vmap, overlay, pose.position, dirs,
                         camera.max_range)


def eval_gain_error(world, predictor, n_samples: int = 50,
                    config: RunConfig | None = None):
    """Mean percentage gain error (classical, predicted) vs ground truth.

    Viewpoints are the candidates produced during a scripted Frontier
    exploration of the world; samples with zero true gain are skipped.
    """
    cfg = config or RunConfig()
    ex = Explorer(world, "Frontier", None, cfg)
    errs_cls, errs_pred = [], []
    seen = set()
    next_sample = cfg.replan_s
    while len(errs_cls) < n_samples and not ex._finished and \
            ex.t < cfg.timeout_s and not ex.report.collision:
        ex.step()
        if ex.t < next_sample:
            continue
        next_sample += cfg.replan_s
        for cl in ex.frontiers.active_clusters():
            for vp in cl.viewpoints[:2]:
                key = (round(vp.position[0], 3), round(vp.position[1], 3),
                       round(vp.position[2], 3), round(vp.yaw, 3))
                if key in seen:
                    continue
                seen.add(key)
                pose = Pose(vp.position, vp.yaw)
                g_gt = _ground_truth_gain(ex.vmap, world, pose, cfg.camera)
                if g_gt <= 0:
                    continue
                g_cls = _fov_gain(ex.vmap, None, pose, cfg.camera)
                ov = PredictionOverlay(ex.vmap)
                block = ex.vmap.extract_block(cl.centroid)
                ov.add_block(predictor.predict(block))
                g_pred = _fov_gain(ex.vmap, ov, pose, cfg.camera)
                errs_cls.append(abs(g_cls - g_gt) / g_gt)
                errs_pred.append(abs(g_pred - g_gt) / g_gt)
                if len(errs_cls) >= n_samples:
                    break
            if len(errs_cls) >= n_samples:
                break
    if not errs_cls:
        return float("nan"), float("nan"), 0
    return (100.0 * float(np.mean(errs_cls)),
            100.0 * float(np.mean(errs_pred)), len(errs_cls))
