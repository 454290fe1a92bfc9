"""Behavior goal state machine and the utility rule picking the next goal.

Utility of a frontier cluster is the best over its stored viewpoints of
(v_max / path_length) * gain, i.e. an upper bound on information per second
of travel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose, wrap_angle
from .pathing import DistanceField, UnreachableGoal

MODE_CORRIDOR = "CorridorExplore"
MODE_NAV_SOI = "NavigateToSOI"
MODE_CONFIRM = "ConfirmSOI"
MODE_ENTER = "EnterAOI"
MODE_EXPLORE_AOI = "ExploreAOI"
MODE_EXIT = "ExitAOI"
MODE_DONE = "Done"

ARRIVE_POS = 0.3      # meters
ARRIVE_YAW = 0.3      # radians
APPROACH_DIST = 1.0   # meters before the door plane
ENTER_DIST = 0.5      # meters past the door plane


@dataclass
class BehaviorParams:
    v_max: float = 1.0

    def __post_init__(self):
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")


@dataclass
class NavGoal:
    kind: str                 # viewpoint | soi_approach | soi_hold | soi_enter | soi_exit
    pose: Pose
    cluster_id: int | None = None
    soi_id: int | None = None
    value: float = 0.0

    def log_line(self, mode: str) -> str:
        p = self.pose.position
        ref = self.cluster_id if self.cluster_id is not None else self.soi_id
        return (f"goal mode={mode} kind={self.kind} "
                f"pose=({p[0]:.3f},{p[1]:.3f},{p[2]:.3f},{self.pose.yaw:.3f}) "
                f"ref={ref} value={self.value:.4f}")


@dataclass
class BgsmState:
    mode: str = MODE_CORRIDOR
    active_soi: int | None = None
    goal: NavGoal | None = None


class ClusterUnreachable(RuntimeError):
    pass


def utility(cluster, robot_pos, vmap, params: BehaviorParams,
            dist_field: DistanceField | None = None):
    """Best (v_max / path_length) * gain over the cluster's viewpoints.

    Returns (value, viewpoint).  Viewpoints with no grid path are skipped;
    raises ClusterUnreachable when none is reachable.
    """
    if not cluster.viewpoints:
        raise ClusterUnreachable("cluster has no viewpoints")
    if dist_field is None:
        dist_field = DistanceField(vmap, robot_pos)
    best_v, best_vp = None, None
    for vp in cluster.viewpoints:
        length = dist_field.distance_to(vp.position)
        if not math.isfinite(length):
            continue
        val = params.v_max * vp.gain / max(length, vmap.resolution)
        if best_v is None or val > best_v:
            best_v, best_vp = val, vp
    if best_vp is None:
        raise ClusterUnreachable("cluster unreachable")
    return best_v, best_vp


def _arrived(robot_pose: Pose, goal: NavGoal | None) -> bool:
    if goal is None:
        return False
    dp = np.linalg.norm(robot_pose.position - goal.pose.position)
    dy = abs(wrap_angle(robot_pose.yaw - goal.pose.yaw))
    return dp <= ARRIVE_POS and dy <= ARRIVE_YAW


def _door_side(center, normal, point) -> float:
    s = float((np.asarray(point)[:2] - center[:2]) @ normal[:2])
    return 1.0 if s >= 0 else -1.0


def _soi_approach(soi, robot_pos) -> Pose:
    side = _door_side(soi.center, soi.direction, robot_pos)
    n = np.zeros(3)
    n[:2] = soi.direction[:2] / np.linalg.norm(soi.direction[:2])
    pos = soi.center + side * APPROACH_DIST * n
    pos[2] = robot_pos[2]
    yaw = math.atan2(soi.center[1] - pos[1], soi.center[0] - pos[0])
    return Pose(pos, yaw)


def _soi_enter(soi, robot_pos) -> Pose:
    side = _door_side(soi.center, soi.direction, robot_pos)
    n = np.zeros(3)
    n[:2] = soi.direction[:2] / np.linalg.norm(soi.direction[:2])
    pos = soi.center - side * ENTER_DIST * n
    pos[2] = robot_pos[2]
    yaw = math.atan2(pos[1] - soi.center[1], pos[0] - soi.center[0])
    return Pose(pos, yaw)


def _best_cluster_goal(clusters, robot_pos, vmap, params, dist_field,
                       deferred):
    """Argmax-utility viewpoint among clusters; ties break on smaller id."""
    best = None
    for cl in sorted(clusters, key=lambda c: c.id):
        if cl.id in deferred or not cl.viewpoints:
            continue
        try:
            val, vp = utility(cl, robot_pos, vmap, params, dist_field)
        except ClusterUnreachable:
            continue
        if best is None or val > best[0]:
            best = (val, vp, cl.id)
    if best is None:
        return None
    val, vp, cid = best
    return NavGoal("viewpoint", Pose(vp.position, vp.yaw),
                   cluster_id=cid, value=val)


def step_bgsm(state: BgsmState, clusters, registry, robot_pose: Pose,
              vmap, params: BehaviorParams,
              dist_field: DistanceField | None = None,
              deferred: set | None = None):
    """One behavior decision: returns (new state, goal or None).

    Pure with respect to its inputs; the caller owns registry mutation
    (detection/confirmation) and arrival timing.
    """
    deferred = deferred or set()
    sois = registry.unconfirmed() if registry is not None else []
    soi_by_id = {s.id: s for s in sois}
    confirmed = {s.id: s for s in registry.confirmed()} if registry else {}
    robot_pos = robot_pose.position

    mode = state.mode
    active = state.active_soi

    # SOI invalidation while tracking it
    if mode in (MODE_NAV_SOI, MODE_CONFIRM) and active not in soi_by_id:
        if active in confirmed:
            mode = MODE_ENTER
        else:
            mode, active = MODE_CORRIDOR, None
    if mode == MODE_ENTER and active not in confirmed:
        mode, active = MODE_CORRIDOR, None

    if mode == MODE_CORRIDOR:
        usable = [s for s in sois if s.id not in deferred]
        if usable:
            soi = min(usable, key=lambda s: np.linalg.norm(
                s.center[:2] - robot_pos[:2]))
            goal = NavGoal("soi_approach", _soi_approach(soi, robot_pos),
                           soi_id=soi.id)
            return BgsmState(MODE_NAV_SOI, soi.id, goal), goal
        goal = _best_cluster_goal(
            [c for c in clusters if c.label != "room"],
            robot_pos, vmap, params, dist_field, deferred)
        if goal is not None:
            return BgsmState(MODE_CORRIDOR, None, goal), goal
        if clusters:
            # frontiers exist but none is currently actionable; hold
            return BgsmState(MODE_CORRIDOR, None, state.goal), state.goal
        return BgsmState(MODE_DONE, None, None), None

    if mode == MODE_NAV_SOI:
        soi = soi_by_id[active]
        goal = NavGoal("soi_approach", _soi_approach(soi, robot_pos),
                       soi_id=soi.id)
        if _arrived(robot_pose, goal):
            hold = NavGoal("soi_hold", goal.pose, soi_id=soi.id)
            return BgsmState(MODE_CONFIRM, active, hold), hold
        return BgsmState(MODE_NAV_SOI, active, goal), goal

    if mode == MODE_CONFIRM:
        # confirmation outcome is applied by the caller between steps
        return BgsmState(MODE_CONFIRM, active, state.goal), state.goal

    if mode == MODE_ENTER:
        soi = confirmed[active]
        if state.goal is not None and state.goal.kind == "soi_enter":
            goal = state.goal     # keep the side chosen when entry began
        else:
            goal = NavGoal("soi_enter", _soi_enter(soi, robot_pos),
                           soi_id=active)
        if _arrived(robot_pose, goal):
            st = BgsmState(MODE_EXPLORE_AOI, None, None)
            return step_bgsm(st, clusters, registry, robot_pose, vmap,
                             params, dist_field, deferred)
        return BgsmState(MODE_ENTER, active, goal), goal

    if mode == MODE_EXPLORE_AOI:
        room = [c for c in clusters if c.label == "room"]
        goal = _best_cluster_goal(room, robot_pos, vmap, params,
                                  dist_field, deferred)
        if goal is not None:
            return BgsmState(MODE_EXPLORE_AOI, None, goal), goal
        doors = sorted(confirmed.values(),
                       key=lambda s: np.linalg.norm(
                           s.center[:2] - robot_pos[:2]))
        if doors:
            exit_goal = NavGoal("soi_exit", _soi_enter(doors[0], robot_pos),
                                soi_id=doors[0].id)
            return BgsmState(MODE_EXIT, None, exit_goal), exit_goal
        return step_bgsm(BgsmState(MODE_CORRIDOR, None, None), clusters,
                         registry, robot_pose, vmap, params, dist_field,
                         deferred)

    if mode == MODE_EXIT:
        if _arrived(robot_pose, state.goal):
            return step_bgsm(BgsmState(MODE_CORRIDOR, None, None), clusters,
                             registry, robot_pose, vmap, params, dist_field,
                             deferred)
        return BgsmState(MODE_EXIT, None, state.goal), state.goal

    return BgsmState(MODE_DONE, None, None), None
