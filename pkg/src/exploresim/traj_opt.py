"""Min-jerk position trajectories through a safe box corridor and
perception-aware yaw planning (discrete search + continuous refinement).

All splines are piecewise quintics; the min-jerk interpolant through fixed
knot values is obtained from a KKT system, which also yields the linear map
from knot values to coefficients used for analytic gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .geometry import Pose, wrap_angle
from .info_gain import R_ROBOT
from .pathing import (DistanceField, R_PLAN, UnreachableGoal, simplify_path)

SAMPLE_DT = 0.02


class CorridorFailure(RuntimeError):
    pass


@dataclass
class Limits:
    v_max: float = 1.0
    a_max: float = 1.0


# -- quintic spline machinery ------------------------------------------------

def _jerk_gram(T: float) -> np.ndarray:
    """Gram matrix of the squared-jerk integral over one quintic segment."""
    G = np.zeros((6, 6))
    G[3, 3] = 36.0 * T
    G[3, 4] = G[4, 3] = 72.0 * T ** 2
    G[3, 5] = G[5, 3] = 120.0 * T ** 3
    G[4, 4] = 192.0 * T ** 3
    G[4, 5] = G[5, 4] = 360.0 * T ** 4
    G[5, 5] = 720.0 * T ** 5
    return G


def _basis(T: float, order: int) -> np.ndarray:
    """Row of the order-th derivative of [1,t,...,t^5] at t=T."""
    row = np.zeros(6)
    for k in range(order, 6):
        row[k] = math.factorial(k) / math.factorial(k - order) * T ** (k - order)
    return row


def minjerk_interp_map(times):
    """Linear map from knot values to min-jerk quintic coefficients.

    For M segments with durations `times`, returns (S_y, s_b) such that the
    stacked coefficients (M,6) of the min-jerk interpolant through knot
    values y_0..y_M with boundary derivatives (v0, a0, vM, aM) are
    (S_y @ y + s_b @ [v0,a0,vM,aM]).reshape(M, 6).
    """
    times = np.asarray(times, dtype=float)
    M = len(times)
    n = 6 * M
    G = np.zeros((n, n))
    for i, T in enumerate(times):
        G[6 * i:6 * i + 6, 6 * i:6 * i + 6] = _jerk_gram(T)
    rows = []
    By = []      # rows of RHS in terms of y (length M+1)
    Bd = []      # rows of RHS in terms of [v0,a0,vM,aM]

    def add(row, y_idx=None, d_idx=None):
        rows.append(row)
        ry = np.zeros(M + 1)
        rd = np.zeros(4)
        if y_idx is not None:
            ry[y_idx] = 1.0
        if d_idx is not None:
            rd[d_idx] = 1.0
        By.append(ry)
        Bd.append(rd)

    for i, T in enumerate(times):
        r = np.zeros(n)
        r[6 * i:6 * i + 6] = _basis(0.0, 0)
        add(r, y_idx=i)
        r = np.zeros(n)
        r[6 * i:6 * i + 6] = _basis(T, 0)
        add(r, y_idx=i + 1)
    for i in range(M - 1):
        for order in (1, 2):
            r = np.zeros(n)
            r[6 * i:6 * i + 6] = _basis(times[i], order)
            r[6 * (i + 1):6 * (i + 1) + 6] = -_basis(0.0, order)
            add(r)
    r = np.zeros(n)
    r[:6] = _basis(0.0, 1)
    add(r, d_idx=0)
    r = np.zeros(n)
    r[:6] = _basis(0.0, 2)
    add(r, d_idx=1)
    r = np.zeros(n)
    r[6 * (M - 1):] = _basis(times[-1], 1)
    add(r, d_idx=2)
    r = np.zeros(n)
    r[6 * (M - 1):] = _basis(times[-1], 2)
    add(r, d_idx=3)

    A = np.array(rows)
    m = A.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = 2.0 * G
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    rhs = np.zeros((n + m, (M + 1) + 4))
    rhs[n:, :M + 1] = np.array(By)
    rhs[n:, M + 1:] = np.array(Bd)
    sol = np.linalg.solve(kkt, rhs)
    return sol[:n, :M + 1], sol[:n, M + 1:]


@dataclass
class Trajectory:
    coeffs: np.ndarray         # (M, 3, 6) per-axis quintic coefficients
    times: np.ndarray          # (M,) segment durations

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if np.any(self.times <= 0):
            raise ValueError("segment durations must be positive")

    @property
    def n_segments(self) -> int:
        return len(self.times)

    @property
    def knot_times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.times)])

    @property
    def duration(self) -> float:
        return float(self.times.sum())

    def _locate(self, t: float):
        kt = self.knot_times
        t = min(max(t, 0.0), kt[-1])
        i = int(np.searchsorted(kt, t, side="right")) - 1
        i = min(i, self.n_segments - 1)
        return i, t - kt[i]

    def _eval(self, t: float, order: int) -> np.ndarray:
        i, tau = self._locate(t)
        row = _basis(tau, order)
        return self.coeffs[i] @ row

    def position(self, t: float) -> np.ndarray:
        return self._eval(t, 0)

    def velocity(self, t: float) -> np.ndarray:
        return self._eval(t, 1)

    def acceleration(self, t: float) -> np.ndarray:
        return self._eval(t, 2)

    def scaled(self, s: float) -> "Trajectory":
        """Slow down by factor s > 1; the geometric path is unchanged."""
        c = self.coeffs.copy()
        for k in range(6):
            c[:, :, k] /= s ** k
        return Trajectory(c, self.times * s)

    def sample(self, dt: float = SAMPLE_DT):
        ts = np.arange(0.0, self.duration + dt / 2, dt)
        ts[-1] = min(ts[-1], self.duration)
        return ts, np.array([self.position(t) for t in ts])

    def knot_residuals(self) -> float:
        """Largest position/velocity/acceleration mismatch at interior knots."""
        worst = 0.0
        for i in range(self.n_segments - 1):
            for order in range(3):
                a = self.coeffs[i] @ _basis(self.times[i], order)
                b = self.coeffs[i + 1] @ _basis(0.0, order)
                worst = max(worst, float(np.abs(a - b).max()))
        return worst


# -- corridor ----------------------------------------------------------------

def _grow_box(vmap, free, seed, max_grow_m=0.6):
    """Axis-aligned box of free voxels grown outward from one free voxel."""
    lo = np.maximum(np.asarray(seed, dtype=np.int64), 0)
    hi = np.minimum(lo, np.asarray(vmap.dims) - 1)
    lo = hi.copy()
    if not free[lo[0], lo[1], lo[2]]:
        raise CorridorFailure("corridor failure")
    grow = int(round(max_grow_m / vmap.resolution))
    for _ in range(grow):
        changed = False
        for axis in range(3):
            for sgn, arr in ((-1, lo), (1, hi)):
                trial = arr.copy()
                trial[axis] += sgn
                if sgn < 0 and trial[axis] < 0:
                    continue
                if sgn > 0 and trial[axis] >= vmap.dims[axis]:
                    continue
                l2, h2 = (trial, hi) if sgn < 0 else (lo, trial)
                face = [slice(l2[q], h2[q] + 1) for q in range(3)]
                face[axis] = slice(trial[axis], trial[axis] + 1)
                if free[tuple(face)].all():
                    arr[axis] = trial[axis]
                    changed = True
        if not changed:
            break
    blo = vmap.origin + lo * vmap.resolution
    bhi = vmap.origin + (hi + 1) * vmap.resolution
    return blo, bhi


def _corridor_boxes(vmap, free, wps, max_grow_m=0.6):
    """Union of free-voxel boxes covering every voxel the polyline crosses.

    Boxes are grown from seed voxels along each segment; a new box is seeded
    at the first voxel the previous box does not contain, so the polyline is
    covered end to end.
    """
    boxes = []
    for i in range(len(wps) - 1):
        vox = vmap.traverse(wps[i], wps[i + 1])
        j = 0
        while j < len(vox):
            lo, hi = _grow_box(vmap, free, vox[j], max_grow_m)
            boxes.append((lo, hi))
            while j < len(vox):
                c = vmap.voxel_center(vox[j])
                if np.all(c >= lo) and np.all(c <= hi):
                    j += 1
                else:
                    break
    return boxes


def _in_boxes(p, boxes, margin=1e-9) -> bool:
    for lo, hi in boxes:
        if np.all(p >= lo - margin) and np.all(p <= hi + margin):
            return True
    return False


def _trapezoid_time(d, limits: Limits) -> float:
    if d <= 1e-9:
        return 0.1
    if d < limits.v_max ** 2 / limits.a_max:
        return 2.0 * math.sqrt(d / limits.a_max)
    return d / limits.v_max + limits.v_max / limits.a_max


def _spline_through(waypoints, times, v0, a0):
    Sy, Sb = minjerk_interp_map(times)
    M = len(times)
    coeffs = np.zeros((M, 3, 6))
    for ax in range(3):
        y = waypoints[:, ax]
        bnd = np.array([v0[ax], a0[ax], 0.0, 0.0])
        c = Sy @ y + Sb @ bnd
        coeffs[:, ax, :] = c.reshape(M, 6)
    return Trajectory(coeffs, times)


def _rest_to_rest(waypoints, times):
    """Stop-and-go fallback: each segment runs straight between waypoints
    with a rest-to-rest min-jerk profile, so samples stay on the segment."""
    M = len(times)
    coeffs = np.zeros((M, 3, 6))
    # s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5 on the unit segment
    for i in range(M):
        d = waypoints[i + 1] - waypoints[i]
        T = times[i]
        for ax in range(3):
            coeffs[i, ax, 0] = waypoints[i][ax]
            coeffs[i, ax, 3] = 10.0 * d[ax] / T ** 3
            coeffs[i, ax, 4] = -15.0 * d[ax] / T ** 4
            coeffs[i, ax, 5] = 6.0 * d[ax] / T ** 5
    return Trajectory(coeffs, times)


class ClearanceChecker:
    """Exact point clearance against the observed-occupied voxel boxes."""

    def __init__(self, vmap):
        from scipy.spatial import cKDTree
        occ = np.argwhere(vmap.trinary == 1)
        self.half = vmap.resolution / 2.0
        if len(occ) == 0:
            self.tree = None
            return
        centers = vmap.origin[None, :] + (occ + 0.5) * vmap.resolution
        self.tree = cKDTree(centers)

    def clearance(self, p, cap: float = 2.0) -> float:
        """Distance from p to the nearest occupied voxel box, capped."""
        if self.tree is None:
            return cap
        p = np.asarray(p, dtype=float)
        d_cc, _ = self.tree.query(p)
        if d_cc - self.half * math.sqrt(3.0) >= cap:
            return cap
        idx = self.tree.query_ball_point(p, d_cc + self.half * math.sqrt(3.0))
        best = cap
        for i in idx:
            c = self.tree.data[i]
            dx = np.maximum(np.abs(p - c) - self.half, 0.0)
            best = min(best, float(np.linalg.norm(dx)))
        return best


def _check_samples(traj, limits, boxes, checker, r_robot):
    """Returns (limit_ok, corridor_ok) over the 0.02 s sample grid."""
    ts, _ = traj.sample()
    limit_ok = corridor_ok = True
    for t in ts:
        v = np.linalg.norm(traj.velocity(t))
        a = np.linalg.norm(traj.acceleration(t))
        if v > limits.v_max * 1.001 or a > limits.a_max * 1.001:
            limit_ok = False
        p = traj.position(t)
        if not _in_boxes(p, boxes):
            corridor_ok = False
        elif checker.clearance(p, cap=r_robot + 0.1) < r_robot + 1e-6:
            corridor_ok = False
        if not (limit_ok or corridor_ok):
            break
    return limit_ok, corridor_ok


def plan_position(start_state, goal_pos, vmap, limits: Limits | None = None,
                  r_robot: float = R_ROBOT,
                  dist_field: DistanceField | None = None):
    """Collision-free min-jerk trajectory from start_state to goal_pos.

    start_state: (position, velocity, acceleration).  Returns (Trajectory,
    corridor boxes).  Raises UnreachableGoal / CorridorFailure.
    """
    limits = limits or Limits()
    p0, v0, a0 = [np.asarray(x, dtype=float) for x in start_state]
    goal = np.asarray(goal_pos, dtype=float)
    if np.linalg.norm(goal - p0) < 1e-6:
        coeffs = np.zeros((1, 3, 6))
        coeffs[0, :, 0] = p0
        return Trajectory(coeffs, np.array([0.1])), []

    df = dist_field if dist_field is not None else DistanceField(
        vmap, p0, R_PLAN)
    voxel_path = df.path_to(goal)
    wps = simplify_path(vmap, df.nav, voxel_path, endpoints=(p0, goal))
    if len(wps) < 2:
        wps = np.array([p0, goal])

    free = vmap.trinary == 0
    boxes = _corridor_boxes(vmap, free, wps)
    checker = ClearanceChecker(vmap)

    seg_len = np.linalg.norm(np.diff(wps, axis=0), axis=1)
    times = np.array([max(_trapezoid_time(d, limits), 0.1) for d in seg_len])

    traj = _spline_through(wps, times, v0, a0)
    for _ in range(30):
        limit_ok, corridor_ok = _check_samples(traj, limits, boxes, checker,
                                               r_robot)
        if limit_ok and corridor_ok:
            return traj, boxes
        if not corridor_ok:
            break
        traj = traj.scaled(1.2)
    # smooth spline left the corridor: fall back to straight stop-and-go,
    # which stays on the (navigable) waypoint polyline by construction
    times = np.array([max(_trapezoid_time(d, limits), 0.1) for d in seg_len])
    traj = _rest_to_rest(wps, times)
    for _ in range(30):
        limit_ok, corridor_ok = _check_samples(traj, limits, boxes, checker,
                                               r_robot)
        if limit_ok and corridor_ok:
            return traj, boxes
        if limit_ok and not corridor_ok:
            break
        traj = traj.scaled(1.2)
    raise CorridorFailure("corridor failure")


# -- yaw search (discrete DP) ------------------------------------------------

@dataclass
class YawParams:
    beta_psi: float = 1.0
    beta_s: float = 3.0
    beta_u: float = 0.5
    n_samples: int = 5          # reward samples per segment
    rho_p: float = 10.0
    rho_v: float = 100.0
    rho_a: float = 100.0
    v_yaw_max: float = 1.5
    a_yaw_max: float = 2.0
    k_bins: int = 12
    ray_stride: int = 4


def _circular_bin_gains(vmap, overlay, pos, start_yaw, camera, params):
    """Gain at each of the K bin yaws via a circular slice sweep."""
    from .info_gain import _gain_of_rays
    K = params.k_bins
    delta = 2 * math.pi / K
    w = camera.hfov / delta
    if abs(w - round(w)) > 1e-9:
        # incommensurate: evaluate each bin window directly
        gains = np.zeros(K)
        for k in range(K):
            yaw = start_yaw + k * delta
            n_az = max(3, int(round(camera.cols / params.ray_stride)))
            az = yaw - camera.hfov / 2 + \
                (np.arange(n_az) + 0.5) * camera.hfov / n_az
            el = np.linspace(-camera.vfov / 2, camera.vfov / 2,
                             camera.rows)[::params.ray_stride]
            aa, ee = np.meshgrid(az, el, indexing="ij")
            dirs = np.stack([np.cos(ee) * np.cos(aa),
                             np.cos(ee) * np.sin(aa),
                             np.sin(ee)], axis=-1).reshape(-1, 3)
            gains[k] = _gain_of_rays(vmap, overlay, pos, dirs,
                                     camera.max_range)
        return gains
    w = int(round(w))
    n_az = max(1, int(round(camera.cols / params.ray_stride / w)))
    el = np.linspace(-camera.vfov / 2, camera.vfov / 2,
                     camera.rows)[::params.ray_stride]
    slice_g = np.zeros(K)
    for j in range(K):
        lo = start_yaw - w * delta / 2 + j * delta
        az = lo + (np.arange(n_az) + 0.5) * delta / n_az
        aa, ee = np.meshgrid(az, el, indexing="ij")
        dirs = np.stack([np.cos(ee) * np.cos(aa),
                         np.cos(ee) * np.sin(aa),
                         np.sin(ee)], axis=-1).reshape(-1, 3)
        slice_g[j] = _gain_of_rays(vmap, overlay, pos, dirs, camera.max_range)
    gains = np.zeros(K)
    for k in range(K):
        gains[k] = sum(slice_g[(k + j) % K] for j in range(w))
    return gains


def transition_cost_tables(traj, soi, vmap, overlay, camera,
                           params: YawParams, start_yaw: float):
    """Per-segment K x K cost tables for the discrete yaw search.

    Entry [a, b] is the cost of moving from bin yaw a at the segment start
    to bin yaw b at its end: smoothness of the linear yaw primitive minus
    time-weighted sampled rewards (SOI facing and expected gain).
    """
    K = params.k_bins
    delta = 2 * math.pi / K
    bin_yaws = start_yaw + np.arange(K) * delta
    kt = traj.knot_times
    tables = []
    for i in range(traj.n_segments):
        T = traj.times[i]
        n = params.n_samples
        t_samples = kt[i] + (np.arange(n) + 0.5) / n * T
        positions = [traj.position(t) for t in t_samples]
        if params.beta_u > 0:
            bin_g = np.array([
                _circular_bin_gains(vmap, overlay, p, start_yaw, camera,
                                    params) for p in positions])
        else:
            bin_g = np.zeros((n, K))
        bearings = None
        if soi is not None and params.beta_s > 0:
            bearings = np.array([
                math.atan2(soi.center[1] - p[1], soi.center[0] - p[0])
                for p in positions])
        table = np.zeros((K, K))
        fracs = (np.arange(n) + 0.5) / n
        for a in range(K):
            ya = bin_yaws[a]
            for b in range(K):
                dpsi = wrap_angle(bin_yaws[b] - ya)
                cost = params.beta_psi * 12.0 * dpsi ** 2 / T ** 3
                reward = 0.0
                for s in range(n):
                    psi = ya + dpsi * fracs[s]
                    if bearings is not None:
                        fs = max(0.0, camera.hfov / 2 -
                                 abs(wrap_angle(psi - bearings[s])))
                        reward += params.beta_s * fs
                    if params.beta_u > 0:
                        k = int(round(wrap_angle(psi - start_yaw) /
                                      delta)) % K
                        reward += params.beta_u * bin_g[s, k]
                cost -= T / n * reward
                table[a, b] = cost
        tables.append(table)
    return bin_yaws, tables


def dp_minimize(tables, start_bin: int = 0):
    """Min-cost bin sequence through the tables from a fixed start bin."""
    K = tables[0].shape[0]
    M = len(tables)
    INF = float("inf")
    dp = np.full((M + 1, K), INF)
    back = np.zeros((M + 1, K), dtype=int)
    dp[0, start_bin] = 0.0
    for i in range(M):
        for b in range(K):
            best, arg = INF, 0
            for a in range(K):
                c = dp[i, a] + tables[i][a, b]
                if c < best:
                    best, arg = c, a
            dp[i + 1, b] = best
            back[i + 1, b] = arg
    b = int(np.argmin(dp[M]))
    best_cost = float(dp[M, b])
    seq = [b]
    for i in range(M, 0, -1):
        b = back[i, b]
        seq.append(b)
    seq.reverse()
    return seq[1:], best_cost


def search_yaw(traj, soi, vmap, overlay, camera, params: YawParams,
               start_yaw: float) -> np.ndarray:
    """Reference yaw sequence gamma at knots 1..M, unwrapped from start_yaw."""
    bin_yaws, tables = transition_cost_tables(traj, soi, vmap, overlay,
                                              camera, params, start_yaw)
    seq, _ = dp_minimize(tables, start_bin=0)
    gamma = np.empty(len(seq))
    prev = start_yaw
    for i, b in enumerate(seq):
        gamma[i] = prev + wrap_angle(bin_yaws[b] - prev)
        prev = gamma[i]
    return gamma


# -- yaw refinement (continuous) ---------------------------------------------

@dataclass
class YawPlan:
    gamma: np.ndarray          # reference yaws at knots 1..M
    psi: np.ndarray            # optimized knot yaws 0..M
    coeffs: np.ndarray         # (M, 6) quintic coefficients
    times: np.ndarray

    def yaw(self, t: float) -> float:
        kt = np.concatenate([[0.0], np.cumsum(self.times)])
        t = min(max(t, 0.0), kt[-1])
        i = min(int(np.searchsorted(kt, t, side="right")) - 1,
                len(self.times) - 1)
        return float(self.coeffs[i] @ _basis(t - kt[i], 0))

    def yaw_rate(self, t: float) -> float:
        kt = np.concatenate([[0.0], np.cumsum(self.times)])
        t = min(max(t, 0.0), kt[-1])
        i = min(int(np.searchsorted(kt, t, side="right")) - 1,
                len(self.times) - 1)
        return float(self.coeffs[i] @ _basis(t - kt[i], 1))


def yaw_objective(y_full, gamma, times, params: YawParams, H):
    """Cost and gradient (w.r.t. all knot yaws) of the yaw objective.

    y_full: knot yaws 0..M with y_full[0] and y_full[M] treated as fixed by
    the caller; gradient entries for them are still returned.
    """
    M = len(times)
    y = np.asarray(y_full, dtype=float)
    J = float(y @ H @ y)
    grad = 2.0 * (H @ y)
    # reference tracking over interior knots
    for i in range(1, M):
        d = y[i] - gamma[i - 1]
        J += params.rho_p * d * d
        grad[i] += 2.0 * params.rho_p * d
    # finite-difference rate/acceleration penalties (cubed hinge)
    for i in range(1, M):
        denom = times[i] + times[i - 1]
        x = (y[i + 1] - y[i - 1]) / denom
        h = abs(x) - params.v_yaw_max
        if h > 0:
            J += params.rho_v * h ** 3
            g = params.rho_v * 3.0 * h * h * math.copysign(1.0, x) / denom
            grad[i + 1] += g
            grad[i - 1] -= g
        r1 = (y[i] - y[i - 1]) / times[i - 1]
        r2 = (y[i + 1] - y[i]) / times[i]
        xa = (r2 - r1) / (denom / 2.0)
        h = abs(xa) - params.a_yaw_max
        if h > 0:
            J += params.rho_a * h ** 3
            s = params.rho_a * 3.0 * h * h * math.copysign(1.0, xa) / \
                (denom / 2.0)
            grad[i + 1] += s / times[i]
            grad[i] += s * (-1.0 / times[i] - 1.0 / times[i - 1])
            grad[i - 1] += s / times[i - 1]
    return J, grad


def optimize_yaw(gamma, times, params: YawParams,
                 boundary) -> YawPlan:
    """Refine the reference yaws into a C^2 quintic yaw trajectory.

    boundary = (psi_0, psi_M); interior knot yaws minimize jerk energy plus
    reference tracking and soft rate/acceleration penalties.
    """
    gamma = np.asarray(gamma, dtype=float)
    times = np.asarray(times, dtype=float)
    M = len(times)
    psi0, psiM = float(boundary[0]), float(boundary[1])
    Sy, Sb = minjerk_interp_map(times)
    G = np.zeros((6 * M, 6 * M))
    for i, T in enumerate(times):
        G[6 * i:6 * i + 6, 6 * i:6 * i + 6] = _jerk_gram(T)
    H = Sy.T @ G @ Sy     # boundary derivatives are zero: energy = y^T H y

    y = np.empty(M + 1)
    y[0] = psi0
    y[M] = psiM
    y[1:M] = gamma[:M - 1] if M > 1 else []

    if M > 1:
        def fun(y_int):
            yf = y.copy()
            yf[1:M] = y_int
            J, g = yaw_objective(yf, gamma, times, params, H)
            if not np.isfinite(J):
                raise FloatingPointError("non-finite yaw cost")
            return J, g[1:M]

        res = optimize.minimize(fun, y[1:M], jac=True, method="L-BFGS-B",
                                options={"gtol": 1e-6, "maxiter": 500})
        y[1:M] = res.x
    c = Sy @ y            # zero boundary yaw rate/acceleration
    return YawPlan(gamma, y, c.reshape(M, 6), times)


def yaw_cost_of(y_full, gamma, times, params: YawParams) -> float:
    """Objective value at a given knot-yaw vector (for comparisons)."""
    times = np.asarray(times, dtype=float)
    M = len(times)
    Sy, _ = minjerk_interp_map(times)
    G = np.zeros((6 * M, 6 * M))
    for i, T in enumerate(times):
        G[6 * i:6 * i + 6, 6 * i:6 * i + 6] = _jerk_gram(T)
    H = Sy.T @ G @ Sy
    J, _ = yaw_objective(np.asarray(y_full, dtype=float), gamma, times,
                         params, H)
    return J
