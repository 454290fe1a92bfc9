import math
from types import SimpleNamespace

import numpy as np
import pytest

from exploresim.geometry import Pose
from exploresim.semantics import (SemanticObject, SemanticRegistry, check_gap,
                                  classify_frontier, detect_doors,
                                  recheck_objects, try_confirm)
from exploresim.sim_world import CameraModel
from exploresim.voxel_map import VoxelMap


def wall_map(gap_center_y=None, gap_width=None, dims=(60, 60, 24),
             wall_i=30, wall_height=2.4):
    """Fully observed free map with a wall plane at x index `wall_i`.

    Gap columns are those whose center falls inside the gap interval
    (center-in-box rasterization, matching the world generator).
    """
    m = VoxelMap((0, 0, 0), 0.1, dims)
    m.logodds[...] = -1.0
    kh = int(round(wall_height / m.resolution))
    m.logodds[wall_i, :, :kh] = 1.0
    if gap_center_y is not None:
        ys = (np.arange(dims[1]) + 0.5) * m.resolution
        gap = np.abs(ys - gap_center_y) < gap_width / 2
        m.logodds[wall_i, gap, :] = -1.0
    m._trinary[...] = m.recompute_trinary()
    return m


def cluster_at(x, y, z=1.0):
    return SimpleNamespace(centroid=np.array([x, y, z]), size=10,
                           cells=np.empty((0, 3), dtype=np.int64))


class TestCheckGap:
    def test_accepts_door_sized_gap(self):
        m = wall_map(3.0, 0.8)
        ok, center, span = check_gap(m, [3.05, 3.0, 1.0], [1.0, 0.0, 0.0])
        assert ok
        assert span == pytest.approx(0.8, abs=0.051)
        assert center[1] == pytest.approx(3.0, abs=0.1)

    def test_rejects_wide_opening(self):
        m = wall_map(3.0, 2.5)
        ok, _, _ = check_gap(m, [3.05, 3.0, 1.0], [1.0, 0.0, 0.0])
        assert not ok

    def test_rejects_solid_wall(self):
        m = wall_map()
        ok, _, _ = check_gap(m, [3.05, 3.0, 1.0], [1.0, 0.0, 0.0])
        assert not ok

    def test_rejects_low_headroom(self):
        # gap blocked above 1.0 m: free height < h_min
        m = wall_map(3.0, 0.8)
        m.logodds[30, :, 10:] = 1.0
        m._trinary[...] = m.recompute_trinary()
        ok, _, _ = check_gap(m, [3.05, 3.0, 1.0], [1.0, 0.0, 0.0])
        assert not ok


class TestDetectDoors:
    def test_gap_wall_detected_near_center(self):
        m = wall_map(3.0, 0.8)
        cands = detect_doors(m, cluster_at(3.0, 3.0))
        assert len(cands) == 1
        c = cands[0]
        assert np.linalg.norm(c.center[:2] - [3.05, 3.0]) <= 0.15
        # normal is perpendicular to the wall (wall runs along y)
        assert abs(c.direction[0]) > 0.98
        assert 0.7 - 0.05 <= c.width <= 1.1 + 0.05

    def test_solid_wall_empty(self):
        m = wall_map()
        assert detect_doors(m, cluster_at(3.0, 3.0)) == []

    def test_wide_opening_empty(self):
        m = wall_map(3.0, 2.2)
        assert detect_doors(m, cluster_at(3.0, 3.0)) == []

    def test_randomized_gap_walls(self):
        rng = np.random.default_rng(0)
        hits = 0
        for _ in range(15):
            w = rng.uniform(0.7, 1.0)
            yc = rng.uniform(2.2, 3.8)
            m = wall_map(yc, w)
            cands = detect_doors(m, cluster_at(3.0, yc))
            if len(cands) == 1 and \
                    abs(cands[0].center[1] - yc) < 0.2:
                hits += 1
        assert hits >= 14

    def test_wall_along_x_axis(self):
        # same geometry rotated 90 degrees
        m = VoxelMap((0, 0, 0), 0.1, (60, 60, 24))
        m.logodds[...] = -1.0
        m.logodds[:, 30, :22] = 1.0
        xs = (np.arange(60) + 0.5) * 0.1
        gap = np.abs(xs - 3.0) < 0.4
        m.logodds[gap, 30, :] = -1.0
        m._trinary[...] = m.recompute_trinary()
        cands = detect_doors(m, cluster_at(3.0, 3.0))
        assert len(cands) == 1
        assert abs(cands[0].direction[1]) > 0.98


class TestRegistryLifecycle:
    def test_dedup_and_ids(self):
        reg = SemanticRegistry()
        a = SemanticObject(-1, np.array([3.0, 3.0, 1.0]),
                           np.array([1.0, 0, 0]), 0.8)
        b = SemanticObject(-1, np.array([3.1, 3.0, 1.0]),
                           np.array([1.0, 0, 0]), 0.8)
        c = SemanticObject(-1, np.array([6.0, 3.0, 1.0]),
                           np.array([1.0, 0, 0]), 0.8)
        added = reg.add_candidates([a, b, c])
        assert len(added) == 2
        assert sorted(o.id for o in reg.objects.values()) == [0, 1]

    def test_rejected_is_terminal(self):
        reg = SemanticRegistry()
        reg.add_candidates([SemanticObject(-1, np.zeros(3),
                                           np.array([1.0, 0, 0]), 0.8)])
        reg.set_status(0, "rejected")
        with pytest.raises(ValueError):
            reg.set_status(0, "confirmed")

    def test_recheck_removes_filled_gap(self):
        m = wall_map(3.0, 0.8)
        reg = SemanticRegistry()
        reg.add_candidates(detect_doors(m, cluster_at(3.0, 3.0)))
        assert len(reg.unconfirmed()) == 1
        # no change -> idempotent
        assert recheck_objects(m, reg) == []
        # gap later observed occupied -> candidate removed
        m.logodds[30, :, :22] = 1.0
        m._trinary[...] = m.recompute_trinary()
        removed = recheck_objects(m, reg)
        assert len(removed) == 1
        assert reg.objects == {}

    def test_confirmed_persists_through_noise(self):
        m = wall_map(3.0, 0.8)
        reg = SemanticRegistry()
        reg.add_candidates(detect_doors(m, cluster_at(3.0, 3.0)))
        reg.set_status(0, "confirmed")
        m.logodds[30, :, :22] = 1.0
        m._trinary[...] = m.recompute_trinary()
        assert recheck_objects(m, reg) == []
        assert reg.objects[0].status == "confirmed"


class TestConfirmation:
    def setup_candidate(self):
        m = wall_map(3.0, 0.8)
        reg = SemanticRegistry()
        reg.add_candidates(detect_doors(m, cluster_at(3.0, 3.0)))
        return m, reg, reg.objects[0]

    def test_confirm_when_close_and_facing(self):
        m, reg, obj = self.setup_candidate()
        pose = Pose(np.array([2.2, 3.0, 1.0]), 0.0)  # faces +x toward door
        out = try_confirm(m, reg, pose, CameraModel())
        assert out == [(obj.id, "confirmed")]

    def test_no_action_when_far(self):
        m, reg, obj = self.setup_candidate()
        pose = Pose(np.array([0.5, 3.0, 1.0]), 0.0)
        assert try_confirm(m, reg, pose, CameraModel()) == []
        assert obj.status == "to_be_confirmed"

    def test_reject_when_gap_gone(self):
        m, reg, obj = self.setup_candidate()
        m.logodds[30, :, :22] = 1.0
        m._trinary[...] = m.recompute_trinary()
        pose = Pose(np.array([2.2, 3.0, 1.0]), 0.0)
        out = try_confirm(m, reg, pose, CameraModel())
        assert out == [(obj.id, "rejected")]
        with pytest.raises(ValueError):
            reg.set_status(obj.id, "confirmed")


class TestClassifyFrontier:
    def room_setup(self):
        m = wall_map(3.0, 0.8)
        reg = SemanticRegistry()
        reg.add_candidates(detect_doors(m, cluster_at(3.0, 3.0)))
        reg.set_status(0, "confirmed")
        return m, reg

    def make_cluster(self, cells):
        cells = np.asarray(cells, dtype=np.int64)
        return SimpleNamespace(cells=cells,
                               centroid=(cells.mean(axis=0) + 0.5) * 0.1,
                               size=len(cells))

    def test_corridor_mode_always_corridor(self):
        m, reg = self.room_setup()
        cl = self.make_cluster([[40, 30, 10]])
        assert classify_frontier(cl, "CorridorExplore", reg, m,
                                 np.array([4.0, 3.0, 1.0])) == "corridor"

    def test_in_room_cluster_is_room(self):
        m, reg = self.room_setup()
        # robot and cluster both on the x>3 side of the wall
        cl = self.make_cluster([[45, 30, 10], [45, 31, 10], [45, 32, 10]])
        assert classify_frontier(cl, "ExploreAOI", reg, m,
                                 np.array([4.0, 3.0, 1.0])) == "room"

    def test_cluster_behind_door_is_corridor(self):
        m, reg = self.room_setup()
        # robot in the room (x>3), cluster on the corridor side (x<3):
        # the only free passage crosses the confirmed door plane
        cl = self.make_cluster([[10, 30, 10], [10, 31, 10]])
        assert classify_frontier(cl, "ExploreAOI", reg, m,
                                 np.array([4.0, 3.0, 1.0])) == "corridor"

    def test_matches_bruteforce_floodfill(self):
        m, reg = self.room_setup()
        from collections import deque
        free = m.trinary == 0
        from exploresim.semantics import _door_blocked_cells
        for obj in reg.confirmed():
            for (i, j) in _door_blocked_cells(m, obj):
                free[i, j, :] = False
        start = (40, 30, 10)
        seen = {start}
        dq = deque([start])
        while dq:
            c = dq.popleft()
            for a in (-1, 0, 1):
                for b in (-1, 0, 1):
                    for d in (-1, 0, 1):
                        n = (c[0] + a, c[1] + b, c[2] + d)
                        if n in seen:
                            continue
                        if all(0 <= n[q] < m.dims[q] for q in range(3)) \
                                and free[n]:
                            seen.add(n)
                            dq.append(n)
        rng = np.random.default_rng(3)
        for _ in range(20):
            v = rng.integers([0, 0, 2], [60, 60, 20])
            if not free[tuple(v)]:
                continue
            cl = self.make_cluster([v])
            got = classify_frontier(cl, "ExploreAOI", reg, m,
                                    np.array([4.05, 3.05, 1.05]))
            assert got == ("room" if tuple(v) in seen else "corridor")
