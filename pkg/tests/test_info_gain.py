import math

import numpy as np
import pytest

from exploresim.blocks import PredictedBlock
from exploresim.frontier import detect_all_frontiers
from exploresim.geometry import wrap_angle
from exploresim.info_gain import (PredictionOverlay, SamplerParams,
                                  classical_gain_ray, gain_at_yaw,
                                  position_is_admissible, predicted_gain_ray,
                                  sample_viewpoints, yaw_gains)
from exploresim.sim_world import CameraModel
from exploresim.voxel_map import VoxelMap


def open_map(dims=(40, 40, 12), unknown_from_x=None):
    m = VoxelMap((0, 0, 0), 0.1, dims)
    m.logodds[...] = -1.0
    if unknown_from_x is not None:
        m.logodds[unknown_from_x:, :, :] = 0.0
    m._trinary[...] = m.recompute_trinary()
    return m


def overlay_with(m, pred_vals, mask):
    ov = PredictionOverlay(m)
    ov.pred[...] = pred_vals
    ov.covered[...] = mask
    return ov


class TestRayGain:
    def test_fully_unknown_straight_ray(self):
        m = VoxelMap((0, 0, 0), 0.1, (20, 4, 4))
        start = np.array([0.05, 0.15, 0.15])
        end = np.array([1.05, 0.15, 0.15])
        # 10 unknown voxels from x=0..10 inclusive of start voxel
        assert classical_gain_ray(m, start, end) == 11

    def test_known_free_ray_zero(self):
        m = open_map()
        assert classical_gain_ray(m, [0.05, 1.0, 0.5], [3.0, 1.0, 0.5]) == 0

    def test_blocked_by_wall(self):
        m = open_map(unknown_from_x=10)
        m.logodds[12, :, :] = 1.0  # observed wall inside the unknown band
        m._trinary[...] = m.recompute_trinary()
        # ray along +x from x=0.95: unknown voxels 10, 11 then wall stops it
        g = classical_gain_ray(m, [0.95, 1.0, 0.5], [3.0, 1.0, 0.5])
        assert g == 2

    def test_six_unknown_third_predicted_occupied(self):
        m = open_map(dims=(20, 4, 4), unknown_from_x=10)
        pred = np.full(m.dims, -1, dtype=np.int8)
        cov = np.zeros(m.dims, dtype=bool)
        pred[12, :, :] = 1
        cov[12, :, :] = True
        ov = overlay_with(m, pred, cov)
        start = np.array([0.95, 0.15, 0.15])
        end = np.array([1.55, 0.15, 0.15])  # voxels 9..15: unknown are 10..15
        assert classical_gain_ray(m, start, end) == 6
        assert predicted_gain_ray(m, ov, start, end) == 3

    def test_predicted_free_and_unknown_still_count(self):
        m = open_map(dims=(20, 4, 4), unknown_from_x=10)
        pred = np.full(m.dims, -1, dtype=np.int8)
        cov = np.zeros(m.dims, dtype=bool)
        pred[11, :, :] = 0   # predicted free
        cov[11, :, :] = True
        cov[13, :, :] = True  # covered but predicted unknown
        ov = overlay_with(m, pred, cov)
        start = np.array([0.95, 0.15, 0.15])
        end = np.array([1.65, 0.15, 0.15])
        assert predicted_gain_ray(m, ov, start, end) == \
            classical_gain_ray(m, start, end)

    def test_null_overlay_parity_random_rays(self):
        rng = np.random.default_rng(0)
        m = VoxelMap((0, 0, 0), 0.1, (30, 30, 10))
        m.logodds[...] = rng.choice([-1.0, 0.0, 1.0], size=m.dims,
                                    p=[0.5, 0.3, 0.2])
        m._trinary[...] = m.recompute_trinary()
        ov = PredictionOverlay(m)  # empty: nothing covered
        for _ in range(1000):
            s = rng.uniform([0.05, 0.05, 0.05], [2.95, 2.95, 0.95])
            e = s + rng.uniform(-2, 2, size=3)
            assert predicted_gain_ray(m, ov, s, e) == \
                classical_gain_ray(m, s, e)

    def test_dominance_invariant(self):
        rng = np.random.default_rng(1)
        m = VoxelMap((0, 0, 0), 0.1, (30, 30, 10))
        m.logodds[...] = rng.choice([-1.0, 0.0, 1.0], size=m.dims,
                                    p=[0.5, 0.3, 0.2])
        m._trinary[...] = m.recompute_trinary()
        pred = rng.integers(-1, 2, size=m.dims).astype(np.int8)
        cov = rng.uniform(size=m.dims) < 0.5
        ov = overlay_with(m, pred, cov)
        for _ in range(500):
            s = rng.uniform([0.05, 0.05, 0.05], [2.95, 2.95, 0.95])
            e = s + rng.uniform(-2, 2, size=3)
            p = predicted_gain_ray(m, ov, s, e)
            c = classical_gain_ray(m, s, e)
            n = len(m.traverse(s, e))
            assert 0 <= p <= c <= n


class TestOverlay:
    def test_block_alignment_and_recency(self):
        m = VoxelMap((0, 0, 0), 0.1, (100, 100, 24))
        ov = PredictionOverlay(m)
        probs = np.full((80, 80, 24), 0.9)
        mask = np.ones((80, 80, 24), dtype=bool)
        b1 = PredictedBlock(probs, mask, origin=np.zeros(3), resolution=0.1)
        ov.add_block(b1)
        assert ov.pred[5, 5, 5] == 1 and ov.covered[5, 5, 5]
        # newer overlapping block predicts free and masks out a corner
        probs2 = np.full((80, 80, 24), 0.1)
        mask2 = np.ones((80, 80, 24), dtype=bool)
        mask2[:10, :10, :] = False
        b2 = PredictedBlock(probs2, mask2, origin=np.zeros(3), resolution=0.1)
        ov.add_block(b2)
        assert ov.pred[50, 50, 5] == 0
        assert not ov.covered[5, 5, 5]       # newest block wins, even unmasked
        assert ov.pred[5, 5, 5] == -1

    def test_misaligned_block_rejected(self):
        m = VoxelMap((0, 0, 0), 0.1, (100, 100, 24))
        ov = PredictionOverlay(m)
        b = PredictedBlock(np.full((80, 80, 24), 0.5),
                           np.ones((80, 80, 24), dtype=bool),
                           origin=np.array([0.03, 0.0, 0.0]), resolution=0.1)
        with pytest.raises(ValueError):
            ov.add_block(b)

    def test_partially_out_of_map_clips(self):
        m = VoxelMap((0, 0, 0), 0.1, (50, 50, 24))
        ov = PredictionOverlay(m)
        b = PredictedBlock(np.full((80, 80, 24), 0.9),
                           np.ones((80, 80, 24), dtype=bool),
                           origin=np.array([-2.0, -2.0, 0.0]), resolution=0.1)
        ov.add_block(b)
        assert ov.covered[:50, :50, :].all()


class TestYawWindow:
    def window_setup(self, seed):
        rng = np.random.default_rng(seed)
        m = VoxelMap((0, 0, 0), 0.1, (60, 60, 20))
        m.logodds[...] = rng.choice([-1.0, 0.0, 1.0], size=m.dims,
                                    p=[0.4, 0.5, 0.1])
        m._trinary[...] = m.recompute_trinary()
        pred = rng.integers(-1, 2, size=m.dims).astype(np.int8)
        cov = rng.uniform(size=m.dims) < 0.4
        return m, overlay_with(m, pred, cov), rng

    def test_window_matches_direct_eval(self):
        cam = CameraModel()
        params = SamplerParams()
        for seed in range(4):
            m, ov, rng = self.window_setup(seed)
            for _ in range(25):
                pos = rng.uniform([0.5, 0.5, 0.3], [5.5, 5.5, 1.7])
                bearing = rng.uniform(-math.pi, math.pi)
                yaws, gains = yaw_gains(m, ov, pos, bearing, cam, params)
                for y, g in zip(yaws, gains):
                    assert g == gain_at_yaw(m, ov, pos, y, cam, params)

    def test_rejects_incommensurate_slices(self):
        cam = CameraModel(hfov=math.radians(85.0))
        m, ov, rng = self.window_setup(0)
        with pytest.raises(ValueError):
            yaw_gains(m, ov, [1.0, 1.0, 1.0], 0.0, cam, SamplerParams())


class TestAdmissibility:
    def test_requires_known_free(self):
        m = open_map()
        assert position_is_admissible(m, [2.0, 2.0, 0.6])
        m2 = VoxelMap((0, 0, 0), 0.1, (40, 40, 12))  # all unknown
        assert not position_is_admissible(m2, [2.0, 2.0, 0.6])

    def test_clearance_blocks_near_wall(self):
        m = open_map()
        m.logodds[20, 20, 6] = 1.0
        m._trinary[...] = m.recompute_trinary()
        assert not position_is_admissible(m, [2.05 + 0.15, 2.05, 0.65])
        assert position_is_admissible(m, [2.05 + 0.45, 2.05, 0.65])


class TestSampleViewpoints:
    def frontier_map(self):
        # free half x < 2.0 m, unknown beyond: frontier plane at x = 2.0
        m = open_map(dims=(60, 60, 16), unknown_from_x=20)
        return m

    def cluster(self, m):
        cls = [c for c in detect_all_frontiers(m) if c.size >= 5]
        assert cls
        return max(cls, key=lambda c: c.size)

    def test_sorted_truncated_admissible(self):
        m = self.frontier_map()
        cl = self.cluster(m)
        cam = CameraModel(max_range=3.0)
        params = SamplerParams(n_keep=5)
        vps = sample_viewpoints(cl, m, None, cam, params)
        assert 1 <= len(vps) <= 5
        gains = [v.gain for v in vps]
        assert gains == sorted(gains, reverse=True)
        for v in vps:
            assert position_is_admissible(m, v.position)
            assert -math.pi < v.yaw <= math.pi

    def test_best_yaw_faces_centroid(self):
        m = self.frontier_map()
        cl = self.cluster(m)
        cam = CameraModel(max_range=3.0)
        params = SamplerParams()
        vps = sample_viewpoints(cl, m, None, cam, params)
        for v in vps[:3]:
            bearing = math.atan2(cl.centroid[1] - v.position[1],
                                 cl.centroid[0] - v.position[0])
            # frontier faces an unknown half-space: the best yaw looks at it
            assert abs(wrap_angle(v.yaw - bearing)) <= \
                params.yaw_span / 2 + 1e-9
            assert math.cos(wrap_angle(v.yaw - bearing)) > 0

    def test_prediction_lowers_gain(self):
        m = self.frontier_map()
        cl = self.cluster(m)
        cam = CameraModel(max_range=3.0)
        params = SamplerParams(n_keep=8)
        # wall predicted 0.5 m behind the frontier plane
        ov = PredictionOverlay(m)
        ov.pred[25, :, :] = 1
        ov.covered[25, :, :] = True
        base = sample_viewpoints(cl, m, None, cam, params)
        pred = sample_viewpoints(cl, m, ov, cam, params)
        base_best = max(v.gain for v in base)
        pred_best = max(v.gain for v in pred)
        assert pred_best < base_best

    def test_empty_cluster_raises(self):
        m = self.frontier_map()

        class Empty:
            size = 0
            centroid = np.zeros(3)
        with pytest.raises(ValueError):
            sample_viewpoints(Empty(), m, None, CameraModel())

    def test_no_feasible_position_empty(self):
        m = VoxelMap((0, 0, 0), 0.1, (60, 60, 16))  # all unknown

        class Fake:
            size = 10
            centroid = np.array([3.0, 3.0, 0.8])
        assert sample_viewpoints(Fake(), m, None, CameraModel()) == []
