import math

import numpy as np
import pytest

from dualtrack.core import (BoundingBox, Detection, TrackerConfig,
                            center_distance_2d, ground_distance, iou)


class TestBoundingBox:
    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 0, 5)
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 5, -1)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            BoundingBox(float("nan"), 0, 1, 1)
        with pytest.raises(ValueError):
            BoundingBox(0, float("inf"), 1, 1)

    def test_center(self):
        assert BoundingBox(0, 0, 2, 2).center == (1.0, 1.0)

    def test_contains_half_open(self):
        b = BoundingBox(0, 0, 10, 10)
        assert b.contains(0, 0)
        assert not b.contains(10, 5)


class TestIou:
    def test_identical_boxes(self):
        b = BoundingBox(3, 4, 10, 20)
        assert iou(b, b) == 1.0

    def test_disjoint_boxes(self):
        assert iou(BoundingBox(0, 0, 5, 5), BoundingBox(10, 10, 5, 5)) == 0.0

    def test_half_overlap(self):
        # intersection 5x10 = 50, union 200 - 50 = 150
        got = iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10))
        assert got == pytest.approx(50.0 / 150.0, abs=1e-12)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            a = BoundingBox(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
            b = BoundingBox(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0
            assert iou(a, a) == 1.0


class TestCenterDistance:
    def test_identical(self):
        b = BoundingBox(1, 2, 3, 4)
        assert center_distance_2d(b, b) == 0.0

    def test_345_triangle(self):
        a = BoundingBox(-1, -1, 2, 2)   # center (0, 0)
        b = BoundingBox(2, 3, 2, 2)     # center (3, 4)
        assert center_distance_2d(a, b) == pytest.approx(5.0)

    def test_axis_aligned(self):
        a = BoundingBox(0, 0, 2, 2)
        b = BoundingBox(10, 0, 2, 2)
        assert center_distance_2d(a, b) == pytest.approx(10.0)


class TestGroundDistance:
    def test_identity_homography_maps_feet(self):
        h = np.eye(3)
        a = BoundingBox(0, 0, 2, 2)    # foot (1, 2)
        b = BoundingBox(3, 0, 2, 6)    # foot (4, 6)
        assert ground_distance(a, b, h) == pytest.approx(5.0)

    def test_scaling_homography(self):
        h = np.diag([0.1, 0.1, 1.0])
        a = BoundingBox(0, 0, 2, 2)
        b = BoundingBox(30, 0, 2, 2)
        assert ground_distance(a, b, h) == pytest.approx(3.0)


class TestDetection:
    def test_negative_frame_rejected(self):
        with pytest.raises(ValueError):
            Detection(frame_index=-1, bbox=BoundingBox(0, 0, 1, 1))

    def test_default_confidence(self):
        d = Detection(frame_index=0, bbox=BoundingBox(0, 0, 1, 1))
        assert d.confidence == 1.0


class TestTrackerConfig:
    def test_defaults_valid(self):
        cfg = TrackerConfig()
        assert cfg.suspension_max_frames == cfg.temporal_window_T

    def test_rejects_bad_theta(self):
        with pytest.raises(ValueError):
            TrackerConfig(link_threshold_theta=1.5)

    def test_rejects_even_window(self):
        with pytest.raises(ValueError):
            TrackerConfig(klt_window=14)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            TrackerConfig(model_window_Q=0)

    def test_override(self):
        cfg = TrackerConfig().with_overrides(hist_bins_B=8)
        assert cfg.hist_bins_B == 8
