import math

import numpy as np
import pytest

from dualtrack.core import (BoundingBox, Detection, ObjectSnapshot, Source,
                            TrackerConfig)
from dualtrack.imaging import DescriptorSet
from dualtrack.models import (AppearanceModel, Tracker, TrackerProposal,
                              best_candidate, is_noise, joint_probability,
                              prob_covariance, prob_dominant_color,
                              prob_histogram, prob_size, select_tracker)

CFG = TrackerConfig(pyramid_levels_L=1)
Q = CFG.model_window_Q


def make_desc(shape=1.0, size=100.0, hist_bin=0, cov=None, color=(255, 0, 0),
              bins=16):
    hists = np.zeros((1, 3, bins))
    hists[:, :, hist_bin] = 1.0
    if cov is None:
        cov = np.eye(11)
    covs = np.asarray(cov, dtype=float)[None, :, :]
    dom = ((np.array([color], dtype=float), np.array([1.0])),)
    return DescriptorSet(shape_ratio=shape, area=size, histograms=hists,
                         covariances=covs, dominant_colors=dom)


def snap(desc, frame=0, source=Source.DETECTOR):
    return ObjectSnapshot(detection=Detection(frame, BoundingBox(0, 0, 10, 10)),
                          descriptors=desc, source=source)


def model_of(descs, length=None):
    window = [snap(d, frame=i) for i, d in enumerate(descs)]
    return AppearanceModel.from_window(window, length or max(Q, len(descs)), CFG)


class TestProbSize:
    def test_peak_at_mean(self):
        m = model_of([make_desc(shape=1.0)] * 3)
        assert prob_size(snap(make_desc(shape=1.0)), m, k=1) == 1.0

    def test_one_sigma_away(self):
        m = model_of([make_desc(shape=0.8), make_desc(shape=1.2)])
        # mean 1.0, std 0.2 (above the floor)
        got = prob_size(snap(make_desc(shape=1.2)), m, k=1)
        assert got == pytest.approx(math.exp(-0.5), abs=1e-12)
        assert got == pytest.approx(0.6065, abs=1e-4)

    def test_length_factor_half(self):
        m = model_of([make_desc(shape=1.0)] * 2, length=Q // 2)
        assert prob_size(snap(make_desc(shape=1.0)), m, k=1) == pytest.approx(0.5)

    def test_area_channel(self):
        m = model_of([make_desc(size=100.0)] * 2)
        assert prob_size(snap(make_desc(size=100.0)), m, k=2) == 1.0
        far = prob_size(snap(make_desc(size=200.0)), m, k=2)
        assert far < 1e-8  # many sigmas away under the floored std

    def test_sigma_floor_prevents_blowup(self):
        m = model_of([make_desc(shape=1.0)] * 4)
        assert m.std_shape == pytest.approx(0.05 * 1.0 + 1e-6)

    def test_bad_k(self):
        m = model_of([make_desc()])
        with pytest.raises(ValueError):
            prob_size(snap(make_desc()), m, k=3)

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError):
            AppearanceModel.from_window([], 1, CFG)


class TestProbHistogram:
    def test_constant_window(self):
        m = model_of([make_desc(hist_bin=2)] * 3)
        assert prob_histogram(snap(make_desc(hist_bin=2)), m) == 1.0

    def test_hand_emd_case(self):
        # candidate delta bin 3 vs window mean delta bin 0: EMD 3 of max 15
        m = model_of([make_desc(hist_bin=0)] * 3)
        got = prob_histogram(snap(make_desc(hist_bin=3)), m)
        assert got == pytest.approx(1.0 - 3.0 / 15.0, abs=1e-12)

    def test_maximally_different(self):
        m = model_of([make_desc(hist_bin=0)] * 3)
        assert prob_histogram(snap(make_desc(hist_bin=15)), m) == pytest.approx(0.0)


class TestProbCovariance:
    def test_identical(self):
        m = model_of([make_desc()] * 3)
        assert prob_covariance(snap(make_desc()), m) == pytest.approx(1.0)

    def test_known_distance_2d(self):
        cfg2 = CFG
        window = [snap(make_desc(cov=np.eye(2)), frame=i) for i in range(3)]
        m = AppearanceModel.from_window(window, Q, cfg2)
        got = prob_covariance(snap(make_desc(cov=4.0 * np.eye(2))), m)
        want = 1.0 / (1.0 + math.sqrt(2.0) * math.log(4.0))
        assert got == pytest.approx(want, abs=1e-9)

    def test_log_euclidean_mean_idempotent(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(11, 11))
        c = a @ a.T + np.eye(11)
        m = model_of([make_desc(cov=c)] * 4)
        assert np.allclose(m.mean_covariance, c, atol=1e-8)


class TestProbDominantColor:
    def test_constant_window(self):
        m = model_of([make_desc(color=(10, 20, 30))] * 3)
        got = prob_dominant_color(snap(make_desc(color=(10, 20, 30))), m, CFG)
        assert got == pytest.approx(1.0)

    def test_alternating_window(self):
        descs = [make_desc(color=(0, 0, 0)), make_desc(color=(255, 255, 255))] * 2
        m = model_of(descs)
        got = prob_dominant_color(snap(make_desc(color=(0, 0, 0))), m, CFG)
        assert got == pytest.approx(0.5, abs=1e-12)

    def test_single_snapshot_window(self):
        m = model_of([make_desc(color=(0, 0, 0))])
        got = prob_dominant_color(snap(make_desc(color=(255, 255, 255))), m, CFG)
        assert got == pytest.approx(0.0, abs=1e-12)


class TestJointProbability:
    def test_all_components_one(self):
        m = model_of([make_desc()] * 3)
        assert joint_probability(snap(make_desc()), m, CFG) == pytest.approx(1.0)

    def test_known_product(self):
        # components (1, 1, 0.8, 0.5, 1) -> 0.4
        lam = math.exp(1.0 / math.sqrt(11.0))   # covariance distance exactly 1
        m = model_of([make_desc(hist_bin=0)] * 3)
        cand = snap(make_desc(hist_bin=3, cov=lam * np.eye(11)))
        assert joint_probability(cand, m, CFG) == pytest.approx(0.4, abs=1e-9)

    def test_any_zero_component_zeroes_joint(self):
        m = model_of([make_desc(hist_bin=0, color=(0, 0, 0))] * 3)
        cand = snap(make_desc(hist_bin=15, color=(0, 0, 0)))
        assert joint_probability(cand, m, CFG) == pytest.approx(0.0)

    def test_monotone_in_components(self):
        m = model_of([make_desc(hist_bin=0)] * 3)
        near = joint_probability(snap(make_desc(hist_bin=1)), m, CFG)
        far = joint_probability(snap(make_desc(hist_bin=6)), m, CFG)
        assert near > far


class TestBestCandidate:
    def test_single_candidate(self):
        m = model_of([make_desc()] * 3)
        idx, _ = best_candidate(m, [snap(make_desc())], CFG)
        assert idx == 0

    def test_argmax(self):
        m = model_of([make_desc(hist_bin=0)] * 3)
        cands = [snap(make_desc(hist_bin=8)), snap(make_desc(hist_bin=0))]
        idx, p = best_candidate(m, cands, CFG)
        assert idx == 1
        assert p == pytest.approx(1.0)

    def test_tie_takes_lowest_index(self):
        m = model_of([make_desc()] * 3)
        cands = [snap(make_desc()), snap(make_desc())]
        idx, _ = best_candidate(m, cands, CFG)
        assert idx == 0

    def test_empty_candidates(self):
        m = model_of([make_desc()])
        with pytest.raises(ValueError):
            best_candidate(m, [], CFG)


def proposal(tracker, p, tid=0, cand=0):
    return TrackerProposal(tracker=tracker, trajectory_id=tid,
                           candidate_index=cand, joint_probability=p)


class TestSelectTracker:
    def test_only_klt_proposes(self):
        got = select_tracker(None, proposal(Tracker.KLT, 0.5), CFG)
        assert got.tracker is Tracker.KLT

    def test_appearance_wins_on_score(self):
        got = select_tracker(proposal(Tracker.APPEARANCE, 0.6),
                             proposal(Tracker.KLT, 0.3), CFG)
        assert got.tracker is Tracker.APPEARANCE

    def test_klt_wins_on_score(self):
        got = select_tracker(proposal(Tracker.APPEARANCE, 0.2),
                             proposal(Tracker.KLT, 0.7), CFG)
        assert got.tracker is Tracker.KLT

    def test_tie_prefers_appearance(self):
        got = select_tracker(proposal(Tracker.APPEARANCE, 0.6),
                             proposal(Tracker.KLT, 0.6), CFG)
        assert got.tracker is Tracker.APPEARANCE

    def test_below_threshold_rejected(self):
        got = select_tracker(proposal(Tracker.APPEARANCE, 0.01),
                             proposal(Tracker.KLT, 0.04), CFG)
        assert got is None

    def test_order_invariant(self):
        a = proposal(Tracker.APPEARANCE, 0.3)
        k = proposal(Tracker.KLT, 0.5)
        assert select_tracker(a, k, CFG) == select_tracker(a, k, CFG)


class TestIsNoise:
    def test_unmatched_split_is_noise(self):
        s = snap(make_desc(), source=Source.SPLIT_CORRECTION)
        assert is_noise(s, matched=False)

    def test_matched_split_is_kept(self):
        s = snap(make_desc(), source=Source.SPLIT_CORRECTION)
        assert not is_noise(s, matched=True)

    def test_detector_box_never_noise(self):
        s = snap(make_desc(), source=Source.DETECTOR)
        assert not is_noise(s, matched=False)
