"""Acceptance suite: one test per criterion, at the stated tolerances.

The end-to-end criteria drive the real file surface (synth -> track ->
evaluate through the CLI); the numeric criteria check the core algorithms
against independent oracles.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from dualtrack.assignment import solve
from dualtrack.cli import cli, generate_synthetic
from dualtrack.core import BoundingBox, TrackerConfig, iou
from dualtrack.imaging import DescriptorSet
from dualtrack.io import parse_tags, parse_tracks
from dualtrack.klt import detect_features, track_features
from dualtrack.metrics import clear_mot, evaluate, trajectory_coverage
from dualtrack.similarity import (descriptor_weights, emd_1d,
                                  forstner_distance,
                                  weighted_global_similarity)
from dualtrack.synth import OcclusionEvent, SynthObject, SynthSpec

CFG = TrackerConfig()


# ---------------------------------------------------------------------------
# scenario fixtures (shared by criteria 6, 7 and 10)

CROSSING_DISTINCT = SynthSpec(
    width=320, height=176, n_frames=200,
    objects=(
        SynthObject(x0=10, y0=40, vx=1.4, vy=0.1, w=24, h=60,
                    color=(210, 50, 40)),
        SynthObject(x0=290, y0=50, vx=-1.4, vy=-0.05, w=26, h=64,
                    color=(40, 70, 210)),
    ),
    occlusions=(OcclusionEvent(0, 1, 96, 106),),
    seed=11,
)

CROSSING_SAME_COLOR = SynthSpec(
    width=256, height=176, n_frames=70,
    objects=(
        SynthObject(x0=10, y0=44, vx=2.5, vy=0.0, w=24, h=58,
                    color=(60, 140, 60)),
        SynthObject(x0=215, y0=44, vx=-2.5, vy=0.0, w=25, h=60,
                    color=(60, 140, 60)),
    ),
    seed=13,
)

MERGE_PAIR = SynthSpec(
    width=256, height=160, n_frames=40,
    objects=(
        SynthObject(x0=30, y0=30, vx=1.5, vy=0.2, w=24, h=60,
                    color=(200, 60, 40)),
        SynthObject(x0=66, y0=34, vx=1.5, vy=0.2, w=26, h=64,
                    color=(40, 80, 200)),
    ),
    occlusions=(OcclusionEvent(0, 1, 10, 29),),
    seed=17,
)

PERFECT_INPUT = SynthSpec(
    width=192, height=144, n_frames=40,
    objects=(
        SynthObject(x0=12, y0=20, vx=2.0, vy=0.5, w=24, h=56,
                    color=(200, 40, 40)),
        SynthObject(x0=150, y0=30, vx=-2.0, vy=0.3, w=26, h=60,
                    color=(40, 60, 200)),
    ),
    seed=5,
)


def _track_cli(data_dir, out_path):
    code = cli(["track",
                "--detections", str(data_dir / "detections.csv"),
                "--frames", str(data_dir / "frames"),
                "--out", str(out_path)])
    assert code == 0
    return out_path


@pytest.fixture(scope="module")
def scenario_distinct(tmp_path_factory):
    root = tmp_path_factory.mktemp("distinct")
    data = root / "data"
    generate_synthetic(CROSSING_DISTINCT, data)
    out = _track_cli(data, root / "hyp.csv")
    return data, out


@pytest.fixture(scope="module")
def scenario_same_color(tmp_path_factory):
    root = tmp_path_factory.mktemp("same_color")
    data = root / "data"
    generate_synthetic(CROSSING_SAME_COLOR, data)
    out = _track_cli(data, root / "hyp.csv")
    return data, out


# ---------------------------------------------------------------------------
# criterion 1: Hungarian vs exhaustive search

def brute_force_optimum(scores):
    n_rows, n_cols = scores.shape
    best = 0.0

    def rec(row, used, chosen):
        nonlocal best
        if row == n_rows:
            best = max(best, math.fsum(chosen))
            return
        rec(row + 1, used, chosen)
        for c in range(n_cols):
            if c not in used and scores[row, c] > 0:
                rec(row + 1, used | {c}, chosen + [scores[row, c]])

    rec(0, frozenset(), [])
    return best


def test_criterion_01_hungarian_matches_brute_force():
    rng = np.random.default_rng(1234)
    start = time.time()
    for _ in range(1000):
        rows, cols = rng.integers(1, 7, size=2)
        scores = rng.uniform(0.0, 1.0, size=(rows, cols))
        got = solve(scores, forbid_below=0.0)
        assert got.total == brute_force_optimum(scores)
    elapsed = time.time() - start
    assert elapsed < 5.0
    print(f"\nCRITERION 1 PASS: 1000 matrices exact in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criterion 2: 1-D EMD vs a min-cost transport LP

def transport_lp(supply, demand, cost):
    m, n = cost.shape
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    res = linprog(cost.ravel(), A_eq=a_eq,
                  b_eq=np.concatenate([supply, demand]),
                  bounds=(0, None), method="highs")
    assert res.success
    return res.fun


def test_criterion_02_emd_matches_transport_solver():
    rng = np.random.default_rng(77)
    ground = np.abs(np.subtract.outer(np.arange(5), np.arange(5))).astype(float)
    worst = 0.0
    for _ in range(500):
        h1 = rng.uniform(0.0, 1.0, 5)
        h2 = rng.uniform(0.0, 1.0, 5)
        h1 /= h1.sum()
        h2 /= h2.sum()
        want = transport_lp(h1, h2, ground)
        worst = max(worst, abs(emd_1d(h1, h2) - want))
    assert worst <= 1e-9
    print(f"\nCRITERION 2 PASS: 500 histogram pairs, worst gap {worst:.2e}")


# ---------------------------------------------------------------------------
# criterion 3: covariance-distance properties

def test_criterion_03_forstner_properties():
    rng = np.random.default_rng(99)
    checked = 0
    for dim in (2, 5, 11):
        for _ in (range(34) if dim < 11 else range(32)):
            a = rng.normal(size=(dim, dim))
            b = rng.normal(size=(dim, dim))
            c1 = a @ a.T + np.eye(dim)
            c2 = b @ b.T + np.eye(dim)
            assert forstner_distance(c1, c1) <= 1e-9
            d_ab = forstner_distance(c1, c2)
            assert abs(d_ab - forstner_distance(c2, c1)) <= 1e-9
            q1, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
            q2, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
            x = q1 @ np.diag(rng.uniform(0.5, 2.0, dim)) @ q2
            d_t = forstner_distance(x @ c1 @ x.T, x @ c2 @ x.T)
            assert abs(d_t - d_ab) <= 1e-6 * max(d_ab, 1.0)
            checked += 1
    assert checked == 100
    print(f"\nCRITERION 3 PASS: {checked} random transforms")


# ---------------------------------------------------------------------------
# criterion 4: discriminative weight and global similarity arithmetic

def _desc(shape=1.0, size=100.0, color=(255, 0, 0)):
    hists = np.zeros((1, 3, 16))
    hists[:, :, 0] = 1.0
    return DescriptorSet(shape_ratio=shape, area=size, histograms=hists,
                         covariances=np.eye(11)[None],
                         dominant_colors=((np.array([color], dtype=float),
                                           np.array([1.0])),))


def test_criterion_04_weight_and_similarity_arithmetic():
    cfg = TrackerConfig(pyramid_levels_L=1)
    obj = _desc(shape=1.0, size=100.0)
    neighbor = _desc(shape=10.0, size=1000.0)  # DS1 = DS2 = 0.1 = ds_floor
    w = descriptor_weights(obj, [neighbor], cfg)
    assert w[0] == 1.0
    assert w[1] == 1.0

    ds_values = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
    w_half = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
    assert weighted_global_similarity(ds_values, w_half, w_half) == 1.0

    rng = np.random.default_rng(4)
    for _ in range(50):
        ds_rand = rng.uniform(0.0, 1.0, 5)
        got = weighted_global_similarity(ds_rand, np.ones(5), np.ones(5))
        assert got == ds_rand.mean()
    print("\nCRITERION 4 PASS: weight and similarity arithmetic exact")


# ---------------------------------------------------------------------------
# criterion 5: planted-shift recovery at 320x240

def _blob_texture(h, w, cell, seed):
    """Band-limited random texture: low-resolution noise upsampled bilinearly."""
    rng = np.random.default_rng(seed)
    small = rng.uniform(0, 255, (h // cell + 2, w // cell + 2))
    ys = np.linspace(0, small.shape[0] - 1.001, h)
    xs = np.linspace(0, small.shape[1] - 1.001, w)
    iy = ys.astype(int)
    ix = xs.astype(int)
    fy = (ys - iy)[:, None]
    fx = (xs - ix)[None, :]
    a, b = small[iy][:, ix], small[iy][:, ix + 1]
    c, d = small[iy + 1][:, ix], small[iy + 1][:, ix + 1]
    return a * (1 - fx) * (1 - fy) + b * fx * (1 - fy) \
        + c * (1 - fx) * fy + d * fx * fy


def test_criterion_05_planted_shift_recovery():
    margin = 8  # world is larger than the 320x240 frame, so shifts are exact
    world = _blob_texture(240 + 2 * margin, 320 + 2 * margin, cell=6, seed=7)
    base = np.ascontiguousarray(world[margin:margin + 240,
                                      margin:margin + 320])
    cfg = TrackerConfig(klt_max_features=300)
    feats = detect_features(base, BoundingBox(14, 14, 292, 212), cfg)
    assert len(feats) >= 200
    total_time = 0.0
    for dx, dy in ((3, 0), (6, 0), (0, -6), (-4, 3), (4, -4), (1, 1)):
        shifted = np.ascontiguousarray(
            world[margin - dy:margin - dy + 240,
                  margin - dx:margin - dx + 320])
        start = time.time()
        moved = track_features(base, shifted, feats, cfg)
        pair_time = time.time() - start
        total_time += pair_time
        assert pair_time < 1.0
        good = 0
        for f, m in zip(feats, moved):
            if m.status.value != "tracked":
                continue
            err = math.hypot(m.position[0] - f.position[0] - dx,
                             m.position[1] - f.position[1] - dy)
            good += err <= 0.5
        assert good / len(feats) >= 0.95
    print(f"\nCRITERION 5 PASS: 6 shifts, {total_time / 6 * 1000:.0f} ms/pair")


# ---------------------------------------------------------------------------
# criterion 6: detection correction quality over a merge span

def test_criterion_06_split_boxes_cover_ground_truth(tmp_path):
    data = tmp_path / "merge"
    generate_synthetic(MERGE_PAIR, data)
    out = _track_cli(data, tmp_path / "hyp.csv")
    gt = parse_tracks(data / "gt.csv")
    hyp = parse_tracks(out)
    merge_frames = [f for f in range(MERGE_PAIR.occlusions[0].start,
                                     MERGE_PAIR.occlusions[0].end + 1)]
    good = 0
    for f in merge_frames:
        boxes = [per[f] for per in hyp.values() if f in per]
        covered = all(
            any(iou(b, gt[g][f]) >= 0.5 for b in boxes) for g in gt)
        good += covered and len(boxes) >= 2
    assert good / len(merge_frames) >= 0.9
    print(f"\nCRITERION 6 PASS: {good}/{len(merge_frames)} merge frames covered")


# ---------------------------------------------------------------------------
# criterion 7: end-to-end identity preservation, both selection directions

def test_criterion_07a_distinct_colors_zero_switches(scenario_distinct):
    data, out = scenario_distinct
    gt = parse_tracks(data / "gt.csv")
    hyp = parse_tracks(out)
    report = evaluate(gt, hyp)
    assert report.idsw == 0
    assert report.mota >= 0.9
    print(f"\nCRITERION 7a PASS: MOTA {report.mota:.3f}, 0 switches")


def test_criterion_07b_same_color_selects_klt(scenario_same_color):
    data, out = scenario_same_color
    gt = parse_tracks(data / "gt.csv")
    hyp = parse_tracks(out)
    report = evaluate(gt, hyp)
    assert report.idsw <= 1
    tags = parse_tags(str(out) + ".tags")
    crossing_span = [f for f in gt[0]
                     if f in gt[1] and iou(gt[0][f], gt[1][f]) > 0]
    klt_frames = sorted(f for (f, _tid), tag in tags.items() if tag == "K")
    assert any(f in crossing_span for f in klt_frames)
    print(f"\nCRITERION 7b PASS: IDSW {report.idsw}, "
          f"KLT selected at frames {klt_frames} of span {crossing_span}")


# ---------------------------------------------------------------------------
# criterion 8: perfect input reproduces ground truth

def test_criterion_08_perfect_input_identity(tmp_path):
    data = tmp_path / "perfect"
    generate_synthetic(PERFECT_INPUT, data)
    out = _track_cli(data, tmp_path / "hyp.csv")
    gt = parse_tracks(data / "gt.csv")
    hyp = parse_tracks(out)
    report = evaluate(gt, hyp)
    assert report.mota == 1.0
    assert report.motp == 1.0
    assert report.mt == 100.0
    # boxes agree exactly, ids up to relabeling
    assert len(hyp) == len(gt)
    for tid, per in hyp.items():
        gt_id = min(gt, key=lambda g: abs(gt[g][1].x - per[1].x))
        assert per == gt[gt_id]
    print("\nCRITERION 8 PASS: output equals ground truth")


# ---------------------------------------------------------------------------
# criterion 9: metrics hand-oracle and boundary rules

def test_criterion_09_metrics_hand_oracle():
    frames = range(1, 11)
    box = lambda x, y=0.0: BoundingBox(x, y, 10.0, 10.0)
    gt = {0: {f: box(5.0 * f) for f in frames},
          1: {f: box(5.0 * f, 50.0) for f in frames}}
    hyp = {10: {f: gt[0][f] for f in range(1, 5)},
           11: {f: gt[0][f] for f in range(5, 11)},
           12: dict(gt[1])}
    mota, motp, fp, fn, idsw = clear_mot(gt, hyp)
    assert idsw == 1
    assert mota == pytest.approx(0.95, abs=1e-12)
    assert motp == pytest.approx(1.0, abs=1e-12)

    single = {0: {f: box(5.0 * f) for f in frames}}
    cover_8 = {9: {f: single[0][f] for f in list(frames)[:8]}}
    assert trajectory_coverage(single, cover_8) == (0.0, 100.0, 0.0)
    cover_9 = {9: {f: single[0][f] for f in list(frames)[:9]}}
    assert trajectory_coverage(single, cover_9) == (100.0, 0.0, 0.0)
    cover_2 = {9: {f: single[0][f] for f in list(frames)[:2]}}
    assert trajectory_coverage(single, cover_2) == (0.0, 100.0, 0.0)
    cover_1 = {9: {f: single[0][f] for f in list(frames)[:1]}}
    assert trajectory_coverage(single, cover_1) == (0.0, 0.0, 100.0)
    print("\nCRITERION 9 PASS: hand oracle and boundaries")


# ---------------------------------------------------------------------------
# criterion 10: bit-identical reruns

def test_criterion_10_determinism(scenario_distinct, scenario_same_color,
                                  tmp_path):
    for name, (data, out) in (("distinct", scenario_distinct),
                              ("same_color", scenario_same_color)):
        rerun = tmp_path / f"{name}_rerun.csv"
        _track_cli(data, rerun)
        assert rerun.read_bytes() == out.read_bytes()
        with open(str(rerun) + ".tags", "rb") as fa, \
                open(str(out) + ".tags", "rb") as fb:
            assert fa.read() == fb.read()
    print("\nCRITERION 10 PASS: bit-identical outputs")
