"""Feature-point selection and pyramidal tracking, feature labeling,
detection evaluation/correction, and the point-flow object similarity.

The per-level iteration runs in a compiled kernel when available (see
_kernels); everything here is orchestration and stays in numpy.
"""

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from . import _kernels
from .core import BoundingBox, Detection, TrackerConfig, iou, center_distance_2d


class TrackStatus(enum.Enum):
    TRACKED = "tracked"
    LOST = "lost"


@dataclass(frozen=True)
class FeaturePoint:
    """One selected corner: sub-pixel position plus its min-eigenvalue score."""

    position: tuple
    quality: float
    status: TrackStatus = TrackStatus.TRACKED


@dataclass(frozen=True)
class FeatureTrack:
    """One feature tracked across a single frame step."""

    frame_t: int
    prev: tuple
    cur: tuple
    label: Optional[int] = None


@dataclass(frozen=True)
class DetectionVerdict:
    correct: bool
    labels: frozenset = frozenset()


# ---------------------------------------------------------------------------
# feature selection

def detect_features(gray: np.ndarray, box: BoundingBox,
                    cfg: TrackerConfig = TrackerConfig()) -> list:
    """Shi-Tomasi corners inside a box: minimum eigenvalue of the locally
    averaged structure tensor, local maxima above a fraction of the best
    response, thinned to a minimum spacing and capped."""
    h, w = gray.shape
    r = cfg.klt_window // 2
    x0 = max(int(math.floor(box.x + 0.5)), 0)
    y0 = max(int(math.floor(box.y + 0.5)), 0)
    x1 = min(int(math.floor(box.x + box.w + 0.5)), w)
    y1 = min(int(math.floor(box.y + box.h + 0.5)), h)
    if x0 >= x1 or y0 >= y1:
        raise ValueError("box lies outside the frame")

    # pad the crop so window sums near the box edge see real pixels
    margin = r + 2
    ex0, ey0 = max(0, x0 - margin), max(0, y0 - margin)
    ex1, ey1 = min(w, x1 + margin), min(h, y1 + margin)
    crop = gray[ey0:ey1, ex0:ex1].astype(np.float64)
    gy, gx = np.gradient(crop)
    sigma = cfg.klt_window / 6.0
    smooth = lambda a: ndimage.gaussian_filter(a, sigma, truncate=r / sigma)
    ixx = smooth(gx * gx)
    ixy = smooth(gx * gy)
    iyy = smooth(gy * gy)
    trace = ixx + iyy
    response = (trace - np.sqrt((ixx - iyy) ** 2 + 4.0 * ixy ** 2)) / 2.0

    # candidates must sit inside the box and leave room for a tracking window
    valid = np.zeros_like(response, dtype=bool)
    vx0 = max(x0, r) - ex0
    vy0 = max(y0, r) - ey0
    vx1 = min(x1, w - 1 - r) - ex0
    vy1 = min(y1, h - 1 - r) - ey0
    if vx0 >= vx1 or vy0 >= vy1:
        return []
    valid[vy0:vy1, vx0:vx1] = True

    peak = float(response[valid].max(initial=0.0))
    if peak <= 0.0:
        return []
    is_max = response >= ndimage.maximum_filter(response, size=3)
    cand = valid & is_max & (response >= cfg.klt_quality_ratio * peak)
    ys, xs = np.nonzero(cand)
    scores = response[ys, xs]
    order = np.lexsort((xs, ys, -scores))

    kept = []
    min_d2 = cfg.klt_min_spacing ** 2
    for idx in order:
        px, py = float(xs[idx] + ex0), float(ys[idx] + ey0)
        if any((px - kx) ** 2 + (py - ky) ** 2 < min_d2 for kx, ky, _ in kept):
            continue
        kept.append((px, py, float(scores[idx])))
        if len(kept) >= cfg.klt_max_features:
            break
    return [FeaturePoint(position=(px, py), quality=q) for px, py, q in kept]


# ---------------------------------------------------------------------------
# pyramidal tracking

def _blur121(img):
    p = np.pad(img, 1, mode="edge")
    horiz = (p[:, :-2] + 2.0 * p[:, 1:-1] + p[:, 2:]) / 4.0
    return (horiz[:-2, :] + 2.0 * horiz[1:-1, :] + horiz[2:, :]) / 4.0


def build_pyramid(gray: np.ndarray, depth: int) -> list:
    """Image pyramid: binomial blur then 2x decimation per level."""
    levels = [np.ascontiguousarray(gray, dtype=np.float64)]
    for _ in range(depth - 1):
        levels.append(np.ascontiguousarray(_blur121(levels[-1])[::2, ::2]))
    return levels


def _gradients(pyramid):
    out = []
    for img in pyramid:
        gy, gx = np.gradient(img)
        out.append((np.ascontiguousarray(gx), np.ascontiguousarray(gy)))
    return out


def _track_once(prev_pyr, next_pyr, grads, pts, cfg):
    """Coarse-to-fine translation for an (N, 2) point array. Returns
    (positions (N, 2), ok (N,) bool, residuals (N,))."""
    n = pts.shape[0]
    depth = len(prev_pyr)
    disp = np.zeros((n, 2), dtype=np.float64)
    ok = np.ones(n, dtype=bool)
    residuals = np.full(n, np.nan)
    for level in range(depth - 1, -1, -1):
        scale = 2.0 ** level
        gx, gy = grads[level]
        disp, flags, residuals = _kernels.track_level(
            prev_pyr[level], next_pyr[level], gx, gy,
            np.ascontiguousarray(pts / scale), np.ascontiguousarray(disp),
            cfg.klt_window, cfg.klt_max_iterations,
            cfg.klt_convergence_eps, cfg.klt_min_eig_threshold)
        if level > 0:
            disp = disp * 2.0
        else:
            ok &= flags == _kernels.FLAG_OK
            ok &= np.nan_to_num(residuals, nan=np.inf) <= cfg.klt_max_residual
    return pts + disp, ok, residuals


def track_features(prev_gray: np.ndarray, next_gray: np.ndarray, points,
                   cfg: TrackerConfig = TrackerConfig()) -> list:
    """Track feature points one frame forward with pyramidal LK.

    Points whose window drifts out of the frame, sits on a near-singular
    gradient patch, leaves a large residual, or fails the forward-backward
    check come back LOST with their last estimate.
    """
    if prev_gray.shape != next_gray.shape:
        raise ValueError("frame sizes differ")
    pts = np.asarray([p.position for p in points], dtype=np.float64).reshape(-1, 2)
    if len(points) == 0:
        return []
    depth = cfg.klt_pyramid_depth
    prev_pyr = build_pyramid(prev_gray, depth)
    next_pyr = build_pyramid(next_gray, depth)
    new_pts, ok, _ = _track_once(prev_pyr, next_pyr, _gradients(prev_pyr), pts, cfg)

    if cfg.klt_fb_check and np.any(ok):
        back_pts, back_ok, _ = _track_once(
            next_pyr, prev_pyr, _gradients(next_pyr), new_pts, cfg)
        fb_err = np.hypot(*(back_pts - pts).T)
        ok &= back_ok & (fb_err <= cfg.klt_fb_max_error)

    h, w = prev_gray.shape
    inside = ((new_pts[:, 0] >= 0) & (new_pts[:, 0] < w)
              & (new_pts[:, 1] >= 0) & (new_pts[:, 1] < h))
    ok &= inside
    return [
        replace(p, position=(float(np_pt[0]), float(np_pt[1])),
                status=TrackStatus.TRACKED if good else TrackStatus.LOST)
        for p, np_pt, good in zip(points, new_pts, ok)
    ]


# ---------------------------------------------------------------------------
# labeling, detection evaluation and correction

def label_features(tracks, prev_boxes: dict) -> list:
    """Attach the id of the previous-frame box containing each track's old
    position; overlap ties go to the nearest box center."""
    labeled = []
    for tr in tracks:
        px, py = tr.prev
        containing = [(tid, box) for tid, box in prev_boxes.items()
                      if box.contains(px, py)]
        if not containing:
            labeled.append(replace(tr, label=None))
            continue
        if len(containing) > 1:
            containing.sort(key=lambda item: (
                math.hypot(item[1].center[0] - px, item[1].center[1] - py),
                item[0]))
        labeled.append(replace(tr, label=containing[0][0]))
    return labeled


def _qualified_labels(det_box: BoundingBox, labeled_tracks, cfg):
    """Labels whose objects the detection actually contains: enough points
    inside, and the majority of that label's surviving points. A few stray
    points from a grazing neighbor do not make a detection 'merged'."""
    inside = {}
    total = {}
    for tr in labeled_tracks:
        if tr.label is None:
            continue
        total[tr.label] = total.get(tr.label, 0) + 1
        if det_box.contains(*tr.cur):
            inside[tr.label] = inside.get(tr.label, 0) + 1
    return {lab for lab, n in inside.items()
            if n >= cfg.min_split_points and 2 * n > total[lab]}


# a box can only contain several objects if it clearly outgrew any one of them
MERGED_AREA_RATIO = 1.25


def evaluate_detection(d: Detection, prev_boxes: dict, labeled_tracks,
                       cfg: TrackerConfig = TrackerConfig()) -> DetectionVerdict:
    """A detection is incorrect when it overlaps several previous objects and
    carries feature points from more than one of them."""
    overlapping = [tid for tid, box in prev_boxes.items() if iou(d.bbox, box) > 0.0]
    if len(overlapping) < 2:
        return DetectionVerdict(correct=True)
    labels = _qualified_labels(d.bbox, labeled_tracks, cfg)
    labels &= set(prev_boxes)
    if len(labels) < 2:
        return DetectionVerdict(correct=True)
    biggest = max(prev_boxes[lab].w * prev_boxes[lab].h for lab in labels)
    if d.bbox.w * d.bbox.h < MERGED_AREA_RATIO * biggest:
        return DetectionVerdict(correct=True)
    return DetectionVerdict(correct=False, labels=frozenset(labels))


def split_detection(d: Detection, labeled_tracks, prev_boxes: dict,
                    frame_size: tuple,
                    cfg: TrackerConfig = TrackerConfig()) -> list:
    """Split a merged detection into one box per feature label.

    Each label's box takes the size of its previous-frame object, centered on
    the label's point centroid, clipped to the frame. Labels backed by too
    few points yield nothing.
    """
    frame_w, frame_h = frame_size
    by_label = {}
    for tr in labeled_tracks:
        if tr.label is None or tr.label not in prev_boxes:
            continue
        if d.bbox.contains(*tr.cur):
            by_label.setdefault(tr.label, []).append(tr.cur)
    out = []
    margin = 2.0  # split boxes stay (almost) inside the box they came from
    for label in sorted(by_label):
        pts = by_label[label]
        if len(pts) < cfg.min_split_points:
            continue
        cx = sum(p[0] for p in pts) / len(pts)
        cy = sum(p[1] for p in pts) / len(pts)
        ref = prev_boxes[label]
        x0 = cx - ref.w / 2.0
        y0 = cy - ref.h / 2.0
        if ref.w <= d.bbox.w + 2 * margin:
            x0 = min(max(x0, d.bbox.x - margin), d.bbox.right + margin - ref.w)
        if ref.h <= d.bbox.h + 2 * margin:
            y0 = min(max(y0, d.bbox.y - margin), d.bbox.bottom + margin - ref.h)
        x0c = max(x0, 0.0)
        y0c = max(y0, 0.0)
        x1c = min(x0 + ref.w, float(frame_w))
        y1c = min(y0 + ref.h, float(frame_h))
        if x1c - x0c <= 0 or y1c - y0c <= 0:
            continue
        out.append(Detection(frame_index=d.frame_index,
                             bbox=BoundingBox(x0c, y0c, x1c - x0c, y1c - y0c),
                             confidence=d.confidence))
    return out


# ---------------------------------------------------------------------------
# object similarity from point flow

def klt_similarity(box_t: BoundingBox, box_prev: BoundingBox, tracks) -> float:
    """Fraction of shared feature points between two boxes one frame apart:
    min(P / M_prev, P / M_t) for P points moving from one box to the other."""
    m_prev = sum(1 for tr in tracks if box_prev.contains(*tr.prev))
    m_t = sum(1 for tr in tracks if box_t.contains(*tr.cur))
    if m_prev == 0 or m_t == 0:
        return 0.0
    p = sum(1 for tr in tracks
            if box_prev.contains(*tr.prev) and box_t.contains(*tr.cur))
    return min(p / m_prev, p / m_t)


def klt_propose(candidate_boxes, prev_boxes: dict, tracks,
                cfg: TrackerConfig = TrackerConfig()) -> list:
    """Best point-flow matching between current candidates and the objects
    seen one frame earlier. Returns (trajectory id, candidate index, score)
    triples above the link threshold."""
    from . import assignment

    traj_ids = sorted(prev_boxes)
    if not candidate_boxes or not traj_ids:
        return []
    scores = np.zeros((len(candidate_boxes), len(traj_ids)))
    for i, cand in enumerate(candidate_boxes):
        for j, tid in enumerate(traj_ids):
            scores[i, j] = klt_similarity(cand, prev_boxes[tid], tracks)
    matching = assignment.solve(scores, forbid_below=cfg.link_threshold_theta)
    return [(traj_ids[c], r, float(scores[r, c])) for r, c in matching.pairs]
