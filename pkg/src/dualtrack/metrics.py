"""CLEAR-MOT accuracy/precision and trajectory-coverage scores.

Track sets are dicts mapping track id -> {frame -> BoundingBox}; the same
structure the io module reads and writes.
"""

from dataclasses import dataclass

import numpy as np

from . import assignment
from .core import BoundingBox, iou


@dataclass(frozen=True)
class EvalReport:
    mota: float
    motp: float
    fp: int
    fn: int
    idsw: int
    mt: float
    pt: float
    ml: float

    @property
    def m_bar(self) -> float:
        return (self.mota + self.motp) / 2.0


def _frames_of(tracks):
    frames = set()
    for per_frame in tracks.values():
        frames.update(per_frame)
    return sorted(frames)


def _frame_matching(gt, hyp, iou_thr):
    """Per-frame gt<->hyp correspondence with match persistence: pairs
    matched last frame stay matched while their overlap holds, the rest is
    re-solved each frame by maximizing total IoU."""
    matches_per_frame = {}
    prev_pairs = {}
    all_frames = sorted(set(_frames_of(gt)) | set(_frames_of(hyp)))
    for frame in all_frames:
        gt_ids = sorted(g for g, per in gt.items() if frame in per)
        hyp_ids = sorted(h for h, per in hyp.items() if frame in per)
        pairs = {}
        # persistence first
        for g, h in prev_pairs.items():
            if g in gt_ids and h in hyp_ids and h not in pairs.values():
                if iou(gt[g][frame], hyp[h][frame]) >= iou_thr:
                    pairs[g] = h
        free_gt = [g for g in gt_ids if g not in pairs]
        free_hyp = [h for h in hyp_ids if h not in pairs.values()]
        if free_gt and free_hyp:
            scores = np.array([[iou(gt[g][frame], hyp[h][frame])
                                for h in free_hyp] for g in free_gt])
            matching = assignment.solve(scores, forbid_below=iou_thr)
            for r, c in matching.pairs:
                pairs[free_gt[r]] = free_hyp[c]
        matches_per_frame[frame] = pairs
        prev_pairs = pairs
    return matches_per_frame


def clear_mot(gt, hyp, iou_thr: float = 0.5):
    """Multiple-object tracking accuracy and precision.

    Returns (MOTA, MOTP, FP, FN, IDSW). MOTP is the mean overlap of matched
    pairs (higher is better); with no matches at all it reports 0.
    """
    matches = _frame_matching(gt, hyp, iou_thr)
    fp = fn = idsw = 0
    total_gt = 0
    overlaps = []
    last_hyp_of = {}
    for frame in sorted(matches):
        pairs = matches[frame]
        gt_ids = [g for g, per in gt.items() if frame in per]
        hyp_ids = [h for h, per in hyp.items() if frame in per]
        total_gt += len(gt_ids)
        fn += len(gt_ids) - len(pairs)
        fp += len(hyp_ids) - len(pairs)
        for g, h in pairs.items():
            overlaps.append(iou(gt[g][frame], hyp[h][frame]))
            if g in last_hyp_of and last_hyp_of[g] != h:
                idsw += 1
            last_hyp_of[g] = h
    mota = 1.0 - (fn + fp + idsw) / total_gt if total_gt else 1.0
    motp = float(np.mean(overlaps)) if overlaps else 0.0
    return mota, motp, fp, fn, idsw


def trajectory_coverage(gt, hyp, iou_thr: float = 0.5):
    """Percent of ground-truth trajectories mostly tracked (coverage strictly
    above 80%), partially tracked, and mostly lost (strictly below 20%)."""
    if not gt:
        raise ValueError("empty ground truth")
    matches = _frame_matching(gt, hyp, iou_thr)
    n_mt = n_pt = n_ml = 0
    for g, per_frame in gt.items():
        covered = sum(1 for frame in per_frame
                      if g in matches.get(frame, {}))
        coverage = covered / len(per_frame)
        if coverage > 0.8:
            n_mt += 1
        elif coverage < 0.2:
            n_ml += 1
        else:
            n_pt += 1
    n = len(gt)
    return 100.0 * n_mt / n, 100.0 * n_pt / n, 100.0 * n_ml / n


def evaluate(gt, hyp, iou_thr: float = 0.5) -> EvalReport:
    """Full report over two track sets."""
    mota, motp, fp, fn, idsw = clear_mot(gt, hyp, iou_thr)
    mt, pt, ml = trajectory_coverage(gt, hyp, iou_thr)
    return EvalReport(mota=mota, motp=motp, fp=fp, fn=fn, idsw=idsw,
                      mt=mt, pt=pt, ml=ml)
