"""Per-frame orchestration: detection evaluation and correction, the two
competing trackers, per-object tracker selection, model updates,
suspension/resume and noise filtering.

Processing order per frame t:
  1. track feature points from t-1 into t (or take them from a file)
  2. evaluate every detection; split the merged ones
  3. extract descriptors and discriminative weights for all candidates
  4. appearance tracker: global-similarity matrix over objects unmatched
     within the temporal window, solved as an assignment problem
  5. point-flow tracker: shared-feature matrix against t-1 objects
  6. per object, keep the proposal with the higher joint appearance-model
     probability (appearance tracker wins ties)
  7. apply links, refresh model windows, suspend what stayed unmatched,
     terminate what has been suspended too long
  8. unmatched detector boxes seed new tracks; unmatched split boxes are
     dropped as noise
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import klt as klt_mod
from . import models as models_mod
from .core import (BoundingBox, Detection, ObjectSnapshot, Source, Status,
                   TrackerConfig, Trajectory, center_distance_2d,
                   ground_distance, iou)
from .imaging import extract_all
from .models import AppearanceModel, Tracker, TrackerProposal
from .similarity import descriptor_weights, global_similarity
from . import assignment


@dataclass
class FrameData:
    """Input for one frame; pixel data is optional in association-only mode."""

    index: int
    color: Optional[np.ndarray] = None
    gray: Optional[np.ndarray] = None


@dataclass
class FrameResult:
    frame_index: int
    links: list = field(default_factory=list)        # (traj id, Detection, tag)
    new_tracks: list = field(default_factory=list)   # ids
    suspended: list = field(default_factory=list)    # ids newly suspended
    terminated: list = field(default_factory=list)   # ids newly terminated
    noise: list = field(default_factory=list)        # removed split Detections


class TrackerState:
    """All mutable tracking state; owned by a single sequence run."""

    def __init__(self, cfg: TrackerConfig, homography=None):
        self.cfg = cfg
        self.homography = homography
        self.trajectories = {}
        self.next_id = 0
        self.prev_gray = None
        self.prev_frame_index = None
        self.prev_boxes = {}

    def active_tracks(self):
        return {tid: t for tid, t in self.trajectories.items()
                if t.status is not Status.TERMINATED}


def _collect_tracks(state: TrackerState, frame: FrameData, feature_tracks):
    """Feature tracks from t-1 to t: precomputed when supplied, otherwise
    re-detected inside each previous object box and tracked one frame."""
    cfg = state.cfg
    if feature_tracks is not None:
        tracks = [klt_mod.FeatureTrack(frame_t=frame.index, prev=tuple(p),
                                       cur=tuple(c))
                  for p, c in feature_tracks]
    elif (state.prev_gray is not None and frame.gray is not None
          and state.prev_boxes):
        seen = {}
        for tid in sorted(state.prev_boxes):
            for fp in klt_mod.detect_features(state.prev_gray,
                                              state.prev_boxes[tid], cfg):
                key = (round(fp.position[0], 3), round(fp.position[1], 3))
                seen.setdefault(key, fp)
        points = [seen[k] for k in sorted(seen)]
        moved = klt_mod.track_features(state.prev_gray, frame.gray, points, cfg)
        tracks = [klt_mod.FeatureTrack(frame_t=frame.index, prev=p.position,
                                       cur=m.position)
                  for p, m in zip(points, moved)
                  if m.status is klt_mod.TrackStatus.TRACKED]
    else:
        tracks = []
    return klt_mod.label_features(tracks, state.prev_boxes)


def _evaluate_and_split(state: TrackerState, frame: FrameData, detections,
                        labeled_tracks):
    """Replace incorrectly detected (merged) boxes by per-label split boxes."""
    cfg = state.cfg
    if frame.gray is not None:
        frame_size = (frame.gray.shape[1], frame.gray.shape[0])
    elif frame.color is not None:
        frame_size = (frame.color.shape[1], frame.color.shape[0])
    else:
        frame_size = (math.inf, math.inf)
    candidates = []
    for det in detections:
        verdict = klt_mod.evaluate_detection(det, state.prev_boxes,
                                             labeled_tracks, cfg)
        if verdict.correct:
            candidates.append((det, Source.DETECTOR))
        else:
            for split in klt_mod.split_detection(det, labeled_tracks,
                                                 state.prev_boxes, frame_size,
                                                 cfg):
                candidates.append((split, Source.SPLIT_CORRECTION))
    return candidates


def _snapshots_and_weights(state: TrackerState, frame: FrameData, candidates):
    cfg = state.cfg
    snapshots, weights = [], []
    for det, source in candidates:
        desc = (extract_all(frame.color, det.bbox, None, cfg)
                if frame.color is not None else None)
        snapshots.append(ObjectSnapshot(detection=det, descriptors=desc,
                                        source=source))
    if frame.color is None:
        return snapshots, [None] * len(snapshots)
    for i, snap in enumerate(snapshots):
        neighbors = []
        for j, other in enumerate(snapshots):
            if j == i:
                continue
            if center_distance_2d(snap.bbox, other.bbox) >= cfg.epsilon1_px:
                continue
            if state.homography is not None and ground_distance(
                    snap.bbox, other.bbox, state.homography) >= cfg.epsilon2_m:
                continue
            neighbors.append(other.descriptors)
        weights.append(descriptor_weights(snap.descriptors, neighbors, cfg))
    return snapshots, weights


def _appearance_proposals(state, frame_index, snapshots, weights):
    """Assignment on the global-similarity matrix between current candidates
    and every object unmatched within the temporal window."""
    cfg = state.cfg
    eligible = sorted(
        tid for tid, t in state.active_tracks().items()
        if (t.last_snapshot.descriptors is not None
            and 1 <= frame_index - t.last_matched_frame <= cfg.temporal_window_T))
    rows = [i for i, s in enumerate(snapshots) if s.descriptors is not None]
    if not eligible or not rows:
        return {}
    scores = np.zeros((len(rows), len(eligible)))
    for r, i in enumerate(rows):
        for c, tid in enumerate(eligible):
            traj = state.trajectories[tid]
            ref = traj.last_snapshot
            w_ref = (traj.last_weights if traj.last_weights is not None
                     else np.ones(5))
            scores[r, c] = global_similarity(snapshots[i].descriptors,
                                             weights[i], ref.descriptors,
                                             w_ref, cfg)
    matching = assignment.solve(scores, forbid_below=cfg.link_threshold_theta)
    return {eligible[c]: rows[r] for r, c in matching.pairs}


def _klt_proposals(state, frame_index, snapshots, labeled_tracks):
    """Point-flow matching; only objects seen at the immediately previous
    frame have meaningful feature counts."""
    if state.prev_frame_index != frame_index - 1:
        return {}
    prev_boxes = {tid: box for tid, box in state.prev_boxes.items()
                  if state.trajectories[tid].status is not Status.TERMINATED}
    boxes = [s.bbox for s in snapshots]
    return {tid: cand for tid, cand, _ in klt_mod.klt_propose(
        boxes, prev_boxes, labeled_tracks, state.cfg)}


def process_frame(state: TrackerState, frame: FrameData, detections,
                  feature_tracks=None) -> FrameResult:
    """Advance the tracker by one frame. Returns what happened."""
    cfg = state.cfg
    result = FrameResult(frame_index=frame.index)

    labeled_tracks = _collect_tracks(state, frame, feature_tracks)
    candidates = _evaluate_and_split(state, frame, detections, labeled_tracks)
    snapshots, weights = _snapshots_and_weights(state, frame, candidates)

    for traj in state.active_tracks().values():
        traj.status = Status.INACTIVATED

    appearance = _appearance_proposals(state, frame.index, snapshots, weights)
    klt_links = _klt_proposals(state, frame.index, snapshots, labeled_tracks)

    # score every proposal under the owner's appearance models
    pool = []
    have_models = all(s.descriptors is not None for s in snapshots)
    model_cache = {}
    for tid in sorted(set(appearance) | set(klt_links)):
        traj = state.trajectories[tid]
        if have_models and snapshots:
            if tid not in model_cache:
                model_cache[tid] = AppearanceModel.from_window(
                    traj.model_window, traj.length, cfg)
            # the acceptance gate ignores the per-component length factor so
            # young tracks are not strangled; ranking keeps the full joint
            gate = cfg.accept_threshold * model_cache[tid].length_factor ** 5
            for tracker, cand in ((Tracker.APPEARANCE, appearance.get(tid)),
                                  (Tracker.KLT, klt_links.get(tid))):
                if cand is None:
                    continue
                p = models_mod.joint_probability(snapshots[cand],
                                                 model_cache[tid], cfg)
                if p >= gate:
                    pool.append(TrackerProposal(tracker, tid, cand, p))
        else:
            # association-only mode: no descriptors, trust the point flow
            cand = klt_links.get(tid)
            if cand is not None:
                pool.append(TrackerProposal(Tracker.KLT, tid, cand, 1.0))

    pool.sort(key=lambda p: (-p.joint_probability,
                             p.tracker is not Tracker.APPEARANCE,
                             p.trajectory_id, p.candidate_index))
    taken_traj, taken_cand = set(), set()
    for prop in pool:
        if prop.trajectory_id in taken_traj or prop.candidate_index in taken_cand:
            continue
        taken_traj.add(prop.trajectory_id)
        taken_cand.add(prop.candidate_index)
        traj = state.trajectories[prop.trajectory_id]
        traj.append(snapshots[prop.candidate_index])
        traj.last_weights = weights[prop.candidate_index]
        result.links.append((prop.trajectory_id,
                             snapshots[prop.candidate_index].detection,
                             prop.tracker.value))

    # lifecycle for everything that stayed unmatched
    for tid, traj in sorted(state.active_tracks().items()):
        if traj.status is not Status.INACTIVATED:
            continue
        gap = frame.index - traj.last_matched_frame
        if gap > cfg.suspension_max_frames:
            traj.status = Status.TERMINATED
            result.terminated.append(tid)
        else:
            if traj.status is not Status.SUSPENDED:
                result.suspended.append(tid)
            traj.status = Status.SUSPENDED

    # unmatched candidates: new tracks or split noise
    resumable_boxes = [
        t.last_snapshot.bbox for t in state.active_tracks().values()
        if frame.index - t.last_matched_frame <= cfg.temporal_window_T]
    for idx, snap in enumerate(snapshots):
        if idx in taken_cand:
            continue
        if models_mod.is_noise(snap, matched=False):
            result.noise.append(snap.detection)
            continue
        if snap.detection.confidence < cfg.new_track_min_confidence:
            continue
        # never seed a fresh identity on top of an object waiting to resume
        if any(iou(snap.bbox, b) > cfg.new_track_max_overlap
               for b in resumable_boxes):
            continue
        tid = state.next_id
        state.next_id += 1
        traj = Trajectory(tid, snap, cfg.model_window_Q)
        traj.last_weights = weights[idx]
        state.trajectories[tid] = traj
        result.new_tracks.append(tid)

    state.prev_gray = frame.gray
    state.prev_frame_index = frame.index
    state.prev_boxes = {
        tid: t.last_snapshot.bbox for tid, t in state.trajectories.items()
        if t.last_matched_frame == frame.index
        and t.status is not Status.TERMINATED}
    return result


@dataclass
class SequenceResult:
    tracks: dict          # id -> {frame -> BoundingBox}
    tags: dict            # (frame, id) -> 'A' | 'K' | 'new'
    frame_results: list
    state: TrackerState


def run_sequence(frames, detections_by_frame, cfg: TrackerConfig,
                 feature_tracks_by_frame=None, homography=None) -> SequenceResult:
    """Fold the per-frame step over an ordered frame iterable.

    Deterministic: identical inputs and config produce identical output.
    """
    state = TrackerState(cfg, homography=homography)
    frame_results = []
    tags = {}
    for frame in frames:
        dets = detections_by_frame.get(frame.index, [])
        tracks_t = None
        if feature_tracks_by_frame is not None:
            tracks_t = feature_tracks_by_frame.get(frame.index, [])
        res = process_frame(state, frame, dets, feature_tracks=tracks_t)
        frame_results.append(res)
        for tid, _det, tag in res.links:
            tags[(frame.index, tid)] = tag
        for tid in res.new_tracks:
            tags[(frame.index, tid)] = "new"

    tracks = {}
    for tid, traj in state.trajectories.items():
        tracks[tid] = {s.frame_index: s.bbox for s in traj.snapshots}
    return SequenceResult(tracks=tracks, tags=tags,
                          frame_results=frame_results, state=state)
