"""Per-trajectory appearance models, tracker selection and noise filtering.

Each trajectory keeps models of its five descriptors over the last Q
snapshots. A candidate detection is scored against each model with a bounded
[0, 1] probability; the joint score (product, assuming independence) decides
both which candidate an object takes and which tracker's proposal wins.
All component scores carry a trajectory-length factor min(|T|/Q, 1): young
tracks are trusted less.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ObjectSnapshot, Source, TrackerConfig
from .similarity import ds_dominant_color, emd_1d, forstner_distance


class Tracker(enum.Enum):
    APPEARANCE = "A"
    KLT = "K"


@dataclass(frozen=True)
class TrackerProposal:
    tracker: Tracker
    trajectory_id: int
    candidate_index: int
    joint_probability: float


def _logm_spd(mat):
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.log(vals)) @ vecs.T


def _expm_sym(mat):
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.exp(vals)) @ vecs.T


@dataclass(frozen=True)
class AppearanceModel:
    """Cached descriptor statistics over a trajectory's model window."""

    snapshots: tuple            # window, oldest to newest
    length: int                 # trajectory time length in frames
    window_q: int
    mean_shape: float
    std_shape: float
    mean_area: float
    std_area: float
    mean_histograms: np.ndarray   # (3, B), level-0 cell
    mean_covariance: np.ndarray   # (11, 11), log-Euclidean mean, level-0 cell

    @classmethod
    def from_window(cls, window, trajectory_length: int, cfg: TrackerConfig):
        snaps = tuple(window)
        if not snaps:
            raise ValueError("appearance model needs at least one snapshot")
        shapes = np.array([s.descriptors.shape_ratio for s in snaps])
        areas = np.array([s.descriptors.area for s in snaps])
        hists = np.mean([s.descriptors.histograms[0] for s in snaps], axis=0)
        log_mean = np.mean([_logm_spd(s.descriptors.covariances[0])
                            for s in snaps], axis=0)

        def floored_std(values, mean):
            return max(float(values.std()), 0.05 * mean + 1e-6)

        return cls(
            snapshots=snaps,
            length=trajectory_length,
            window_q=cfg.model_window_Q,
            mean_shape=float(shapes.mean()),
            std_shape=floored_std(shapes, float(shapes.mean())),
            mean_area=float(areas.mean()),
            std_area=floored_std(areas, float(areas.mean())),
            mean_histograms=hists,
            mean_covariance=_expm_sym(log_mean),
        )

    @property
    def length_factor(self) -> float:
        return min(self.length / self.window_q, 1.0)


def prob_size(candidate: ObjectSnapshot, m: AppearanceModel, k: int) -> float:
    """Peak-normalized Gaussian score of the candidate's shape ratio (k=1) or
    area (k=2) under the model."""
    if k == 1:
        value, mu, sigma = candidate.descriptors.shape_ratio, m.mean_shape, m.std_shape
    elif k == 2:
        value, mu, sigma = candidate.descriptors.area, m.mean_area, m.std_area
    else:
        raise ValueError("k must be 1 (shape ratio) or 2 (area)")
    return math.exp(-((value - mu) ** 2) / (2.0 * sigma * sigma)) * m.length_factor


def prob_histogram(candidate: ObjectSnapshot, m: AppearanceModel) -> float:
    """Similarity of the candidate's whole-box histograms to the window's
    mean histograms, averaged over the three channels."""
    hist = candidate.descriptors.histograms[0]
    bins = hist.shape[1]
    sims = [1.0 - emd_1d(hist[ch], m.mean_histograms[ch]) / (bins - 1)
            for ch in range(3)]
    return float(np.mean(sims)) * m.length_factor


def prob_covariance(candidate: ObjectSnapshot, m: AppearanceModel) -> float:
    """Similarity of the candidate's whole-box covariance to the window mean."""
    d = forstner_distance(candidate.descriptors.covariances[0], m.mean_covariance)
    return 1.0 / (1.0 + d) * m.length_factor


def prob_dominant_color(candidate: ObjectSnapshot, m: AppearanceModel,
                        cfg: TrackerConfig) -> float:
    """Mean dominant-color similarity against every snapshot in the window."""
    sims = [ds_dominant_color(candidate.descriptors, s.descriptors, cfg)
            for s in m.snapshots]
    return float(np.mean(sims)) * m.length_factor


def joint_probability(candidate: ObjectSnapshot, m: AppearanceModel,
                      cfg: TrackerConfig) -> float:
    """Product of the five appearance-model scores."""
    p = (prob_size(candidate, m, 1)
         * prob_size(candidate, m, 2)
         * prob_histogram(candidate, m)
         * prob_covariance(candidate, m)
         * prob_dominant_color(candidate, m, cfg))
    return p


def best_candidate(m: AppearanceModel, candidates, cfg: TrackerConfig):
    """Index and score of the candidate maximizing the joint probability;
    exact ties go to the lowest index."""
    if not candidates:
        raise ValueError("no candidates")
    best_idx, best_p = 0, -1.0
    for idx, cand in enumerate(candidates):
        p = joint_probability(cand, m, cfg)
        if p > best_p:
            best_idx, best_p = idx, p
    return best_idx, best_p


def select_tracker(proposal_appearance: Optional[TrackerProposal],
                   proposal_klt: Optional[TrackerProposal],
                   cfg: TrackerConfig) -> Optional[TrackerProposal]:
    """Pick the tracker whose proposed link scores higher under the object's
    own appearance models; ties favor the appearance tracker, and proposals
    under the acceptance threshold are discarded."""
    options = [p for p in (proposal_appearance, proposal_klt)
               if p is not None and p.joint_probability >= cfg.accept_threshold]
    if not options:
        return None
    options.sort(key=lambda p: (-p.joint_probability, p.tracker != Tracker.APPEARANCE))
    return options[0]


def is_noise(split_obj: ObjectSnapshot, matched: bool) -> bool:
    """Split-created boxes that no trajectory claimed are noise (bad feature
    labels); detector boxes are never filtered here."""
    return split_obj.source is Source.SPLIT_CORRECTION and not matched
