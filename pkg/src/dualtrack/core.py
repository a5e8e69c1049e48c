"""Shared domain types and geometric primitives."""

import enum
import math
from collections import deque
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional

import numpy as np


class Source(enum.Enum):
    """Where an object snapshot's bounding box came from."""

    DETECTOR = "detector"
    SPLIT_CORRECTION = "split"


class Status(enum.Enum):
    ACTIVE = "active"
    INACTIVATED = "inactivated"
    SUSPENDED = "suspended"
    TERMINATED = "terminated"


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-space rectangle: (x, y) is the top-left corner.

    Coordinates are continuous; rounding happens only at raster sampling
    and file output.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError("bounding box coordinates must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bounding box needs positive size, got w={self.w} h={self.h}")

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def contains(self, px: float, py: float) -> bool:
        """Half-open membership test: [x, x+w) x [y, y+h)."""
        return self.x <= px < self.x + self.w and self.y <= py < self.y + self.h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area, in [0, 1]."""
    ix = min(a.right, b.right) - max(a.x, b.x)
    iy = min(a.bottom, b.bottom) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    # areas from the same corner differences keep iou(a, a) exactly 1
    area_a = (a.right - a.x) * (a.bottom - a.y)
    area_b = (b.right - b.x) * (b.bottom - b.y)
    return inter / (area_a + area_b - inter)


def center_distance_2d(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between box centers, in pixels."""
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def ground_distance(a: BoundingBox, b: BoundingBox, homography: np.ndarray) -> float:
    """Distance in ground-plane units between the feet of two boxes.

    The 3x3 homography maps image points (bottom-center of a box) to the
    ground plane. Only used when a calibration is supplied.
    """
    H = np.asarray(homography, dtype=float).reshape(3, 3)

    def project(box):
        p = H @ np.array([box.x + box.w / 2.0, box.bottom, 1.0])
        if abs(p[2]) < 1e-12:
            raise ValueError("homography projects point to infinity")
        return p[:2] / p[2]

    pa, pb = project(a), project(b)
    return float(np.hypot(*(pa - pb)))


@dataclass(frozen=True)
class Detection:
    """Raw detector output for one frame."""

    frame_index: int
    bbox: BoundingBox
    confidence: float = 1.0

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")


@dataclass(frozen=True)
class ObjectSnapshot:
    """One object observation: a detection plus its appearance descriptors.

    `descriptors` is an imaging.DescriptorSet, or None when the pipeline runs
    without color frames (association-only mode).
    """

    detection: Detection
    descriptors: Any = None
    source: Source = Source.DETECTOR

    @property
    def bbox(self) -> BoundingBox:
        return self.detection.bbox

    @property
    def frame_index(self) -> int:
        return self.detection.frame_index


class Trajectory:
    """Ordered history of one tracked object.

    Mutated only by the pipeline, strictly in frame order; the snapshot list
    and the ring buffer of the last Q snapshots (feeding the appearance
    models) grow together.
    """

    def __init__(self, track_id: int, first: ObjectSnapshot, window_size: int):
        self.id = track_id
        self.snapshots = [first]
        self.status = Status.ACTIVE
        self.last_matched_frame = first.frame_index
        self.model_window = deque([first], maxlen=window_size)
        self.last_weights: Optional[np.ndarray] = None

    def append(self, snap: ObjectSnapshot):
        if snap.frame_index <= self.snapshots[-1].frame_index:
            raise ValueError(
                f"snapshot frame {snap.frame_index} not after "
                f"{self.snapshots[-1].frame_index} on track {self.id}"
            )
        self.snapshots.append(snap)
        self.model_window.append(snap)
        self.last_matched_frame = snap.frame_index
        self.status = Status.ACTIVE

    @property
    def last_snapshot(self) -> ObjectSnapshot:
        return self.snapshots[-1]

    @property
    def length(self) -> int:
        """Time length of the trajectory, in number of observed frames."""
        return len(self.snapshots)

    def __repr__(self):
        return (f"Trajectory(id={self.id}, n={len(self.snapshots)}, "
                f"status={self.status.value}, last={self.last_matched_frame})")


@dataclass(frozen=True)
class TrackerConfig:
    """Every free parameter of the tracker.

    The neighbor gates epsilon1_px / epsilon2_m and the window lengths have no
    published values; the defaults here are working guesses sized for
    desk-scale sequences and can all be overridden from a config file.
    """

    # neighborhood gates for discriminative weights
    epsilon1_px: float = 120.0        # 2D center-distance gate
    epsilon2_m: float = 5.0           # ground-plane gate, needs a homography

    # association windows
    temporal_window_T: int = 10       # link gap allowed for the appearance tracker
    model_window_Q: int = 8           # snapshots feeding the appearance models

    # descriptors
    hist_bins_B: int = 16
    pyramid_levels_L: int = 2
    dominant_colors_N: int = 4
    seed: int = 0                     # dominant-color k-means seeding

    # similarity / linking
    link_threshold_theta: float = 0.3
    ds_floor: float = 0.1
    accept_threshold: float = 0.05    # joint-probability gate before linking

    # KLT
    klt_max_features: int = 50
    klt_window: int = 15
    klt_pyramid_depth: int = 3
    klt_max_iterations: int = 30
    klt_convergence_eps: float = 0.01
    klt_quality_ratio: float = 0.01
    klt_min_spacing: float = 5.0
    klt_min_eig_threshold: float = 1e-3
    klt_max_residual: float = 20.0
    klt_fb_check: bool = True
    klt_fb_max_error: float = 1.0
    min_split_points: int = 3

    # lifecycle
    suspension_max_frames: int = 0    # 0 means "use temporal_window_T"
    new_track_min_confidence: float = 0.1
    new_track_max_overlap: float = 0.2  # vs boxes of resumable trajectories

    # evaluation
    iou_eval_threshold: float = 0.5

    def __post_init__(self):
        if self.suspension_max_frames == 0:
            object.__setattr__(self, "suspension_max_frames", self.temporal_window_T)
        positive = [
            "epsilon1_px", "epsilon2_m", "temporal_window_T", "model_window_Q",
            "hist_bins_B", "pyramid_levels_L", "dominant_colors_N",
            "klt_max_features", "klt_window", "klt_pyramid_depth",
            "klt_max_iterations", "klt_convergence_eps", "klt_quality_ratio",
            "klt_min_spacing", "klt_min_eig_threshold", "klt_max_residual",
            "klt_fb_max_error", "min_split_points", "suspension_max_frames",
            "iou_eval_threshold",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.link_threshold_theta < 1:
            raise ValueError("link_threshold_theta must be in (0, 1)")
        if not 0 < self.ds_floor < 1:
            raise ValueError("ds_floor must be in (0, 1)")
        if self.klt_window % 2 == 0 or self.klt_window < 3:
            raise ValueError("klt_window must be odd and >= 3")
        if self.iou_eval_threshold > 1:
            raise ValueError("iou_eval_threshold must be <= 1")

    def with_overrides(self, **kwargs) -> "TrackerConfig":
        return replace(self, **kwargs)


CONFIG_FIELD_NAMES = tuple(f.name for f in fields(TrackerConfig))
