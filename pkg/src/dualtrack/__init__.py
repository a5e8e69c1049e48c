"""dualtrack: tracking by detection with competing appearance and
point-flow trackers, detection correction from feature labels, and a
CLEAR-MOT evaluation harness."""

from .core import (BoundingBox, Detection, ObjectSnapshot, Source, Status,
                   TrackerConfig, Trajectory, center_distance_2d, iou)
from .imaging import DescriptorSet, extract_all
from .metrics import EvalReport, clear_mot, evaluate, trajectory_coverage
from .pipeline import FrameData, SequenceResult, TrackerState, run_sequence

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "Detection", "ObjectSnapshot", "Source", "Status",
    "TrackerConfig", "Trajectory", "center_distance_2d", "iou",
    "DescriptorSet", "extract_all",
    "EvalReport", "clear_mot", "evaluate", "trajectory_coverage",
    "FrameData", "SequenceResult", "TrackerState", "run_sequence",
    "__version__",
]
