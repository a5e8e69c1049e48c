"""File formats: detection/track CSV, feature-track files, config files,
frame directories.

The CSV schema is MOT-compatible (`frame,id,x,y,w,h,conf`, 1-based frames,
id -1 for raw detections); extra trailing columns from public sequences are
ignored. All writers emit a header line, all parsers accept files with or
without one.
"""

import dataclasses
import os
import re

import numpy as np

from .core import BoundingBox, Detection, TrackerConfig
from .imaging import read_pgm, read_ppm, to_gray
from .pipeline import FrameData

TRACK_HEADER = "frame,id,x,y,w,h,conf"
TAG_HEADER = "frame,id,tracker"


def _data_lines(path):
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            first = line.split(",", 1)[0].strip()
            try:
                int(first)
            except ValueError:
                if lineno == 1:  # header
                    continue
                raise ValueError(f"malformed line {lineno} in {path}")
            yield lineno, line


def _parse_row(line, lineno):
    parts = [p.strip() for p in line.split(",")]
    if len(parts) < 7:
        raise ValueError(f"expected frame,id,x,y,w,h,conf, line {lineno}")
    try:
        frame = int(parts[0])
        track_id = int(float(parts[1]))
        x, y, w, h, conf = (float(v) for v in parts[2:7])
    except ValueError:
        raise ValueError(f"unparsable number, line {lineno}") from None
    if frame < 0:
        raise ValueError(f"negative frame index, line {lineno}")
    if w <= 0 or h <= 0:
        raise ValueError(f"non-positive size, line {lineno}")
    return frame, track_id, x, y, w, h, conf


def parse_detections(path) -> dict:
    """Detections grouped by frame; the id column is ignored."""
    out = {}
    for lineno, line in _data_lines(path):
        frame, _tid, x, y, w, h, conf = _parse_row(line, lineno)
        out.setdefault(frame, []).append(
            Detection(frame_index=frame, bbox=BoundingBox(x, y, w, h),
                      confidence=conf))
    return out


def parse_tracks(path) -> dict:
    """Track set keyed by id: {id: {frame: BoundingBox}}."""
    out = {}
    for lineno, line in _data_lines(path):
        frame, tid, x, y, w, h, _conf = _parse_row(line, lineno)
        per = out.setdefault(tid, {})
        if frame in per:
            raise ValueError(f"duplicate frame {frame} for id {tid}, line {lineno}")
        per[frame] = BoundingBox(x, y, w, h)
    return out


def write_tracks(tracks: dict, path, tags: dict = None):
    """Write a track set sorted by (frame, id); float fields keep full
    precision so a parse round-trip is exact. When selection tags are given a
    `<path>.tags` sidecar records which tracker produced each link."""
    rows = []
    for tid, per_frame in tracks.items():
        for frame, box in per_frame.items():
            rows.append((frame, tid, box))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w") as f:
        f.write(TRACK_HEADER + "\n")
        for frame, tid, box in rows:
            f.write(f"{frame},{tid},{box.x},{box.y},{box.w},{box.h},1.0\n")
    if tags is not None:
        with open(str(path) + ".tags", "w") as f:
            f.write(TAG_HEADER + "\n")
            for (frame, tid), tag in sorted(tags.items()):
                f.write(f"{frame},{tid},{tag}\n")


def parse_tags(path) -> dict:
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line == TAG_HEADER:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"malformed tag line {lineno}")
            out[(int(parts[0]), int(parts[1]))] = parts[2]
    return out


def write_detections(dets_by_frame: dict, path):
    """Write raw detections (id -1) sorted by frame."""
    with open(path, "w") as f:
        f.write(TRACK_HEADER + "\n")
        for frame in sorted(dets_by_frame):
            for det in dets_by_frame[frame]:
                b = det.bbox
                f.write(f"{frame},-1,{b.x},{b.y},{b.w},{b.h},{det.confidence}\n")


def parse_feature_tracks(path) -> dict:
    """Feature-track file: `frame_t, x_prev, y_prev, x_t, y_t` per line,
    grouped by frame. Used instead of gray frames."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.replace(",", " ").split()]
            if not parts[0].lstrip("-").isdigit():
                if lineno == 1:
                    continue
                raise ValueError(f"malformed feature track, line {lineno}")
            if len(parts) != 5:
                raise ValueError(f"expected 5 fields, line {lineno}")
            frame = int(parts[0])
            xp, yp, xt, yt = (float(v) for v in parts[1:])
            out.setdefault(frame, []).append(((xp, yp), (xt, yt)))
    return out


def parse_homography(path) -> np.ndarray:
    text = open(path).read()
    values = [float(v) for v in text.replace(",", " ").split()]
    if len(values) != 9:
        raise ValueError("homography file must hold exactly 9 numbers")
    return np.array(values, dtype=float).reshape(3, 3)


def parse_config(path) -> TrackerConfig:
    """Line-oriented `key = value` config; every TrackerConfig field is a
    valid key, unknown keys are errors, omitted keys keep their defaults."""
    types = {f.name: f.type for f in dataclasses.fields(TrackerConfig)}
    overrides = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"expected key = value, line {lineno}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"unknown config key '{key}', line {lineno}")
            ftype = types[key]
            try:
                if ftype in (bool, "bool"):
                    if value.lower() not in ("true", "false", "0", "1"):
                        raise ValueError("expected boolean")
                    overrides[key] = value.lower() in ("true", "1")
                elif ftype in (int, "int"):
                    overrides[key] = int(value)
                else:
                    overrides[key] = float(value)
            except ValueError as exc:
                raise ValueError(f"{exc}, line {lineno}") from None
    return TrackerConfig(**overrides)


FRAME_FILE_RE = re.compile(r"^(\d+)\.(ppm|pgm)$")


def list_frames(frames_dir) -> list:
    """(frame_index, path) pairs sorted by index; PPM preferred when both
    a PPM and a PGM exist for the same index."""
    found = {}
    for name in sorted(os.listdir(frames_dir)):
        m = FRAME_FILE_RE.match(name)
        if not m:
            continue
        index, ext = int(m.group(1)), m.group(2)
        if index not in found or ext == "ppm":
            found[index] = os.path.join(frames_dir, name)
    return sorted(found.items())


def iter_frame_data(frames_dir):
    """Yield FrameData with color and gray planes loaded per frame."""
    for index, path in list_frames(frames_dir):
        if path.endswith(".ppm"):
            color = read_ppm(path)
            yield FrameData(index=index, color=color, gray=to_gray(color))
        else:
            yield FrameData(index=index, color=None, gray=read_pgm(path))
