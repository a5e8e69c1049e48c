"""Synthetic benchmark sequences: textured rectangles on a flat background.

Every object carries a fixed noise texture that translates with it, so
corner features exist and point flow is meaningful. Ground truth is exact;
detections are the ground truth with optional jitter, misses and merge
events (two boxes collapsing into their union, the way a detector fails
under occlusion).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BoundingBox, Detection


@dataclass(frozen=True)
class SynthObject:
    x0: float
    y0: float
    vx: float
    vy: float
    w: float
    h: float
    color: tuple  # (r, g, b)


@dataclass(frozen=True)
class OcclusionEvent:
    """Detections of two objects replaced by their union box on [start, end]."""

    first: int
    second: int
    start: int
    end: int


@dataclass(frozen=True)
class SynthSpec:
    width: int = 256
    height: int = 192
    n_frames: int = 60
    objects: tuple = ()
    occlusions: tuple = ()
    jitter_sigma: float = 0.0
    miss_rate: float = 0.0
    seed: int = 0
    background: int = 110
    texture_amplitude: int = 45


def _object_box(obj: SynthObject, frame: int) -> BoundingBox:
    return BoundingBox(obj.x0 + (frame - 1) * obj.vx,
                       obj.y0 + (frame - 1) * obj.vy, obj.w, obj.h)


def _textures(spec: SynthSpec):
    out = []
    for i, obj in enumerate(spec.objects):
        rng = np.random.default_rng(spec.seed * 1000 + i)
        h, w = int(round(obj.h)), int(round(obj.w))
        noise = rng.integers(-spec.texture_amplitude,
                             spec.texture_amplitude + 1, size=(h, w, 3))
        base = np.asarray(obj.color, dtype=np.int64)
        out.append(np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8))
    return out


def render_frame(spec: SynthSpec, frame: int, textures=None) -> np.ndarray:
    """Color image of one frame; objects are drawn in index order, so later
    objects occlude earlier ones."""
    if textures is None:
        textures = _textures(spec)
    img = np.full((spec.height, spec.width, 3), spec.background, dtype=np.uint8)
    for obj, tex in zip(spec.objects, textures):
        box = _object_box(obj, frame)
        x, y = int(round(box.x)), int(round(box.y))
        th, tw = tex.shape[:2]
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + tw, spec.width), min(y + th, spec.height)
        if x0 >= x1 or y0 >= y1:
            continue
        img[y0:y1, x0:x1] = tex[y0 - y:y1 - y, x0 - x:x1 - x]
    return img


def ground_truth(spec: SynthSpec) -> dict:
    """Exact tracks: object index -> {frame -> box}."""
    return {
        i: {f: _object_box(obj, f) for f in range(1, spec.n_frames + 1)}
        for i, obj in enumerate(spec.objects)
    }


def detections(spec: SynthSpec) -> dict:
    """Per-frame detector output derived from the ground truth."""
    rng = np.random.default_rng(spec.seed + 777)
    out = {}
    for f in range(1, spec.n_frames + 1):
        merged = {}
        for ev in spec.occlusions:
            if ev.start <= f <= ev.end:
                merged[ev.first] = ev
                merged[ev.second] = ev
        dets = []
        emitted_events = set()
        for i, obj in enumerate(spec.objects):
            box = _object_box(obj, f)
            if i in merged:
                ev = merged[i]
                if id(ev) in emitted_events:
                    continue
                emitted_events.add(id(ev))
                other = _object_box(
                    spec.objects[ev.second if i == ev.first else ev.first], f)
                x0 = min(box.x, other.x)
                y0 = min(box.y, other.y)
                box = BoundingBox(x0, y0,
                                  max(box.right, other.right) - x0,
                                  max(box.bottom, other.bottom) - y0)
            elif spec.miss_rate > 0 and rng.random() < spec.miss_rate:
                continue
            if spec.jitter_sigma > 0:
                dx, dy, dw, dh = rng.normal(0.0, spec.jitter_sigma, size=4)
                box = BoundingBox(box.x + dx, box.y + dy,
                                  max(box.w + dw / 2.0, 2.0),
                                  max(box.h + dh / 2.0, 2.0))
            dets.append(Detection(frame_index=f, bbox=box, confidence=1.0))
        out[f] = dets
    return out


def parse_synth_spec(path) -> SynthSpec:
    """Line-oriented spec file: scalar `key = value` entries plus repeatable
    `object = x0 y0 vx vy w h r g b` and `occlusion = i j start end` lines."""
    scalars = {}
    objects = []
    occlusions = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"expected key = value, line {lineno}")
            key, value = (part.strip() for part in line.split("=", 1))
            parts = value.replace(",", " ").split()
            try:
                if key == "object":
                    if len(parts) != 9:
                        raise ValueError("object needs 9 values")
                    vals = [float(v) for v in parts]
                    objects.append(SynthObject(
                        x0=vals[0], y0=vals[1], vx=vals[2], vy=vals[3],
                        w=vals[4], h=vals[5],
                        color=(int(vals[6]), int(vals[7]), int(vals[8]))))
                elif key == "occlusion":
                    if len(parts) != 4:
                        raise ValueError("occlusion needs 4 values")
                    occlusions.append(OcclusionEvent(*(int(v) for v in parts)))
                elif key in ("width", "height", "n_frames", "seed",
                             "background", "texture_amplitude"):
                    scalars[key] = int(parts[0])
                elif key in ("jitter_sigma", "miss_rate"):
                    scalars[key] = float(parts[0])
                else:
                    raise ValueError(f"unknown key '{key}'")
            except ValueError as exc:
                raise ValueError(f"{exc}, line {lineno}") from None
    return SynthSpec(objects=tuple(objects), occlusions=tuple(occlusions),
                     **scalars)
