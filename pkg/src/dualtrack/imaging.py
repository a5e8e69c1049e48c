"""Frame loading and extraction of the five appearance descriptors.

Color frames are (H, W, 3) uint8 arrays, gray frames (H, W) float64 luminance
in [0, 255]. Descriptors are computed over a two-level spatial pyramid of
horizontal stripes (full box, then top/bottom halves by default) so partly
occluded objects still match on their visible stripe.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import BoundingBox, TrackerConfig

# merge/prune rules for the dominant-color clustering
DOMINANT_MERGE_RADIUS = 25.0
DOMINANT_MIN_WEIGHT = 0.05


@dataclass(frozen=True)
class DescriptorSet:
    """The five appearance descriptors of one object snapshot."""

    shape_ratio: float
    area: float
    histograms: np.ndarray    # (n_cells, 3, B), each row sums to 1
    covariances: np.ndarray   # (n_cells, 11, 11), symmetric positive-definite
    dominant_colors: tuple    # per cell: (colors (k, 3), weights (k,)) sorted by weight


# ---------------------------------------------------------------------------
# frame I/O

def _read_netpbm_header(data: bytes, magic: bytes, n_fields: int):
    if not data.startswith(magic):
        raise ValueError(f"not a {magic.decode()} file")
    fields = []
    pos = 2
    while len(fields) < n_fields:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    return fields, pos + 1  # single whitespace byte ends the header


def read_ppm(path) -> np.ndarray:
    """Read a binary (P6) 8-bit PPM into an (H, W, 3) uint8 array."""
    data = open(path, "rb").read()
    (w, h, maxval), offset = _read_netpbm_header(data, b"P6", 3)
    if maxval != 255:
        raise ValueError(f"only 8-bit PPM supported, maxval={maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=offset)
    return pixels.reshape(h, w, 3).copy()


def write_ppm(path, frame: np.ndarray):
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError("color frame must be (H, W, 3)")
    h, w = frame.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(np.clip(frame, 0, 255).astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM into an (H, W) float64 array."""
    data = open(path, "rb").read()
    (w, h, maxval), offset = _read_netpbm_header(data, b"P5", 3)
    if maxval != 255:
        raise ValueError(f"only 8-bit PGM supported, maxval={maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset)
    return pixels.reshape(h, w).astype(np.float64)


def write_pgm(path, frame: np.ndarray):
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ValueError("gray frame must be (H, W)")
    h, w = frame.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(np.clip(np.rint(frame), 0, 255).astype(np.uint8).tobytes())


def to_gray(color: np.ndarray) -> np.ndarray:
    """Continuous luminance 0.299 R + 0.587 G + 0.114 B."""
    c = np.asarray(color, dtype=np.float64)
    return c[..., 0] * 0.299 + c[..., 1] * 0.587 + c[..., 2] * 0.114


# ---------------------------------------------------------------------------
# descriptor extraction

def shape_ratio(b: BoundingBox) -> float:
    """Width over height of the bounding box."""
    return b.w / b.h


def area(b: BoundingBox) -> float:
    """Area of the bounding box in square pixels."""
    return b.w * b.h


def pyramid_cells(b: BoundingBox, levels: int) -> list:
    """Spatial pyramid: level 0 is the whole box, level l has 2**l equal
    horizontal stripes. Returns 2**L - 1 cells, level by level, top first."""
    if levels < 1:
        raise ValueError("need at least one pyramid level")
    cells = []
    for level in range(levels):
        n = 2 ** level
        stripe_h = b.h / n
        for i in range(n):
            cells.append(BoundingBox(b.x, b.y + i * stripe_h, b.w, stripe_h))
    return cells


def _pixel_window(b: BoundingBox, width: int, height: int):
    """Integer pixel window [x0, x1) x [y0, y1) covered by a continuous box,
    clipped to the frame."""
    x0 = max(0, int(math.floor(b.x + 0.5)))
    y0 = max(0, int(math.floor(b.y + 0.5)))
    x1 = min(width, int(math.floor(b.x + b.w + 0.5)))
    y1 = min(height, int(math.floor(b.y + b.h + 0.5)))
    return x0, x1, y0, y1


def color_histogram(frame: np.ndarray, b: BoundingBox, mask=None,
                    cfg: TrackerConfig = TrackerConfig()) -> np.ndarray:
    """Per-cell, per-channel normalized histograms with B bins.

    When a foreground mask is supplied only masked pixels count (stand-in for
    the moving-pixel restriction a detector's background model would give).
    Empty cells yield the uniform histogram.
    """
    h, w = frame.shape[:2]
    bins = cfg.hist_bins_B
    x0, x1, y0, y1 = _pixel_window(b, w, h)
    if x0 >= x1 or y0 >= y1:
        raise ValueError("box lies outside the frame")
    cells = pyramid_cells(b, cfg.pyramid_levels_L)
    out = np.empty((len(cells), 3, bins), dtype=np.float64)
    for ci, cell in enumerate(cells):
        cx0, cx1, cy0, cy1 = _pixel_window(cell, w, h)
        if cx0 >= cx1 or cy0 >= cy1:
            out[ci] = 1.0 / bins
            continue
        patch = frame[cy0:cy1, cx0:cx1].reshape(-1, 3)
        if mask is not None:
            keep = np.asarray(mask, dtype=bool)[cy0:cy1, cx0:cx1].reshape(-1)
            patch = patch[keep]
        if patch.shape[0] == 0:
            out[ci] = 1.0 / bins
            continue
        idx = (patch.astype(np.int64) * bins) // 256
        for ch in range(3):
            counts = np.bincount(idx[:, ch], minlength=bins).astype(np.float64)
            out[ci, ch] = counts / counts.sum()
    return out


def _window_features(frame: np.ndarray, x0, x1, y0, y1):
    """Per-pixel 11-feature stack over a pixel window.

    Gradients are central differences computed on the window padded by one
    frame pixel where available, so interior values match whole-frame
    gradients.
    """
    h, w = frame.shape[:2]
    ex0, ey0 = max(0, x0 - 1), max(0, y0 - 1)
    ex1, ey1 = min(w, x1 + 1), min(h, y1 + 1)
    crop = frame[ey0:ey1, ex0:ex1].astype(np.float64)
    sy, sx = y0 - ey0, x0 - ex0
    feats = np.empty((y1 - y0, x1 - x0, 11), dtype=np.float64)
    nx, ny = x1 - x0, y1 - y0
    xs = np.arange(nx, dtype=np.float64) / max(nx - 1, 1)
    ys = np.arange(ny, dtype=np.float64) / max(ny - 1, 1)
    feats[:, :, 0] = xs[None, :]
    feats[:, :, 1] = ys[:, None]
    for ch in range(3):
        plane = crop[:, :, ch]
        gy, gx = np.gradient(plane)
        view = slice(sy, sy + ny), slice(sx, sx + nx)
        feats[:, :, 2 + ch] = plane[view]
        feats[:, :, 5 + ch] = np.hypot(gx[view], gy[view])
        feats[:, :, 8 + ch] = np.arctan2(gy[view], gx[view])
    return feats


def color_covariance(frame: np.ndarray, b: BoundingBox,
                     cfg: TrackerConfig = TrackerConfig()) -> np.ndarray:
    """Per-cell 11x11 sample covariance of [x, y, RGB, gradient magnitude and
    orientation per channel], regularized to keep it positive-definite."""
    h, w = frame.shape[:2]
    cells = pyramid_cells(b, cfg.pyramid_levels_L)
    out = np.empty((len(cells), 11, 11), dtype=np.float64)
    for ci, cell in enumerate(cells):
        cx0, cx1, cy0, cy1 = _pixel_window(cell, w, h)
        n_px = max(cx1 - cx0, 0) * max(cy1 - cy0, 0)
        if n_px < 2:
            out[ci] = np.eye(11) * 1e-9
            continue
        feats = _window_features(frame, cx0, cx1, cy0, cy1).reshape(-1, 11)
        cov = np.cov(feats, rowvar=False, ddof=1)
        lam = 1e-6 * np.trace(cov) / 11.0 + 1e-9
        cov = (cov + cov.T) / 2.0 + lam * np.eye(11)
        out[ci] = cov
    return out


def _kmeans_dominant(colors: np.ndarray, counts: np.ndarray, k: int, seed: int):
    """Weighted k-means (k-means++ seeding) over unique colors.

    Operating on the sorted unique colors makes the result invariant to the
    pixel scan order.
    """
    weights = counts.astype(np.float64)
    k = min(k, len(colors))
    rng = np.random.default_rng(seed)
    centers = np.empty((k, 3), dtype=np.float64)
    probs = weights / weights.sum()
    centers[0] = colors[rng.choice(len(colors), p=probs)]
    d2 = np.sum((colors - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = float(np.sum(d2 * weights))
        if total <= 0:
            centers[i:] = centers[0]
            k = i
            break
        centers[i] = colors[rng.choice(len(colors), p=d2 * weights / total)]
        d2 = np.minimum(d2, np.sum((colors - centers[i]) ** 2, axis=1))
    centers = centers[:k]
    for _ in range(20):
        dists = np.sum((colors[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(dists, axis=1)
        new_centers = []
        for j in range(len(centers)):
            sel = assign == j
            if not np.any(sel):
                continue
            wsel = weights[sel]
            new_centers.append(np.average(colors[sel], axis=0, weights=wsel))
        new_centers = np.asarray(new_centers)
        if new_centers.shape == centers.shape and np.allclose(new_centers, centers):
            centers = new_centers
            break
        centers = new_centers
    dists = np.sum((colors[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(dists, axis=1)
    cluster_w = np.array([weights[assign == j].sum() for j in range(len(centers))])
    keep = cluster_w > 0
    return centers[keep], cluster_w[keep] / cluster_w.sum()


def _merge_close(centers: np.ndarray, weights: np.ndarray, radius: float):
    centers = [c for c in centers]
    weights = [float(v) for v in weights]
    while len(centers) > 1:
        best = None
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                d = float(np.linalg.norm(centers[i] - centers[j]))
                if d < radius and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        wi, wj = weights[i], weights[j]
        centers[i] = (centers[i] * wi + centers[j] * wj) / (wi + wj)
        weights[i] = wi + wj
        del centers[j], weights[j]
    return np.asarray(centers), np.asarray(weights)


def dominant_color(frame: np.ndarray, b: BoundingBox,
                   cfg: TrackerConfig = TrackerConfig()) -> tuple:
    """Per-cell dominant colors: up to N cluster colors with weights that sum
    to one, sorted by weight (descending). Minor clusters below 5% are
    dropped, clusters closer than the merge radius fused."""
    h, w = frame.shape[:2]
    cells = pyramid_cells(b, cfg.pyramid_levels_L)
    result = []
    for cell in cells:
        cx0, cx1, cy0, cy1 = _pixel_window(cell, w, h)
        if cx0 >= cx1 or cy0 >= cy1:
            raise ValueError("empty pyramid cell")
        patch = frame[cy0:cy1, cx0:cx1].reshape(-1, 3).astype(np.float64)
        colors, counts = np.unique(patch, axis=0, return_counts=True)
        centers, weights = _kmeans_dominant(colors, counts,
                                            cfg.dominant_colors_N, cfg.seed)
        centers, weights = _merge_close(centers, weights, DOMINANT_MERGE_RADIUS)
        keep = weights >= DOMINANT_MIN_WEIGHT
        if not np.any(keep):
            keep = weights == weights.max()
        centers, weights = centers[keep], weights[keep]
        weights = weights / weights.sum()
        # sort by weight descending, color as deterministic tie-break
        order = np.lexsort((centers[:, 2], centers[:, 1], centers[:, 0], -weights))
        result.append((centers[order], weights[order]))
    return tuple(result)


def extract_all(frame: np.ndarray, b: BoundingBox, mask=None,
                cfg: TrackerConfig = TrackerConfig()) -> DescriptorSet:
    """All five descriptors of one detection."""
    return DescriptorSet(
        shape_ratio=shape_ratio(b),
        area=area(b),
        histograms=color_histogram(frame, b, mask, cfg),
        covariances=color_covariance(frame, b, cfg),
        dominant_colors=dominant_color(frame, b, cfg),
    )
