"""Descriptor similarities, discriminative weights and the global score.

Each of the five descriptor similarities DS_k is symmetric, lives in [0, 1]
and equals 1 on identical inputs. Distances (EMD, covariance metric) are
mapped to similarities with bounded monotone transforms.
"""

import math

import numpy as np
import scipy.linalg

from .core import TrackerConfig
from .imaging import DescriptorSet


def ds_size(v_a: float, v_b: float) -> float:
    """Ratio similarity for positive scalars (shape ratio, area)."""
    if v_a <= 0 or v_b <= 0:
        raise ValueError("size descriptors must be positive")
    return min(v_a, v_b) / max(v_a, v_b)


def emd_1d(h1, h2) -> float:
    """Exact earth mover's distance between histograms on a 1-D grid with
    unit spacing: the L1 distance of the cumulative sums."""
    a = np.asarray(h1, dtype=np.float64)
    b = np.asarray(h2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("histograms must have the same number of bins")
    if abs(a.sum() - 1.0) > 1e-6 or abs(b.sum() - 1.0) > 1e-6:
        raise ValueError("histograms must be normalized")
    return float(np.abs(np.cumsum(a - b)).sum())


def _level_slices(n_cells: int):
    """Cell index ranges per pyramid level for a 2**L - 1 cell layout."""
    slices = []
    start, width = 0, 1
    while start < n_cells:
        slices.append(range(start, start + width))
        start += width
        width *= 2
    if start != n_cells:
        raise ValueError(f"cell count {n_cells} is not 2**L - 1")
    return slices


def pyramid_combine(cell_sims, levels: int) -> float:
    """Weighted pyramid combination: the finest level carries weight 1/2,
    each coarser level half of the next finer one, and the two coarsest
    levels tie. Weights sum to one; a single level is passed through."""
    values = np.asarray(cell_sims, dtype=np.float64)
    slices = _level_slices(len(values))
    if len(slices) != levels:
        raise ValueError("cell count does not match level count")
    total = 0.0
    for l, cells in enumerate(slices):
        weight = 2.0 ** (l - levels) if l > 0 else 2.0 ** (1 - levels)
        total += weight * float(values[list(cells)].mean())
    return total


def ds_histogram(a: DescriptorSet, b: DescriptorSet, cfg: TrackerConfig) -> float:
    """Color-histogram similarity: per cell the mean over channels of the
    normalized EMD similarity, combined over the pyramid."""
    ha, hb = a.histograms, b.histograms
    if ha.shape != hb.shape:
        raise ValueError("histogram shapes differ")
    bins = ha.shape[2]
    cell_sims = [
        np.mean([1.0 - emd_1d(ha[ci, ch], hb[ci, ch]) / (bins - 1)
                 for ch in range(3)])
        for ci in range(ha.shape[0])
    ]
    return pyramid_combine(cell_sims, cfg.pyramid_levels_L)


def forstner_distance(c1, c2) -> float:
    """Covariance-matrix distance sqrt(sum of squared log generalized
    eigenvalues); affine invariant and zero iff the matrices are equal."""
    a = np.asarray(c1, dtype=np.float64)
    b = np.asarray(c2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("covariance matrices must share a square shape")
    try:
        np.linalg.cholesky(a)
        eigvals = scipy.linalg.eigh(a, b, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrices must be symmetric positive-definite") from exc
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("matrices must be symmetric positive-definite") from exc
    return float(np.sqrt(np.sum(np.log(eigvals) ** 2)))


def ds_covariance(a: DescriptorSet, b: DescriptorSet, cfg: TrackerConfig) -> float:
    """Color-covariance similarity 1 / (1 + distance), combined over the pyramid."""
    ca, cb = a.covariances, b.covariances
    if ca.shape != cb.shape:
        raise ValueError("covariance shapes differ")
    cell_sims = [1.0 / (1.0 + forstner_distance(ca[ci], cb[ci]))
                 for ci in range(ca.shape[0])]
    return pyramid_combine(cell_sims, cfg.pyramid_levels_L)


def min_cost_transport(supply, demand, cost) -> float:
    """Exact minimum transport cost by successive shortest paths.

    Small problems only (dominant-color sets), nonnegative costs, equal total
    supply and demand.
    """
    supply = [float(s) for s in supply]
    demand = [float(d) for d in demand]
    m, n = len(supply), len(demand)
    cost = np.asarray(cost, dtype=np.float64)
    # node ids: 0 = source, 1..m suppliers, m+1..m+n consumers, m+n+1 = sink
    n_nodes = m + n + 2
    sink = n_nodes - 1
    cap = {}
    arc_cost = {}

    def add_arc(u, v, capacity, c):
        cap[(u, v)] = capacity
        cap[(v, u)] = 0.0
        arc_cost[(u, v)] = c
        arc_cost[(v, u)] = -c

    for i in range(m):
        add_arc(0, 1 + i, supply[i], 0.0)
    for i in range(m):
        for j in range(n):
            add_arc(1 + i, 1 + m + j, math.inf, float(cost[i, j]))
    for j in range(n):
        add_arc(1 + m + j, sink, demand[j], 0.0)

    total = 0.0
    remaining = sum(demand)
    while remaining > 1e-12:
        # Bellman-Ford shortest path on the residual graph
        dist = [math.inf] * n_nodes
        prev = [None] * n_nodes
        dist[0] = 0.0
        for _ in range(n_nodes):
            changed = False
            for (u, v), c in cap.items():
                if c > 1e-12 and dist[u] + arc_cost[(u, v)] < dist[v] - 1e-15:
                    dist[v] = dist[u] + arc_cost[(u, v)]
                    prev[v] = u
                    changed = True
            if not changed:
                break
        if not math.isfinite(dist[sink]):
            raise ValueError("transport problem is infeasible")
        flow = remaining
        v = sink
        while v != 0:
            u = prev[v]
            flow = min(flow, cap[(u, v)])
            v = u
        v = sink
        while v != 0:
            u = prev[v]
            cap[(u, v)] -= flow
            cap[(v, u)] += flow
            v = u
        total += flow * dist[sink]
        remaining -= flow
    return total


def ds_dominant_color(a: DescriptorSet, b: DescriptorSet, cfg: TrackerConfig) -> float:
    """Dominant-color similarity: 1 - EMD between the weighted color sets,
    with RGB distances normalized so the ground distance stays in [0, 1]."""
    if len(a.dominant_colors) != len(b.dominant_colors):
        raise ValueError("dominant color shapes differ")
    scale = 255.0 * math.sqrt(3.0)
    cell_sims = []
    for (col_a, w_a), (col_b, w_b) in zip(a.dominant_colors, b.dominant_colors):
        if len(w_a) == 0 or len(w_b) == 0:
            raise ValueError("empty dominant color set")
        ground = np.linalg.norm(col_a[:, None, :] - col_b[None, :, :], axis=2) / scale
        emd = min_cost_transport(w_a, w_b, ground)
        cell_sims.append(1.0 - emd)
    return pyramid_combine(cell_sims, cfg.pyramid_levels_L)


def ds_all(a: DescriptorSet, b: DescriptorSet, cfg: TrackerConfig) -> np.ndarray:
    """All five descriptor similarities as one vector."""
    return np.array([
        ds_size(a.shape_ratio, b.shape_ratio),
        ds_size(a.area, b.area),
        ds_histogram(a, b, cfg),
        ds_covariance(a, b, cfg),
        ds_dominant_color(a, b, cfg),
    ])


def descriptor_weights(obj: DescriptorSet, neighbors, cfg: TrackerConfig) -> np.ndarray:
    """Discriminative weight of each descriptor for one object.

    A descriptor that tells the object apart from its spatial neighbors (low
    similarity) gets a high weight; similarities are clamped to the floor so
    the log stays bounded. No neighbors means uniform weights.
    """
    neighbors = list(neighbors)
    if not neighbors:
        return np.ones(5)
    w = np.zeros(5)
    for nb in neighbors:
        ds = np.clip(ds_all(obj, nb, cfg), cfg.ds_floor, 1.0)
        w += np.log10(1.0 / ds)
    return w / len(neighbors)


def weighted_global_similarity(ds_values, w_a, w_b) -> float:
    """Weighted mean of descriptor similarities with per-object weights
    summed; all-zero weights fall back to the plain mean."""
    ds_values = np.asarray(ds_values, dtype=np.float64)
    combined = np.asarray(w_a, dtype=np.float64) + np.asarray(w_b, dtype=np.float64)
    denom = combined.sum()
    if denom == 0.0:
        return float(ds_values.mean())
    return float(np.dot(combined, ds_values) / denom)


def global_similarity(a: DescriptorSet, w_a, b: DescriptorSet, w_b,
                      cfg: TrackerConfig) -> float:
    """Global appearance similarity between two object snapshots."""
    return weighted_global_similarity(ds_all(a, b, cfg), w_a, w_b)
