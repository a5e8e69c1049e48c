"""Optimal bipartite matching used by both trackers and by the metrics."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Matching:
    """Pairs of (row, col) sorted by row, plus the sum of matched scores."""

    pairs: tuple
    total: float


def _best_total(scores: np.ndarray) -> float:
    """Maximum achievable sum on a non-negative score matrix.

    Zero cells stand in for "leave unmatched", so a full assignment on the
    padded matrix has the same value as the best partial matching.
    """
    if scores.size == 0 or float(scores.max()) <= 0.0:
        return 0.0
    rows, cols = linear_sum_assignment(scores, maximize=True)
    return math.fsum(scores[rows, cols].tolist())


def solve(scores, forbid_below: float = 0.0) -> Matching:
    """Maximize the total score of a one-to-one row/col matching.

    Pairs scoring below `forbid_below` (or not above zero) are never matched;
    surplus rows or columns of a rectangular matrix stay unmatched. Ties
    between equal-total matchings are broken by the lexicographically
    smallest pair list, so the output is deterministic.
    """
    S = np.asarray(scores, dtype=float)
    if S.ndim != 2:
        raise ValueError("scores must be a 2-D matrix")
    if S.size and not np.isfinite(S).all():
        raise ValueError("scores must be finite")
    n_rows, n_cols = S.shape

    A = np.where((S >= forbid_below) & (S > 0.0), S, 0.0)
    best = _best_total(A)
    if best <= 0.0:
        return Matching(pairs=(), total=0.0)

    # Greedy lexicographic refinement: fix the smallest (row, col) pair that
    # still allows the optimal total, then recurse on the rest.
    pairs = []
    fixed_values = []
    col_free = np.ones(n_cols, dtype=bool)
    tol = 1e-9 * max(1.0, abs(best))
    for r in range(n_rows):
        if best - math.fsum(fixed_values) <= tol:
            break
        rest_rows = np.arange(r + 1, n_rows)
        for c in range(n_cols):
            if not col_free[c] or A[r, c] <= 0.0:
                continue
            cols_after = col_free.copy()
            cols_after[c] = False
            reachable = (math.fsum(fixed_values) + A[r, c]
                         + _best_total(A[np.ix_(rest_rows, np.flatnonzero(cols_after))]))
            if reachable >= best - tol:
                pairs.append((r, c))
                fixed_values.append(float(A[r, c]))
                col_free[c] = False
                break

    return Matching(pairs=tuple(pairs), total=math.fsum(fixed_values))
