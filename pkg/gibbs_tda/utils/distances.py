"""
Bottleneck and Wasserstein-p distances between persistence diagrams.

Both sides are augmented with the diagonal: the cost matrix has |A| + |B|
rows and columns, any point may be matched to the diagonal at cost
(b − d)/2 (its L∞ distance to the diagonal), and diagonal-to-diagonal
costs nothing. Essential points never enter a matching.
"""

from typing import Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from gibbs_tda.utils.diagrams import PersistenceDiagram
from gibbs_tda.utils.errors import ParameterError

DiagramLike = Union[PersistenceDiagram, np.ndarray]


def finite_points(diagram: DiagramLike) -> np.ndarray:
    """(d, b) rows with the essential points removed."""
    if isinstance(diagram, PersistenceDiagram):
        return diagram.finite_points()
    points = np.asarray(diagram, dtype=float).reshape(-1, 2)
    return points[np.all(np.isfinite(points), axis=1)]


def augmented_costs(a: DiagramLike, b: DiagramLike) -> np.ndarray:
    """L∞ edge lengths of the diagonal-augmented matching problem, shape (m+n, m+n).

    Rows are the points of `a` followed by n diagonal slots; columns are the
    points of `b` followed by m diagonal slots.
    """
    pa = finite_points(a)
    pb = finite_points(b)
    m, n = len(pa), len(pb)
    costs = np.zeros((m + n, m + n))

    if m and n:
        costs[:m, :n] = np.max(np.abs(pa[:, None, :] - pb[None, :, :]), axis=2)
    costs[:m, n:] = ((pa[:, 1] - pa[:, 0]) / 2.0)[:, None]
    costs[m:, :n] = ((pb[:, 1] - pb[:, 0]) / 2.0)[None, :]
    return costs


def wasserstein(a: DiagramLike, b: DiagramLike, p: float = 2.0) -> float:
    """W_p = (min over matchings Σ ‖u − γ(u)‖_∞^p)^(1/p), solved exactly."""
    if not p > 0:
        raise ParameterError("p", f"Wasserstein order must be > 0, got {p}")
    costs = augmented_costs(a, b)
    if costs.size == 0:
        return 0.0

    weighted = costs ** p
    rows, cols = linear_sum_assignment(weighted)
    return float(weighted[rows, cols].sum() ** (1.0 / p))


def _has_perfect_matching(allowed: np.ndarray) -> bool:
    graph = csr_matrix(allowed.astype(np.int8))
    matching = maximum_bipartite_matching(graph, perm_type="column")
    return bool(np.all(matching >= 0))


def bottleneck(a: DiagramLike, b: DiagramLike) -> float:
    """Smallest threshold t such that a perfect matching uses only edges of length ≤ t."""
    costs = augmented_costs(a, b)
    if costs.size == 0:
        return 0.0

    candidates = np.unique(costs)
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(costs <= candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])
