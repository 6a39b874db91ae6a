from itertools import combinations, permutations

import numpy as np
import pytest

from gibbs_tda.utils.diagrams import PersistenceDiagram
from gibbs_tda.utils.distances import bottleneck, wasserstein
from gibbs_tda.utils.errors import ParameterError


def random_points(rng, n):
    d = rng.uniform(-1.0, 1.0, n)
    return np.column_stack([d, d + rng.uniform(0.01, 1.0, n)])


def matching_edges(a, b):
    """Edge lengths of every partial matching; unmatched points go to the diagonal."""
    to_diagonal_a = (a[:, 1] - a[:, 0]) / 2.0
    to_diagonal_b = (b[:, 1] - b[:, 0]) / 2.0
    for k in range(min(len(a), len(b)) + 1):
        for rows in combinations(range(len(a)), k):
            for cols in permutations(range(len(b)), k):
                matched = [np.abs(a[r] - b[c]).max() for r, c in zip(rows, cols)]
                left = [to_diagonal_a[i] for i in range(len(a)) if i not in rows]
                right = [to_diagonal_b[j] for j in range(len(b)) if j not in cols]
                yield np.array(matched + left + right)


def test_identical_diagrams_are_at_distance_zero():
    a = random_points(np.random.default_rng(0), 6)
    assert wasserstein(a, a, p=2) == 0.0
    assert bottleneck(a, a) == 0.0


def test_single_point_against_empty_diagram():
    a = np.array([[0.0, 2.0]])
    assert wasserstein(a, np.empty((0, 2)), p=2) == pytest.approx(1.0)
    assert bottleneck(a, np.empty((0, 2))) == pytest.approx(1.0)


def test_empty_against_empty():
    assert wasserstein(np.empty((0, 2)), np.empty((0, 2))) == 0.0
    assert bottleneck(np.empty((0, 2)), np.empty((0, 2))) == 0.0


def test_small_shift_is_the_bottleneck():
    eps = 1e-3
    assert bottleneck(np.array([[0.0, 2.0]]), np.array([[0.0, 2.0 + eps]])) == pytest.approx(eps, abs=1e-15)


def test_essential_points_are_ignored(h0_diagram):
    finite = h0_diagram.finite_points()
    assert wasserstein(h0_diagram, finite) == 0.0
    assert bottleneck(h0_diagram, finite) == 0.0


def test_non_positive_order_rejected():
    with pytest.raises(ParameterError):
        wasserstein(np.array([[0.0, 1.0]]), np.array([[0.0, 1.0]]), p=0.0)


def test_distances_match_exhaustive_partial_matchings():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        a = random_points(rng, int(rng.integers(0, 6)))
        b = random_points(rng, int(rng.integers(0, 6)))
        edges = list(matching_edges(a, b))
        for p in (1.0, 2.0):
            expected = min((e ** p).sum() for e in edges) ** (1.0 / p)
            assert wasserstein(a, b, p) == pytest.approx(expected, abs=1e-12)
        assert bottleneck(a, b) == pytest.approx(min(e.max(initial=0.0) for e in edges), abs=1e-12)


def test_symmetry_and_triangle_inequality():
    rng = np.random.default_rng(9)
    for _ in range(20):
        a, b, c = (random_points(rng, int(rng.integers(1, 7))) for _ in range(3))
        assert wasserstein(a, b) == pytest.approx(wasserstein(b, a), abs=1e-12)
        assert bottleneck(a, b) == bottleneck(b, a)
        assert wasserstein(a, c) <= wasserstein(a, b) + wasserstein(b, c) + 1e-9
        assert bottleneck(a, c) <= bottleneck(a, b) + bottleneck(b, c) + 1e-12
        assert bottleneck(a, b) <= wasserstein(a, b, p=2) + 1e-12


def test_accepts_diagram_objects():
    a = PersistenceDiagram(1, np.array([[0.0, 1.0], [0.2, 0.5]]))
    b = PersistenceDiagram(1, np.array([[0.0, 1.1]]))
    assert wasserstein(a, b) == pytest.approx(wasserstein(a.points, b.points))
