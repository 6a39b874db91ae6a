"""
Superlevel-set persistence of a grid function on a vertex-based cubical complex.

Cells live on the doubled grid of shape (2n_1 − 1, …, 2n_D − 1): a cell is a
vertex when all of its coordinates are even, and its dimension is the number
of odd coordinates. A cell's filtration value is the minimum over its
vertices, so Z_u = f⁻¹([u, ∞)) is the union of cells with value ≥ u.

Cells enter the filtration by decreasing value, ties broken by dimension
ascending and then by flat cell index. Columns of dimension ≥ 2 are reduced
over Z/2 with clearing, from the top dimension down; degree 0 is paired with a
union-find elder rule, which produces the same pairing as reducing the edge
columns under the same total order.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from gibbs_tda.utils.density_grid import ScalarGrid
from gibbs_tda.utils.diagrams import PersistenceDiagram
from gibbs_tda.utils.errors import InvariantViolation


@dataclass(frozen=True)
class FiltrationComplex:
    grid_shape: Tuple[int, ...]
    cell_shape: Tuple[int, ...]
    values: np.ndarray
    dims: np.ndarray
    boundary: Dict[int, Tuple[np.ndarray, np.ndarray]]

    @property
    def dim(self) -> int:
        return len(self.grid_shape)

    @property
    def size(self) -> int:
        return len(self.values)

    def facets(self, index: int) -> np.ndarray:
        """Flat indices of the codimension-1 faces of one cell."""
        k = int(self.dims[index])
        if k == 0:
            return np.empty(0, dtype=np.int64)
        cells, facets = self.boundary[k]
        pos = np.searchsorted(cells, index)
        return facets[pos]

    def filtration_order(self) -> np.ndarray:
        """Cell indices in filtration order (decreasing value, then dimension, then index)."""
        index = np.arange(self.size)
        return np.lexsort((index, self.dims, -self.values))


def build_complex(grid: ScalarGrid) -> FiltrationComplex:
    """Full V-construction cubical complex on the grid graph; cell value = min over its vertices."""
    grid_shape = tuple(grid.resolution)
    dim = len(grid_shape)
    cell_shape = tuple(2 * n - 1 for n in grid_shape)

    values = np.full(cell_shape, np.inf)
    values[tuple(slice(None, None, 2) for _ in grid_shape)] = grid.values
    for axis in range(dim):
        odd = [slice(None)] * dim
        left = [slice(None)] * dim
        right = [slice(None)] * dim
        odd[axis] = slice(1, None, 2)
        left[axis] = slice(0, -1, 2)
        right[axis] = slice(2, None, 2)
        values[tuple(odd)] = np.minimum(values[tuple(left)], values[tuple(right)])

    coords = np.indices(cell_shape).reshape(dim, -1)
    parity = coords % 2
    dims = parity.sum(axis=0).astype(np.int8)
    pattern = np.zeros(coords.shape[1], dtype=np.int64)
    for axis in range(dim):
        pattern |= parity[axis].astype(np.int64) << axis

    strides = [int(np.prod(cell_shape[axis + 1:])) for axis in range(dim)]
    grouped: Dict[int, List[Tuple[np.ndarray, np.ndarray]]] = {}
    for code in range(1, 1 << dim):
        axes = [a for a in range(dim) if code >> a & 1]
        cells = np.nonzero(pattern == code)[0]
        offsets = np.array([s * strides[a] for a in axes for s in (-1, 1)], dtype=np.int64)
        grouped.setdefault(len(axes), []).append((cells, cells[:, None] + offsets[None, :]))

    boundary = {}
    for k, parts in grouped.items():
        cells = np.concatenate([p[0] for p in parts])
        facets = np.concatenate([p[1] for p in parts])
        order = np.argsort(cells, kind="stable")
        boundary[k] = (cells[order], facets[order])

    return FiltrationComplex(grid_shape, cell_shape, values.ravel(), dims, boundary)


def check_monotone(complex_: FiltrationComplex) -> None:
    """Every facet must enter no later than its coface (value ≥ coface value)."""
    for k, (cells, facets) in complex_.boundary.items():
        if np.any(complex_.values[facets] < complex_.values[cells][:, None]):
            raise InvariantViolation(f"non-monotone filtration among dimension-{k} cells")


def _reduce_dimension(
    columns: np.ndarray,
    rows: np.ndarray,
    cleared: set,
    pairs: List[Tuple[int, int]],
) -> Tuple[set, set]:
    """Reduce one dimension's columns (sorted by rank) over Z/2.

    Returns (pivot rows, zero columns). Each pivot becomes a (birth row, death column) pair.
    """
    reduced: Dict[int, Tuple[int, ...]] = {}
    zero_columns = set()
    for col, facet_rows in zip(columns.tolist(), rows.tolist()):
        if col in cleared:
            continue
        column = set(facet_rows)
        while column:
            low = max(column)
            owner = reduced.get(low)
            if owner is None:
                reduced[low] = tuple(column)
                pairs.append((low, col))
                break
            column.symmetric_difference_update(owner)
        else:
            zero_columns.add(col)
    return set(reduced), zero_columns


def compute_persistence(complex_: FiltrationComplex) -> List[PersistenceDiagram]:
    """Persistence diagrams of degrees 0…D of the superlevel filtration.

    Finite pairs are emitted as (d, b) with d < b; zero-persistence pairs are
    dropped. The single essential degree-0 class is emitted first with
    d = global minimum grid value and flagged essential.
    """
    check_monotone(complex_)
    dim = complex_.dim
    values = complex_.values
    dims = complex_.dims

    order = complex_.filtration_order()
    rank = np.empty(complex_.size, dtype=np.int64)
    rank[order] = np.arange(complex_.size)
    cell_at = order

    pairs: Dict[int, List[Tuple[int, int]]] = {k: [] for k in range(dim + 1)}
    positive: Dict[int, set] = {k: set() for k in range(dim + 1)}
    cleared: set = set()

    for k in range(dim, 1, -1):
        cells, facets = complex_.boundary[k]
        col_ranks = rank[cells]
        sort = np.argsort(col_ranks)
        row_ranks = rank[facets[sort]]
        found: List[Tuple[int, int]] = []
        pivots, zero_columns = _reduce_dimension(col_ranks[sort], row_ranks, cleared, found)
        pairs[k - 1].extend(found)
        positive[k] |= zero_columns | (cleared & set(col_ranks.tolist()))
        cleared = pivots

    essential_ranks: Dict[int, List[int]] = {k: [] for k in range(dim + 1)}
    if dim >= 1:
        edges, endpoints = complex_.boundary[1]
        edge_ranks = rank[edges]
        sort = np.argsort(edge_ranks)
        vertex_ranks = rank[endpoints[sort]]
        forest = DisjointSet(np.nonzero(dims == 0)[0].tolist())
        oldest: Dict[int, int] = {}
        for edge_rank, (u, v) in zip(edge_ranks[sort].tolist(), vertex_ranks.tolist()):
            cu, cv = cell_at[u], cell_at[v]
            ru, rv = forest[cu], forest[cv]
            if ru == rv:
                positive[1].add(edge_rank)
                continue
            ou, ov = oldest.get(ru, u), oldest.get(rv, v)
            pairs[0].append((max(ou, ov), edge_rank))
            forest.merge(cu, cv)
            oldest[forest[cu]] = min(ou, ov)

        if positive[1] != cleared:
            raise InvariantViolation("degree-1 classes without a dying square")

    vertex_ranks_all = rank[dims == 0]
    paired_vertices = {birth for birth, _ in pairs[0]}
    essential_ranks[0] = sorted(set(vertex_ranks_all.tolist()) - paired_vertices)

    for k in range(1, dim + 1):
        paired_births = {birth for birth, _ in pairs[k]} if k < dim else set()
        unpaired = positive[k] - paired_births
        if unpaired:
            raise InvariantViolation(f"{len(unpaired)} essential class(es) in degree {k} on a contractible grid")

    _check_bookkeeping(dims, pairs, essential_ranks, cell_at)
    if len(essential_ranks[0]) != 1:
        raise InvariantViolation(f"expected one essential degree-0 class, found {len(essential_ranks[0])}")

    global_min = float(values[dims == 0].min())
    diagrams = []
    for k in range(dim + 1):
        points = []
        flags = []
        if k == 0:
            top = cell_at[essential_ranks[0][0]]
            points.append((global_min, float(values[top])))
            flags.append(True)
        for birth_rank, death_rank in pairs[k]:
            b = float(values[cell_at[birth_rank]])
            d = float(values[cell_at[death_rank]])
            if d < b:
                points.append((d, b))
                flags.append(False)
        diagrams.append(PersistenceDiagram(k, np.array(points, dtype=float).reshape(-1, 2), np.array(flags, dtype=bool)))
    return diagrams


def _check_bookkeeping(dims, pairs, essential_ranks, cell_at) -> None:
    """Every cell is a birth, a death or essential exactly once; Euler characteristic is 1."""
    dim = len(pairs) - 1
    counts = np.bincount(dims.astype(np.int64), minlength=dim + 1)
    accounted = np.zeros(dim + 1, dtype=np.int64)
    for k in range(dim + 1):
        accounted[k] += len(pairs[k]) + len(essential_ranks[k])
        if k >= 1:
            accounted[k] += len(pairs[k - 1])
    if not np.array_equal(counts, accounted):
        raise InvariantViolation(f"cell bookkeeping mismatch: {counts.tolist()} cells vs {accounted.tolist()} accounted")
    euler = int(sum((-1) ** k * c for k, c in enumerate(counts)))
    essential_euler = sum((-1) ** k * len(essential_ranks[k]) for k in range(dim + 1))
    if euler != essential_euler or euler != 1:
        raise InvariantViolation(f"Euler characteristic {euler} does not match essential classes {essential_euler}")
    for k in range(dim + 1):
        for birth, death in pairs[k][:1]:
            if dims[cell_at[birth]] != k or dims[cell_at[death]] != k + 1:
                raise InvariantViolation(f"degree-{k} pair with wrong cell dimensions")


def grid_persistence(grid: ScalarGrid) -> List[PersistenceDiagram]:
    """build_complex followed by compute_persistence."""
    return compute_persistence(build_complex(grid))
