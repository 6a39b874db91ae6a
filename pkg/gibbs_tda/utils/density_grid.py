"""
Gaussian kernel density estimate evaluated at the vertices of a regular grid.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from gibbs_tda.utils.errors import ParameterError, PreconditionError
from gibbs_tda.utils.point_clouds import PointCloud
from gibbs_tda.utils.textio import parse_floats, parse_ints, read_table, write_table

DEFAULT_RESOLUTION = {1: 512, 2: 128, 3: 64}
CHUNK_NODES = 1024


@dataclass(frozen=True)
class ScalarGrid:
    """KDE values on a D-dimensional grid; `values` has shape `resolution` (row-major)."""

    axis_min: np.ndarray
    axis_max: np.ndarray
    resolution: Tuple[int, ...]
    values: np.ndarray
    bandwidth: float

    def __post_init__(self):
        axis_min = np.asarray(self.axis_min, dtype=float)
        axis_max = np.asarray(self.axis_max, dtype=float)
        resolution = tuple(int(r) for r in self.resolution)
        values = np.asarray(self.values, dtype=float).reshape(resolution)
        if not np.all(axis_min < axis_max):
            raise ParameterError("axis_min", "grid axes need axis_min < axis_max componentwise")
        if np.any(values < 0):
            raise ParameterError("values", "density values must be >= 0")
        object.__setattr__(self, "axis_min", axis_min)
        object.__setattr__(self, "axis_max", axis_max)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.resolution)

    def axes(self):
        return [np.linspace(lo, hi, r) for lo, hi, r in zip(self.axis_min, self.axis_max, self.resolution)]

    def spacing(self) -> np.ndarray:
        return (self.axis_max - self.axis_min) / (np.asarray(self.resolution) - 1)

    def cell_volume(self) -> float:
        return float(np.prod(self.spacing()))

    def nodes(self) -> np.ndarray:
        """All grid vertices in row-major order, shape (prod(resolution), D)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.nodes(), columns=[f"x{i + 1}" for i in range(self.dim)])
        df["value"] = self.values.ravel()
        return df

    @classmethod
    def from_frame(cls, df: pd.DataFrame, bandwidth: float) -> "ScalarGrid":
        """Rebuild a grid from `to_frame` output (rows in any order)."""
        coord_cols = sorted([c for c in df.columns if str(c).startswith("x")], key=lambda c: int(str(c)[1:]))
        ordered = df.sort_values(coord_cols)
        coords = ordered[coord_cols].to_numpy(dtype=float)
        resolution = tuple(len(np.unique(coords[:, i])) for i in range(len(coord_cols)))
        return cls(
            axis_min=coords.min(axis=0),
            axis_max=coords.max(axis=0),
            resolution=resolution,
            values=ordered["value"].to_numpy(dtype=float),
            bandwidth=bandwidth,
        )


def _resolve_resolution(dim: int, resolution) -> Tuple[int, ...]:
    if resolution is None:
        resolution = DEFAULT_RESOLUTION.get(dim, 32)
    if np.isscalar(resolution):
        resolution = (int(resolution),) * dim
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != dim:
        raise ParameterError("resolution", f"expected {dim} axis sizes, got {len(resolution)}")
    if min(resolution) < 2:
        raise ParameterError("resolution", "need at least 2 grid nodes per axis")
    return resolution


def _kde_chunk(nodes: np.ndarray, points: np.ndarray, bandwidth: float) -> np.ndarray:
    # One row per node; numpy reduces each row in a fixed order.
    diff = nodes[:, None, :] - points[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return np.exp(-sq / (2.0 * bandwidth * bandwidth)).sum(axis=1)


def _kde_chunk_cutoff(nodes: np.ndarray, tree: cKDTree, points: np.ndarray, bandwidth: float, cutoff: float) -> np.ndarray:
    node_tree = cKDTree(nodes)
    pairs = node_tree.sparse_distance_matrix(tree, cutoff, output_type="ndarray")
    order = np.lexsort((pairs["j"], pairs["i"]))
    pairs = pairs[order]
    weights = np.exp(-(pairs["v"] ** 2) / (2.0 * bandwidth * bandwidth))
    return np.bincount(pairs["i"], weights=weights, minlength=len(nodes))


def kde_evaluate(
    cloud: PointCloud,
    bandwidth: float,
    resolution=None,
    padding: Optional[float] = None,
    cutoff: Optional[float] = None,
    workers: int = 1,
) -> ScalarGrid:
    """Evaluate f̂_n(p) = (1/(n(√(2π)η)^D)) Σ_i exp(−‖p−z_i‖²/2η²) at every grid vertex.

    Args:
        cloud: sample points
        bandwidth: Gaussian kernel bandwidth η > 0
        resolution: nodes per axis (int or per-axis tuple); defaults to 128² / 64³
        padding: margin added to the data bounding box on every side (default 3η)
        cutoff: optional kernel truncation radius, e.g. 5η (no renormalization)
        workers: threads evaluating node chunks in parallel

    Returns:
        ScalarGrid with values shaped `resolution`
    """
    if not bandwidth > 0:
        raise ParameterError("bandwidth", f"bandwidth must be > 0, got {bandwidth}")
    if cloud.n == 0:
        raise PreconditionError("cannot estimate a density from an empty point cloud")
    if cutoff is not None and not cutoff > 0:
        raise ParameterError("cutoff", f"cutoff radius must be > 0, got {cutoff}")

    dim = cloud.ambient_dim
    resolution = _resolve_resolution(dim, resolution)
    pad = 3.0 * bandwidth if padding is None else float(padding)
    if pad < 0:
        raise ParameterError("padding", "padding must be >= 0")

    lo = cloud.points.min(axis=0) - pad
    hi = cloud.points.max(axis=0) + pad
    # A single point with zero padding still needs a non-empty box.
    hi = np.where(hi > lo, hi, lo + bandwidth)

    grid_axes = [np.linspace(a, b, r) for a, b, r in zip(lo, hi, resolution)]
    mesh = np.meshgrid(*grid_axes, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])

    points = cloud.points
    tree = cKDTree(points) if cutoff is not None else None
    starts = list(range(0, len(nodes), CHUNK_NODES))

    def evaluate(start: int) -> np.ndarray:
        chunk = nodes[start:start + CHUNK_NODES]
        if tree is None:
            return _kde_chunk(chunk, points, bandwidth)
        return _kde_chunk_cutoff(chunk, tree, points, bandwidth, cutoff)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(evaluate, starts))
    else:
        sums = [evaluate(s) for s in starts]

    norm = cloud.n * (np.sqrt(2.0 * np.pi) * bandwidth) ** dim
    values = np.concatenate(sums) / norm
    return ScalarGrid(lo, hi, resolution, values.reshape(resolution), float(bandwidth))


def riemann_mass(grid: ScalarGrid) -> float:
    """Σ values × cell volume; close to 1 when the grid covers the kernel mass."""
    return float(grid.values.sum() * grid.cell_volume())


def save_grid(grid: ScalarGrid, path: str, extra: Optional[dict] = None) -> str:
    header = {
        "dim": grid.dim,
        "axis_min": grid.axis_min,
        "axis_max": grid.axis_max,
        "resolution": grid.resolution,
        "bandwidth": grid.bandwidth,
    }
    header.update(extra or {})
    frame = pd.DataFrame({"value": grid.values.ravel()})
    return write_table(path, header, frame, columns_line=False)


def load_grid(path: str) -> ScalarGrid:
    meta, frame = read_table(path, columns=["value"])
    return ScalarGrid(
        axis_min=parse_floats(meta["axis_min"]),
        axis_max=parse_floats(meta["axis_max"]),
        resolution=parse_ints(meta["resolution"]),
        values=frame["value"].to_numpy(dtype=float),
        bandwidth=float(meta["bandwidth"]),
    )


