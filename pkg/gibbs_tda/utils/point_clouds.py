"""
Synthetic point clouds for the three test manifolds: a 2-sphere, a 2-torus and
three concentric circles, plus bootstrap resampling of a cloud.

Every sampler draws from `numpy.random.default_rng(seed)`, so equal
(spec, seed) pairs give bitwise-equal clouds.
"""

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from gibbs_tda.utils.errors import ParameterError, PreconditionError
from gibbs_tda.utils.textio import read_table, write_table

SHAPES = ("sphere", "torus", "circles")


@dataclass(frozen=True)
class PointCloud:
    """n sample points in R^D."""

    points: np.ndarray
    ambient_dim: int
    label: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.ambient_dim:
            raise ParameterError("points", f"expected shape (n, {self.ambient_dim}), got {points.shape}")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.points, columns=[f"x{i + 1}" for i in range(self.ambient_dim)])

    @classmethod
    def from_frame(cls, df: pd.DataFrame, label: str = "", seed: Optional[int] = None) -> "PointCloud":
        columns = [c for c in df.columns if re.fullmatch(r"x\d+", str(c))]
        columns.sort(key=lambda c: int(str(c)[1:]))
        return cls(df[columns].to_numpy(dtype=float), len(columns), label, seed)


@dataclass(frozen=True)
class SamplerSpec:
    """Which manifold to sample, how many points, and the RNG seed.

    params:
        sphere:  {"radius": r}
        torus:   {"tube_radius": r, "center_distance": R}
        circles: {"circles": [(radius, count), ...]}
    """

    shape: str
    n: int
    seed: int = 0
    params: Dict[str, object] = field(default_factory=dict)

    def validate(self) -> None:
        if self.shape not in SHAPES:
            raise ParameterError("shape", f"unknown shape '{self.shape}', expected one of {SHAPES}")
        if self.n < 1:
            raise ParameterError("n", f"sample count must be >= 1, got {self.n}")

        if self.shape == "sphere":
            if float(self.params.get("radius", 1.0)) <= 0:
                raise ParameterError("radius", "sphere radius must be > 0")
        elif self.shape == "torus":
            if float(self.params.get("tube_radius", 1.8)) <= 0:
                raise ParameterError("tube_radius", "torus tube radius must be > 0")
            if float(self.params.get("center_distance", 2.0)) <= 0:
                raise ParameterError("center_distance", "torus center distance must be > 0")
        else:
            circles = self.circles()
            if not circles:
                raise ParameterError("circles", "at least one circle is required")
            for radius, count in circles:
                if radius <= 0:
                    raise ParameterError("circles", f"circle radius must be > 0, got {radius}")
                if count < 0:
                    raise ParameterError("circles", f"circle count must be >= 0, got {count}")
            total = sum(count for _, count in circles)
            if total != self.n:
                raise ParameterError("circles", f"circle counts sum to {total}, expected n={self.n}")

    def circles(self) -> List[Tuple[float, int]]:
        return [(float(r), int(c)) for r, c in self.params.get("circles", [])]

    def describe(self) -> str:
        """Compact shape string used in file headers, e.g. `torus(1.8,2.0)`."""
        if self.shape == "sphere":
            return f"sphere({float(self.params.get('radius', 1.0))!r})"
        if self.shape == "torus":
            return (
                f"torus({float(self.params.get('tube_radius', 1.8))!r},"
                f"{float(self.params.get('center_distance', 2.0))!r})"
            )
        return "circles(" + ",".join(f"{r!r}:{c}" for r, c in self.circles()) + ")"

    @classmethod
    def parse(cls, text: str, n: Optional[int] = None, seed: int = 0) -> "SamplerSpec":
        """Inverse of `describe`. `n` defaults to the circle total for circles."""
        match = re.fullmatch(r"\s*(\w+)\s*\(([^)]*)\)\s*", text)
        if match is None:
            raise ParameterError("shape", f"cannot parse sampler '{text}'")
        shape, body = match.group(1), match.group(2)
        args = [a.strip() for a in body.split(",") if a.strip()]

        if shape == "sphere":
            params = {"radius": float(args[0]) if args else 1.0}
        elif shape == "torus":
            params = {
                "tube_radius": float(args[0]) if args else 1.8,
                "center_distance": float(args[1]) if len(args) > 1 else 2.0,
            }
        elif shape == "circles":
            circles = []
            for arg in args:
                radius, count = arg.split(":")
                circles.append((float(radius), int(count)))
            params = {"circles": circles}
            if n is None:
                n = sum(c for _, c in circles)
        else:
            raise ParameterError("shape", f"unknown shape '{shape}'")

        if n is None:
            raise ParameterError("n", "sample count is required")
        return cls(shape=shape, n=int(n), seed=int(seed), params=params)


def _sample_sphere(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    # Normalized Gaussian vectors are uniform on the sphere.
    z = rng.standard_normal((n, 3))
    return radius * z / np.linalg.norm(z, axis=1, keepdims=True)


def _sample_torus(rng: np.random.Generator, n: int, tube_radius: float, center_distance: float) -> np.ndarray:
    r, big_r = tube_radius, center_distance
    theta = rng.uniform(0.0, 2.0 * np.pi, n)

    # Area element is (R + r cos φ) dθ dφ; accept φ with that weight.
    phi = np.empty(0)
    ceiling = big_r + r
    while phi.size < n:
        batch = max(2 * (n - phi.size), 64)
        candidate = rng.uniform(0.0, 2.0 * np.pi, batch)
        keep = rng.uniform(0.0, ceiling, batch) < big_r + r * np.cos(candidate)
        phi = np.concatenate([phi, candidate[keep]])
    phi = phi[:n]

    ring = big_r + r * np.cos(phi)
    return np.column_stack([ring * np.cos(theta), ring * np.sin(theta), r * np.sin(phi)])


def _sample_circles(rng: np.random.Generator, circles: List[Tuple[float, int]]) -> np.ndarray:
    blocks = []
    for radius, count in circles:
        angle = rng.uniform(0.0, 2.0 * np.pi, count)
        blocks.append(np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]))
    return np.vstack(blocks) if blocks else np.empty((0, 2))


def sample(spec: SamplerSpec) -> PointCloud:
    """Draw `spec.n` points uniformly (w.r.t. the Riemannian measure) on the manifold."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    if spec.shape == "sphere":
        points = _sample_sphere(rng, spec.n, float(spec.params.get("radius", 1.0)))
    elif spec.shape == "torus":
        points = _sample_torus(
            rng,
            spec.n,
            float(spec.params.get("tube_radius", 1.8)),
            float(spec.params.get("center_distance", 2.0)),
        )
    else:
        points = _sample_circles(rng, spec.circles())

    return PointCloud(points, points.shape[1], label=spec.describe(), seed=spec.seed)


def resample_data(cloud: PointCloud, seed: int) -> PointCloud:
    """Bootstrap the cloud: n points drawn with replacement."""
    if cloud.n == 0:
        raise PreconditionError("cannot resample an empty point cloud")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, cloud.n, size=cloud.n)
    return PointCloud(cloud.points[idx], cloud.ambient_dim, label=f"resample[{cloud.label}]", seed=seed)


def save_cloud(cloud: PointCloud, path: str, extra: Optional[Dict[str, object]] = None) -> str:
    header = {
        "dim": cloud.ambient_dim,
        "n": cloud.n,
        "seed": cloud.seed if cloud.seed is not None else "none",
        "shape": cloud.label or "unknown",
    }
    header.update(extra or {})
    return write_table(path, header, cloud.to_frame(), columns_line=False)


def load_cloud(path: str) -> PointCloud:
    meta, frame = read_table(path)
    dim = int(meta["dim"])
    frame.columns = [f"x{i + 1}" for i in range(dim)]
    seed = meta.get("seed", "none")
    return PointCloud.from_frame(
        frame,
        label=meta.get("shape", ""),
        seed=None if seed == "none" else int(seed),
    )
