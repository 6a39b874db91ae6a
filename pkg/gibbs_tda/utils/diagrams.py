"""
Persistence diagrams, projected persistence diagrams (PPDs) and the maps between them.

A diagram point is a (death d, birth b) pair with d < b (superlevel filtrations
are born high and die low). The PPD of a diagram is (x1, x2) = (d, b − d).

Both types can carry the exact partner coordinate of the other representation
(`births` on a Ppd, `lifetimes` on a diagram), set by `to_ppd` / `from_ppd`.
That keeps the round trips bit-exact, since d + (b − d) is not always b in
floating point. Points created by sampling or MCMC carry no partner.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gibbs_tda.utils.errors import ParameterError, PreconditionError
from gibbs_tda.utils.textio import parse_floats, parse_ints, read_table, write_table

DIAGRAM_COLUMNS = ["degree", "death", "birth", "essential"]


@dataclass(frozen=True)
class PersistenceDiagram:
    degree: int
    points: np.ndarray
    essential: np.ndarray = None
    lifetimes_exact: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        essential = (
            np.zeros(len(points), dtype=bool)
            if self.essential is None
            else np.asarray(self.essential, dtype=bool).reshape(-1)
        )
        if len(essential) != len(points):
            raise ParameterError("essential", "one essential flag per point is required")
        if self.degree < 0:
            raise ParameterError("degree", f"homology degree must be >= 0, got {self.degree}")
        finite = points[~essential]
        if np.any(finite[:, 0] >= finite[:, 1]):
            raise ParameterError("points", "every finite point needs death < birth")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "essential", essential)

    @property
    def n(self) -> int:
        return len(self.points)

    def finite_points(self) -> np.ndarray:
        return self.points[~self.essential]

    def essential_points(self) -> np.ndarray:
        return self.points[self.essential]

    def lifetimes(self) -> np.ndarray:
        """|b − d| of the finite points."""
        if self.lifetimes_exact is not None:
            return np.abs(np.asarray(self.lifetimes_exact)[~self.essential])
        finite = self.finite_points()
        return np.abs(finite[:, 1] - finite[:, 0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "degree": np.full(self.n, self.degree, dtype=int),
            "death": self.points[:, 0],
            "birth": self.points[:, 1],
            "essential": self.essential.astype(int),
        })


@dataclass(frozen=True)
class Ppd:
    """Projected persistence diagram: points in R × R₊."""

    points: np.ndarray
    source_degree: int = 0
    dropped_essential: Optional[Tuple[float, float]] = None
    births: Optional[np.ndarray] = field(default=None, repr=False)
    essential: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if np.any(points[:, 1] <= 0):
            raise ParameterError("points", "every PPD point needs x2 > 0")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return len(self.points)

    def replace_points(self, points: np.ndarray) -> "Ppd":
        """Same provenance, new coordinates (drops exact partners)."""
        return Ppd(points, self.source_degree, self.dropped_essential)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x1": self.points[:, 0], "x2": self.points[:, 1]})


def to_ppd(diagram: PersistenceDiagram, drop_infinity: bool = True) -> Ppd:
    """(d, b) → (d, b − d). With `drop_infinity` the essential point is set aside."""
    points = diagram.points
    essential = diagram.essential
    dropped = None

    if drop_infinity and essential.any():
        kept = ~essential
        first = diagram.essential_points()[0]
        dropped = (float(first[0]), float(first[1]))
        points = points[kept]
        lifetimes = None if diagram.lifetimes_exact is None else np.asarray(diagram.lifetimes_exact)[kept]
        essential_out = None
    else:
        lifetimes = diagram.lifetimes_exact
        essential_out = essential.copy() if essential.any() else None

    x2 = points[:, 1] - points[:, 0] if lifetimes is None else np.asarray(lifetimes, dtype=float)
    ppd_points = np.column_stack([points[:, 0], x2])
    return Ppd(ppd_points, diagram.degree, dropped, births=points[:, 1].copy(), essential=essential_out)


def from_ppd(ppd: Ppd) -> PersistenceDiagram:
    """(x1, x2) → (x1, x1 + x2), re-attaching a dropped essential point."""
    x1, x2 = ppd.points[:, 0], ppd.points[:, 1]
    births = x1 + x2 if ppd.births is None else np.asarray(ppd.births, dtype=float)
    points = np.column_stack([x1, births])
    lifetimes = x2.copy()
    essential = np.zeros(len(points), dtype=bool) if ppd.essential is None else ppd.essential.copy()

    if ppd.dropped_essential is not None:
        d, b = ppd.dropped_essential
        points = np.vstack([np.array([[d, b]]), points])
        lifetimes = np.concatenate([[b - d], lifetimes])
        essential = np.concatenate([[True], essential])
    return PersistenceDiagram(ppd.source_degree, points, essential, lifetimes_exact=lifetimes)


def resample_diagram(ppd: Ppd, seed: int) -> Ppd:
    """N points drawn with replacement from the PPD."""
    if ppd.n == 0:
        raise PreconditionError("cannot resample an empty PPD")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, ppd.n, size=ppd.n)
    births = None if ppd.births is None else ppd.births[idx]
    return Ppd(ppd.points[idx], ppd.source_degree, ppd.dropped_essential, births=births)


def diagrams_to_frame(diagrams: Sequence[PersistenceDiagram]) -> pd.DataFrame:
    frames = [d.to_frame() for d in diagrams]
    if not frames:
        return pd.DataFrame(columns=DIAGRAM_COLUMNS)
    return pd.concat(frames, ignore_index=True)[DIAGRAM_COLUMNS]


def diagrams_from_frame(df: pd.DataFrame, degrees: Optional[Sequence[int]] = None) -> List[PersistenceDiagram]:
    """Split a (degree, death, birth, essential) table into one diagram per degree."""
    if degrees is None:
        degrees = range(int(df["degree"].max()) + 1) if len(df) else []
    diagrams = []
    for k in degrees:
        rows = df[df["degree"] == k]
        diagrams.append(PersistenceDiagram(
            int(k),
            rows[["death", "birth"]].to_numpy(dtype=float),
            rows["essential"].to_numpy(dtype=int).astype(bool),
        ))
    return diagrams


def diagram_for_degree(diagrams: Sequence[PersistenceDiagram], degree: int) -> PersistenceDiagram:
    for diagram in diagrams:
        if diagram.degree == degree:
            return diagram
    return PersistenceDiagram(degree, np.empty((0, 2)))


def save_diagrams(diagrams: Sequence[PersistenceDiagram], path: str, extra: Optional[Dict[str, object]] = None) -> str:
    header = {"degrees": [d.degree for d in diagrams]}
    header.update(extra or {})
    return write_table(path, header, diagrams_to_frame(diagrams))


def load_diagrams(path: str) -> List[PersistenceDiagram]:
    """Read a diagram file; also accepts externally computed diagrams in this layout."""
    meta, frame = read_table(path, columns=DIAGRAM_COLUMNS)
    degrees = parse_ints(meta["degrees"]) if "degrees" in meta else None
    return diagrams_from_frame(frame, degrees)


def save_ppd(ppd: Ppd, path: str, extra: Optional[Dict[str, object]] = None) -> str:
    header: Dict[str, object] = {"source_degree": ppd.source_degree, "N": ppd.n}
    if ppd.dropped_essential is not None:
        header["essential"] = ppd.dropped_essential
    header.update(extra or {})
    return write_table(path, header, ppd.to_frame())


def load_ppd(path: str) -> Ppd:
    meta, frame = read_table(path, columns=["x1", "x2"])
    dropped = None
    if "essential" in meta:
        d, b = parse_floats(meta["essential"])
        dropped = (float(d), float(b))
    return Ppd(frame[["x1", "x2"]].to_numpy(dtype=float), int(meta.get("source_degree", 0)), dropped)
