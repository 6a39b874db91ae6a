"""
Gibbs model on projected persistence diagrams.

    H(x̃) = θ_H σ_H² + θ_V σ_V² + Σ_k δ⁻² θ_k L_{δ,k}(x̃)

σ_H² = Σ (x1 − x̄1)², σ_V² = Σ x2², and L_{δ,k} sums the k-th nearest-neighbor
distances that do not exceed δ. The model is fitted by maximizing the
pseudolikelihood Π_i f(x_i | 𝒩_{δ,K}(x_i)); each conditional is normalized
numerically.

Normalizer of one conditional. With g_k(z) = exp(−θ_k δ⁻² ‖z − n_k‖) − 1 on the
disk of radius δ around neighbor n_k (zero outside),

    ∫ exp(−H(z|𝒩)) dz = Z_base + Σ_{S ≠ ∅} ∫_{∩_{k∈S} disk_k} base(z) Π_{k∈S} g_k(z) dz

where base(z) = exp(−θ_H (z1 − x̄1)² − θ_V z2²). Z_base is a tensor Gauss–Legendre
rule on the box x̄1 ± 8/√(2θ_H) × [0, 8/√(2θ_V)]. Each disk-intersection term
is split into the Voronoi cells of its centers and integrated by a polar
Gauss–Legendre rule about each cell's center, with angular panels cut at every
direction where the region's boundary changes form. Quadrature
nodes do not depend on Θ, so they are laid out once per (PPD, δ) and every
evaluation of the pseudolikelihood is a handful of vectorized reductions.
"""

import itertools
import warnings
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from gibbs_tda.utils.diagrams import Ppd
from gibbs_tda.utils.errors import (
    ConvergenceWarning,
    DegenerateDeltaWarning,
    NeighborCountWarning,
    NonNormalizableModelError,
    ParameterError,
    PreconditionError,
)

DEFAULT_K = 3
BASE_NODES = 256
BOX_HALF_WIDTH = 8.0 / np.sqrt(2.0)  # in units of 1/√θ
ANGULAR_PANELS = 4
ANGULAR_NODES = 8
RADIAL_NODES = 12
ANGLE_TOLERANCE = 1e-12
TWO_PI = 2.0 * np.pi
FLOOR = (np.array([0.0, -1.0]), 0.0)  # −z2 ≤ 0
DEGENERATE_DELTA_SCALE = 1e-12


@dataclass(frozen=True)
class FitDiagnostics:
    pseudolikelihood: float = float("nan")
    evaluations: int = 0
    converged: bool = False
    interactions_dropped: bool = False
    gradient_norm: float = float("nan")
    starts: int = 0


@dataclass(frozen=True)
class GibbsModel:
    theta_H: float
    theta_V: float
    theta: Tuple[float, ...]
    delta: float
    xbar1: float
    K: int = DEFAULT_K
    delta_star: float = float("nan")
    underlying_dim: int = 2
    diagnostics: FitDiagnostics = field(default_factory=FitDiagnostics)

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        if self.K < 1:
            raise ParameterError("K", f"maximum cluster order must be >= 1, got {self.K}")
        if len(theta) != self.K:
            raise ParameterError("theta", f"expected {self.K} interaction weights, got {len(theta)}")
        if not self.delta > 0:
            raise ParameterError("delta", f"delta must be > 0, got {self.delta}")
        object.__setattr__(self, "theta", theta)

    def check_normalizable(self) -> None:
        if not (self.theta_H > 0 and self.theta_V > 0):
            raise NonNormalizableModelError(
                f"theta_H and theta_V must be > 0, got {self.theta_H}, {self.theta_V}"
            )

    def with_parameters(self, theta_H: float, theta_V: float, theta: Sequence[float]) -> "GibbsModel":
        return replace(self, theta_H=float(theta_H), theta_V=float(theta_V), theta=tuple(theta))


@dataclass(frozen=True)
class NeighborhoodView:
    """The K nearest neighbors of `point` (nondecreasing distance, ties by index)."""

    point: np.ndarray
    neighbors: np.ndarray
    distances: np.ndarray
    delta: float

    def within(self) -> np.ndarray:
        """𝒩_{δ,K}(x): the neighbors at distance ≤ δ, nearest first."""
        return self.neighbors[self.distances <= self.delta]


# ── Spread and cluster statistics ────────────────────────────────────────


def spread_stats(ppd: Ppd) -> Tuple[float, float, float]:
    """(σ_H², σ_V², x̄1) of the PPD."""
    if ppd.n == 0:
        raise PreconditionError("spread statistics need at least one point")
    x1, x2 = ppd.points[:, 0], ppd.points[:, 1]
    xbar1 = float(x1.mean())
    return float(np.sum((x1 - xbar1) ** 2)), float(np.sum(x2 ** 2)), xbar1


def neighbor_table(points: np.ndarray, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """Indices and distances of each point's min(K, N−1) nearest neighbors."""
    n = len(points)
    k = min(K, max(n - 1, 0))
    if k == 0:
        return np.empty((n, 0), dtype=np.int64), np.empty((n, 0))
    dist = cdist(points, points)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(dist, order, axis=1)


def neighborhood(points: np.ndarray, index: int, K: int, delta: float) -> NeighborhoodView:
    """NeighborhoodView of points[index] within the point set."""
    dist = np.linalg.norm(points - points[index], axis=1)
    dist[index] = np.inf
    order = np.argsort(dist, kind="stable")[:min(K, len(points) - 1)]
    return NeighborhoodView(points[index].copy(), points[order].copy(), dist[order], delta)


def neighborhoods(ppd: Ppd, K: int, delta: float) -> List[NeighborhoodView]:
    idx, dist = neighbor_table(ppd.points, K)
    return [NeighborhoodView(ppd.points[i], ppd.points[idx[i]], dist[i], delta) for i in range(ppd.n)]


def cluster_term(ppd: Ppd, k: int, delta: float) -> float:
    """L_{δ,k}: Σ_x ‖x − x^{nn(k)}‖ · 1{‖x − x^{nn(k)}‖ ≤ δ}."""
    if k < 1:
        raise ParameterError("k", f"cluster order must be >= 1, got {k}")
    if k >= ppd.n:
        warnings.warn(f"no {k}-th neighbor in a PPD of {ppd.n} points; L_{{δ,{k}}} = 0", NeighborCountWarning)
        return 0.0
    _, dist = neighbor_table(ppd.points, k)
    kth = dist[:, k - 1]
    return float(np.sum(np.where(kth <= delta, kth, 0.0)))


def hamiltonian(ppd: Ppd, model: GibbsModel) -> float:
    """θ_H σ_H² + θ_V σ_V² + Σ_k δ⁻² θ_k L_{δ,k}, with x̄1 taken from `ppd`."""
    sigma_h, sigma_v, _ = spread_stats(ppd)
    energy = model.theta_H * sigma_h + model.theta_V * sigma_v
    for k, theta_k in enumerate(model.theta, start=1):
        if theta_k != 0.0 and k < ppd.n:
            energy += theta_k * cluster_term(ppd, k, model.delta) / model.delta ** 2
    return float(energy)


def delta_rule(ppd: Ppd, delta_star: float, k: int, d: int) -> float:
    """δ = δ* N^{−α_{k,d}} · max(range of x1, range of x2); α_{0,d} = 1/d, α_{k,d} = k/((k+1)d)."""
    n = ppd.n
    if n < 2:
        raise PreconditionError(f"the delta rule needs N >= 2, got {n}")
    if d < 1:
        raise ParameterError("d", f"underlying dimension must be >= 1, got {d}")
    if k < 0:
        raise ParameterError("k", f"cluster order must be >= 0, got {k}")
    if not delta_star > 0:
        raise ParameterError("delta_star", f"delta_star must be > 0, got {delta_star}")

    alpha = 1.0 / d if k == 0 else k / ((k + 1) * d)
    spread = float(np.max(np.ptp(ppd.points, axis=0)))
    delta = delta_star / n ** alpha * spread
    if delta <= 0:
        delta = DEGENERATE_DELTA_SCALE * max(1.0, float(np.max(np.abs(ppd.points))))
        warnings.warn(f"all PPD points coincide; delta floored at {delta:.3g}", DegenerateDeltaWarning)
    return float(delta)


def default_delta_star_grid(n: int) -> List[float]:
    grid = [n ** -0.5] + list(np.geomspace(1.0 / n, 1.0, 8))
    return sorted(set(float(g) for g in grid))


def simulate_interaction_free(theta_H: float, theta_V: float, xbar1: float, n: int, seed: int) -> Ppd:
    """Exact draw from the θ_k = 0 model: x1 ~ N(x̄1, 1/(2θ_H)), x2 ~ |N(0, 1/(2θ_V))|."""
    if not (theta_H > 0 and theta_V > 0):
        raise NonNormalizableModelError("theta_H and theta_V must be > 0")
    rng = np.random.default_rng(seed)
    x1 = rng.normal(xbar1, np.sqrt(0.5 / theta_H), n)
    x2 = np.abs(rng.normal(0.0, np.sqrt(0.5 / theta_V), n))
    x2 = np.where(x2 > 0, x2, np.finfo(float).tiny)
    return Ppd(np.column_stack([x1, x2]))


# ── Quadrature ───────────────────────────────────────────────────────────


@lru_cache(maxsize=None)
def _standard_integrals(nodes: int) -> Tuple[float, float]:
    """GL values of ∫_{−c}^{c} e^{−u²} du and ∫_0^{c} e^{−v²} dv, c = 8/√2."""
    t, w = leggauss(nodes)
    u = BOX_HALF_WIDTH * t
    full = BOX_HALF_WIDTH * float(np.sum(w * np.exp(-u * u)))
    v = BOX_HALF_WIDTH * (t + 1.0) / 2.0
    half = BOX_HALF_WIDTH / 2.0 * float(np.sum(w * np.exp(-v * v)))
    return full, half


@lru_cache(maxsize=None)
def _gauss(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(nodes)


def _direction(v: np.ndarray) -> float:
    return float(np.arctan2(v[1], v[0]) % TWO_PI)


def _circle_crossings(a: np.ndarray, b: np.ndarray, radius: float) -> List[np.ndarray]:
    d = float(np.linalg.norm(b - a))
    if d == 0.0 or d > 2.0 * radius:
        return []
    h = np.sqrt(max(radius * radius - d * d / 4.0, 0.0))
    perp = np.array([a[1] - b[1], b[0] - a[0]]) / d
    mid = (a + b) / 2.0
    return [mid + h * perp, mid - h * perp]


def _line_crossings(center: np.ndarray, radius: float, normal: np.ndarray, offset: float) -> List[np.ndarray]:
    """Points of the circle on the line normal·z = offset."""
    gap = offset - float(normal @ center)
    if abs(gap) > radius:
        return []
    foot = center + gap * normal
    h = np.sqrt(max(radius * radius - gap * gap, 0.0))
    along = np.array([-normal[1], normal[0]])
    return [foot + h * along, foot - h * along]


def _line_meet(n1: np.ndarray, h1: float, n2: np.ndarray, h2: float) -> List[np.ndarray]:
    det = n1[0] * n2[1] - n1[1] * n2[0]
    if abs(det) < 1e-15:
        return []
    return [np.array([(n2[1] * h1 - n1[1] * h2) / det, (n1[0] * h2 - n2[0] * h1) / det])]


def _breakpoints(pole: np.ndarray, disks: List[np.ndarray], lines, delta: float) -> Tuple[List[float], List[float]]:
    """Directions from `pole` where the ray interval changes form.

    Kinks point at boundary crossings (the active constraint switches).
    Tangents point along rays grazing a disk the pole lies outside of; the
    interval length has a square-root end there.
    """
    points: List[np.ndarray] = []
    for a, b in itertools.combinations(disks, 2):
        points += _circle_crossings(a, b, delta)
    for m in disks:
        for normal, offset in lines:
            points += _line_crossings(m, delta, normal, offset)
    for (n1, h1), (n2, h2) in itertools.combinations(lines, 2):
        points += _line_meet(n1, h1, n2, h2)
    kinks = [_direction(p - pole) for p in points if np.linalg.norm(p - pole) > ANGLE_TOLERANCE * delta]

    tangents = []
    for m in disks:
        d = float(np.linalg.norm(m - pole))
        if d > 0 and d >= delta * (1.0 - ANGLE_TOLERANCE):
            half = float(np.arcsin(min(delta / d, 1.0)))
            toward = _direction(m - pole)
            tangents += [(toward + half) % TWO_PI, (toward - half) % TWO_PI]
    return kinks, tangents


def _angular_rule(kinks: Sequence[float], tangents: Sequence[float], panels: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """GL rule on [0, 2π) with panel edges at every breakpoint.

    Panels ending at a tangent use φ = a + (b − a)s², which turns the
    square-root end into a smooth one.
    """
    t, w = _gauss(nodes)
    s = (t + 1.0) / 2.0
    edges = np.sort(np.concatenate([np.arange(panels) * TWO_PI / panels, np.asarray(kinks, dtype=float),
                                    np.asarray(tangents, dtype=float)]))
    edges = edges[np.concatenate([[True], np.diff(edges) > ANGLE_TOLERANCE])]
    edges = np.append(edges[edges < TWO_PI - ANGLE_TOLERANCE], TWO_PI)
    tangents = np.asarray(tangents, dtype=float)

    def graded(angle: float) -> bool:
        if len(tangents) == 0:
            return False
        gap = np.abs(np.mod(angle - tangents + np.pi, TWO_PI) - np.pi)
        return bool(gap.min() < ANGLE_TOLERANCE)

    phis, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        left, right = graded(a), graded(b)
        if left and right:
            pieces = [(a, (a + b) / 2.0, True, False), ((a + b) / 2.0, b, False, True)]
        else:
            pieces = [(a, b, left, right)]
        for lo, hi, at_lo, at_hi in pieces:
            width = hi - lo
            if at_lo:
                phis.append(lo + width * s * s)
                weights.append(w * width * s)
            elif at_hi:
                phis.append(hi - width * s * s)
                weights.append(w * width * s)
            else:
                phis.append(lo + width * s)
                weights.append(w * width / 2.0)
    return np.concatenate(phis), np.concatenate(weights)


def _ray_intervals(pole: np.ndarray, u: np.ndarray, disks: List[np.ndarray], lines, delta: float):
    """[lo, hi] of r ≥ 0 with pole + r·u inside every disk and half-plane."""
    lo = np.zeros(len(u))
    hi = np.full(len(u), np.inf)
    for m in disks:
        diff = pole - m
        b = u @ diff
        disc = b * b - (diff @ diff - delta * delta)
        root = np.sqrt(np.maximum(disc, 0.0))
        lo = np.maximum(lo, -b - root)
        hi = np.where(disc >= 0, np.minimum(hi, -b + root), -np.inf)
    for normal, offset in lines:
        slack = offset - float(normal @ pole)
        along = u @ normal
        bound = np.where(along > 0, slack / np.where(along > 0, along, 1.0), np.inf)
        hi = np.minimum(hi, bound)
    return lo, hi


def _intersection_nodes(
    centers: np.ndarray,
    delta: float,
    panels: int,
    angular: Tuple[np.ndarray, np.ndarray],
    radial: Tuple[np.ndarray, np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    """GL nodes and weights on (∩ disks of `centers`) ∩ {z2 ≥ 0}.

    The region is split into the Voronoi cells of the centers and each cell is
    integrated in polar coordinates about its own center, so the cone
    ‖z − n_k‖ only ever sits at a pole. Coincident centers share one cell.
    """
    t, w_t = radial
    disks = [np.asarray(c, dtype=float) for c in centers]
    all_nodes, all_weights = [], []
    for j, pole in enumerate(disks):
        if any(np.array_equal(pole, disks[m]) for m in range(j)):
            continue
        lines = [FLOOR]
        for other in disks:
            gap = other - pole
            dist = float(np.linalg.norm(gap))
            if dist > 0:
                normal = gap / dist
                lines.append((normal, float(normal @ (pole + other)) / 2.0))

        kinks, tangents = _breakpoints(pole, disks, lines, delta)
        phi, w_phi = _angular_rule(kinks, tangents, panels, len(angular[0]))
        u = np.column_stack([np.cos(phi), np.sin(phi)])
        lo, hi = _ray_intervals(pole, u, disks, lines, delta)
        length = np.maximum(hi - lo, 0.0)

        r = lo[:, None] + (t[None, :] + 1.0) / 2.0 * length[:, None]
        weights = w_phi[:, None] * w_t[None, :] * (length[:, None] / 2.0) * r
        nodes = pole[None, None, :] + r[:, :, None] * u[:, None, :]
        keep = (weights > 0).ravel()
        all_nodes.append(nodes.reshape(-1, 2)[keep])
        all_weights.append(weights.ravel()[keep])

    if not all_nodes:
        return np.empty((0, 2)), np.empty(0)
    return np.concatenate(all_nodes), np.concatenate(all_weights)


class PseudolikelihoodProblem:
    """Everything about (PPD, δ, K, x̄1) the pseudolikelihood needs, laid out once.

    `points[i]` has neighbor centers `centers[i]` (𝒩_{δ,K}, nearest first). The
    observed interaction lengths ℓ_k(x_i) are the neighbor distances.
    """

    def __init__(
        self,
        points: np.ndarray,
        centers: Sequence[np.ndarray],
        delta: float,
        K: int,
        xbar1: float,
        base_nodes: int = BASE_NODES,
        angular_panels: int = ANGULAR_PANELS,
        angular_nodes: int = ANGULAR_NODES,
        radial_nodes: int = RADIAL_NODES,
    ):
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        self.delta = float(delta)
        self.K = int(K)
        self.xbar1 = float(xbar1)
        self.n = len(self.points)
        self.base_full, self.base_half = _standard_integrals(base_nodes)

        self.a = (self.points[:, 0] - self.xbar1) ** 2
        self.b = self.points[:, 1] ** 2
        self.ell = np.zeros((self.n, self.K))
        for i, nb in enumerate(centers):
            nb = np.asarray(nb, dtype=float).reshape(-1, 2)[: self.K]
            lengths = np.linalg.norm(nb - self.points[i], axis=1)
            self.ell[i, : len(nb)] = np.where(lengths <= self.delta, lengths, 0.0)

        angular = _gauss(angular_nodes)
        radial = _gauss(radial_nodes)
        owner, weights, nodes, members, dists = [], [], [], [], []
        for i, nb in enumerate(centers):
            nb = np.asarray(nb, dtype=float).reshape(-1, 2)[: self.K]
            for size in range(1, len(nb) + 1):
                for subset in itertools.combinations(range(len(nb)), size):
                    z, w = _intersection_nodes(nb[list(subset)], self.delta, angular_panels, angular, radial)
                    if len(w) == 0:
                        continue
                    mask = np.zeros((len(w), self.K), dtype=bool)
                    mask[:, list(subset)] = True
                    r = np.zeros((len(w), self.K))
                    for k in subset:
                        r[:, k] = np.linalg.norm(z - nb[k], axis=1)
                    owner.append(np.full(len(w), i))
                    weights.append(w)
                    nodes.append(z)
                    members.append(mask)
                    dists.append(r)

        if owner:
            self.q_owner = np.concatenate(owner)
            self.q_weight = np.concatenate(weights)
            q_nodes = np.concatenate(nodes)
            self.q_member = np.concatenate(members)
            self.q_dist = np.concatenate(dists)
        else:
            self.q_owner = np.empty(0, dtype=np.int64)
            self.q_weight = np.empty(0)
            q_nodes = np.empty((0, 2))
            self.q_member = np.empty((0, self.K), dtype=bool)
            self.q_dist = np.empty((0, self.K))
        self.q_a = (q_nodes[:, 0] - self.xbar1) ** 2
        self.q_b = q_nodes[:, 1] ** 2

    @classmethod
    def from_ppd(cls, ppd: Ppd, delta: float, K: int, xbar1: Optional[float] = None, **quadrature) -> "PseudolikelihoodProblem":
        if xbar1 is None:
            xbar1 = float(ppd.points[:, 0].mean())
        views = neighborhoods(ppd, K, delta)
        return cls(ppd.points, [v.within() for v in views], delta, K, xbar1, **quadrature)

    def interaction_totals(self) -> np.ndarray:
        """L_{δ,k} for k = 1…K."""
        return self.ell.sum(axis=0)

    def _pieces(self, theta_H: float, theta_V: float, theta: np.ndarray):
        base = np.exp(-theta_H * self.q_a - theta_V * self.q_b)
        expo = np.exp(-self.q_dist * (theta[None, :] / self.delta ** 2))
        g = np.where(self.q_member, expo - 1.0, 1.0)
        return base, expo, g

    def _base_normalizer(self, theta_H: float, theta_V: float) -> float:
        return self.base_full * self.base_half / np.sqrt(theta_H * theta_V)

    def normalizers(self, theta_H: float, theta_V: float, theta: Sequence[float]) -> np.ndarray:
        """∫ exp(−H(z|𝒩_i)) dz for every point."""
        if not (theta_H > 0 and theta_V > 0):
            raise NonNormalizableModelError(f"theta_H and theta_V must be > 0, got {theta_H}, {theta_V}")
        theta = np.asarray(theta, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            base, _, g = self._pieces(theta_H, theta_V, theta)
            corrections = np.bincount(self.q_owner, weights=self.q_weight * base * g.prod(axis=1), minlength=self.n)
        return self._base_normalizer(theta_H, theta_V) + corrections

    def energies(self, theta_H: float, theta_V: float, theta: Sequence[float]) -> np.ndarray:
        """H(x_i | 𝒩_i) for every point."""
        theta = np.asarray(theta, dtype=float)
        return theta_H * self.a + theta_V * self.b + self.ell @ theta / self.delta ** 2

    def log_densities(self, theta_H: float, theta_V: float, theta: Sequence[float]) -> np.ndarray:
        z = self.normalizers(theta_H, theta_V, theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_z = np.where((z > 0) & np.isfinite(z), np.log(np.where(z > 0, z, 1.0)), np.inf)
        return -self.energies(theta_H, theta_V, theta) - log_z

    def value(self, theta_H: float, theta_V: float, theta: Sequence[float]) -> float:
        """log pseudolikelihood; −inf when a normalizer overflows."""
        total = float(np.sum(self.log_densities(theta_H, theta_V, theta)))
        return total if np.isfinite(total) else -np.inf

    def gradient(self, theta_H: float, theta_V: float, theta: Sequence[float]) -> np.ndarray:
        """∂/∂(θ_H, θ_V, θ_1…θ_K) of `value`: Σ_i (E_i[∂H/∂θ] − ∂H/∂θ(x_i))."""
        theta = np.asarray(theta, dtype=float)
        z = self.normalizers(theta_H, theta_V, theta)
        with np.errstate(over="ignore", invalid="ignore"):
            base, expo, g = self._pieces(theta_H, theta_V, theta)
            weight = self.q_weight * base
            prod = g.prod(axis=1)
            z_base = self._base_normalizer(theta_H, theta_V)

            moment_h = z_base / (2.0 * theta_H) + np.bincount(self.q_owner, weights=weight * prod * self.q_a, minlength=self.n)
            moment_v = z_base / (2.0 * theta_V) + np.bincount(self.q_owner, weights=weight * prod * self.q_b, minlength=self.n)
            grad = [np.sum(moment_h / z - self.a), np.sum(moment_v / z - self.b)]

            for k in range(self.K):
                others = np.delete(g, k, axis=1).prod(axis=1)
                integrand = np.where(self.q_member[:, k], weight * self.q_dist[:, k] * expo[:, k] * others, 0.0)
                moment_k = np.bincount(self.q_owner, weights=integrand, minlength=self.n) / self.delta ** 2
                grad.append(np.sum(moment_k / z - self.ell[:, k] / self.delta ** 2))
        return np.array(grad, dtype=float)


# ── Public evaluation API ────────────────────────────────────────────────


def conditional_log_density(x: Sequence[float], nbhd: NeighborhoodView, model: GibbsModel) -> float:
    """log f_Θ(x | 𝒩_{δ,K}) with x̄1 frozen at the model's training mean."""
    model.check_normalizable()
    x = np.asarray(x, dtype=float).reshape(2)
    if not x[1] > 0:
        raise ParameterError("x", f"x2 must be > 0, got {x[1]}")
    centers = np.asarray(nbhd.within(), dtype=float).reshape(-1, 2)[: model.K]
    problem = PseudolikelihoodProblem(x[None, :], [centers], model.delta, model.K, model.xbar1)
    return float(problem.log_densities(model.theta_H, model.theta_V, model.theta)[0])


def log_pseudolikelihood(ppd: Ppd, model: GibbsModel) -> float:
    if ppd.n == 0:
        raise PreconditionError("the pseudolikelihood needs at least one point")
    model.check_normalizable()
    problem = PseudolikelihoodProblem.from_ppd(ppd, model.delta, model.K, model.xbar1)
    return problem.value(model.theta_H, model.theta_V, model.theta)


def pseudolikelihood_gradient(ppd: Ppd, model: GibbsModel) -> np.ndarray:
    model.check_normalizable()
    problem = PseudolikelihoodProblem.from_ppd(ppd, model.delta, model.K, model.xbar1)
    return problem.gradient(model.theta_H, model.theta_V, model.theta)


# ── Fitting ──────────────────────────────────────────────────────────────


def _moment_start(ppd: Ppd) -> Tuple[float, float]:
    sigma_h, sigma_v, _ = spread_stats(ppd)
    floor = np.finfo(float).eps * max(1.0, float(np.max(np.abs(ppd.points))) ** 2)
    return ppd.n / (2.0 * max(sigma_h, floor)), ppd.n / (2.0 * max(sigma_v, floor))


def _maximize(problem: PseudolikelihoodProblem, start_H: float, start_V: float, interacting: bool,
              starts: int, max_evaluations: int, tolerance: float, rng: np.random.Generator) -> Dict[str, object]:
    K = problem.K
    dim = 2 + (K if interacting else 0)

    def unpack(params):
        theta = params[2:] if interacting else np.zeros(K)
        return np.exp(params[0]), np.exp(params[1]), theta

    def objective(params):
        theta_H, theta_V, theta = unpack(params)
        if not (np.isfinite(theta_H) and np.isfinite(theta_V)) or theta_H <= 0 or theta_V <= 0:
            return np.inf
        value = problem.value(theta_H, theta_V, theta)
        return -value if np.isfinite(value) else np.inf

    origin = np.zeros(dim)
    origin[0], origin[1] = np.log(start_H), np.log(start_V)
    steps = np.full(dim, problem.delta)
    steps[:2] = 0.5

    best = None
    evaluations = 0
    for j in range(starts):
        x0 = origin.copy() if j == 0 else origin + rng.normal(0.0, 1.0, dim) * steps
        simplex = np.vstack([x0, x0 + np.diag(steps)])
        f0 = objective(x0)
        fatol = tolerance * max(1.0, abs(f0)) if np.isfinite(f0) else tolerance
        result = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "maxfev": max_evaluations, "xatol": tolerance, "fatol": fatol},
        )
        evaluations += int(result.nfev)
        if best is None or result.fun < best.fun:
            best = result

    theta_H, theta_V, theta = unpack(best.x)
    return {
        "theta_H": float(theta_H),
        "theta_V": float(theta_V),
        "theta": tuple(float(t) for t in theta),
        "value": -float(best.fun),
        "evaluations": evaluations,
        "converged": bool(best.success),
    }


def fit(
    ppd: Ppd,
    K: int = DEFAULT_K,
    d: int = 2,
    delta_star_grid: Optional[Sequence[float]] = None,
    starts: int = 5,
    max_evaluations: int = 2000,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> GibbsModel:
    """Maximum-pseudolikelihood Θ over a grid of δ*; the best (δ*, Θ) wins.

    θ_H and θ_V are optimized on the log scale, so they stay positive. When every
    L_{δ,k} vanishes the interaction weights are unidentifiable; they are fixed
    at 0 and `diagnostics.interactions_dropped` is set.
    """
    if K < 1:
        raise ParameterError("K", f"maximum cluster order must be >= 1, got {K}")
    if ppd.n < K + 2:
        raise PreconditionError(f"fitting K={K} needs N >= {K + 2} points, got {ppd.n}")
    grid = default_delta_star_grid(ppd.n) if delta_star_grid is None else [float(g) for g in delta_star_grid]
    if not grid:
        raise ParameterError("delta_star_grid", "at least one delta_star is required")

    xbar1 = float(ppd.points[:, 0].mean())
    start_H, start_V = _moment_start(ppd)
    rng = np.random.default_rng(seed)

    best = None
    for delta_star in grid:
        delta = delta_rule(ppd, delta_star, K, d)
        problem = PseudolikelihoodProblem.from_ppd(ppd, delta, K, xbar1)
        interacting = bool(np.any(problem.interaction_totals() > 0))
        found = _maximize(problem, start_H, start_V, interacting, starts, max_evaluations, tolerance, rng)
        found.update(delta=delta, delta_star=delta_star, problem=problem, interacting=interacting)
        if best is None or found["value"] > best["value"]:
            best = found

    if not best["converged"]:
        warnings.warn(
            f"Nelder-Mead did not converge within {max_evaluations} evaluations; returning the best point found",
            ConvergenceWarning,
        )

    gradient = best["problem"].gradient(best["theta_H"], best["theta_V"], best["theta"])
    diagnostics = FitDiagnostics(
        pseudolikelihood=best["value"],
        evaluations=best["evaluations"],
        converged=best["converged"],
        interactions_dropped=not best["interacting"],
        gradient_norm=float(np.linalg.norm(gradient[: 2 + (K if best["interacting"] else 0)])),
        starts=starts,
    )
    return GibbsModel(
        theta_H=best["theta_H"],
        theta_V=best["theta_V"],
        theta=best["theta"],
        delta=best["delta"],
        xbar1=xbar1,
        K=K,
        delta_star=best["delta_star"],
        underlying_dim=d,
        diagnostics=diagnostics,
    )


# ── Serialization ────────────────────────────────────────────────────────


def model_to_dict(model: GibbsModel) -> Dict[str, object]:
    data = asdict(model)
    data["theta"] = list(model.theta)
    return data


def model_from_dict(data: Dict[str, object]) -> GibbsModel:
    data = dict(data)
    diagnostics = FitDiagnostics(**(data.pop("diagnostics", None) or {}))
    return GibbsModel(diagnostics=diagnostics, **data)


def save_model(model: GibbsModel, path: str, extra: Optional[Dict[str, object]] = None) -> str:
    document = {"model": model_to_dict(model)}
    if extra:
        document["provenance"] = dict(extra)
    with open(path, "w") as handle:
        yaml.safe_dump(document, handle, sort_keys=False)
    return path


def load_model(path: str) -> GibbsModel:
    with open(path) as handle:
        document = yaml.safe_load(handle)
    return model_from_dict(document["model"])
