"""
Metropolis–Hastings replication of a PPD under a fitted Gibbs model.

One sweep visits the points in order. For point x it draws x* from the
bivariate Gaussian with the current PPD's mean and covariance, truncated to
x2 > 0, and accepts with

    ρ = min{1, f(x* | 𝒩(x)) q(x | x̃*) / (f(x | 𝒩(x)) q(x* | x̃)))}

where 𝒩(x) is the neighborhood of the current point in the current PPD and
x̃* is the PPD with x replaced by x*. Both conditionals share 𝒩(x), so their
normalizer cancels and only the energy difference is needed.

Replication: burn-in from the original PPD, then n_R restarts from the
post-burn-in PPD, each running n_r blocks of n_b sweeps and keeping the last
state of every block.
"""

import hashlib
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from scipy.special import log_ndtr

from gibbs_tda.utils.diagrams import Ppd, from_ppd, load_ppd, save_ppd
from gibbs_tda.utils.distances import bottleneck, wasserstein
from gibbs_tda.utils.errors import (
    AcceptanceGuardWarning,
    CovarianceFloorWarning,
    ParameterError,
    PreconditionError,
)
from gibbs_tda.utils.gibbs_model import GibbsModel, model_to_dict

COVARIANCE_FLOOR = 1e-12
KNEE_FRACTION = 0.95
KNEE_WINDOW = 5
PLATEAU_TAIL = 0.1


@dataclass(frozen=True)
class McmcConfig:
    burn_in: int = 10
    n_b: int = 500
    n_r: int = 10
    n_R: int = 100
    seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        for name in ("n_b", "n_r", "n_R"):
            if getattr(self, name) < 1:
                raise ParameterError(name, f"{name} must be >= 1, got {getattr(self, name)}")
        if self.burn_in < 0:
            raise ParameterError("burn_in", f"burn_in must be >= 0, got {self.burn_in}")

    @property
    def M(self) -> int:
        return self.n_r * self.n_R

    def label(self) -> str:
        return f"({self.n_b},{self.n_r},{self.n_R})"


class ProposalDistribution:
    """Bivariate Gaussian restricted to R × R₊."""

    def __init__(self, mean: Sequence[float], covariance: np.ndarray):
        self.mean = np.asarray(mean, dtype=float).reshape(2)
        cov = np.asarray(covariance, dtype=float).reshape(2, 2)
        a, c = float(cov[0, 0]), float(cov[1, 1])
        b = 0.5 * float(cov[0, 1] + cov[1, 0])

        trace = a + c
        floor = COVARIANCE_FLOOR * trace if trace > 0 else COVARIANCE_FLOOR
        smallest = 0.5 * trace - np.hypot(0.5 * (a - c), b)
        if smallest < floor:
            warnings.warn(f"proposal covariance eigenvalues floored at {floor:.3g}", CovarianceFloorWarning)
            values, vectors = np.linalg.eigh(np.array([[a, b], [b, c]]))
            fixed = (vectors * np.maximum(values, floor)) @ vectors.T
            a, b, c = float(fixed[0, 0]), 0.5 * float(fixed[0, 1] + fixed[1, 0]), float(fixed[1, 1])

        det = a * c - b * b
        self.covariance = np.array([[a, b], [b, c]])
        l00 = np.sqrt(a)
        l10 = b / l00
        self._chol = np.array([[l00, 0.0], [l10, np.sqrt(max(c - l10 * l10, 0.0))]])
        self._precision = np.array([[c, -b], [-b, a]]) / det
        self._log_norm = -np.log(2.0 * np.pi) - 0.5 * np.log(det) - log_ndtr(self.mean[1] / np.sqrt(c))

    @classmethod
    def from_points(cls, points: np.ndarray) -> "ProposalDistribution":
        if len(points) < 2:
            raise PreconditionError("the proposal covariance needs at least 2 points")
        return cls(points.mean(axis=0), np.cov(points, rowvar=False))

    @classmethod
    def from_sums(cls, s1: np.ndarray, s2: np.ndarray, n: int) -> "ProposalDistribution":
        mean = s1 / n
        cov = (s2 - n * np.outer(mean, mean)) / (n - 1)
        return cls(mean, cov)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        while True:
            y = self.mean + self._chol @ rng.standard_normal(2)
            if y[1] > 0:
                return y

    def log_density(self, y: Sequence[float]) -> float:
        d0 = float(y[0]) - self.mean[0]
        d1 = float(y[1]) - self.mean[1]
        p = self._precision
        return float(self._log_norm - 0.5 * (p[0, 0] * d0 * d0 + 2.0 * p[0, 1] * d0 * d1 + p[1, 1] * d1 * d1))


def propose(ppd: Ppd, rng: np.random.Generator) -> Tuple[np.ndarray, Callable[[Sequence[float]], float]]:
    """Draw x* ~ q(·|x̃) and return it with the log-density evaluator of q(·|x̃)."""
    proposal = ProposalDistribution.from_points(ppd.points)
    return proposal.sample(rng), proposal.log_density


def conditional_energy(z: np.ndarray, centers: np.ndarray, model: GibbsModel) -> float:
    """H(z | 𝒩) with x̄1 frozen at the model's value."""
    energy = model.theta_H * (z[0] - model.xbar1) ** 2 + model.theta_V * z[1] ** 2
    if len(centers):
        dist = np.sqrt(np.sum((centers - z) ** 2, axis=1))
        ell = np.where(dist <= model.delta, dist, 0.0)
        energy += float(np.dot(model.theta[: len(centers)], ell)) / model.delta ** 2
    return float(energy)


def _neighbor_centers(points: np.ndarray, index: int, K: int, delta: float) -> np.ndarray:
    dist = np.sqrt(np.sum((points - points[index]) ** 2, axis=1))
    dist[index] = np.inf
    order = np.argsort(dist, kind="stable")[:K]
    return points[order[dist[order] <= delta]]


def _log_acceptance(x, x_star, centers, model, q_current, q_star) -> float:
    numerator = -conditional_energy(x_star, centers, model) + q_star.log_density(x)
    denominator = -conditional_energy(x, centers, model) + q_current.log_density(x_star)
    if not np.isfinite(denominator):
        warnings.warn("zero density in the acceptance denominator; accepting", AcceptanceGuardWarning)
        return 0.0
    if np.isnan(numerator):
        return -np.inf
    return min(0.0, numerator - denominator)


def acceptance_prob(x_current, x_star, ppd_current: Ppd, ppd_star: Ppd, model: GibbsModel) -> float:
    """ρ for replacing x_current (a point of ppd_current) by x_star, giving ppd_star."""
    x = np.asarray(x_current, dtype=float)
    y = np.asarray(x_star, dtype=float)
    if not (x[1] > 0 and y[1] > 0):
        raise ParameterError("x2", "both points must lie in R × R₊")
    matches = np.nonzero(np.all(ppd_current.points == x, axis=1))[0]
    if len(matches) == 0:
        raise PreconditionError("x_current is not a point of ppd_current")

    centers = _neighbor_centers(ppd_current.points, int(matches[0]), model.K, model.delta)
    q_current = ProposalDistribution.from_points(ppd_current.points)
    q_star = ProposalDistribution.from_points(ppd_star.points)
    return float(np.exp(_log_acceptance(x, y, centers, model, q_current, q_star)))


class ChainState:
    """Mutable PPD points with running first and second moments."""

    def __init__(self, points: np.ndarray):
        self.points = np.array(points, dtype=float)
        self.n = len(self.points)
        self.accepted = 0
        self.proposed = 0
        self.refresh()

    def refresh(self) -> None:
        self.s1 = self.points.sum(axis=0)
        self.s2 = self.points.T @ self.points

    def proposal(self) -> ProposalDistribution:
        return ProposalDistribution.from_sums(self.s1, self.s2, self.n)

    def swapped_sums(self, index: int, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = self.points[index]
        return self.s1 - x + y, self.s2 - np.outer(x, x) + np.outer(y, y)

    def sweep(self, model: GibbsModel, rng: np.random.Generator, frozen: Optional[ProposalDistribution] = None) -> None:
        self.refresh()
        # q(·|x̃) only changes on acceptance, when it becomes q(·|x̃*)
        q_current = frozen or self.proposal()
        for k in range(self.n):
            y = q_current.sample(rng)
            s1, s2 = self.swapped_sums(k, y)
            q_star = frozen or ProposalDistribution.from_sums(s1, s2, self.n)
            centers = _neighbor_centers(self.points, k, model.K, model.delta)

            rho = np.exp(_log_acceptance(self.points[k], y, centers, model, q_current, q_star))
            self.proposed += 1
            if rng.uniform() < rho:
                self.points[k] = y
                self.s1, self.s2 = s1, s2
                self.accepted += 1
                q_current = q_star

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def mcmc_sweep(ppd: Ppd, model: GibbsModel, rng: np.random.Generator,
               proposal: Optional[ProposalDistribution] = None) -> Ppd:
    """One pass of Algorithm-1 updates over every point. `proposal` freezes q."""
    if ppd.n < 2:
        raise PreconditionError("an MCMC sweep needs at least 2 points")
    state = ChainState(ppd.points)
    state.sweep(model, rng, proposal)
    return ppd.replace_points(state.points)


def run_chain(ppd: Ppd, model: GibbsModel, sweeps: int, seed) -> Ppd:
    rng = np.random.default_rng(seed)
    state = ChainState(ppd.points)
    for _ in range(sweeps):
        state.sweep(model, rng)
    return ppd.replace_points(state.points)


# ── Replication ──────────────────────────────────────────────────────────


@dataclass
class ReplicaSet:
    """M replicated PPDs in (restart, block) order with their provenance."""

    replicas: List[Ppd]
    provenance: pd.DataFrame
    config: McmcConfig
    acceptance_rate: float = float("nan")
    model_hash: str = ""

    def __len__(self) -> int:
        return len(self.replicas)

    def __iter__(self) -> Iterator[Ppd]:
        return iter(self.replicas)

    def __getitem__(self, index: int) -> Ppd:
        return self.replicas[index]


def _run_restart(points: np.ndarray, model: GibbsModel, n_b: int, n_r: int, seed: np.random.SeedSequence):
    rng = np.random.default_rng(seed)
    state = ChainState(points)
    blocks = []
    for _ in range(n_r):
        for _ in range(n_b):
            state.sweep(model, rng)
        blocks.append(state.points.copy())
    return blocks, state.accepted, state.proposed


def model_hash(model: GibbsModel) -> str:
    canonical = json.dumps(model_to_dict(model), sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def replicate(ppd: Ppd, model: GibbsModel, config: McmcConfig) -> ReplicaSet:
    """Burn in from `ppd`, then n_R restarts of n_r blocks × n_b sweeps; M = n_r·n_R replicas."""
    config.validate()
    if ppd.n < 2:
        raise PreconditionError("replication needs a PPD with at least 2 points")

    root = np.random.SeedSequence(config.seed)
    burn_seed, *restart_seeds = root.spawn(config.n_R + 1)

    burn = ChainState(ppd.points)
    burn_rng = np.random.default_rng(burn_seed)
    for _ in range(config.burn_in):
        burn.sweep(model, burn_rng)
    start = burn.points.copy()

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_restart, start, model, config.n_b, config.n_r, s) for s in restart_seeds]
            results = [f.result() for f in futures]
    else:
        results = [_run_restart(start, model, config.n_b, config.n_r, s) for s in restart_seeds]

    replicas, rows = [], []
    accepted, proposed = burn.accepted, burn.proposed
    for chain, (blocks, acc, prop) in enumerate(results):
        accepted += acc
        proposed += prop
        for block, points in enumerate(blocks):
            rows.append({
                "replica": len(replicas),
                "chain": chain,
                "block": block,
                "seed": config.seed,
                "spawn_key": chain + 1,
            })
            replicas.append(ppd.replace_points(points))

    return ReplicaSet(
        replicas=replicas,
        provenance=pd.DataFrame(rows, columns=["replica", "chain", "block", "seed", "spawn_key"]),
        config=config,
        acceptance_rate=accepted / proposed if proposed else float("nan"),
        model_hash=model_hash(model),
    )


def write_replica_set(replicas: ReplicaSet, directory: str, manifest: Optional[Dict[str, object]] = None) -> str:
    """One PPD file per replica plus `manifest.yaml` and `provenance.csv`."""
    os.makedirs(directory, exist_ok=True)
    files = []
    for i, replica in enumerate(replicas):
        name = f"replica_{i:04d}.txt"
        row = replicas.provenance.iloc[i]
        save_ppd(replica, os.path.join(directory, name), {"chain": int(row["chain"]), "block": int(row["block"])})
        files.append(name)

    document = {
        "config": asdict(replicas.config),
        "M": len(replicas),
        "acceptance_rate": float(replicas.acceptance_rate),
        "model_hash": replicas.model_hash,
        "files": files,
    }
    document.update(manifest or {})
    with open(os.path.join(directory, "manifest.yaml"), "w") as handle:
        yaml.safe_dump(document, handle, sort_keys=False)
    replicas.provenance.to_csv(os.path.join(directory, "provenance.csv"), index=False)
    return directory


def read_replica_set(directory: str) -> ReplicaSet:
    with open(os.path.join(directory, "manifest.yaml")) as handle:
        document = yaml.safe_load(handle)
    replicas = [load_ppd(os.path.join(directory, name)) for name in document["files"]]
    return ReplicaSet(
        replicas=replicas,
        provenance=pd.read_csv(os.path.join(directory, "provenance.csv")),
        config=McmcConfig(**document["config"]),
        acceptance_rate=float(document.get("acceptance_rate", float("nan"))),
        model_hash=document.get("model_hash", ""),
    )


# ── Burn-in diagnostics ──────────────────────────────────────────────────


def _distance_chain(ppd: Ppd, model: GibbsModel, max_steps: int, p: float, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    reference = from_ppd(ppd)
    state = ChainState(ppd.points)
    rows = np.zeros((max_steps + 1, 2))
    for step in range(1, max_steps + 1):
        state.sweep(model, rng)
        current = from_ppd(ppd.replace_points(state.points))
        rows[step] = bottleneck(reference, current), wasserstein(reference, current, p)
    return rows


def burn_in_curve(
    ppd: Ppd,
    model: GibbsModel,
    max_steps: int = 100,
    n_chains: int = 5,
    p: float = 2.0,
    seed: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    """Mean bottleneck and W_p distance to the starting diagram after each sweep."""
    if max_steps < 1 or n_chains < 1:
        raise ParameterError("max_steps", "max_steps and n_chains must be >= 1")
    seeds = np.random.SeedSequence(seed).spawn(n_chains)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_distance_chain, ppd, model, max_steps, p, s) for s in seeds]
            chains = [f.result() for f in futures]
    else:
        chains = [_distance_chain(ppd, model, max_steps, p, s) for s in seeds]

    mean = np.mean(np.stack(chains), axis=0)
    return pd.DataFrame({
        "step": np.arange(max_steps + 1),
        "bottleneck": mean[:, 0],
        "wasserstein": mean[:, 1],
    })


def suggest_burn_in(curve, column: str = "bottleneck") -> int:
    """First step whose smoothed distance reaches 95% of the tail plateau."""
    if isinstance(curve, pd.DataFrame):
        steps = curve["step"].to_numpy()
        values = curve[column].to_numpy(dtype=float)
    else:
        values = np.asarray(curve, dtype=float)
        steps = np.arange(len(values))
    if len(values) == 0:
        raise PreconditionError("cannot pick a burn-in from an empty curve")

    tail = max(1, int(np.ceil(PLATEAU_TAIL * len(values))))
    plateau = float(values[-tail:].mean())
    smoothed = pd.Series(values).rolling(KNEE_WINDOW, min_periods=1).mean().to_numpy()
    reached = np.nonzero(smoothed >= KNEE_FRACTION * plateau)[0]
    return int(steps[reached[0]]) if len(reached) else int(steps[-1])
