"""
Stability studies of the fitted parameters.

The real PPD is perturbed in one of three ways and Θ is re-estimated on each
perturbed copy:

    simulated  MCMC replicas from the fitted model (burn-in plus one block)
    diagram    bootstrap of the PPD's points
    data       bootstrap of the point cloud, pushed through KDE and persistence again

The estimates summarize as histograms; burn-in curves started from the
perturbed PPDs show how quickly the chain forgets its starting diagram.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from gibbs_tda.utils.config import ExperimentConfig
from gibbs_tda.utils.cubical import grid_persistence
from gibbs_tda.utils.density_grid import kde_evaluate
from gibbs_tda.utils.diagrams import Ppd, diagram_for_degree, resample_diagram, to_ppd
from gibbs_tda.utils.errors import ParameterError, PreconditionError
from gibbs_tda.utils.gibbs_model import GibbsModel, fit
from gibbs_tda.utils.mcmc import burn_in_curve, run_chain
from gibbs_tda.utils.point_clouds import PointCloud, resample_data

SETTINGS = ("simulated", "diagram", "data")


def _child_seeds(seed: int, count: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def resampled_ppds(
    setting: str,
    ppd: Ppd,
    n_sets: int,
    seed: int = 0,
    model: Optional[GibbsModel] = None,
    cloud: Optional[PointCloud] = None,
    config: Optional[ExperimentConfig] = None,
    burn_in: int = 10,
    n_b: int = 500,
) -> List[Ppd]:
    """`n_sets` perturbed copies of `ppd` under the given setting."""
    if setting not in SETTINGS:
        raise ParameterError("setting", f"unknown setting '{setting}', expected one of {SETTINGS}")
    if n_sets < 1:
        raise ParameterError("n_sets", f"n_sets must be >= 1, got {n_sets}")
    seeds = _child_seeds(seed, n_sets)

    if setting == "simulated":
        if model is None:
            raise PreconditionError("the simulated setting needs a fitted model")
        return [run_chain(ppd, model, burn_in + n_b, s) for s in seeds]

    if setting == "diagram":
        return [resample_diagram(ppd, s) for s in seeds]

    if cloud is None or config is None:
        raise PreconditionError("the data setting needs the point cloud and the experiment config")
    out = []
    for s in seeds:
        grid = kde_evaluate(
            resample_data(cloud, s),
            config.eta,
            resolution=config.resolution,
            padding=config.padding,
            cutoff=config.kde_cutoff,
            workers=config.threads,
        )
        diagram = diagram_for_degree(grid_persistence(grid), ppd.source_degree)
        out.append(to_ppd(diagram, drop_infinity=True))
    return out


def _fit_row(index: int, ppd: Ppd, K: int, d: int, delta_star_grid, starts: int, seed: int) -> Optional[dict]:
    if ppd.n < K + 2:
        return None
    model = fit(ppd, K=K, d=d, delta_star_grid=delta_star_grid, starts=starts, seed=seed)
    row = {
        "set": index,
        "N": ppd.n,
        "delta": model.delta,
        "delta_star": model.delta_star,
        "theta_H": model.theta_H,
        "theta_V": model.theta_V,
    }
    row.update({f"theta_{k}": t for k, t in enumerate(model.theta, start=1)})
    row.update({
        "pseudolikelihood": model.diagnostics.pseudolikelihood,
        "interactions_dropped": model.diagnostics.interactions_dropped,
        "converged": model.diagnostics.converged,
    })
    return row


def parameter_study(
    ppds: Sequence[Ppd],
    K: int = 3,
    d: int = 2,
    delta_star_grid: Optional[Sequence[float]] = None,
    starts: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    """One fitted model per PPD; PPDs too small to fit are skipped."""
    seeds = _child_seeds(seed, len(ppds))
    args = [(i, p, K, d, delta_star_grid, starts, s) for i, (p, s) in enumerate(zip(ppds, seeds))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_fit_row, *zip(*args)))
    else:
        rows = [_fit_row(*a) for a in args]

    columns = ["set", "N", "delta", "delta_star", "theta_H", "theta_V"]
    columns += [f"theta_{k}" for k in range(1, K + 1)]
    columns += ["pseudolikelihood", "interactions_dropped", "converged"]
    return pd.DataFrame([r for r in rows if r is not None], columns=columns)


def estimate_histograms(table: pd.DataFrame, bins: int = 20) -> pd.DataFrame:
    """Density histograms of every fitted parameter, over studies whose interactions were identifiable."""
    kept = table[~table["interactions_dropped"].astype(bool)] if "interactions_dropped" in table else table
    parameters = ["theta_H", "theta_V"] + sorted(c for c in table.columns if c.startswith("theta_") and c[6:].isdigit())
    frames = []
    for name in parameters:
        values = kept[name].to_numpy(dtype=float)
        values = values[np.isfinite(values)]
        if len(values) == 0:
            continue
        density, edges = np.histogram(values, bins=bins, density=True)
        frames.append(pd.DataFrame({
            "parameter": name,
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "density": density,
        }))
    if not frames:
        return pd.DataFrame(columns=["parameter", "bin_left", "bin_right", "density"])
    return pd.concat(frames, ignore_index=True)


def setting_burn_in_curves(
    setting: str,
    ppd: Ppd,
    model: GibbsModel,
    n_sets: int,
    max_steps: int = 50,
    p: float = 2.0,
    seed: int = 0,
    **resample_kwargs,
) -> pd.DataFrame:
    """Mean distance curves of chains started from each perturbed PPD, measured against that PPD."""
    starts = resampled_ppds(setting, ppd, n_sets, seed=seed, model=model, **resample_kwargs)
    curves = []
    for start, s in zip(starts, _child_seeds(seed + 1, n_sets)):
        if start.n < 2:
            continue
        curves.append(burn_in_curve(start, model, max_steps, n_chains=1, p=p, seed=s))
    if not curves:
        raise PreconditionError(f"no perturbed PPD in setting '{setting}' has at least 2 points")

    mean = pd.concat(curves).groupby("step", sort=True).mean().reset_index()
    mean.insert(0, "setting", setting)
    return mean
