"""
End-to-end experiment: sample → KDE → persistence → fit → burn-in →
replicate → infer, writing every artifact under one directory.

Each stage is a plain function of its serialized inputs, so the CLI
subcommands and the Mage blocks call the same code. Artifacts carry the
config hash and seed in their header and contain no timestamps, so a rerun
with the same configuration rewrites identical files.
"""

import os
from contextlib import contextmanager
from typing import Dict, List, Optional, Tuple

import pandas as pd
import yaml

from gibbs_tda.utils.config import ExperimentConfig
from gibbs_tda.utils.cubical import grid_persistence
from gibbs_tda.utils.density_grid import ScalarGrid, kde_evaluate, save_grid
from gibbs_tda.utils.diagrams import (
    PersistenceDiagram,
    Ppd,
    diagram_for_degree,
    diagrams_to_frame,
    from_ppd,
    save_diagrams,
    save_ppd,
    to_ppd,
)
from gibbs_tda.utils.errors import StageError
from gibbs_tda.utils.gibbs_model import GibbsModel, fit, save_model
from gibbs_tda.utils.inference import count_significant, reports_to_frame
from gibbs_tda.utils.mcmc import ReplicaSet, burn_in_curve, replicate, suggest_burn_in, write_replica_set
from gibbs_tda.utils.point_clouds import PointCloud, sample, save_cloud
from gibbs_tda.utils.storage import export_frame
from gibbs_tda.utils.textio import write_table

SUMMARY_COLUMNS = ["homology", "config", "N", "significant", "components", "p_first_insignificant"]


@contextmanager
def stage(name: str):
    print(f"[{name}]")
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def provenance(config: ExperimentConfig, **extra) -> Dict[str, object]:
    header = {"config_hash": config.config_hash(), "seed": config.seed}
    header.update(extra)
    return header


# ── Stages ───────────────────────────────────────────────────────────────


def sample_cloud(config: ExperimentConfig) -> PointCloud:
    cloud = sample(config.sampler_spec())
    print(f"  - {cloud.n} points on {cloud.label}")
    return cloud


def estimate_density(cloud: PointCloud, config: ExperimentConfig) -> ScalarGrid:
    grid = kde_evaluate(
        cloud,
        config.eta,
        resolution=config.resolution,
        padding=config.padding,
        cutoff=config.kde_cutoff,
        workers=config.threads,
    )
    print(f"  - grid {'x'.join(str(r) for r in grid.resolution)}, max density {grid.values.max():.4g}")
    return grid


def persistence_diagrams(grid: ScalarGrid) -> List[PersistenceDiagram]:
    diagrams = grid_persistence(grid)
    for diagram in diagrams:
        print(f"  - H{diagram.degree}: {diagram.n} points ({int(diagram.essential.sum())} essential)")
    return diagrams


def fit_model(ppd: Ppd, config: ExperimentConfig, ambient_dim: int) -> GibbsModel:
    d = config.underlying_dim or ambient_dim
    model = fit(ppd, K=config.K, d=d, delta_star_grid=config.delta_star_grid, starts=config.fit_starts, seed=config.seed)
    theta = ", ".join(f"{t:.4g}" for t in model.theta)
    print(f"  - H{ppd.source_degree}: θ_H={model.theta_H:.4g} θ_V={model.theta_V:.4g} θ=({theta}) δ={model.delta:.4g}")
    if model.diagnostics.interactions_dropped:
        print(f"  - H{ppd.source_degree}: no neighbor pairs within δ, interaction weights dropped")
    return model


def choose_burn_in(ppd: Ppd, model: GibbsModel, config: ExperimentConfig) -> Tuple[int, Optional[pd.DataFrame]]:
    curve = None
    if config.burn_in_steps > 0:
        curve = burn_in_curve(
            ppd, model, config.burn_in_steps, config.burn_in_chains, config.p,
            seed=config.seed, workers=config.threads,
        )
    if config.burn_in is not None:
        burn_in = int(config.burn_in)
    elif curve is not None:
        burn_in = suggest_burn_in(curve)
    else:
        burn_in = 0
    print(f"  - H{ppd.source_degree}: burn-in {burn_in}" + ("" if curve is None else f" (knee {suggest_burn_in(curve)})"))
    return burn_in, curve


def replicate_variants(ppd: Ppd, model: GibbsModel, config: ExperimentConfig, burn_in: int) -> List[ReplicaSet]:
    sets = []
    for mcmc in config.mcmc_configs(burn_in):
        replicas = replicate(ppd, model, mcmc)
        print(f"  - H{ppd.source_degree} {mcmc.label()}: {len(replicas)} replicas, acceptance {replicas.acceptance_rate:.3f}")
        sets.append(replicas)
    return sets


def infer_signal(diagram: PersistenceDiagram, replica_sets: List[ReplicaSet], config: ExperimentConfig):
    frames, summary = [], []
    for replicas in replica_sets:
        label = replicas.config.label()
        replica_diagrams = [from_ppd(r) for r in replicas]
        components, reports = count_significant(diagram, replica_diagrams, config.alpha, config.j_max, label)
        frames.append(reports_to_frame(reports))
        last = reports[-1] if reports else None
        summary.append({
            "homology": f"H{diagram.degree}",
            "config": label,
            "N": int(len(diagram.lifetimes())),
            "significant": sum(r.significant for r in reports),
            "components": components,
            "p_first_insignificant": last.p_value if last is not None and not last.significant else float("nan"),
        })
        print(f"  - H{diagram.degree} {label}: {components} feature(s)")
    reports_frame = pd.concat(frames, ignore_index=True) if frames else reports_to_frame([])
    return reports_frame, pd.DataFrame(summary, columns=SUMMARY_COLUMNS)


# ── Orchestration ────────────────────────────────────────────────────────


def run_pipeline(config: ExperimentConfig, use_db: bool = False) -> str:
    """Run every stage and return the experiment directory."""
    config.validate()
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    run_id = config.config_hash()

    print(f"Experiment {run_id}: {config.shape}, n={config.n}, η={config.eta}, degrees={config.degrees}")
    print("=" * 50)
    with open(os.path.join(out, "config.yaml"), "w") as handle:
        yaml.safe_dump({"config_hash": run_id, **config.to_dict()}, handle, sort_keys=False)

    with stage("sample"):
        cloud = sample_cloud(config)
        save_cloud(cloud, os.path.join(out, "cloud.txt"), provenance(config))

    with stage("kde"):
        grid = estimate_density(cloud, config)
        save_grid(grid, os.path.join(out, "grid.txt"), provenance(config))

    with stage("persist"):
        diagrams = persistence_diagrams(grid)
        save_diagrams(diagrams, os.path.join(out, "diagrams.txt"), provenance(config, ambient_dim=cloud.ambient_dim))

    all_reports, all_summary = [], []
    for degree in config.degrees:
        diagram = diagram_for_degree(diagrams, degree)
        ppd = to_ppd(diagram, drop_infinity=True)
        save_ppd(ppd, os.path.join(out, f"ppd_H{degree}.txt"), provenance(config))
        if ppd.n < config.K + 2:
            print(f"  - H{degree}: only {ppd.n} finite points, skipped")
            continue

        with stage(f"fit H{degree}"):
            model = fit_model(ppd, config, cloud.ambient_dim)
            save_model(model, os.path.join(out, f"model_H{degree}.yaml"), provenance(config, degree=degree))

        with stage(f"burnin H{degree}"):
            burn_in, curve = choose_burn_in(ppd, model, config)
            if curve is not None:
                write_table(os.path.join(out, f"burnin_H{degree}.txt"), provenance(config, degree=degree), curve)

        with stage(f"replicate H{degree}"):
            replica_sets = replicate_variants(ppd, model, config, burn_in)
            for replicas in replica_sets:
                label = "_".join(str(v) for v in (replicas.config.n_b, replicas.config.n_r, replicas.config.n_R))
                write_replica_set(
                    replicas,
                    os.path.join(out, f"replicas_H{degree}_{label}"),
                    {"config_hash": run_id, "degree": degree, "burn_in": burn_in},
                )

        with stage(f"infer H{degree}"):
            reports, summary = infer_signal(diagram, replica_sets, config)
            all_reports.append(reports)
            all_summary.append(summary)

    reports = pd.concat(all_reports, ignore_index=True) if all_reports else reports_to_frame([])
    summary = pd.concat(all_summary, ignore_index=True) if all_summary else pd.DataFrame(columns=SUMMARY_COLUMNS)
    write_table(os.path.join(out, "reports.txt"), provenance(config), reports.astype({"significant": int, "essential_added_back": int}))
    reports.to_csv(os.path.join(out, "reports.csv"), index=False)
    summary.to_csv(os.path.join(out, "summary.csv"), index=False)

    if use_db:
        with stage("export"):
            export_frame(diagrams_to_frame(diagrams), "persistence_diagrams", output_dir=out, run_id=run_id)
            export_frame(reports, "signal_reports", output_dir=out, run_id=run_id)

    print("=" * 50)
    print("SUMMARY")
    print("=" * 50)
    for row in summary.itertuples(index=False):
        print(f"  {row.homology} {row.config}: {row.significant} significant, {row.components} feature(s)")
    print(f"Artifacts: {out}")
    return out


# ── Block hand-off tables ────────────────────────────────────────────────


def models_to_frame(models: Dict[int, GibbsModel]) -> pd.DataFrame:
    rows = []
    for degree, model in sorted(models.items()):
        row = {
            "degree": degree,
            "theta_H": model.theta_H,
            "theta_V": model.theta_V,
            "delta": model.delta,
            "delta_star": model.delta_star,
            "xbar1": model.xbar1,
            "K": model.K,
            "underlying_dim": model.underlying_dim,
        }
        row.update({f"theta_{k}": t for k, t in enumerate(model.theta, start=1)})
        row.update({
            "pseudolikelihood": model.diagnostics.pseudolikelihood,
            "interactions_dropped": model.diagnostics.interactions_dropped,
            "converged": model.diagnostics.converged,
        })
        rows.append(row)
    return pd.DataFrame(rows)


def models_from_frame(df: pd.DataFrame) -> Dict[int, GibbsModel]:
    models = {}
    for row in df.to_dict("records"):
        K = int(row["K"])
        models[int(row["degree"])] = GibbsModel(
            theta_H=float(row["theta_H"]),
            theta_V=float(row["theta_V"]),
            theta=tuple(float(row[f"theta_{k}"]) for k in range(1, K + 1)),
            delta=float(row["delta"]),
            xbar1=float(row["xbar1"]),
            K=K,
            delta_star=float(row["delta_star"]),
            underlying_dim=int(row["underlying_dim"]),
        )
    return models


def replicas_to_frame(degree: int, replicas: ReplicaSet) -> pd.DataFrame:
    frames = []
    for i, replica in enumerate(replicas):
        frame = replica.to_frame()
        frame.insert(0, "replica", i)
        frames.append(frame)
    out = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["replica", "x1", "x2"])
    out.insert(0, "config", replicas.config.label())
    out.insert(0, "degree", degree)
    return out


def replicas_from_frame(df: pd.DataFrame, degree: int, config_label: str) -> List[PersistenceDiagram]:
    rows = df[(df["degree"] == degree) & (df["config"] == config_label)]
    return [
        from_ppd(Ppd(group[["x1", "x2"]].to_numpy(dtype=float), degree))
        for _, group in rows.groupby("replica", sort=True)
    ]
