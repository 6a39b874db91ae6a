"""
Batch driver: every pipeline stage as a subcommand, plus `run` for the whole experiment.

    python -m gibbs_tda.cli run --preset circles --out output/circles
    python -m gibbs_tda.cli dist a.txt b.txt --p 2
"""

import argparse
import json
import os
import sys
from typing import Dict, List, Optional

from gibbs_tda.utils import pipeline
from gibbs_tda.utils.config import ExperimentConfig, load_config, parse_variants, preset
from gibbs_tda.utils.density_grid import kde_evaluate, load_grid, save_grid
from gibbs_tda.utils.diagrams import diagram_for_degree, from_ppd, load_diagrams, save_diagrams, to_ppd
from gibbs_tda.utils.distances import bottleneck, wasserstein
from gibbs_tda.utils.errors import ParameterError, StageError
from gibbs_tda.utils.gibbs_model import fit, load_model, save_model
from gibbs_tda.utils.inference import count_significant, reports_to_frame
from gibbs_tda.utils.mcmc import (
    McmcConfig,
    burn_in_curve,
    read_replica_set,
    replicate,
    suggest_burn_in,
    write_replica_set,
)
from gibbs_tda.utils.cubical import grid_persistence
from gibbs_tda.utils.point_clouds import load_cloud, sample, save_cloud
from gibbs_tda.utils import studies
from gibbs_tda.utils.textio import read_header, write_table


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--preset', choices=['sphere', 'torus', 'circles'], help='built-in experiment')
    parser.add_argument('--config', help='flat YAML config file')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--alpha', type=float)
    parser.add_argument('--eta', type=float)
    parser.add_argument('--K', type=int)
    parser.add_argument('--n', type=int, help='number of sample points')
    parser.add_argument('--resolution', type=int, help='grid nodes per axis')
    parser.add_argument('--degrees', type=int, nargs='+')
    parser.add_argument('--burn-in', type=int, dest='burn_in')
    parser.add_argument('--burn-in-steps', type=int, dest='burn_in_steps')
    parser.add_argument('--nb', type=int)
    parser.add_argument('--nr', type=int)
    parser.add_argument('--nR', type=int, dest='nR')
    parser.add_argument('--variants', nargs='+', help='n_b,n_r,n_R triples')
    parser.add_argument('--threads', type=int)
    parser.add_argument('--out', help='output path')


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Preset or config file, then CLI flags on top."""
    if getattr(args, 'config', None):
        config = load_config(args.config)
    elif getattr(args, 'preset', None):
        config = preset(args.preset)
    else:
        config = ExperimentConfig()

    overrides: Dict[str, object] = {
        'seed': args.seed,
        'alpha': args.alpha,
        'eta': args.eta,
        'K': args.K,
        'n': args.n,
        'resolution': args.resolution,
        'degrees': args.degrees,
        'burn_in': args.burn_in,
        'burn_in_steps': args.burn_in_steps,
        'threads': args.threads,
        'output_dir': args.out,
    }
    if args.variants:
        overrides['mcmc_variants'] = parse_variants(args.variants)
    elif any(v is not None for v in (args.nb, args.nr, args.nR)):
        n_b, n_r, n_R = config.mcmc_variants[0]
        overrides['mcmc_variants'] = [[args.nb or n_b, args.nr or n_r, args.nR or n_R]]
    return config.with_overrides(**overrides)


def _load_ppd(path: str, degree: int):
    diagram = diagram_for_degree(load_diagrams(path), degree)
    return diagram, to_ppd(diagram, drop_infinity=True)


def _underlying_dim(path: str, requested: Optional[int]) -> int:
    """`requested`, else the ambient dimension recorded in the diagram file."""
    if requested:
        return int(requested)
    meta = read_header(path)
    if 'ambient_dim' in meta:
        return int(meta['ambient_dim'])
    raise ParameterError('d', f"{path} does not record ambient_dim; pass --d")


# ── Subcommands ──────────────────────────────────────────────────────────


def cmd_sample(args) -> None:
    config = build_config(args)
    config.validate()
    cloud = sample(config.sampler_spec())
    path = save_cloud(cloud, args.out or 'cloud.txt', {'config_hash': config.config_hash()})
    print(f"Sampled {cloud.n} points on {cloud.label} -> {path}")


def cmd_kde(args) -> None:
    cloud = load_cloud(args.cloud)
    grid = kde_evaluate(cloud, args.eta, resolution=args.resolution, cutoff=args.cutoff, workers=args.threads)
    path = save_grid(grid, args.out or 'grid.txt')
    print(f"KDE on {'x'.join(str(r) for r in grid.resolution)} grid -> {path}")


def cmd_persist(args) -> None:
    grid = load_grid(args.grid)
    diagrams = grid_persistence(grid)
    path = save_diagrams(diagrams, args.out or 'diagrams.txt', {'ambient_dim': grid.dim})
    for d in diagrams:
        print(f"  - H{d.degree}: {d.n} points")
    print(f"Diagrams -> {path}")


def cmd_fit(args) -> None:
    _, ppd = _load_ppd(args.diagrams, args.degree)
    grid = [float(v) for v in args.delta_star] if args.delta_star else None
    d = _underlying_dim(args.diagrams, args.d)
    model = fit(ppd, K=args.K, d=d, delta_star_grid=grid, starts=args.starts, seed=args.seed)
    path = save_model(model, args.out or f'model_H{args.degree}.yaml', {'degree': args.degree})
    print(f"θ_H={model.theta_H:.6g} θ_V={model.theta_V:.6g} θ={list(model.theta)} δ={model.delta:.6g} -> {path}")


def cmd_replicate(args) -> None:
    _, ppd = _load_ppd(args.diagrams, args.degree)
    model = load_model(args.model)
    config = McmcConfig(burn_in=args.burn_in, n_b=args.nb, n_r=args.nr, n_R=args.nR, seed=args.seed, workers=args.threads)
    replicas = replicate(ppd, model, config)
    path = write_replica_set(replicas, args.out or f'replicas_H{args.degree}', {'degree': args.degree})
    print(f"{len(replicas)} replicas (acceptance {replicas.acceptance_rate:.3f}) -> {path}")


def cmd_burnin(args) -> None:
    _, ppd = _load_ppd(args.diagrams, args.degree)
    model = load_model(args.model)
    curve = burn_in_curve(ppd, model, args.steps, args.chains, args.p, seed=args.seed, workers=args.threads)
    knee = suggest_burn_in(curve)
    path = write_table(args.out or f'burnin_H{args.degree}.txt', {'degree': args.degree, 'knee': knee}, curve)
    print(f"Suggested burn-in: {knee} -> {path}")


def cmd_dist(args) -> None:
    a = diagram_for_degree(load_diagrams(args.a), args.degree)
    b = diagram_for_degree(load_diagrams(args.b), args.degree)
    value = bottleneck(a, b) if args.bottleneck else wasserstein(a, b, args.p)
    print(repr(value))


def cmd_infer(args) -> None:
    diagram, _ = _load_ppd(args.diagrams, args.degree)
    replica_set = read_replica_set(args.replicas)
    replicas = [from_ppd(r) for r in replica_set]
    components, reports = count_significant(diagram, replicas, args.alpha, args.j_max, replica_set.config.label())
    frame = reports_to_frame(reports)
    if args.out:
        frame.to_csv(args.out, index=False)
    print(frame.to_string(index=False))
    print(f"H{args.degree}: {components} feature(s)")


def cmd_run(args) -> None:
    config = build_config(args)
    pipeline.run_pipeline(config, use_db=args.db)


def cmd_study(args) -> None:
    config = build_config(args)
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    _, ppd = _load_ppd(args.diagrams, args.degree)
    model = load_model(args.model) if args.model else None
    cloud = load_cloud(args.cloud) if args.cloud else None
    d = config.underlying_dim or (cloud.ambient_dim if cloud is not None else _underlying_dim(args.diagrams, None))

    ppds = studies.resampled_ppds(
        args.setting, ppd, args.n_sets, seed=config.seed, model=model, cloud=cloud, config=config,
        burn_in=config.burn_in or 0, n_b=config.mcmc_variants[0][0],
    )
    table = studies.parameter_study(ppds, K=config.K, d=d, starts=config.fit_starts, seed=config.seed, workers=config.threads)
    table.to_csv(os.path.join(out, f'estimates_{args.setting}.csv'), index=False)
    studies.estimate_histograms(table, bins=args.bins).to_csv(os.path.join(out, f'histograms_{args.setting}.csv'), index=False)
    print(f"{len(table)} fitted models, {int(table['interactions_dropped'].sum())} without interactions -> {out}")

    if model is not None and args.curve_steps > 0:
        curves = studies.setting_burn_in_curves(
            args.setting, ppd, model, args.n_sets, max_steps=args.curve_steps, p=config.p, seed=config.seed,
            cloud=cloud, config=config, burn_in=config.burn_in or 0, n_b=config.mcmc_variants[0][0],
        )
        curves.to_csv(os.path.join(out, f'burnin_{args.setting}.csv'), index=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='gibbs_tda', description='Gibbs replication of persistence diagrams')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('sample', help='draw a point cloud')
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser('kde', help='Gaussian KDE on a grid')
    p.add_argument('cloud')
    p.add_argument('--eta', type=float, required=True)
    p.add_argument('--resolution', type=int)
    p.add_argument('--cutoff', type=float)
    p.add_argument('--threads', type=int, default=1)
    p.add_argument('--out')
    p.set_defaults(func=cmd_kde)

    p = sub.add_parser('persist', help='superlevel persistence of a grid')
    p.add_argument('grid')
    p.add_argument('--out')
    p.set_defaults(func=cmd_persist)

    p = sub.add_parser('fit', help='maximum-pseudolikelihood Gibbs model')
    p.add_argument('diagrams')
    p.add_argument('--degree', type=int, default=0)
    p.add_argument('--K', type=int, default=3)
    p.add_argument('--d', type=int, help='dimension of the data under the diagram (default: ambient_dim from the diagram file)')
    p.add_argument('--delta-star', nargs='+', dest='delta_star')
    p.add_argument('--starts', type=int, default=5)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out')
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('replicate', help='MCMC replicas of a PPD')
    p.add_argument('diagrams')
    p.add_argument('--model', required=True)
    p.add_argument('--degree', type=int, default=0)
    p.add_argument('--burn-in', type=int, default=10, dest='burn_in')
    p.add_argument('--nb', type=int, default=500)
    p.add_argument('--nr', type=int, default=10)
    p.add_argument('--nR', type=int, default=100, dest='nR')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--threads', type=int, default=1)
    p.add_argument('--out')
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser('burnin', help='distance-to-original curves and knee')
    p.add_argument('diagrams')
    p.add_argument('--model', required=True)
    p.add_argument('--degree', type=int, default=0)
    p.add_argument('--steps', type=int, default=100)
    p.add_argument('--chains', type=int, default=5)
    p.add_argument('--p', type=float, default=2.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--threads', type=int, default=1)
    p.add_argument('--out')
    p.set_defaults(func=cmd_burnin)

    p = sub.add_parser('dist', help='distance between two diagram files')
    p.add_argument('a')
    p.add_argument('b')
    p.add_argument('--degree', type=int, default=0)
    p.add_argument('--p', type=float, default=2.0)
    p.add_argument('--bottleneck', action='store_true')
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser('infer', help='significance of T_1, T_2, ...')
    p.add_argument('diagrams')
    p.add_argument('--replicas', required=True)
    p.add_argument('--degree', type=int, default=0)
    p.add_argument('--alpha', type=float, default=0.05)
    p.add_argument('--j-max', type=int, default=10, dest='j_max')
    p.add_argument('--out')
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser('run', help='full experiment')
    _add_experiment_flags(p)
    p.add_argument('--db', action='store_true', help='also export diagrams and reports to PostgreSQL')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('study', help='parameter stability study')
    _add_experiment_flags(p)
    p.add_argument('diagrams')
    p.add_argument('--degree', type=int, default=0)
    p.add_argument('--setting', choices=studies.SETTINGS, required=True)
    p.add_argument('--model')
    p.add_argument('--cloud')
    p.add_argument('--n-sets', type=int, default=100, dest='n_sets')
    p.add_argument('--bins', type=int, default=20)
    p.add_argument('--curve-steps', type=int, default=0, dest='curve_steps')
    p.set_defaults(func=cmd_study)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as e:
        cause = e.cause if isinstance(e, StageError) else e
        error = {
            'error': str(cause),
            'type': type(cause).__name__,
            'stage': e.stage if isinstance(e, StageError) else args.command,
        }
        print(json.dumps(error), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
