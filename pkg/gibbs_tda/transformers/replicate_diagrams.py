"""
Replicate each modeled diagram with the block Metropolis-Hastings scheme,
once per (n_b, n_r, n_R) variant.

Pipeline variables:
    mcmc_variants: list of [n_b, n_r, n_R] (default [[500, 20, 50]])
    seed, threads
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.diagrams import diagram_for_degree, diagrams_from_frame, to_ppd
from gibbs_tda.utils.pipeline import models_from_frame, replicas_to_frame, replicate_variants

if 'transformer' not in dir():
    from mage_ai.data_preparation.decorators import transformer
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@transformer
def transform(diagrams: pd.DataFrame, models: pd.DataFrame, burn_in: pd.DataFrame, *args, **kwargs) -> pd.DataFrame:
    """
    Returns:
        DataFrame (degree, config, replica, x1, x2), one row per replica PPD point
    """
    config = from_variables(kwargs)
    parsed = diagrams_from_frame(diagrams)
    fitted = models_from_frame(models)

    print(f"Replicating {len(fitted)} diagram(s) over variants {config.mcmc_variants}")
    print("-" * 50)

    frames = []
    for degree, model in fitted.items():
        ppd = to_ppd(diagram_for_degree(parsed, degree), drop_infinity=True)
        rows = burn_in[burn_in['degree'] == degree]
        steps = int(rows['burn_in'].iloc[0]) if len(rows) else int(config.burn_in or 0)
        for replicas in replicate_variants(ppd, model, config, steps):
            frames.append(replicas_to_frame(degree, replicas))

    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["degree", "config", "replica", "x1", "x2"]
    )

    print("-" * 50)
    print(f"Replica points: {len(df)}")
    return df


@test
def test_output(output, *args) -> None:
    """Validate the replicas."""
    assert output is not None, 'Output is undefined'
    assert len(output) > 0, 'No replicas generated'
    assert (output['x2'] > 0).all(), 'Replica points must keep x2 > 0'
    sizes = output.groupby(['degree', 'config', 'replica']).size()
    assert sizes.groupby(level=[0, 1]).nunique().eq(1).all(), 'Replicas of one diagram must all have the same size'
