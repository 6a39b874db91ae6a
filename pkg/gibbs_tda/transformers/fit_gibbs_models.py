"""
Fit a Gibbs model to the projected diagram of every configured homology degree.

Pipeline variables:
    degrees: homology degrees to model (default [0, 1])
    K: number of interaction weights (default 3)
    underlying_dim: dimension d used by the δ rule (default: ambient dimension)
    delta_star_grid: candidate δ* values (default: N^-1/2 plus 8 log-spaced values in [1/N, 1])
    fit_starts: multistart count for Nelder-Mead
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.diagrams import diagram_for_degree, diagrams_from_frame, to_ppd
from gibbs_tda.utils.pipeline import fit_model, models_to_frame

if 'transformer' not in dir():
    from mage_ai.data_preparation.decorators import transformer
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@transformer
def transform(data: pd.DataFrame, *args, **kwargs) -> pd.DataFrame:
    """
    Returns:
        DataFrame with one fitted model per degree (θ_H, θ_V, θ_1..θ_K, δ, δ*, x̄1, diagnostics)
    """
    config = from_variables(kwargs)
    diagrams = diagrams_from_frame(data)

    print(f"Fitting Gibbs models (K={config.K}) for degrees {config.degrees}")
    print("-" * 50)

    models = {}
    for degree in config.degrees:
        ppd = to_ppd(diagram_for_degree(diagrams, degree), drop_infinity=True)
        if ppd.n < config.K + 2:
            print(f"  - H{degree}: only {ppd.n} finite points, skipped")
            continue
        models[degree] = fit_model(ppd, config, config.ambient_dim())

    df = models_to_frame(models)

    print("-" * 50)
    print(f"Models fitted: {len(df)}")
    return df


@test
def test_output(output, *args) -> None:
    """Validate the fitted models."""
    assert output is not None, 'Output is undefined'
    assert len(output) > 0, 'No model fitted -- every diagram has fewer than K + 2 finite points'
    assert (output['theta_H'] > 0).all() and (output['theta_V'] > 0).all(), 'θ_H and θ_V must be positive'
    assert (output['delta'] > 0).all(), 'δ must be positive'
