"""
Burn-in diagnostic: distance from the real PPD as the chain runs.

Takes the diagrams and the fitted models. When `burn_in` is set it is used
as is, otherwise the knee of the mean bottleneck curve is taken.

Pipeline variables:
    burn_in, burn_in_steps, burn_in_chains, p, threads
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.diagrams import diagram_for_degree, diagrams_from_frame, to_ppd
from gibbs_tda.utils.pipeline import choose_burn_in, models_from_frame

if 'transformer' not in dir():
    from mage_ai.data_preparation.decorators import transformer
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@transformer
def transform(diagrams: pd.DataFrame, models: pd.DataFrame, *args, **kwargs) -> pd.DataFrame:
    """
    Returns:
        DataFrame (degree, step, bottleneck, wasserstein, burn_in); curve-less
        degrees contribute a single row with step 0
    """
    config = from_variables(kwargs)
    parsed = diagrams_from_frame(diagrams)
    fitted = models_from_frame(models)

    print(f"Burn-in diagnostic over {config.burn_in_steps} sweeps, {config.burn_in_chains} chains")
    print("-" * 50)

    frames = []
    for degree, model in fitted.items():
        ppd = to_ppd(diagram_for_degree(parsed, degree), drop_infinity=True)
        burn_in, curve = choose_burn_in(ppd, model, config)
        if curve is None:
            curve = pd.DataFrame({"step": [0], "bottleneck": [0.0], "wasserstein": [0.0]})
        curve = curve.copy()
        curve.insert(0, "degree", degree)
        curve["burn_in"] = burn_in
        frames.append(curve)

    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["degree", "step", "bottleneck", "wasserstein", "burn_in"]
    )

    print("-" * 50)
    for degree, group in df.groupby("degree"):
        print(f"  H{degree}: burn-in {int(group['burn_in'].iloc[0])}")
    return df


@test
def test_output(output, *args) -> None:
    """Validate the burn-in curves."""
    assert output is not None, 'Output is undefined'
    assert len(output) > 0, 'No burn-in curve computed'
    assert (output['burn_in'] >= 0).all(), 'Burn-in must be non-negative'
    assert (output['bottleneck'] <= output['wasserstein'] + 1e-9).all(), 'Bottleneck exceeds W_p on a curve'
