"""
Sample the point cloud the experiment starts from.

Pipeline variables (any ExperimentConfig key, see utils/config.py):
    preset: sphere | torus | circles
    n, seed, sampler_params: override the preset's sampler
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.pipeline import sample_cloud

if 'data_loader' not in dir():
    from mage_ai.data_preparation.decorators import data_loader
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@data_loader
def load_data(*args, **kwargs) -> pd.DataFrame:
    """
    Draw the configured point cloud.

    Returns:
        DataFrame with one column per ambient coordinate (x1, x2[, x3])
    """
    config = from_variables(kwargs)
    config.validate()

    print(f"Sampling {config.n} points ({config.shape}, seed={config.seed})")
    print(f"Config hash: {config.config_hash()}")
    print("-" * 50)

    cloud = sample_cloud(config)
    df = cloud.to_frame()

    print("-" * 50)
    print(f"Sampled {len(df)} points in R^{cloud.ambient_dim}")
    return df


@test
def test_output(output, *args) -> None:
    """Validate the sampled point cloud."""
    assert output is not None, 'Output is undefined'
    assert len(output) > 0, 'No points sampled -- check n and sampler_params'
    assert 'x1' in output.columns and 'x2' in output.columns, 'Missing coordinate columns'
    assert output.notna().all().all(), 'Sampled coordinates contain NaN'
