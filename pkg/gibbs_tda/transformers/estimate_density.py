"""
Evaluate the Gaussian KDE of the point cloud on a regular grid.

Pipeline variables:
    eta: bandwidth (default from the preset)
    resolution, padding, kde_cutoff: grid layout and optional truncation radius
    threads: worker threads for the grid evaluation
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.density_grid import riemann_mass
from gibbs_tda.utils.pipeline import estimate_density
from gibbs_tda.utils.point_clouds import PointCloud

if 'transformer' not in dir():
    from mage_ai.data_preparation.decorators import transformer
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@transformer
def transform(data: pd.DataFrame, *args, **kwargs) -> pd.DataFrame:
    """
    Turn the sampled cloud into a density grid.

    Returns:
        DataFrame with grid-node coordinates (x1..xD) and the KDE `value`
    """
    config = from_variables(kwargs)
    cloud = PointCloud.from_frame(data, label=config.shape, seed=config.seed)

    print(f"KDE of {cloud.n} points, η={config.eta}")
    print("-" * 50)

    grid = estimate_density(cloud, config)
    df = grid.to_frame()

    print("-" * 50)
    print(f"Grid nodes: {len(df)}")
    print(f"Riemann mass: {riemann_mass(grid):.4f}")
    return df


@test
def test_output(output, *args) -> None:
    """Validate the density grid."""
    assert output is not None, 'Output is undefined'
    assert 'value' in output.columns, 'Missing value column'
    assert (output['value'] >= 0).all(), 'Density grid has negative values'
    assert output['value'].max() > 0, 'Density grid is identically zero -- check eta and the grid padding'
