"""
Sublevel persistence of the negated density on the cubical grid.
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.density_grid import ScalarGrid
from gibbs_tda.utils.diagrams import diagrams_to_frame
from gibbs_tda.utils.pipeline import persistence_diagrams

if 'transformer' not in dir():
    from mage_ai.data_preparation.decorators import transformer
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@transformer
def transform(data: pd.DataFrame, *args, **kwargs) -> pd.DataFrame:
    """
    Returns:
        DataFrame (degree, death, birth, essential), one row per diagram point
    """
    config = from_variables(kwargs)
    grid = ScalarGrid.from_frame(data, bandwidth=config.eta)

    print(f"Cubical persistence on a {'x'.join(str(r) for r in grid.resolution)} grid")
    print("-" * 50)

    diagrams = persistence_diagrams(grid)
    df = diagrams_to_frame(diagrams)

    print("-" * 50)
    print(f"Diagram points: {len(df)} ({int(df['essential'].sum())} essential)")
    return df


@test
def test_output(output, *args) -> None:
    """Validate the persistence diagrams."""
    assert output is not None, 'Output is undefined'
    assert len(output) > 0, 'No persistence points computed'
    h0 = output[output['degree'] == 0]
    assert int(h0['essential'].sum()) == 1, 'H0 must carry exactly one essential point'
    finite = output[output['essential'] == 0]
    assert (finite['death'] < finite['birth']).all(), 'Every finite point needs death < birth'
