"""
Bootstrap significance of the largest lifetimes against the replicas.

Pipeline variables:
    alpha: test level (default 0.05)
    j_max: largest order statistic tested (default 10)
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.diagrams import diagram_for_degree, diagrams_from_frame
from gibbs_tda.utils.inference import count_significant, reports_to_frame
from gibbs_tda.utils.pipeline import replicas_from_frame

if 'transformer' not in dir():
    from mage_ai.data_preparation.decorators import transformer
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@transformer
def transform(diagrams: pd.DataFrame, replicas: pd.DataFrame, *args, **kwargs) -> pd.DataFrame:
    """
    Returns:
        Signal report table, one row per (degree, variant, j)
    """
    config = from_variables(kwargs)
    parsed = diagrams_from_frame(diagrams)

    print(f"Significance tests at α={config.alpha}")
    print("-" * 50)

    frames, components = [], {}
    for (degree, label), _ in replicas.groupby(['degree', 'config'], sort=True):
        diagram = diagram_for_degree(parsed, int(degree))
        replica_diagrams = replicas_from_frame(replicas, degree, label)
        count, reports = count_significant(diagram, replica_diagrams, config.alpha, config.j_max, label)
        components[(int(degree), label)] = count
        frames.append(reports_to_frame(reports))
        print(f"  - H{degree} {label}: {count} feature(s)")

    df = pd.concat(frames, ignore_index=True) if frames else reports_to_frame([])

    print("=" * 50)
    print("SUMMARY")
    print("=" * 50)
    for (degree, label), count in components.items():
        print(f"  H{degree} {label}: {count} topological feature(s)")
    return df


@test
def test_output(output, *args) -> None:
    """Validate the signal reports."""
    assert output is not None, 'Output is undefined'
    assert len(output) > 0, 'No significance test ran'
    assert output['p_value'].between(0, 1).all(), 'p-values must lie in [0, 1]'
    assert (output['M'] >= 20).all(), 'Every test needs at least 20 replicas'
