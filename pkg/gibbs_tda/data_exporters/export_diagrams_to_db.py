"""
Export the persistence diagrams to PostgreSQL and CSV.

Rows are stored in the `persistence_diagrams` table tagged with the
experiment's config hash, so reruns replace their own rows and other
experiments accumulate.
"""

import pandas as pd

from gibbs_tda.utils.config import from_variables
from gibbs_tda.utils.storage import export_frame

if 'data_exporter' not in dir():
    from mage_ai.data_preparation.decorators import data_exporter
if 'test' not in dir():
    from mage_ai.data_preparation.decorators import test


@data_exporter
def export_data(data: pd.DataFrame, *args, **kwargs) -> None:
    """Export diagrams to PostgreSQL + CSV backup."""
    if data is None or len(data) == 0:
        print("No diagram points to export")
        return

    config = from_variables(kwargs)
    output_dir = kwargs.get('output_dir', config.output_dir)
    export_frame(
        data,
        'persistence_diagrams',
        output_dir=output_dir,
        run_id=config.config_hash(),
        use_db=kwargs.get('use_db', True),
    )


@test
def test_output(*args, **kwargs) -> None:
    """Validate the diagram export completed successfully."""
    from gibbs_tda.utils.storage import count_rows

    try:
        run_id = from_variables(kwargs).config_hash()
        total = count_rows('persistence_diagrams', run_id)
        assert total > 0, 'PostgreSQL persistence_diagrams table is empty after export'
        print(f'PostgreSQL: {total} diagram points stored for run {run_id}')
    except Exception as e:
        print(f'PostgreSQL check skipped: {e}')
