"""
Export result tables to PostgreSQL with a CSV backup.

Rows are tagged with the run id. Re-exporting a run deletes that run's rows
and appends the new ones in one transaction, so other runs accumulate. A
database failure is reported and the CSV backup is still written.
"""

import json
import os
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd


def postgres_url() -> str:
    host = os.getenv('POSTGRES_HOST', 'postgres')
    port = os.getenv('POSTGRES_PORT', '5432')
    user = os.getenv('POSTGRES_USER', 'mage')
    password = os.getenv('POSTGRES_PASSWORD', 'mage_password')
    database = os.getenv('POSTGRES_DB', 'gibbs_tda')
    return f"postgresql://{user}:{password}@{host}:{port}/{database}"


def to_pg_value(val):
    if isinstance(val, np.ndarray):
        return json.dumps(val.tolist())
    if isinstance(val, (list, tuple, dict)):
        return json.dumps(val)
    return val


def prepare_frame(df: pd.DataFrame, run_id: str) -> pd.DataFrame:
    out = df.copy()
    for col in out.columns:
        if out[col].apply(lambda x: isinstance(x, (list, tuple, dict, np.ndarray))).any():
            out[col] = out[col].apply(to_pg_value)
    out.insert(0, 'run_id', run_id)
    return out


def export_frame(
    df: pd.DataFrame,
    table: str,
    key_columns: Sequence[str] = (),
    output_dir: Optional[str] = None,
    run_id: str = 'default',
    use_db: bool = True,
    engine=None,
) -> Dict[str, object]:
    """
    Write `df` to PostgreSQL table `table` and to `<output_dir>/<table>_<run_id>.csv`.

    Existing rows with the same run id (and the same `key_columns` values, when
    given) are replaced. Returns {'postgres': bool, 'csv': path or None, 'rows': n}.
    """
    result = {'postgres': False, 'csv': None, 'rows': 0}
    if df is None or len(df) == 0:
        print(f"No rows to export for {table}")
        return result

    frame = prepare_frame(df, run_id)
    result['rows'] = len(frame)

    # ── PostgreSQL Export ─────────────────────────────────────────────────
    if use_db:
        try:
            from sqlalchemy import create_engine, text

            owns_engine = engine is None
            if owns_engine:
                engine = create_engine(postgres_url())

            clauses = ['run_id = :run_id']
            params = {'run_id': run_id}
            for i, col in enumerate(key_columns):
                values = frame[col].dropna().unique().tolist()
                clauses.append(f"{col} IN ({', '.join(f':k{i}_{j}' for j in range(len(values)))})" if values else '1 = 0')
                params.update({f'k{i}_{j}': v.item() if hasattr(v, 'item') else v for j, v in enumerate(values)})

            with engine.begin() as conn:
                # Create table if it doesn't exist (first run)
                frame.head(0).to_sql(table, conn, if_exists='append', index=False)
                conn.execute(text(f"DELETE FROM {table} WHERE {' AND '.join(clauses)}"), params)
                # Insert in same transaction so DELETE rolls back if INSERT fails
                frame.to_sql(table, conn, if_exists='append', index=False, method='multi')

            if owns_engine:
                engine.dispose()
            result['postgres'] = True
            print(f"Exported {len(frame)} rows to PostgreSQL ({table})")

        except Exception as e:
            print(f"PostgreSQL export failed: {e}")
            print("Falling back to CSV only")

    # ── CSV Backup ────────────────────────────────────────────────────────
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        filepath = os.path.join(output_dir, f"{table}_{run_id}.csv")
        frame.to_csv(filepath, index=False)
        result['csv'] = filepath
        print(f"CSV backup: {filepath}")

    return result


def count_rows(table: str, run_id: Optional[str] = None, engine=None) -> int:
    from sqlalchemy import create_engine, text

    owns_engine = engine is None
    if owns_engine:
        engine = create_engine(postgres_url())
    query = f"SELECT COUNT(*) FROM {table}" + (" WHERE run_id = :run_id" if run_id else "")
    with engine.connect() as conn:
        total = conn.execute(text(query), {'run_id': run_id} if run_id else {}).scalar()
    if owns_engine:
        engine.dispose()
    return int(total)
