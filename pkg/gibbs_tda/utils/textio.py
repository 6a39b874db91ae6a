"""
Delimiter-separated text artifacts: `# key=value ...` header lines followed by
whitespace-separated numeric rows.

Floats are written with 17 significant digits and read back with pandas'
round-trip parser, so every artifact round-trips bit-exactly.
"""

import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.17g"


def format_value(value) -> str:
    """Render a header value without spaces."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(format_value(v) for v in value)
    text = str(value)
    return text.replace(" ", "")


def write_table(
    path: str,
    header: Dict[str, object],
    frame: pd.DataFrame,
    columns_line: bool = True,
) -> str:
    """Write `frame` under a provenance header. Returns the path."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(path, "w") as handle:
        if header:
            handle.write("# " + " ".join(f"{k}={format_value(v)}" for k, v in header.items()) + "\n")
        if columns_line:
            handle.write("# columns=" + ",".join(str(c) for c in frame.columns) + "\n")
        frame.to_csv(handle, sep=" ", header=False, index=False, float_format=FLOAT_FORMAT)
    return path


def read_header(path: str) -> Dict[str, str]:
    """Collect every `key=value` token from the leading comment lines."""
    meta: Dict[str, str] = {}
    with open(path) as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    meta[key] = value
    return meta


def read_table(path: str, columns: Optional[List[str]] = None) -> Tuple[Dict[str, str], pd.DataFrame]:
    """Read a table written by `write_table`.

    Column names come from the `columns=` header unless `columns` is given.
    """
    meta = read_header(path)
    names = columns
    if names is None and "columns" in meta:
        names = meta["columns"].split(",")

    try:
        frame = pd.read_csv(
            path,
            sep=r"\s+",
            comment="#",
            header=None,
            names=names,
            float_precision="round_trip",
        )
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame(columns=names or [])
    return meta, frame


def parse_floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",") if v != ""], dtype=float)


def parse_ints(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v != "")
