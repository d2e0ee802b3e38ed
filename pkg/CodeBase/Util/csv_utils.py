"""
CSV Utilities - Result Tables with Provenance

Every CSV the toolkit writes starts with one comment line holding the fully
resolved configuration as JSON, followed by a pandas table with ``,`` separator,
``.`` decimal point and LF line endings.
"""

import json

import pandas as pd

COMMENT = "#"


def provenance_line(provenance):
    """
    Single comment line carrying the resolved configuration.
    """
    return f"{COMMENT} config: {json.dumps(provenance or {}, sort_keys=True, default=str)}\n"


def write_csv_with_header(df, path, provenance=None):
    """
    Write a DataFrame to CSV behind a provenance comment line.

    Args:
        df: pandas DataFrame
        path: Output path
        provenance: JSON-compatible dict (resolved config)
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(provenance_line(provenance))
        df.to_csv(f, index=False, sep=",", decimal=".", lineterminator="\n")


def read_csv_with_header(path):
    """
    Read a CSV written by ``write_csv_with_header`` (comment line skipped).
    """
    return pd.read_csv(path, comment=COMMENT)
