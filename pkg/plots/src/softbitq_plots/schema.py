"""Versioned column contracts for the harness CSV files.

The field lists mirror the writer side exactly; they are duplicated
here on purpose, because the CSV files are the only interface between
the simulation package and this one. Extra columns are tolerated,
missing ones are not.
"""

import csv
import math
from pathlib import Path

SCHEMA_VERSION = 1

BLER_COLUMNS = ("schema_version", "method", "channel", "k", "snr_db",
                "bler_float", "bler_method", "avg_bits_per_soft_bit",
                "hard_entropy_bits", "codewords_simulated", "seed")
RD_COLUMNS = ("schema_version", "alpha", "k", "snr_db",
              "avg_bits_per_soft_bit", "bler_float", "bler_method",
              "additive_bler", "codewords_simulated", "seed")
THEOREM_COLUMNS = ("schema_version", "k", "depth", "samples", "sigma_hat",
                   "sigma_se", "sigma_theory", "p999_hat", "p999_se")

# the bler and cost figures draw different columns of the same file
REQUIRED_COLUMNS = {
    "theorem": THEOREM_COLUMNS,
    "bler": BLER_COLUMNS,
    "cost": BLER_COLUMNS,
    "rd": RD_COLUMNS,
}


class SchemaError(ValueError):
    """Input CSV does not match the versioned column contract."""


def parse_float(text: str) -> float:
    """Empty cells are the writer's encoding of not-applicable."""
    if text is None or text.strip() == "":
        return math.nan
    return float(text)


def read_rows(path, kind: str) -> list:
    """Read one CSV, validating its header and schema version.

    Returns the rows as dicts of raw strings. Raises SchemaError
    naming every missing column, or on a schema_version this package
    does not understand; raises FileNotFoundError for absent files.
    """
    if kind not in REQUIRED_COLUMNS:
        raise ValueError(f"unknown figure kind {kind!r}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input CSV does not exist: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS[kind] if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing columns for kind {kind!r}: "
                + ", ".join(missing))
        rows = list(reader)
    for row in rows:
        version = row["schema_version"].strip()
        if version != str(SCHEMA_VERSION):
            raise SchemaError(
                f"{path}: schema_version {version} not supported "
                f"(expected {SCHEMA_VERSION})")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows
