"""Read and write the versioned delimited files used for datasets and result tables

Every file starts with one header line ``# schema: <name>/<version>`` followed by a
comma separated table. Result tables may end with ``# key: value`` footer lines.
"""

import logging
import os
from collections.abc import Sequence

import pandas as pd

from survshap.core import RESERVED_COLUMNS, SurvivalDataset
from survshap.errors import SchemaError

log = logging.getLogger(__name__)

DATASET_SCHEMA = "survshap.dataset/1"
EXPLANATION_SCHEMA = "survshap.explanation/1"
SURVLIME_SCHEMA = "survshap.survlime/1"
METRIC_SCHEMA = "survshap.metrics/1"
PLOT_SCHEMA = "survshap.plotdata/1"


def write_table(
    df: pd.DataFrame, path: str, schema: str, footer: dict[str, object] | None = None
) -> None:
    """Write a table with its schema header line and optional footer lines"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    try:
        with open(path, "w", newline="") as f:
            f.write(f"# schema: {schema}\n")
            df.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
            for key, value in (footer or {}).items():
                f.write(f"# {key}: {value}\n")
    except OSError as e:
        raise OSError(f"could not write {path}: {e}") from e


def read_schema(path: str) -> str:
    try:
        with open(path) as f:
            first = f.readline().strip()
    except OSError as e:
        raise SchemaError(f"could not read {path}: {e}") from e
    if not first.startswith("# schema:"):
        raise SchemaError(f"{path} has no schema header line")
    return first.split(":", 1)[1].strip()


def read_table(path: str, schema: str | None = None) -> tuple[pd.DataFrame, dict[str, str]]:
    """Read a versioned table, returning the data and its footer entries"""
    found = read_schema(path)
    if schema is not None and found != schema:
        raise SchemaError(f"{path} has schema '{found}', expected '{schema}'")
    footer = {}
    with open(path) as f:
        for line in f.readlines()[1:]:
            if line.startswith("#") and ":" in line:
                key, value = line[1:].split(":", 1)
                footer[key.strip()] = value.strip()
    df = pd.read_csv(path, comment="#")
    return df, footer


def _check_numeric(df: pd.DataFrame, columns: Sequence[str], path: str) -> None:
    for column in columns:
        converted = pd.to_numeric(df[column], errors="coerce")
        bad = converted.isna()
        if bad.any():
            row = int(bad.to_numpy().nonzero()[0][0])
            raise SchemaError(
                f"{path}: non-numeric value {df[column].iloc[row]!r} "
                f"at row {row + 1}, column '{column}'"
            )


def frame_to_dataset(
    df: pd.DataFrame, path: str, feature_names: Sequence[str] | None = None
) -> SurvivalDataset:
    for column in RESERVED_COLUMNS:
        if column not in df.columns:
            raise SchemaError(f"{path}: missing required column '{column}'")
    if feature_names is None:
        feature_names = [c for c in df.columns if c not in RESERVED_COLUMNS]
    if len(feature_names) == 0:
        raise SchemaError(f"{path}: no feature columns selected")
    missing = [c for c in feature_names if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing feature columns {missing}")
    _check_numeric(df, list(feature_names) + list(RESERVED_COLUMNS), path)
    df = df[list(feature_names) + list(RESERVED_COLUMNS)].apply(pd.to_numeric)
    return SurvivalDataset.from_frame(df, feature_names)


def read_dataset(path: str, feature_names: Sequence[str] | None = None) -> SurvivalDataset:
    """Load a dataset file written by ``write_dataset``"""
    df, _ = read_table(path, DATASET_SCHEMA)
    dataset = frame_to_dataset(df, path, feature_names)
    log.info(
        f"Loaded {dataset.n_observations} rows and {dataset.n_features} features from {path}"
    )
    return dataset


def write_dataset(dataset: SurvivalDataset, path: str) -> None:
    write_table(dataset.to_frame(), path, DATASET_SCHEMA)
    log.info(f"Wrote {dataset.n_observations} rows to {path}")
