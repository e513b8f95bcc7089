"""Ingestion of the heart failure clinical records file

The file is a comma separated table with one row per patient, the follow-up ``time`` and
the ``DEATH_EVENT`` indicator next to the clinical columns. It is read from disk only.
"""

import logging
from collections.abc import Sequence

import pandas as pd

from survshap.core import RESERVED_COLUMNS, SurvivalDataset
from survshap.errors import SchemaError
from survshap.pydantic_models import HeartFailureConfig

log = logging.getLogger(__name__)

BINARY_COLUMNS = ("anaemia", "diabetes", "high_blood_pressure", "sex", "smoking", "event")
POSITIVE_COLUMNS = (
    "age",
    "creatinine_phosphokinase",
    "platelets",
    "serum_creatinine",
    "serum_sodium",
)


def _locate(mask: pd.Series) -> int:
    return int(mask.to_numpy().nonzero()[0][0]) + 1


def _check_ranges(df: pd.DataFrame, path: str) -> None:
    checks = []
    if "ejection_fraction" in df.columns:
        value = df["ejection_fraction"]
        checks.append(("ejection_fraction", (value <= 0) | (value > 100), "in (0, 100]"))
    for column in BINARY_COLUMNS:
        if column in df.columns:
            checks.append((column, ~df[column].isin((0, 1)), "0 or 1"))
    for column in POSITIVE_COLUMNS:
        if column in df.columns:
            checks.append((column, df[column] <= 0, "positive"))
    checks.append(("time", df["time"] < 0, "non-negative"))

    for column, bad, expected in checks:
        if bad.any():
            row = _locate(bad)
            raise SchemaError(
                f"{path}: value {df[column].iloc[row - 1]} at row {row}, column '{column}' "
                f"must be {expected}"
            )


def load_heart_failure(
    path: str | None = None,
    features: Sequence[str] | None = None,
    config: HeartFailureConfig | None = None,
) -> SurvivalDataset:
    """
    Load the heart failure records restricted to a feature selection.

    :param path: location of the file, ``config.path`` when not given
    :param features: selected columns, ``config.features`` when not given
    :param config: renames, default selection and expected row count
    """
    config = HeartFailureConfig() if config is None else config
    path = config.path if path is None else path
    if path is None:
        raise ValueError("no heart failure file given")
    features = list(config.features if features is None else features)
    if len(features) == 0:
        raise SchemaError(f"{path}: the feature selection is empty")

    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise SchemaError(f"could not read {path}: {e}") from e
    df = df.rename(columns=config.column_renames)

    for column in list(RESERVED_COLUMNS) + features:
        if column not in df.columns:
            raise SchemaError(f"{path}: missing column '{column}'")
    for column in df.columns:
        converted = pd.to_numeric(df[column], errors="coerce")
        bad = converted.isna()
        if bad.any():
            row = _locate(bad)
            raise SchemaError(
                f"{path}: non-numeric value {df[column].iloc[row - 1]!r} "
                f"at row {row}, column '{column}'"
            )
        df[column] = converted
    _check_ranges(df, path)

    if config.expected_rows is not None and len(df) != config.expected_rows:
        raise SchemaError(f"{path}: expected {config.expected_rows} rows, found {len(df)}")

    dataset = SurvivalDataset.from_frame(df, features)
    log.info(
        f"Loaded {dataset.n_observations} heart failure records with {dataset.n_features} "
        f"features, censoring rate {dataset.censoring_rate:.3f}"
    )
    return dataset
