import tempfile

import numpy as np
import pandas as pd
import pytest

from survshap.dataset.heart_failure import load_heart_failure
from survshap.errors import SchemaError
from survshap.pydantic_models import HeartFailureConfig

CONFIG = HeartFailureConfig(expected_rows=None)


def records() -> pd.DataFrame:
    return pd.DataFrame(
        {
            "age": [75.0, 55.0, 65.0, 50.0],
            "anaemia": [0, 0, 0, 1],
            "creatinine_phosphokinase": [582, 7861, 146, 111],
            "diabetes": [0, 0, 0, 0],
            "ejection_fraction": [20, 38, 20, 20],
            "high_blood_pressure": [1, 0, 0, 0],
            "platelets": [265000.0, 263358.03, 162000.0, 210000.0],
            "serum_creatinine": [1.9, 1.1, 1.3, 1.9],
            "serum_sodium": [130, 136, 129, 137],
            "sex": [1, 1, 1, 1],
            "smoking": [0, 0, 1, 0],
            "time": [4, 6, 7, 7],
            "DEATH_EVENT": [1, 1, 0, 1],
        }
    )


def load(df: pd.DataFrame, **kwargs):
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/heart_failure_clinical_records_dataset.csv"
        df.to_csv(path, index=False)
        return load_heart_failure(path, **kwargs)


def test_load_default_selection():
    dataset = load(records(), config=CONFIG)

    assert dataset.feature_names == tuple(CONFIG.features)
    assert dataset.n_observations == 4
    np.testing.assert_array_equal(dataset.events, [True, True, False, True])
    np.testing.assert_array_equal(dataset.times, [4, 6, 7, 7])


def test_load_selected_features():
    dataset = load(records(), features=["age", "serum_sodium"], config=CONFIG)

    assert dataset.feature_names == ("age", "serum_sodium")
    np.testing.assert_array_equal(dataset.features[:, 1], [130, 136, 129, 137])


def test_path_from_config():
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/records.csv"
        records().to_csv(path, index=False)
        dataset = load_heart_failure(config=HeartFailureConfig(path=path, expected_rows=4))

    assert dataset.n_observations == 4


def test_no_path():
    with pytest.raises(ValueError):
        load_heart_failure(config=CONFIG)


def test_empty_selection():
    with pytest.raises(SchemaError, match="empty"):
        load(records(), features=[], config=CONFIG)


def test_missing_column():
    with pytest.raises(SchemaError, match="missing column 'serum_sodium'"):
        load(records().drop(columns="serum_sodium"), config=CONFIG)


def test_non_numeric_cell():
    df = records().astype({"age": object})
    df.loc[2, "age"] = "old"

    with pytest.raises(SchemaError, match="non-numeric value 'old' at row 3, column 'age'"):
        load(df, config=CONFIG)


def test_values_out_of_range():
    df = records()
    df.loc[1, "ejection_fraction"] = 120

    with pytest.raises(SchemaError, match="at row 2, column 'ejection_fraction' must be"):
        load(df, config=CONFIG)

    df = records()
    df.loc[3, "anaemia"] = 2
    with pytest.raises(SchemaError, match="row 4, column 'anaemia'"):
        load(df, config=CONFIG)


def test_row_count():
    with pytest.raises(SchemaError, match="expected 299 rows, found 4"):
        load(records())
