import tempfile

import numpy as np
import pandas as pd
import pytest

from survshap.data import (
    DATASET_SCHEMA,
    METRIC_SCHEMA,
    read_dataset,
    read_schema,
    read_table,
    write_dataset,
    write_table,
)
from survshap.errors import SchemaError


def test_write_and_read_dataset(hand_dataset):
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/data.csv"
        write_dataset(hand_dataset, path)

        with open(path) as f:
            assert f.readline() == f"# schema: {DATASET_SCHEMA}\n"
        dataset = read_dataset(path)

    assert dataset.feature_names == ("a", "b")
    np.testing.assert_array_equal(dataset.features, hand_dataset.features)
    np.testing.assert_array_equal(dataset.times, hand_dataset.times)
    np.testing.assert_array_equal(dataset.events, hand_dataset.events)


def test_read_dataset_feature_selection(hand_dataset):
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/data.csv"
        write_dataset(hand_dataset, path)
        dataset = read_dataset(path, ["b"])

    assert dataset.feature_names == ("b",)


def test_missing_column(hand_dataset):
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/data.csv"
        write_table(hand_dataset.to_frame().drop(columns="event"), path, DATASET_SCHEMA)

        with pytest.raises(SchemaError, match="event"):
            read_dataset(path)


def test_non_numeric_cell_names_row_and_column(hand_dataset):
    df = hand_dataset.to_frame().astype({"a": object})
    df.loc[2, "a"] = "abc"
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/data.csv"
        write_table(df, path, DATASET_SCHEMA)

        with pytest.raises(SchemaError, match="row 3, column 'a'"):
            read_dataset(path)


def test_missing_schema_header():
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/data.csv"
        pd.DataFrame({"a": [1.0], "time": [1.0], "event": [1]}).to_csv(path, index=False)

        with pytest.raises(SchemaError):
            read_dataset(path)


def test_wrong_schema(hand_dataset):
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/data.csv"
        write_table(hand_dataset.to_frame(), path, METRIC_SCHEMA)

        assert read_schema(path) == METRIC_SCHEMA
        with pytest.raises(SchemaError, match="expected"):
            read_dataset(path)


def test_footer():
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/table.csv"
        df = pd.DataFrame({"metric": ["ibs"], "value": [0.1]})
        write_table(df, path, METRIC_SCHEMA, {"note": "x"})
        table, footer = read_table(path, METRIC_SCHEMA)

    assert footer == {"note": "x"}
    assert len(table) == 1
    assert table["value"].iloc[0] == 0.1
