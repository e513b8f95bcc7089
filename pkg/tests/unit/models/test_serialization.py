import json
import tempfile

import numpy as np
import pytest

from survshap.errors import SchemaError
from survshap.models.cox import CoxModel, cox_fit
from survshap.models.forest import RandomSurvivalForest, rsf_fit
from survshap.models.serialization import load_model, save_model
from survshap.pydantic_models import ForestParams


def test_cox_round_trip(cox_data):
    model = cox_fit(cox_data)
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/cph.json"
        save_model(model, path)
        loaded = load_model(path)

    assert isinstance(loaded, CoxModel)
    assert loaded.feature_names == model.feature_names
    np.testing.assert_array_equal(
        loaded.predict_survival_matrix(cox_data.features),
        model.predict_survival_matrix(cox_data.features),
    )


def test_forest_round_trip(cox_data):
    model = rsf_fit(cox_data, ForestParams(n_trees=3, seed=2))
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/rsf.json"
        save_model(model, path)
        with open(path) as f:
            document = json.load(f)
        loaded = load_model(path)

    assert document["format"] == "survshap.model"
    assert document["kind"] == "rsf"
    assert isinstance(loaded, RandomSurvivalForest)
    assert loaded.params == model.params
    np.testing.assert_array_equal(
        loaded.predict_chf_matrix(cox_data.features),
        model.predict_chf_matrix(cox_data.features),
    )


def test_newer_version_is_refused(cox_data):
    model = cox_fit(cox_data)
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/cph.json"
        save_model(model, path)
        with open(path) as f:
            document = json.load(f)
        document["version"] = 2
        with open(path, "w") as f:
            json.dump(document, f)

        with pytest.raises(SchemaError, match="version 2"):
            load_model(path)


def test_invalid_document():
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/model.json"
        with open(path, "w") as f:
            json.dump({"format": "survshap.model", "kind": "gbm"}, f)

        with pytest.raises(SchemaError):
            load_model(path)
        with pytest.raises(SchemaError):
            load_model(tmpdirname + "/missing.json")
