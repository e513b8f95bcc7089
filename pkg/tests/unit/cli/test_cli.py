import os
import tempfile

import numpy as np
import pytest
from conftest import simulate_cox
from pydantic import ValidationError
from typer.testing import CliRunner

from survshap.cli import app, load_config, parse_selector
from survshap.data import METRIC_SCHEMA, PLOT_SCHEMA, read_table, write_dataset
from survshap.explain.records import read_explanations
from survshap.models.cox import CoxModel
from survshap.models.serialization import load_model
from survshap.pydantic_models import ExplainMethod
from survshap.utils.file_path import MANIFEST_NAME, read_manifest

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, list(args))


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def test_generate_is_reproducible():
    with tempfile.TemporaryDirectory() as tmpdirname:
        first, second = tmpdirname + "/a/data.csv", tmpdirname + "/b/data.csv"

        result = invoke("--seed", "4", "--out", first, "generate", "dataset0", "--n", "50")
        assert result.exit_code == 0, result.output
        assert "dataset0: 50 rows" in result.output
        result = invoke("--seed", "4", "--out", second, "generate", "dataset0", "--n", "50")
        assert result.exit_code == 0, result.output

        assert read_bytes(first) == read_bytes(second)
        manifest = read_manifest(os.path.join(tmpdirname, "a", MANIFEST_NAME))

    assert manifest.command == "generate"
    assert manifest.seed == 4
    assert manifest.config.sphere.seed == 4
    assert manifest.arguments["n"] == 50
    assert manifest.outputs == [first]


def test_replay_reproduces_the_output():
    with tempfile.TemporaryDirectory() as tmpdirname:
        original, replayed = tmpdirname + "/a/data.csv", tmpdirname + "/b/data.csv"
        result = invoke("--seed", "2", "--out", original, "generate", "dataset1", "--n", "40")
        assert result.exit_code == 0, result.output

        result = invoke("--out", replayed, "replay", os.path.join(tmpdirname, "a", MANIFEST_NAME))

        assert result.exit_code == 0, result.output
        assert read_bytes(original) == read_bytes(replayed)


@pytest.fixture(scope="module")
def workspace():
    """Generated data, a fitted Cox model and explanations of its first rows"""
    with tempfile.TemporaryDirectory() as tmpdirname:
        data = tmpdirname + "/data.csv"
        model = tmpdirname + "/cph.json"
        explanations = tmpdirname + "/survshap_kernel.csv"
        steps = [
            ("--out", data, "generate", "dataset0", "--n", "60"),
            ("--out", model, "fit", "cph", data),
            ("--out", explanations, "explain", model, data, "--select", "0:3"),
        ]
        for step in steps:
            result = invoke(*step)
            assert result.exit_code == 0, result.output
        yield {"dir": tmpdirname, "data": data, "model": model, "explanations": explanations}


def test_fit(workspace):
    assert isinstance(load_model(workspace["model"]), CoxModel)

    out = workspace["dir"] + "/rsf.json"
    result = invoke(
        "--out", out, "fit", "rsf", workspace["data"], "--n-trees", "3", "--test-fraction", "0.2"
    )

    assert result.exit_code == 0, result.output
    assert "integrated Brier score (on 12 test rows)" in result.output


def test_explain(workspace):
    ds = read_explanations(workspace["explanations"])

    assert list(ds["observation"].values) == [0, 1, 2]
    assert ds.attrs["method"] == ExplainMethod.KERNEL.value
    assert ds.attrs["max_reconstruction_error"] <= 1e-10


def test_explain_with_survlime(workspace):
    out = workspace["dir"] + "/survlime.csv"

    result = invoke(
        "--out", out, "explain", workspace["model"], workspace["data"],
        "--select", "1,4", "--method", "survlime", "--n-neighbors", "60",
    )

    assert result.exit_code == 0, result.output
    df, _ = read_table(out)
    assert sorted(df["observation"].unique()) == [1, 4]


def test_evaluate(workspace):
    out = workspace["dir"] + "/metrics.csv"

    result = invoke(
        "--out", out, "evaluate", workspace["model"], workspace["data"],
        "--explanations", workspace["explanations"],
        "--ground-truth", workspace["explanations"],
    )

    assert result.exit_code == 0, result.output
    df, _ = read_table(out, METRIC_SCHEMA)
    assert list(df.columns) == ["metric", "variable", "time", "value"]
    assert set(df["metric"]) == {
        "integrated_brier", "brier", "local_accuracy", "csp", "gt_shapley", "normalized_rmse"
    }
    np.testing.assert_allclose(df.loc[df["metric"] == "gt_shapley", "value"], 1.0)
    np.testing.assert_allclose(df.loc[df["metric"] == "normalized_rmse", "value"], 0.0)
    assert (df.loc[df["metric"] == "local_accuracy", "value"] <= 1e-8).all()


def test_plotdata(workspace):
    out = workspace["dir"] + "/plot.csv"

    result = invoke(
        "--out", out, "plotdata", "survshap", workspace["explanations"], "--observation", "2"
    )

    assert result.exit_code == 0, result.output
    df, _ = read_table(out, PLOT_SCHEMA)
    assert list(df.columns) == ["series", "x", "y", "group"]
    assert set(df["series"]) == {"x1", "x2", "x3", "x4", "x5"}
    assert (df["group"] == 2).all()


def test_unknown_plot_kind(workspace):
    result = invoke("--out", workspace["dir"] + "/p.csv", "plotdata", "pie", workspace["data"])

    assert result.exit_code == 2
    assert "brier, metric, ranking, survshap" in result.output


def test_exact_refusal_exits_with_2(workspace):
    config = workspace["dir"] + "/config.toml"
    with open(config, "w") as f:
        f.write("[explain]\nexact_max_features = 2\n")

    result = invoke(
        "--config", config, "--out", workspace["dir"] + "/exact.csv",
        "explain", workspace["model"], workspace["data"], "--method", "exact", "--select", "0",
    )

    assert result.exit_code == 2
    assert "error:" in result.output


def test_selector_out_of_range_exits_with_2(workspace):
    result = invoke(
        "--out", workspace["dir"] + "/x.csv",
        "explain", workspace["model"], workspace["data"], "--select", "100",
    )

    assert result.exit_code == 2


def test_malformed_file_exits_with_2():
    with tempfile.TemporaryDirectory() as tmpdirname:
        data = tmpdirname + "/data.csv"
        with open(data, "w") as f:
            f.write("a,time,event\n1,2,1\n")

        result = invoke("--out", tmpdirname + "/cph.json", "fit", "cph", data)

    assert result.exit_code == 2
    assert "schema" in result.output


def test_constant_feature_exits_with_3():
    dataset = simulate_cox(50, [0.5, 0.5], seed=3)
    features = dataset.features.copy()
    features[:, 1] = 1.0

    with tempfile.TemporaryDirectory() as tmpdirname:
        data = tmpdirname + "/data.csv"
        write_dataset(dataset.with_features(features), data)

        result = invoke("--out", tmpdirname + "/cph.json", "fit", "cph", data)

    assert result.exit_code == 3
    assert "x2" in result.output


def test_invalid_config_exits_with_2():
    with tempfile.TemporaryDirectory() as tmpdirname:
        config = tmpdirname + "/config.toml"
        with open(config, "w") as f:
            f.write("[forest]\nn_trees = 0\n")

        result = invoke("--config", config, "generate", "exp1", "--n", "5")

    assert result.exit_code == 2


def test_parse_selector():
    np.testing.assert_array_equal(parse_selector("all", 3), [0, 1, 2])
    np.testing.assert_array_equal(parse_selector("2", 5), [2])
    np.testing.assert_array_equal(parse_selector("1:4", 10), [1, 2, 3])
    np.testing.assert_array_equal(parse_selector("0, 5:7", 10), [0, 5, 6])
    np.testing.assert_array_equal(parse_selector(":2", 10), [0, 1])
    for selector in ("10", "3:3", "x", "-1"):
        with pytest.raises(ValueError):
            parse_selector(selector, 10)


def test_load_config():
    with tempfile.TemporaryDirectory() as tmpdirname:
        path = tmpdirname + "/config.toml"
        with open(path, "w") as f:
            f.write('[explain]\nmethod = "sampling"\nn_permutations = 10\n\n[exp1]\nn = 20\n')

        config = load_config(path, seed=9)

        with open(path, "w") as f:
            f.write("[unknown]\nvalue = 1\n")
        with pytest.raises(ValidationError):
            load_config(path)
        with open(path, "w") as f:
            f.write("[explain\n")
        with pytest.raises(ValueError):
            load_config(path)

    assert config.explain.method is ExplainMethod.SAMPLING
    assert config.explain.n_permutations == 10
    assert config.exp1.n == 20
    assert {config.exp1.seed, config.sphere.seed, config.forest.seed} == {9}
    assert config.explain.seed == config.survlime.seed == 9
    assert load_config(None).explain.seed == 0
