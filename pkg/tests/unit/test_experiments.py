import numpy as np
import pytest

from survshap.core import TimeGrid
from survshap.experiments import (
    REPORT_COLUMNS,
    MetricReport,
    explain_params,
    sphere_configs,
    stage,
)
from survshap.models.ranking import ImportanceRanking
from survshap.pydantic_models import (
    ExperimentParams,
    ExplainMethod,
    ExplainParams,
    RunConfig,
    SphereConfig,
)


def test_stage_adds_a_note():
    with pytest.raises(ZeroDivisionError) as info:
        with stage("fit cph"):
            1 / 0

    assert info.value.__notes__ == ["failed stage: fit cph"]


def test_metric_report_frame():
    report = MetricReport("exp2")
    report.add("integrated_brier", 0.12, dataset="dataset0", model="cph")
    report.add_curve("brier", TimeGrid([1.0, 2.0]), np.array([0.1, 0.2]), model="cph")
    rankings = [ImportanceRanking.from_scores([2.0, 1.0], ("a", "b"))]
    report.add_distribution(rankings, model="rsf", method="survshap")

    df = report.frame()

    assert list(df.columns) == REPORT_COLUMNS
    assert len(df) == 1 + 2 + 4
    assert (df["experiment"] == "exp2").all()
    assert df.loc[0, "variable"] == ""
    assert df["rank"].dtype == "Int64"
    fractions = df[df["metric"] == "rank_fraction"]
    assert fractions["rank"].tolist() == [1, 1, 2, 2]
    assert fractions["value"].tolist() == [1.0, 0.0, 0.0, 1.0]
    np.testing.assert_array_equal(df.loc[df["metric"] == "brier", "time"], [1.0, 2.0])


def test_sphere_configs_share_the_sampling_settings():
    config = RunConfig(sphere=SphereConfig(n=300, seed=5, radius=4.0))

    configs = sphere_configs(config)

    assert set(configs) == {"dataset0", "dataset1"}
    assert configs["dataset0"].center == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert configs["dataset1"].center == (4.0, -8.0, 2.0, 4.0, 2.0)
    for sphere in configs.values():
        assert (sphere.n, sphere.seed, sphere.radius) == (300, 5, 4.0)


def test_explain_params_cap_the_background():
    assert explain_params(RunConfig()).background_size == 100
    assert explain_params(RunConfig(), background_size=2000).background_size == 2000

    config = RunConfig(explain=ExplainParams(background_size=40))
    assert explain_params(config).background_size == 40
    assert explain_params(config, background_size=2000).background_size == 2000

    config = RunConfig(experiment=ExperimentParams(background_size=None))
    assert explain_params(config).background_size is None


def test_explain_params_replace_survlime_by_kernel():
    config = RunConfig(explain=ExplainParams(method=ExplainMethod.SURVLIME))

    assert explain_params(config).method is ExplainMethod.KERNEL


def test_experiment_defaults_are_desk_scale():
    params = ExperimentParams()

    assert params.n_explain == 100
    assert params.background_size == 100
    assert params.reference_explain == 20
    assert params.reference_background_size == 2000
