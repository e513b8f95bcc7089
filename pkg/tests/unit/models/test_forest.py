import numpy as np
import pytest

from survshap.core import SurvivalDataset, TimeGrid
from survshap.models.forest import logrank_from_arrays, logrank_statistic, rsf_fit, rsf_predict
from survshap.pydantic_models import ForestParams

SMALL_FOREST = ForestParams(n_trees=8, min_leaf_size=10, seed=4)


def test_logrank_hand_value():
    left = SurvivalDataset(np.zeros((4, 1)), ("a",), [1.0] * 4, [1] * 4)
    right = SurvivalDataset(np.ones((4, 1)), ("a",), [10.0] * 4, [1] * 4)

    assert logrank_statistic(left, right) == pytest.approx(np.sqrt(7))


def test_logrank_degenerate_groups():
    times = np.array([1.0, 2.0, 3.0])

    assert logrank_from_arrays(times, np.array([1, 1, 1]), np.array([1, 1, 1])) == 0.0
    assert logrank_from_arrays(times, np.array([0, 0, 0]), np.array([1, 0, 0])) == 0.0


def test_forest_predictions_are_survival_curves(cox_data):
    forest = rsf_fit(cox_data, SMALL_FOREST)

    survival = forest.predict_survival_matrix(cox_data.features[:20])

    assert survival.shape == (20, len(forest.event_grid))
    assert np.all((survival >= 0) & (survival <= 1))
    assert np.all(np.diff(survival, axis=1) <= 0)
    assert len(forest.trees) == 8


def test_forest_is_deterministic(cox_data):
    a = rsf_fit(cox_data, SMALL_FOREST)
    b = rsf_fit(cox_data, SMALL_FOREST, n_jobs=2)

    X = cox_data.features[:10]
    np.testing.assert_array_equal(a.predict_chf_matrix(X), b.predict_chf_matrix(X))


def test_seed_changes_forest(cox_data):
    a = rsf_fit(cox_data, SMALL_FOREST)
    b = rsf_fit(cox_data, SMALL_FOREST, seed=5)

    X = cox_data.features[:10]
    assert not np.array_equal(a.predict_chf_matrix(X), b.predict_chf_matrix(X))


def test_max_depth(cox_data):
    forest = rsf_fit(cox_data, SMALL_FOREST.model_copy(update={"max_depth": 2}))

    assert max(tree.depth for tree in forest.trees) <= 2
    assert all(tree.n_leaves <= 4 for tree in forest.trees)


def test_constant_feature_is_never_used(cox_data):
    features = cox_data.features.copy()
    features[:, 2] = 1.0
    params = SMALL_FOREST.model_copy(update={"max_features": 3})

    forest = rsf_fit(cox_data.with_features(features), params)

    assert 2 not in forest.used_features()
    assert forest.used_features() <= {0, 1}


def test_too_few_rows(cox_data):
    with pytest.raises(ValueError):
        rsf_fit(cox_data.subset(np.arange(15)), SMALL_FOREST)


def test_predict_on_other_grid(cox_data):
    forest = rsf_fit(cox_data, SMALL_FOREST)
    grid = TimeGrid([forest.event_grid.times[0] / 2, forest.event_grid.last * 2])

    curve = rsf_predict(forest, cox_data.features[0], grid)

    assert curve.values[0] == 1.0
    assert curve.values[1] == pytest.approx(
        forest.predict_survival_matrix(cox_data.features[:1])[0, -1]
    )
