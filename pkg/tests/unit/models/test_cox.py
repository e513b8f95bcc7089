import numpy as np
import pytest
from conftest import simulate_cox

from survshap.core import CurveKind, StepCurve, SurvivalDataset, TimeGrid, values_at
from survshap.errors import SingularMatrixError
from survshap.models.cox import CoxModel, cox_fit, cox_local_ranking, cox_predict


def test_cox_recovers_coefficients():
    dataset = simulate_cox(2000, [0.8, -0.5, 0.0], seed=5)

    model = cox_fit(dataset)

    np.testing.assert_allclose(model.coefficients, [0.8, -0.5, 0.0], atol=0.15)
    assert model.n_iter > 0


def test_proportional_hazards(cox_data):
    model = cox_fit(cox_data)
    X = cox_data.features[:5]

    chf = model.predict_chf_matrix(X)
    ratio = chf / model.baseline_chf.values[None, :]

    expected = np.exp((X - model.feature_means) @ model.coefficients)
    np.testing.assert_allclose(ratio, np.repeat(expected[:, None], ratio.shape[1], axis=1))
    np.testing.assert_allclose(model.predict_survival_matrix(X), np.exp(-chf))


def test_cox_predict_on_other_grid(cox_data):
    model = cox_fit(cox_data)
    grid = TimeGrid([0.5, 5.0, 50.0])
    x = cox_data.features[0]

    curve = cox_predict(model, x, grid)

    assert curve.kind is CurveKind.SURVIVAL
    baseline = values_at(model.baseline_chf, grid.times)
    risk = np.exp((x - model.feature_means) @ model.coefficients)
    np.testing.assert_allclose(curve.values, np.exp(-baseline * risk))


def test_constant_feature_is_singular(cox_data):
    features = cox_data.features.copy()
    features[:, 1] = 2.0

    with pytest.raises(SingularMatrixError) as e:
        cox_fit(cox_data.with_features(features))

    assert e.value.dimension == 1
    assert e.value.name == "x2"


def test_collinear_features_are_singular(cox_data):
    features = np.column_stack((cox_data.features, 2 * cox_data.features[:, 0]))
    dataset = SurvivalDataset(
        features, ("x1", "x2", "x3", "x4"), cox_data.times, cox_data.events
    )

    with pytest.raises(SingularMatrixError):
        cox_fit(dataset)


def test_too_few_rows():
    dataset = SurvivalDataset(np.eye(2), ("a", "b"), [1.0, 2.0], [1, 1])

    with pytest.raises(ValueError):
        cox_fit(dataset)


def test_local_ranking():
    model = CoxModel(
        coefficients=[1.0, -2.0, 0.5],
        baseline_chf=StepCurve(TimeGrid([1.0]), [0.1], CurveKind.CUMULATIVE_HAZARD),
        feature_means=[0.0, 0.0, 0.0],
        feature_names=("a", "b", "c"),
    )

    ranking = cox_local_ranking(model, np.array([1.0, 1.0, 1.0]))

    assert ranking.names == ["b", "a", "c"]
    np.testing.assert_allclose(ranking.scores, [1.0, 2.0, 0.5])


def test_fit_is_deterministic(cox_data):
    a = cox_fit(cox_data)
    b = cox_fit(cox_data)

    np.testing.assert_array_equal(a.coefficients, b.coefficients)
    np.testing.assert_array_equal(a.baseline_chf.values, b.baseline_chf.values)


def test_convergence_does_not_depend_on_feature_units(cox_data):
    features = cox_data.features.copy()
    features[:, 0] *= 1e4

    a = cox_fit(cox_data)
    b = cox_fit(cox_data.with_features(features))

    assert a.n_iter == b.n_iter
    np.testing.assert_allclose(b.coefficients[0] * 1e4, a.coefficients[0], rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(b.coefficients[1:], a.coefficients[1:], rtol=1e-8, atol=1e-12)
