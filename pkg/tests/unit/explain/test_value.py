import numpy as np
import pytest

from survshap.explain.value import (
    CoalitionDesign,
    CoalitionValue,
    mask_matrix,
    mask_sizes,
    shapley_kernel_weight,
)
from survshap.models.cox import cox_fit


def test_mask_matrix():
    matrix = mask_matrix(np.array([0, 5, 7]), 3)

    np.testing.assert_array_equal(
        matrix, [[False, False, False], [True, False, True], [True, True, True]]
    )
    np.testing.assert_array_equal(mask_sizes(np.array([0, 5, 7]), 3), [0, 2, 3])


def test_shapley_kernel_weight():
    assert shapley_kernel_weight(4, 1) == pytest.approx(0.25)
    assert shapley_kernel_weight(4, 2) == pytest.approx(0.125)
    assert shapley_kernel_weight(4, 0) == float("inf")
    assert shapley_kernel_weight(4, 4) == float("inf")
    with pytest.raises(ValueError):
        shapley_kernel_weight(4, 5)


def test_enumerated_design():
    design = CoalitionDesign.enumerate(3)

    np.testing.assert_array_equal(design.masks, np.arange(1, 7))
    assert design.Z.shape == (6, 3)
    np.testing.assert_allclose(design.weights, 2 / (3 * 1 * 2))


def test_sampled_design():
    a = CoalitionDesign.sample(6, 200, np.random.default_rng(0))
    b = CoalitionDesign.sample(6, 200, np.random.default_rng(0))

    np.testing.assert_array_equal(a.masks, b.masks)
    sizes = a.Z.sum(axis=1)
    assert sizes.min() >= 1
    assert sizes.max() <= 5
    np.testing.assert_array_equal(a.weights, np.ones(200))


def test_value_function(cox_data):
    model = cox_fit(cox_data)
    x = cox_data.features[0]
    background = cox_data.features[:30]
    value = CoalitionValue(model, x, background, model.event_grid)

    np.testing.assert_allclose(
        value.baseline, model.predict_survival_matrix(background).mean(axis=0)
    )
    np.testing.assert_allclose(value.prediction, model.predict_survival_matrix(x)[0])

    composites = background.copy()
    composites[:, 1] = x[1]
    expected = model.predict_survival_matrix(composites).mean(axis=0)
    np.testing.assert_allclose(value.values([2])[0], expected)


def test_value_function_memoizes(cox_data):
    model = cox_fit(cox_data)
    value = CoalitionValue(model, cox_data.features[0], cox_data.features[:10], model.event_grid)

    value.values([1, 2, 3])
    value.values([3, 2, 1, 7, 0])

    assert value.n_evaluations == 3
