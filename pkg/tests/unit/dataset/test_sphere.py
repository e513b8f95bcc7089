import numpy as np
import pytest

from survshap.dataset.sphere import generate_sphere_dataset, sample_sphere, weibull_time
from survshap.pydantic_models import SphereConfig


def test_points_lie_on_the_sphere():
    center = np.array([4.0, -8.0, 2.0, 4.0, 2.0])

    X = sample_sphere(500, center, 8.0, np.random.default_rng(0))

    np.testing.assert_allclose(np.linalg.norm(X - center, axis=1), 8.0, atol=1e-12)


def test_weibull_time_inverts_the_survival_function():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 3))
    b = np.array([0.1, -0.15, 0.0])
    u = rng.uniform(0.01, 0.99, 20)

    t = weibull_time(u, X, b, 1e-5, 2.0)

    survival = np.exp(-1e-5 * np.exp(X @ b) * t**2.0)
    np.testing.assert_allclose(survival, u)


def test_generate_sphere_dataset():
    config = SphereConfig.dataset1(n=200, seed=3)

    dataset = generate_sphere_dataset(config)

    assert dataset.feature_names == ("x1", "x2", "x3", "x4", "x5")
    assert dataset.n_observations == 200
    np.testing.assert_allclose(
        np.linalg.norm(dataset.features - np.array(config.center), axis=1), 8.0
    )
    assert 0.8 < 1 - dataset.censoring_rate < 0.98


def test_generation_is_reproducible():
    a = generate_sphere_dataset(SphereConfig.dataset0(n=50, seed=2))
    b = generate_sphere_dataset(SphereConfig.dataset0(n=50, seed=2))

    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.events, b.events)


def test_without_events_the_shortest_time_is_one():
    dataset = generate_sphere_dataset(SphereConfig(n=20, event_probability=0.0))

    assert dataset.events.sum() == 1
    assert dataset.events[np.argmin(dataset.times)]


def test_dimensions_must_match():
    with pytest.raises(ValueError):
        SphereConfig(center=(0.0, 0.0), coefficients=(0.1,))
