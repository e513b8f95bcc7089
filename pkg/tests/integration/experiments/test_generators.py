import numpy as np
import pytest

from survshap.dataset.exp1 import exp1_survival, simulate_exp1
from survshap.dataset.sphere import generate_sphere_dataset
from survshap.pydantic_models import Exp1Config, SphereConfig


# generating 5000 rows can take a few minutes
@pytest.mark.integration
def test_exp1_censoring_rate():
    rates = [
        simulate_exp1(Exp1Config(n=1000, seed=seed), n_jobs=-1).dataset.censoring_rate
        for seed in range(5)
    ]

    assert abs(np.mean(rates) - 0.331) <= 0.03


@pytest.mark.integration
def test_exp1_latent_times_invert_the_survival_function():
    sample = simulate_exp1(Exp1Config(n=200, seed=11), n_jobs=-1)

    for x, t, u in zip(sample.dataset.features, sample.latent_times, sample.uniforms, strict=True):
        assert abs(exp1_survival(t, x) - u) <= 1e-8


@pytest.mark.integration
def test_sphere_rows_lie_at_radius_8():
    for config in (SphereConfig.dataset0(seed=1), SphereConfig.dataset1(seed=1)):
        dataset = generate_sphere_dataset(config)
        distance = np.linalg.norm(dataset.features - np.array(config.center), axis=1)

        np.testing.assert_allclose(distance, 8.0, rtol=0, atol=1e-12)
