import numpy as np
import pytest

from survshap.core import SurvivalDataset


def simulate_cox(n: int, coefficients, seed: int = 0, censoring_rate: float = 0.05):
    """Exponential proportional hazards data with independent exponential censoring"""
    rng = np.random.default_rng(seed)
    coefficients = np.asarray(coefficients, dtype=float)
    X = rng.normal(size=(n, len(coefficients)))
    latent = rng.exponential(1 / (0.1 * np.exp(X @ coefficients)))
    censoring = rng.exponential(1 / censoring_rate, n)
    names = tuple(f"x{d + 1}" for d in range(len(coefficients)))
    return SurvivalDataset(
        X, names, np.minimum(latent, censoring), (latent <= censoring).astype(int)
    )


@pytest.fixture
def hand_dataset():
    return SurvivalDataset(
        features=np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [4.0, 1.0]]),
        feature_names=("a", "b"),
        times=np.array([1.0, 2.0, 2.0, 3.0, 4.0]),
        events=np.array([1, 1, 0, 1, 0]),
    )


@pytest.fixture(scope="session")
def cox_data():
    return simulate_cox(300, [0.8, -0.5, 0.0], seed=1)
