import logging

import numpy as np

from survshap.core import SurvivalDataset
from survshap.pydantic_models import SphereConfig

log = logging.getLogger(__name__)


def sample_sphere(
    n: int, center: np.ndarray, radius: float, rng: np.random.Generator
) -> np.ndarray:
    """Points uniform on the sphere surface, from normalized isotropic Gaussian directions"""
    center = np.asarray(center, dtype=float)
    directions = rng.standard_normal((n, len(center)))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return center + radius * directions


def weibull_time(
    u: np.ndarray, x: np.ndarray, coefficients: np.ndarray, lam: float, shape: float
) -> np.ndarray:
    """Invert S(t | x) = exp(-lam exp(b^T x) t^v) at u: t = (-ln u / (lam exp(b^T x)))^(1/v)"""
    risk = np.exp(np.atleast_2d(x) @ np.asarray(coefficients, dtype=float))
    return (-np.log(u) / (lam * risk)) ** (1 / shape)


def generate_sphere_dataset(config: SphereConfig | None = None) -> SurvivalDataset:
    """
    Weibull proportional hazards data on a sphere.

    Covariates are uniform on the sphere of radius R around the center, times follow the
    Weibull law with coefficients b, and each time is an event with probability
    ``event_probability``.
    """
    config = SphereConfig() if config is None else config
    rng = np.random.default_rng(config.seed)
    X = sample_sphere(config.n, np.array(config.center), config.radius, rng)
    # 1 - U lies in (0, 1], so the log is finite
    u = 1.0 - rng.random(config.n)
    times = weibull_time(u, X, np.array(config.coefficients), config.lam, config.shape)
    events = rng.random(config.n) < config.event_probability
    if not events.any():
        events[np.argmin(times)] = True
        log.warning("No event was drawn, the shortest time is marked as an event")
    names = tuple(f"x{d + 1}" for d in range(len(config.center)))
    dataset = SurvivalDataset(X, names, times, events.astype(int))
    log.info(
        f"Generated {config.n} sphere observations, event rate {1 - dataset.censoring_rate:.3f}"
    )
    return dataset
