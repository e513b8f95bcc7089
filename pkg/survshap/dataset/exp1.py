"""Synthetic data with a time-dependent effect of x1

The hazard is h(t, x) = h0(t) exp[(-0.9 + 0.1 t + 0.9 ln t) x1 + 0.5 x2 - 0.2 x3 + 0.1 x4
+ 1e-6 x5] with h0(t) = exp(-17.8 + 6.5 t - 11 sqrt(t) ln t + 9.5 sqrt(t)). Latent times
are found by inverting the numerically integrated survival function; every row is then
censored by an administrative and a random right censoring time.
"""

import hashlib
import logging
import math
import os
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import quad
from scipy.optimize import brentq

from survshap.core import SurvivalDataset
from survshap.data import read_dataset, write_dataset
from survshap.errors import GenerationError
from survshap.pydantic_models import Exp1Config

log = logging.getLogger(__name__)

FEATURE_NAMES = ("x1", "x2", "x3", "x4", "x5")
STATIC_COEFFICIENTS = np.array([0.0, 0.5, -0.2, 0.1, 1e-6])
ROOT_TOLERANCE = 1e-8


def _check_positive(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("the hazard is defined for t > 0 only")
    return t


def baseline_hazard_exp1(t: float | np.ndarray) -> float | np.ndarray:
    t = _check_positive(t)
    sqrt_t = np.sqrt(t)
    return np.exp(-17.8 + 6.5 * t - 11 * sqrt_t * np.log(t) + 9.5 * sqrt_t)


def hazard_exp1(t: float | np.ndarray, x: np.ndarray) -> float | np.ndarray:
    """h(t, x) for t > 0"""
    t = _check_positive(t)
    x = np.asarray(x, dtype=float)
    effect = (-0.9 + 0.1 * t + 0.9 * np.log(t)) * x[0] + STATIC_COEFFICIENTS @ x
    return baseline_hazard_exp1(t) * np.exp(effect)


def _scalar_hazard(t: float, x1: float, static: float) -> float:
    # math instead of numpy: quad calls this on scalars
    sqrt_t = math.sqrt(t)
    log_t = math.log(t)
    return math.exp(
        -17.8 + 6.5 * t - 11 * sqrt_t * log_t + 9.5 * sqrt_t
        + (-0.9 + 0.1 * t + 0.9 * log_t) * x1
        + static
    )


def exp1_survival(t: float, x: np.ndarray, epsilon: float = 1e-6) -> float:
    """S(t, x) = exp(-integral of h(s, x) over (epsilon, t])"""
    if t <= epsilon:
        return 1.0
    x = np.asarray(x, dtype=float)
    static = float(STATIC_COEFFICIENTS @ x)
    chf, _ = quad(
        _scalar_hazard, epsilon, t, args=(float(x[0]), static),
        epsabs=1e-13, epsrel=1e-12, limit=200,
    )
    return math.exp(-chf)


def invert_survival(
    survival: Callable[[float], float],
    u: float,
    lower: float = 1e-6,
    horizon: float = 30.0,
) -> float:
    """
    Time t with S(t) = u, found with Brent's method on [lower, horizon].

    The horizon is doubled once when S(horizon) is still above u.

    :raises GenerationError: no sign change after the extension, or the root misses u by
        more than 1e-8
    """
    if not 0 < u < 1:
        raise ValueError(f"u must be in (0, 1), got {u}")

    def g(t: float) -> float:
        return survival(t) - u

    if g(lower) <= 0:
        return lower
    if g(horizon) > 0:
        log.debug(f"S({horizon}) = {survival(horizon):.3g} > u = {u:.3g}, extending horizon")
        horizon *= 2
        if g(horizon) > 0:
            raise GenerationError(
                f"no root of S(t) - {u} on [{lower}, {horizon}]: S stays above u"
            )
    root = brentq(g, lower, horizon, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(g(root)) > ROOT_TOLERANCE:
        raise GenerationError(f"root {root} misses u = {u} by {abs(g(root)):.3g}")
    return float(root)


@dataclass(frozen=True)
class Exp1Draw:
    features: np.ndarray
    latent_time: float
    uniform: float
    administrative: float
    right: float

    @property
    def time(self) -> float:
        return min(self.latent_time, self.administrative, self.right)

    @property
    def event(self) -> bool:
        return self.latent_time <= min(self.administrative, self.right)


def draw_observation(config: Exp1Config, index: int) -> Exp1Draw:
    """Observation ``index`` drawn from its own stream (seed, index)"""
    rng = np.random.default_rng([config.seed, index])
    x1, x2 = rng.binomial(1, 0.5, size=2)
    x3 = rng.normal(10.0, 2.0)
    x4 = rng.normal(20.0, 4.0)
    x5 = rng.normal(0.0, 1.0)
    features = np.array([x1, x2, x3, x4, x5], dtype=float)
    u = rng.uniform()
    while u == 0.0:
        u = rng.uniform()
    administrative = rng.uniform(*config.administrative_censoring)
    right = rng.uniform(*config.right_censoring)

    def survival(t: float) -> float:
        return exp1_survival(t, features, config.epsilon)

    try:
        latent = invert_survival(survival, u, config.epsilon, config.horizon)
    except GenerationError as e:
        raise GenerationError(f"observation {index}: {e}") from e
    return Exp1Draw(features, latent, u, administrative, right)


@dataclass(frozen=True, eq=False)
class Exp1Sample:
    dataset: SurvivalDataset
    latent_times: np.ndarray
    uniforms: np.ndarray
    censoring: np.ndarray


def simulate_exp1(config: Exp1Config, n_jobs: int = 1) -> Exp1Sample:
    """Generated dataset together with the latent times and censoring draws"""
    log.info(f"Generating {config.n} observations with seed {config.seed}")
    draws = Parallel(n_jobs=n_jobs)(
        delayed(draw_observation)(config, index) for index in range(config.n)
    )
    dataset = SurvivalDataset(
        features=np.array([d.features for d in draws]),
        feature_names=FEATURE_NAMES,
        times=np.array([d.time for d in draws]),
        events=np.array([d.event for d in draws], dtype=int),
    )
    log.info(f"Generated data with censoring rate {dataset.censoring_rate:.3f}")
    return Exp1Sample(
        dataset=dataset,
        latent_times=np.array([d.latent_time for d in draws]),
        uniforms=np.array([d.uniform for d in draws]),
        censoring=np.array([[d.administrative, d.right] for d in draws]),
    )


def generate_exp1(config: Exp1Config | None = None, n_jobs: int = 1) -> SurvivalDataset:
    config = Exp1Config() if config is None else config
    return simulate_exp1(config, n_jobs).dataset


def generate_reference(
    config: Exp1Config,
    n: int = 10_000,
    cache_dir: str | None = None,
    n_jobs: int = 1,
) -> SurvivalDataset:
    """
    A larger sample of the same law for reference explanations.

    It uses the seed ``config.seed + 1`` so it shares no rows with the explained data, and
    is cached as a dataset file in ``cache_dir`` when given.
    """
    reference = config.model_copy(update={"n": n, "seed": config.seed + 1})
    path = None
    if cache_dir is not None:
        digest = hashlib.sha1(reference.model_dump_json().encode()).hexdigest()[:10]
        path = os.path.join(cache_dir, f"exp1_reference_n{n}_seed{reference.seed}_{digest}.csv")
        if os.path.exists(path):
            log.info(f"Using cached reference sample {path}")
            return read_dataset(path)
    dataset = generate_exp1(reference, n_jobs)
    if path is not None:
        write_dataset(dataset, path)
    return dataset
