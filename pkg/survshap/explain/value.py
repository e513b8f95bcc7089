"""Coalition value function shared by the SurvSHAP(t) estimators

A coalition is a bitmask over features: bit d set means feature d takes the value of
the explained observation x*, the other features come from a background row. The value
of a coalition is the mean predicted survival curve over the background composites.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from survshap.core import TimeGrid
from survshap.models.model import AbstractSurvivalModel

log = logging.getLogger(__name__)

MAX_FEATURES = 62
MAX_BATCH_ROWS = 20_000


def mask_matrix(masks: np.ndarray, p: int) -> np.ndarray:
    """Binary (coalitions, features) indicator matrix of integer bitmasks"""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(p, dtype=np.int64)) & 1).astype(bool)


def mask_sizes(masks: np.ndarray, p: int) -> np.ndarray:
    return mask_matrix(masks, p).sum(axis=1)


class CoalitionValue:
    """
    Memoized value function e_t(S) for one explained observation.

    ``values`` evaluates many coalitions at once; model calls are batched up to
    ``MAX_BATCH_ROWS`` composite rows.
    """

    def __init__(
        self,
        model: AbstractSurvivalModel,
        x: np.ndarray,
        background: np.ndarray,
        grid: TimeGrid,
    ):
        self.model = model
        self.x = model.check_features(x)[0]
        self.background = model.check_features(background)
        if len(self.background) == 0:
            raise ValueError("the background sample is empty")
        self.p = len(self.x)
        if self.p > MAX_FEATURES:
            raise ValueError(f"coalitions support at most {MAX_FEATURES} features, got {self.p}")
        self.grid = grid
        self.full_mask = (1 << self.p) - 1
        self.n_evaluations = 0
        self._cache: dict[int, np.ndarray] = {}
        self._cache[self.full_mask] = model.predict_survival_matrix(self.x[None, :], grid)[0]
        self._cache[0] = model.predict_survival_matrix(self.background, grid).mean(axis=0)

    @property
    def prediction(self) -> np.ndarray:
        return self._cache[self.full_mask]

    @property
    def baseline(self) -> np.ndarray:
        return self._cache[0]

    def values(self, masks: Iterable[int]) -> np.ndarray:
        """Value curves of the given coalitions, shape (coalitions, times)"""
        masks = [int(m) for m in masks]
        missing = sorted({m for m in masks if m not in self._cache})
        chunk = max(1, MAX_BATCH_ROWS // len(self.background))
        for start in range(0, len(missing), chunk):
            self._evaluate(missing[start : start + chunk])
        if not masks:
            return np.empty((0, len(self.grid)))
        return np.stack([self._cache[m] for m in masks])

    def _evaluate(self, masks: list[int]) -> None:
        present = mask_matrix(np.array(masks), self.p)
        b = len(self.background)
        composites = np.repeat(self.background[None, :, :], len(masks), axis=0)
        composites = np.where(present[:, None, :], self.x[None, None, :], composites)
        survival = self.model.predict_survival_matrix(composites.reshape(-1, self.p), self.grid)
        means = survival.reshape(len(masks), b, len(self.grid)).mean(axis=1)
        for mask, curve in zip(masks, means, strict=True):
            self._cache[mask] = curve
        self.n_evaluations += len(masks)
        log.debug(f"Evaluated {len(masks)} coalitions over {b} background rows")


def shapley_kernel_weight(p: int, s: int) -> float:
    """w = (p - 1) / (C(p, s) s (p - s)), infinite for the empty and the full coalition"""
    if not 0 <= s <= p:
        raise ValueError(f"coalition size {s} outside 0..{p}")
    if s == 0 or s == p:
        return float("inf")
    return float((p - 1) / (comb(p, s, exact=True) * s * (p - s)))


@dataclass(frozen=True, eq=False)
class CoalitionDesign:
    """Interior coalitions with their regression weights"""

    masks: np.ndarray
    weights: np.ndarray
    p: int
    mapping: str = "marginal background replacement"

    @property
    def Z(self) -> np.ndarray:
        return mask_matrix(self.masks, self.p).astype(float)

    @classmethod
    def enumerate(cls, p: int) -> "CoalitionDesign":
        """All 2^p - 2 interior coalitions with Shapley kernel weights"""
        masks = np.arange(1, (1 << p) - 1, dtype=np.int64)
        sizes = mask_sizes(masks, p)
        weights = np.array([shapley_kernel_weight(p, int(s)) for s in sizes])
        return cls(masks, weights, p)

    @classmethod
    def sample(cls, p: int, n: int, rng: np.random.Generator) -> "CoalitionDesign":
        """
        Coalitions drawn from the Shapley kernel distribution with equal weights.

        The size s is drawn proportionally to (p - 1) / (s (p - s)), then a uniform
        subset of that size.
        """
        sizes = np.arange(1, p)
        probabilities = (p - 1) / (sizes * (p - sizes))
        probabilities = probabilities / probabilities.sum()
        drawn = rng.choice(sizes, size=n, p=probabilities)
        masks = np.empty(n, dtype=np.int64)
        for i, s in enumerate(drawn):
            members = rng.choice(p, size=s, replace=False)
            masks[i] = np.sum(np.int64(1) << members.astype(np.int64))
        return cls(masks, np.ones(n), p, "marginal background replacement, sampled")
