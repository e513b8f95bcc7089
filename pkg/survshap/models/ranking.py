from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ImportanceRanking:
    """
    Features ordered by decreasing importance.

    ``order`` holds 0-based feature indices, most important first; ``scores`` is
    indexed by feature. Ties keep the lower feature index first.
    """

    order: np.ndarray
    scores: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        order = np.asarray(self.order, dtype=int)
        scores = np.asarray(self.scores, dtype=float)
        p = len(self.feature_names)
        if sorted(order.tolist()) != list(range(p)):
            raise ValueError(f"order must be a permutation of 0..{p - 1}, got {order}")
        if scores.shape != (p,):
            raise ValueError(f"expected {p} scores, got {scores.shape}")
        order.setflags(write=False)
        scores.setflags(write=False)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_scores(cls, scores: np.ndarray, feature_names: Sequence[str]) -> "ImportanceRanking":
        scores = np.asarray(scores, dtype=float)
        return cls(np.argsort(-scores, kind="stable"), scores, tuple(feature_names))

    @property
    def ranks(self) -> np.ndarray:
        """0-based rank of every feature"""
        ranks = np.empty(len(self.order), dtype=int)
        ranks[self.order] = np.arange(len(self.order))
        return ranks

    @property
    def names(self) -> list[str]:
        return [self.feature_names[i] for i in self.order]

    def top(self, k: int) -> set[int]:
        return set(self.order[:k].tolist())
