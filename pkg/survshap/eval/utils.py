from collections.abc import Sequence

import numpy as np
import pandas as pd

from survshap.core import SurvivalDataset
from survshap.models.ranking import ImportanceRanking


def quantile_window(
    dataset: SurvivalDataset, quantiles: tuple[float, float]
) -> tuple[float, float]:
    """Window bounded by quantiles of the observed times"""
    low, high = np.quantile(dataset.times, quantiles)
    return float(low), float(high)


def ranking_distribution(rankings: Sequence[ImportanceRanking]) -> pd.DataFrame:
    """
    Fraction of observations placing each variable at each rank

    returns a dataframe with the following columns
    - rank (1 is the most important)
    - variable
    - fraction

    Fractions of one rank sum to 1.
    """
    if len(rankings) == 0:
        raise ValueError("no rankings given")
    names = rankings[0].feature_names
    counts = np.zeros((len(names), len(names)))
    for ranking in rankings:
        if ranking.feature_names != names:
            raise ValueError("rankings cover different variables")
        counts[np.arange(len(names)), ranking.order] += 1
    fractions = counts / len(rankings)
    return pd.DataFrame(
        {
            "rank": np.repeat(np.arange(1, len(names) + 1), len(names)),
            "variable": np.tile(np.array(names, dtype=object), len(names)),
            "fraction": fractions.ravel(),
        }
    )


def top_k_agreement(
    rankings: Sequence[ImportanceRanking], references: Sequence[ImportanceRanking], k: int = 2
) -> float:
    """Fraction of observations whose top-k variable set equals the reference top-k set"""
    if len(rankings) != len(references) or len(rankings) == 0:
        raise ValueError("rankings and references must be non-empty and aligned")
    matches = [a.top(k) == b.top(k) for a, b in zip(rankings, references, strict=True)]
    return float(np.mean(matches))
