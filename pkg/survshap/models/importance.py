import logging

import numpy as np

from survshap.core import SurvivalDataset
from survshap.eval.metrics import default_window, integrated_brier
from survshap.models.model import AbstractSurvivalModel
from survshap.models.ranking import ImportanceRanking

log = logging.getLogger(__name__)


def permutation_importance(
    model: AbstractSurvivalModel,
    dataset: SurvivalDataset,
    repeats: int = 5,
    seed: int = 0,
    window: tuple[float, float] | None = None,
) -> ImportanceRanking:
    """
    Permutational variable importance with the integrated Brier score as loss.

    Every column is shuffled ``repeats`` times; the score of a feature is the mean
    increase of the integrated Brier score over ``window`` (first to last event time of
    ``dataset`` by default).

    :param model: fitted survival model
    :param dataset: evaluation data
    :param repeats: shuffles per feature
    :param seed: seed of the shuffles, feature d repeat r uses the stream (seed, d, r)
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    t_start, t_end = default_window(dataset) if window is None else window
    reference = integrated_brier(model, dataset, t_start, t_end)
    scores = np.zeros(dataset.n_features)
    for d in range(dataset.n_features):
        losses = []
        for r in range(repeats):
            features = dataset.features.copy()
            rng = np.random.default_rng([seed, d, r])
            features[:, d] = rng.permutation(features[:, d])
            losses.append(integrated_brier(model, dataset.with_features(features), t_start, t_end))
        scores[d] = np.mean(losses) - reference
        log.debug(f"Permutation importance of {dataset.feature_names[d]}: {scores[d]:.6f}")
    return ImportanceRanking.from_scores(scores, dataset.feature_names)
