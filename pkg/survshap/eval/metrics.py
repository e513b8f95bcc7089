"""Evaluation metrics for survival models and their explanations

Curves over an explanation grid are passed as arrays whose last axis runs over the grid
times: ``(observations, times)`` for predictions and reconstructions,
``(observations, variables, times)`` for attributions.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from survshap.core import (
    SurvivalDataset,
    TimeGrid,
    build_event_grid,
    censoring_kaplan_meier,
    curve_before,
    integrate_values,
    values_at,
)
from survshap.models.model import AbstractSurvivalModel
from survshap.models.ranking import ImportanceRanking

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MetricCurve:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.grid),):
            raise ValueError(f"{values.shape} metric values for {len(self.grid)} times")
        if not np.all(np.isfinite(values)):
            raise ValueError("metric values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def ipcw_brier(
    survival: np.ndarray,
    dataset: SurvivalDataset,
    times: np.ndarray,
    censoring: SurvivalDataset | None = None,
) -> np.ndarray:
    """
    Brier score with inverse probability of censoring weights.

    Events at or before t are weighted by 1 / G(y-), observations still at risk after t
    by 1 / G(t); observations censored before t get weight 0. Observations whose
    required G is 0 are dropped from the mean.

    :param survival: predicted survival, one row per observation and one column per time
    :param dataset: observed times and events
    :param times: evaluation times
    :param censoring: data for the Kaplan-Meier censoring estimate G, ``dataset`` by default
    :return: one score per time
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    survival = np.atleast_2d(survival)
    if survival.shape != (dataset.n_observations, len(times)):
        raise ValueError(
            f"expected predictions of shape {(dataset.n_observations, len(times))}, "
            f"got {survival.shape}"
        )
    G = censoring_kaplan_meier(dataset if censoring is None else censoring)
    if G is None:
        g_observed = np.ones(dataset.n_observations)
        g_times = np.ones(len(times))
    else:
        g_observed = np.array([curve_before(G, y) for y in dataset.times])
        g_times = values_at(G, times)

    y = dataset.times[:, None]
    died = dataset.events[:, None] & (y <= times[None, :])
    survived = y > times[None, :]
    g_required = np.where(died, g_observed[:, None], np.where(survived, g_times[None, :], 1.0))
    usable = g_required > 0
    dropped = int(np.sum(~usable & (died | survived)))
    if dropped:
        log.warning(f"Dropped {dropped} observation-time pairs with zero censoring survival")

    # censored before t: weight 0, still counted
    weights = np.where(usable & (died | survived), 1.0 / np.where(usable, g_required, 1.0), 0.0)
    squared_error = (survived.astype(float) - survival) ** 2
    return np.sum(weights * squared_error, axis=0) / np.maximum(usable.sum(axis=0), 1)


def _survival_at(model: AbstractSurvivalModel, dataset: SurvivalDataset, times: np.ndarray):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= 0):
        raise ValueError("Brier score times must be > 0")
    order = np.argsort(times)
    unique, inverse = np.unique(times[order], return_inverse=True)
    predictions = model.predict_survival_matrix(dataset.features, TimeGrid(unique))
    result = np.empty((dataset.n_observations, len(times)))
    result[:, order] = predictions[:, inverse]
    return result


def brier_score(model: AbstractSurvivalModel, dataset: SurvivalDataset, t: float) -> float:
    survival = _survival_at(model, dataset, t)
    return float(ipcw_brier(survival, dataset, np.array([t]))[0])


def brier_curve(
    model: AbstractSurvivalModel, dataset: SurvivalDataset, grid: TimeGrid | None = None
) -> MetricCurve:
    """Brier score at every time of ``grid``, the dataset event grid by default"""
    grid = build_event_grid(dataset) if grid is None else grid
    survival = model.predict_survival_matrix(dataset.features, grid)
    return MetricCurve(grid, ipcw_brier(survival, dataset, grid.times))


def default_window(dataset: SurvivalDataset) -> tuple[float, float]:
    """First and last event time of the dataset"""
    grid = build_event_grid(dataset)
    return float(grid.times[0]), grid.last


def integrated_brier(
    model: AbstractSurvivalModel,
    dataset: SurvivalDataset,
    t_start: float | None = None,
    t_end: float | None = None,
) -> float:
    """
    Time-normalized integral of the Brier score over [t_start, t_end].

    The score is evaluated at ``t_start`` and at the event times inside the window and
    integrated as a step function. The window defaults to the first and last event times.
    """
    first, last = default_window(dataset)
    t_start = first if t_start is None else t_start
    t_end = last if t_end is None else t_end
    if t_start >= t_end:
        raise ValueError(f"t_start ({t_start}) must be smaller than t_end ({t_end})")
    grid_times = build_event_grid(dataset).times
    knots = np.concatenate(([t_start], grid_times[(grid_times > t_start) & (grid_times < t_end)]))
    survival = _survival_at(model, dataset, knots)
    scores = ipcw_brier(survival, dataset, knots)
    return float(integrate_values(knots, scores, t_start, t_end) / (t_end - t_start))


def _column_at(grid: TimeGrid, values: np.ndarray, t: float, default: float) -> np.ndarray:
    index = int(np.searchsorted(grid.times, t, side="right")) - 1
    if index < 0:
        return np.full(values.shape[:-1], default)
    return values[..., index]


def local_accuracy_curve(
    reconstructions: np.ndarray, predictions: np.ndarray, grid: TimeGrid
) -> MetricCurve:
    """
    Normalized deviation between predictions and explanation reconstructions.

    sigma(t) = sqrt(E[(S - reconstruction)^2] / E[S^2]) over the observations.
    """
    reconstructions = np.atleast_2d(reconstructions)
    predictions = np.atleast_2d(predictions)
    if reconstructions.shape != predictions.shape:
        raise ValueError("reconstructions and predictions must be aligned")
    denominator = np.mean(predictions**2, axis=0)
    if np.any(denominator == 0):
        raise ValueError("local accuracy is undefined where every prediction is 0")
    return MetricCurve(
        grid, np.sqrt(np.mean((predictions - reconstructions) ** 2, axis=0) / denominator)
    )


def local_accuracy_sigma(
    reconstructions: np.ndarray, predictions: np.ndarray, grid: TimeGrid, t: float
) -> float:
    predicted = _column_at(grid, np.atleast_2d(predictions), t, 1.0)
    reconstructed = _column_at(grid, np.atleast_2d(reconstructions), t, 1.0)
    denominator = np.mean(predicted**2)
    if denominator == 0:
        raise ValueError(f"local accuracy is undefined at t={t}, every prediction is 0")
    return float(np.sqrt(np.mean((predicted - reconstructed) ** 2) / denominator))


def csp(
    attributions: np.ndarray,
    grid: TimeGrid,
    alpha: float = 0.05,
    t_start: float | None = None,
    t_end: float | None = None,
) -> float:
    """
    Changing Sign Proportion of one variable.

    Fraction of observations whose attribution curve is >= 0 on more than ``alpha`` of
    the window and <= 0 on more than ``alpha`` of it. Zeros count toward both signs.

    :param attributions: attribution curves of one variable, one row per observation
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must be in (0, 0.5), got {alpha}")
    t_start = 0.0 if t_start is None else t_start
    t_end = grid.last if t_end is None else t_end
    attributions = np.atleast_2d(attributions)
    length = t_end - t_start
    positive = integrate_values(
        grid.times, (attributions >= 0).astype(float), t_start, t_end, default=1.0
    )
    negative = integrate_values(
        grid.times, (attributions <= 0).astype(float), t_start, t_end, default=1.0
    )
    changing = (positive / length > alpha) & (negative / length > alpha)
    return float(changing.mean())


def _check_aligned(explanations: np.ndarray, ground_truth: np.ndarray) -> None:
    if explanations.shape != ground_truth.shape:
        raise ValueError(
            f"explanations {explanations.shape} and ground truth {ground_truth.shape} "
            "must be aligned"
        )


def _mean_correlation(explanations: np.ndarray, ground_truth: np.ndarray) -> np.ndarray:
    """Mean Pearson correlation over the first axis of (observations, variables, ...)"""
    a = np.moveaxis(explanations, 1, -1)
    b = np.moveaxis(ground_truth, 1, -1)
    usable = (np.ptp(a, axis=-1) > 0) & (np.ptp(b, axis=-1) > 0)
    skipped = int(np.sum(~usable))
    if skipped:
        log.warning(f"Skipped {skipped} zero-variance attribution vectors in GT-Shapley")
    correlation = np.full(usable.shape, np.nan)
    if usable.any():
        correlation[usable] = stats.pearsonr(a[usable], b[usable], axis=-1).statistic
    counted = usable.sum(axis=0)
    total = np.where(usable, correlation, 0.0).sum(axis=0)
    return np.where(counted > 0, total / np.maximum(counted, 1), np.nan)


def gt_shapley(explanations: np.ndarray, ground_truth: np.ndarray) -> float:
    """
    Mean Pearson correlation between estimated and reference attribution vectors.

    :param explanations: attributions at one time, shape (observations, variables)
    :param ground_truth: reference attributions of the same shape
    :return: the mean correlation, NaN when every observation was skipped
    """
    explanations = np.atleast_2d(explanations)
    ground_truth = np.atleast_2d(ground_truth)
    _check_aligned(explanations, ground_truth)
    if explanations.shape[1] < 2:
        raise ValueError("GT-Shapley needs at least two variables")
    return float(_mean_correlation(explanations, ground_truth))


def gt_shapley_curve(
    explanations: np.ndarray, ground_truth: np.ndarray, grid: TimeGrid
) -> MetricCurve:
    """GT-Shapley at every grid time where it is defined"""
    _check_aligned(explanations, ground_truth)
    if explanations.shape[1] < 2:
        raise ValueError("GT-Shapley needs at least two variables")
    values = _mean_correlation(explanations, ground_truth)
    return _defined_curve(grid, values, "GT-Shapley")


def normalized_rmse(explanations: np.ndarray, ground_truth: np.ndarray) -> float:
    """
    sqrt(E[(phi - phi_true)^2] / E[phi_true^2]) over observations of one variable at one time.

    NaN when every reference attribution is 0.
    """
    explanations = np.asarray(explanations, dtype=float)
    ground_truth = np.asarray(ground_truth, dtype=float)
    _check_aligned(explanations, ground_truth)
    denominator = np.mean(ground_truth**2)
    if denominator == 0:
        log.warning("Normalized RMSE is undefined, every reference attribution is 0")
        return float("nan")
    return float(np.sqrt(np.mean((explanations - ground_truth) ** 2) / denominator))


def normalized_rmse_curve(
    explanations: np.ndarray, ground_truth: np.ndarray, grid: TimeGrid, variable: int
) -> MetricCurve:
    """Normalized RMSE of one variable at every grid time where it is defined"""
    _check_aligned(explanations, ground_truth)
    estimate = explanations[:, variable, :]
    truth = ground_truth[:, variable, :]
    denominator = np.mean(truth**2, axis=0)
    residual = np.mean((estimate - truth) ** 2, axis=0)
    values = np.full(len(grid), np.nan)
    defined = denominator > 0
    values[defined] = np.sqrt(residual[defined] / denominator[defined])
    return _defined_curve(grid, values, "normalized RMSE")


def _defined_curve(grid: TimeGrid, values: np.ndarray, name: str) -> MetricCurve:
    defined = np.isfinite(values)
    if not defined.any():
        raise ValueError(f"{name} is undefined at every grid time")
    if not defined.all():
        log.warning(f"{name} is undefined at {int(np.sum(~defined))} grid times")
    return MetricCurve(TimeGrid(grid.times[defined]), values[defined])


def kendall_tau_h(ranking: ImportanceRanking, reference: ImportanceRanking) -> float:
    """
    Additive hyperbolic weighted Kendall correlation.

    A pair of features is weighted by 1 / (r_i + 1) + 1 / (r_j + 1) with r the 0-based
    ranks of ``reference``.
    """
    p = len(reference.order)
    if len(ranking.order) != p:
        raise ValueError(f"rankings differ in length: {len(ranking.order)} and {p}")
    if p < 2:
        raise ValueError("weighted Kendall correlation needs at least two features")
    statistic, _ = stats.weightedtau(
        -ranking.ranks, -reference.ranks, rank=reference.ranks, additive=True
    )
    return float(statistic)


def mean_kendall_tau_h(
    rankings: Sequence[ImportanceRanking], references: Sequence[ImportanceRanking]
) -> float:
    if len(rankings) != len(references) or len(rankings) == 0:
        raise ValueError("rankings and references must be non-empty and aligned")
    return float(np.mean([kendall_tau_h(a, b) for a, b in zip(rankings, references, strict=True)]))
