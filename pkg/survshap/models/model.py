import abc

import numpy as np

from survshap.core import CurveKind, StepCurve, TimeGrid


class AbstractSurvivalModel(abc.ABC):
    """
    A fitted model mapping feature vectors to survival curves.

    Subclasses provide ``feature_names``, the training ``event_grid`` and at least one
    of the matrix predictions; each one defaults to the other via S = exp(-H).
    """

    feature_names: tuple[str, ...]
    event_grid: TimeGrid

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def check_features(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def predict_survival_matrix(self, X: np.ndarray, grid: TimeGrid | None = None) -> np.ndarray:
        """Survival probabilities, one row per observation and one column per grid time"""
        return np.clip(np.exp(-self.predict_chf_matrix(X, grid)), 0.0, 1.0)

    def predict_chf_matrix(self, X: np.ndarray, grid: TimeGrid | None = None) -> np.ndarray:
        survival = self.predict_survival_matrix(X, grid)
        return -np.log(np.clip(survival, np.finfo(float).tiny, 1.0))

    def predict_survival(self, x: np.ndarray, grid: TimeGrid | None = None) -> StepCurve:
        grid = self.event_grid if grid is None else grid
        return StepCurve(grid, self.predict_survival_matrix(x, grid)[0], CurveKind.SURVIVAL)

    def predict_chf(self, x: np.ndarray, grid: TimeGrid | None = None) -> StepCurve:
        grid = self.event_grid if grid is None else grid
        return StepCurve(grid, self.predict_chf_matrix(x, grid)[0], CurveKind.CUMULATIVE_HAZARD)


def chf_on_grid(values: np.ndarray, source: TimeGrid, target: TimeGrid | None) -> np.ndarray:
    """Re-evaluate cumulative hazard steps (last axis over ``source``) on ``target``"""
    if target is None or target == source:
        return values
    index = np.searchsorted(source.times, target.times, side="right") - 1
    padded = np.concatenate((np.zeros(values.shape[:-1] + (1,)), values), axis=-1)
    return padded[..., index + 1]
