"""SurvLIME: a local Cox surrogate fitted to the black-box cumulative hazard near x*"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from survshap.core import (
    CurveKind,
    StepCurve,
    SurvivalDataset,
    TimeGrid,
    nelson_aalen,
    values_at,
)
from survshap.errors import SingularMatrixError
from survshap.models.model import AbstractSurvivalModel
from survshap.models.ranking import ImportanceRanking
from survshap.pydantic_models import SurvLimeParams
from survshap.utils.linalg import find_singular_dimension

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SurvLimeResult:
    coefficients: np.ndarray
    feature_names: tuple[str, ...]
    observation: np.ndarray
    baseline_chf: StepCurve
    params: SurvLimeParams = field(default_factory=SurvLimeParams)
    loss: float = 0.0
    n_clamped: int = 0

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float)
        if not np.all(np.isfinite(coefficients)):
            raise ValueError("surrogate coefficients must be finite")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "observation", np.array(self.observation, dtype=float))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def surrogate_survival(self, grid: TimeGrid | None = None) -> StepCurve:
        """exp(-H0(t) exp(b^T x*)), the surrogate's prediction at x*"""
        grid = self.baseline_chf.grid if grid is None else grid
        risk = np.exp(self.observation @ self.coefficients)
        chf = values_at(self.baseline_chf, grid.times) * risk
        return StepCurve(grid, np.clip(np.exp(-chf), 0.0, 1.0), CurveKind.SURVIVAL)


def epanechnikov(distance: np.ndarray, width: float) -> np.ndarray:
    u = distance / width
    return np.where(u < 1, 0.75 * (1 - u**2), 0.0)


def survlime(
    model: AbstractSurvivalModel,
    x: np.ndarray,
    dataset: SurvivalDataset,
    params: SurvLimeParams | None = None,
    n_neighbors: int | None = None,
    seed: int | None = None,
    grid: TimeGrid | None = None,
) -> SurvLimeResult:
    """
    Fit Cox coefficients b so that H0(t) exp(b^T x) follows the black-box CHF near x*.

    x* and ``n_neighbors - 1`` Gaussian perturbations (``scale`` times the feature
    standard deviations of ``dataset``) are weighted with an Epanechnikov kernel on
    their standardized distance to x*. The weighted least squares problem in log-CHF
    space, with grid segment lengths and optional curvature weights H(t_j, x_k)^2, is
    divided by the total weight and solved with a ridge penalty ``params.ridge`` on the
    coefficients measured in feature standard deviations.

    :param model: the black box
    :param x: explained observation
    :param dataset: data for the Nelson-Aalen baseline H0 and the feature scales
    :param params: neighbourhood and weighting settings
    :param n_neighbors: overrides ``params.n_neighbors``
    :param seed: overrides ``params.seed``
    :param grid: times of the CHF comparison, the model's event grid by default
    """
    params = SurvLimeParams() if params is None else params
    updates = {
        key: value
        for key, value in (("n_neighbors", n_neighbors), ("seed", seed))
        if value is not None
    }
    params = params.model_copy(update=updates)
    x = model.check_features(x)[0]
    p = len(x)
    if params.n_neighbors < p + 1:
        raise ValueError(f"SurvLIME needs at least {p + 1} neighbours, got {params.n_neighbors}")
    grid = model.event_grid if grid is None else grid

    scale = dataset.features.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    rng = np.random.default_rng(params.seed)
    noise = rng.standard_normal((params.n_neighbors - 1, p)) * params.scale * scale
    neighbors = np.vstack((x, x + noise))
    distance = np.linalg.norm((neighbors - x) / scale, axis=1)
    width = params.kernel_width or 1.05 * max(float(distance.max()), np.finfo(float).eps)
    kernel = epanechnikov(distance, width)

    chf = model.predict_chf_matrix(neighbors, grid)
    baseline_curve = nelson_aalen(dataset)
    baseline = values_at(baseline_curve, grid.times)
    clamped = chf <= params.clamp
    n_clamped = int(clamped.sum()) + int(np.sum(baseline <= params.clamp))
    if n_clamped:
        log.warning(f"Clamped {n_clamped} cumulative hazard values to {params.clamp}")
    chf = np.maximum(chf, params.clamp)
    baseline = np.maximum(baseline, params.clamp)

    residual = np.log(chf) - np.log(baseline)[None, :]
    weights = kernel[:, None] * grid.segment_lengths()[None, :]
    if params.curvature_weights:
        weights = weights * chf**2
    row_weight = weights.sum(axis=1)
    # normal equations in units of the feature standard deviations
    standardized = neighbors / scale
    gram = standardized.T @ (row_weight[:, None] * standardized)
    rhs = standardized.T @ (weights * residual).sum(axis=1)
    total = weights.sum()
    gram = gram / total + params.ridge * np.eye(p)
    rhs = rhs / total

    singular = find_singular_dimension(gram)
    if singular is not None:
        raise SingularMatrixError("SurvLIME normal equations are singular", singular,
                                  model.feature_names[singular])
    try:
        coefficients = linalg.solve(gram, rhs, assume_a="pos") / scale
    except linalg.LinAlgError as e:
        raise SingularMatrixError(f"SurvLIME normal equations: {e}", 0) from e

    fitted = neighbors @ coefficients
    loss = float(np.sum(weights * (residual - fitted[:, None]) ** 2))
    log.debug(f"SurvLIME loss {loss:.6g} with {params.n_neighbors} neighbours")
    return SurvLimeResult(
        coefficients=coefficients,
        feature_names=model.feature_names,
        observation=x,
        baseline_chf=baseline_curve,
        params=params,
        loss=loss,
        n_clamped=n_clamped,
    )


def survlime_ranking(result: SurvLimeResult, x: np.ndarray | None = None) -> ImportanceRanking:
    """Rank features by |x^(d) b^(d)|, x* of the result by default"""
    x = result.observation if x is None else np.asarray(x, dtype=float)
    return ImportanceRanking.from_scores(np.abs(x * result.coefficients), result.feature_names)
