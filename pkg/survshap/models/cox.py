"""Cox Proportional Hazards model fitted by Newton-Raphson on the Breslow partial likelihood"""

import logging
from dataclasses import dataclass

import numpy as np

from survshap.core import CurveKind, StepCurve, SurvivalDataset, TimeGrid, build_event_grid
from survshap.errors import ConvergenceError, SingularMatrixError
from survshap.models.model import AbstractSurvivalModel, chf_on_grid
from survshap.models.ranking import ImportanceRanking
from survshap.utils.linalg import find_singular_dimension

log = logging.getLogger(__name__)

MAX_STEP_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class CoxModel(AbstractSurvivalModel):
    """
    Fitted Cox model.

    The linear predictor is b^T (x - feature_means); ``baseline_chf`` is the Breslow
    estimate for an observation at the feature means.
    """

    coefficients: np.ndarray
    baseline_chf: StepCurve
    feature_means: np.ndarray
    feature_names: tuple[str, ...]
    n_iter: int = 0
    log_likelihood: float = float("nan")

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float)
        means = np.array(self.feature_means, dtype=float)
        if not np.all(np.isfinite(coefficients)):
            raise ValueError("Cox coefficients must be finite")
        if coefficients.shape != means.shape or len(coefficients) != len(self.feature_names):
            raise ValueError("coefficients, feature means and names must have equal length")
        if self.baseline_chf.kind is not CurveKind.CUMULATIVE_HAZARD:
            raise ValueError("the baseline must be a cumulative hazard curve")
        coefficients.setflags(write=False)
        means.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "feature_means", means)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def event_grid(self) -> TimeGrid:
        return self.baseline_chf.grid

    def linear_predictor(self, X: np.ndarray) -> np.ndarray:
        X = self.check_features(X)
        return (X - self.feature_means) @ self.coefficients

    def predict_chf_matrix(self, X: np.ndarray, grid: TimeGrid | None = None) -> np.ndarray:
        baseline = chf_on_grid(self.baseline_chf.values, self.event_grid, grid)
        return np.outer(np.exp(self.linear_predictor(X)), baseline)

    def predict_survival_matrix(self, X: np.ndarray, grid: TimeGrid | None = None) -> np.ndarray:
        return np.clip(np.exp(-self.predict_chf_matrix(X, grid)), 0.0, 1.0)


def _partial_likelihood(
    beta: np.ndarray,
    X: np.ndarray,
    events: np.ndarray,
    risk_end: np.ndarray,
    deaths: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Breslow log partial likelihood with gradient and Hessian

    ``X`` and ``events`` are sorted by decreasing time; the risk set of the j-th distinct
    event time is the first ``risk_end[j]`` rows.
    """
    eta = X @ beta
    shift = eta.max()
    w = np.exp(eta - shift)
    s0 = np.cumsum(w)[risk_end - 1]
    s1 = np.cumsum(w[:, None] * X, axis=0)[risk_end - 1]
    s2 = np.cumsum(w[:, None, None] * X[:, :, None] * X[:, None, :], axis=0)[risk_end - 1]

    mean = s1 / s0[:, None]
    loglik = eta[events].sum() - np.sum(deaths * (np.log(s0) + shift))
    gradient = X[events].sum(axis=0) - deaths @ mean
    covariance = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
    hessian = -np.tensordot(deaths, covariance, axes=1)
    return float(loglik), gradient, hessian


def cox_fit(dataset: SurvivalDataset, max_iter: int = 100, tol: float = 1e-9) -> CoxModel:
    """
    Fit a Cox Proportional Hazards model.

    Newton-Raphson runs on centered features divided by their standard deviation; ``tol``
    bounds the max-norm of that gradient. Steps are halved while the likelihood decreases.

    :param dataset: training data, needs more rows than features
    :param max_iter: maximum number of Newton iterations
    :param tol: convergence threshold on the max-norm of the standardized gradient, which is
        the raw-coefficient gradient divided by the feature standard deviations
    :return: the fitted model with its Breslow baseline cumulative hazard
    """
    n, p = dataset.features.shape
    names = dataset.feature_names
    if n <= p:
        raise ValueError(f"Cox fit needs more observations ({n}) than features ({p})")

    means = dataset.features.mean(axis=0)
    centered = dataset.features - means
    scale = centered.std(axis=0)
    constant = np.nonzero(scale == 0)[0]
    if len(constant):
        raise SingularMatrixError("constant feature", int(constant[0]), names[constant[0]])
    singular = find_singular_dimension(centered / scale)
    if singular is not None:
        raise SingularMatrixError("collinear features", singular, names[singular])
    scaled = centered / scale

    order = np.argsort(-dataset.times, kind="stable")
    X = scaled[order]
    times = dataset.times[order]
    events = dataset.events[order]
    grid = build_event_grid(dataset)
    deaths = np.array([np.sum(events & (times == t)) for t in grid.times], dtype=float)
    risk_end = n - np.searchsorted(np.sort(dataset.times), grid.times, side="left")

    beta = np.zeros(p)
    loglik, gradient, hessian = _partial_likelihood(beta, X, events, risk_end, deaths)
    for iteration in range(max_iter + 1):
        gradient_norm = float(np.max(np.abs(gradient)))
        log.debug(f"Cox iteration {iteration}: loglik {loglik:.10f}, |grad| {gradient_norm:.3e}")
        if gradient_norm <= tol:
            break
        if iteration == max_iter:
            raise ConvergenceError(
                f"Cox fit did not converge in {max_iter} iterations", gradient_norm
            )

        singular = find_singular_dimension(-hessian)
        if singular is not None:
            raise SingularMatrixError("singular Hessian", singular, names[singular])
        step = np.linalg.solve(-hessian, gradient)
        for _ in range(MAX_STEP_HALVINGS):
            candidate = beta + step
            new = _partial_likelihood(candidate, X, events, risk_end, deaths)
            if np.isfinite(new[0]) and new[0] >= loglik - 1e-12 * abs(loglik):
                break
            step = step / 2
        else:
            raise ConvergenceError("Cox fit step halving failed", gradient_norm)
        beta = candidate
        loglik, gradient, hessian = new

    coefficients = beta / scale
    risk = np.exp(centered[order] @ coefficients)
    baseline = np.cumsum(deaths / np.cumsum(risk)[risk_end - 1])
    log.info(f"Fitted Cox model in {iteration} iterations, log partial likelihood {loglik:.4f}")
    return CoxModel(
        coefficients=coefficients,
        baseline_chf=StepCurve(grid, baseline, CurveKind.CUMULATIVE_HAZARD),
        feature_means=means,
        feature_names=names,
        n_iter=iteration,
        log_likelihood=loglik,
    )


def cox_predict(model: CoxModel, x: np.ndarray, grid: TimeGrid | None = None) -> StepCurve:
    """S(t|x) = exp(-H0(t) exp(b^T (x - means)))"""
    return model.predict_survival(x, grid)


def cox_local_ranking(model: CoxModel, x: np.ndarray) -> ImportanceRanking:
    """Rank features of one observation by |x^(d) b^(d)|"""
    x = model.check_features(x)[0]
    return ImportanceRanking.from_scores(np.abs(x * model.coefficients), model.feature_names)
