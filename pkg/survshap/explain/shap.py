"""SurvSHAP(t): Shapley attributions of predicted survival curves

Every estimator evaluates the value function of ``explain.value`` for all grid times at
once and returns a ``SurvShapResult`` whose attribution rows sum, together with the
baseline, to the model prediction at x*.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from math import factorial

import numpy as np
from joblib import Parallel, delayed

from survshap.core import CurveKind, StepCurve, SurvivalDataset, TimeGrid, integrate_values
from survshap.errors import MethodRefusedError, RankDeficientDesignError
from survshap.explain.value import CoalitionDesign, CoalitionValue, mask_sizes
from survshap.models.model import AbstractSurvivalModel
from survshap.models.ranking import ImportanceRanking
from survshap.pydantic_models import ExplainMethod, ExplainParams

log = logging.getLogger(__name__)

FULL_ENUMERATION_MAX_FEATURES = 13
PERMUTATION_CHUNK = 256

Seed = int | Sequence[int]


@dataclass(frozen=True, eq=False)
class SurvShapResult:
    """
    Attribution curves of one observation.

    ``attributions`` has one row per feature and one column per grid time. The
    normalized curves, the zero-denominator flags and the aggregated importance are
    filled in by the estimators.
    """

    feature_names: tuple[str, ...]
    grid: TimeGrid
    attributions: np.ndarray
    baseline: np.ndarray
    prediction: np.ndarray
    method: ExplainMethod
    observation: np.ndarray
    settings: dict = field(default_factory=dict)
    normalized: np.ndarray | None = None
    zero_denominator: np.ndarray | None = None
    psi: np.ndarray | None = None

    def __post_init__(self):
        p, m = len(self.feature_names), len(self.grid)
        if np.shape(self.attributions) != (p, m):
            raise ValueError(f"expected attributions of shape {(p, m)}")
        if np.shape(self.baseline) != (m,) or np.shape(self.prediction) != (m,):
            raise ValueError("baseline and prediction must cover the grid")
        for name in ("attributions", "baseline", "prediction", "observation"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "method", ExplainMethod(self.method))

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def curves(self) -> list[StepCurve]:
        return [StepCurve(self.grid, row, CurveKind.ATTRIBUTION) for row in self.attributions]

    @property
    def normalized_curves(self) -> list[StepCurve]:
        if self.normalized is None:
            raise ValueError("the result has not been normalized")
        return [StepCurve(self.grid, row, CurveKind.ATTRIBUTION) for row in self.normalized]

    @property
    def baseline_curve(self) -> StepCurve:
        return StepCurve(self.grid, self.baseline, CurveKind.SURVIVAL)

    def reconstruction(self) -> np.ndarray:
        """e(empty) + sum of the attributions"""
        return self.baseline + self.attributions.sum(axis=0)

    @property
    def max_reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.reconstruction() - self.prediction)))

    def ranking(self) -> ImportanceRanking:
        if self.psi is None:
            raise ValueError("the aggregated importance has not been computed")
        return ImportanceRanking.from_scores(self.psi, self.feature_names)


def normalize_attributions(result: SurvShapResult) -> SurvShapResult:
    """phi*_d(t) = phi_d(t) / sum_j |phi_j(t)|, set to 0 where the denominator is 0"""
    denominator = np.abs(result.attributions).sum(axis=0)
    zero = denominator == 0
    normalized = np.where(zero, 0.0, result.attributions / np.where(zero, 1.0, denominator))
    if zero.any():
        log.debug(f"{int(zero.sum())} grid times have all attributions equal to 0")
    return replace(result, normalized=normalized, zero_denominator=zero)


def importance_scores(result: SurvShapResult, t_max: float | None = None) -> np.ndarray:
    t_max = result.grid.last if t_max is None else t_max
    if t_max < result.grid.times[0]:
        raise ValueError(
            f"t_max ({t_max}) must not be before the first grid time {result.grid.times[0]}"
        )
    return integrate_values(result.grid.times, np.abs(result.attributions), 0.0, t_max)


def aggregate_importance(result: SurvShapResult, t_max: float | None = None) -> ImportanceRanking:
    """Rank variables by psi_d = integral of |phi_d(t)| from 0 to ``t_max`` (last grid time)"""
    return ImportanceRanking.from_scores(importance_scores(result, t_max), result.feature_names)


def _finish(result: SurvShapResult, t_max: float | None) -> SurvShapResult:
    result = normalize_attributions(result)
    return replace(result, psi=importance_scores(result, t_max))


def prepare_background(
    background: SurvivalDataset | np.ndarray, size: int | None = None, seed: int = 0
) -> np.ndarray:
    """Background feature rows, subsampled without replacement to ``size`` rows"""
    features = background.features if isinstance(background, SurvivalDataset) else background
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if len(features) == 0:
        raise ValueError("the background sample is empty")
    if size is not None and len(features) > size:
        rows = np.sort(np.random.default_rng(seed).choice(len(features), size, replace=False))
        log.info(f"Subsampled the background from {len(features)} to {size} rows")
        return features[rows]
    return features


def _setup(model, x, background, grid) -> CoalitionValue:
    grid = model.event_grid if grid is None else grid
    return CoalitionValue(model, x, prepare_background(background), grid)


def _result(
    value: CoalitionValue,
    model: AbstractSurvivalModel,
    attributions: np.ndarray,
    method: ExplainMethod,
    settings: dict,
) -> SurvShapResult:
    return SurvShapResult(
        feature_names=model.feature_names,
        grid=value.grid,
        attributions=attributions,
        baseline=value.baseline,
        prediction=value.prediction,
        method=method,
        observation=value.x,
        settings=settings,
    )


def survshap_exact(
    model: AbstractSurvivalModel,
    x: np.ndarray,
    background: SurvivalDataset | np.ndarray,
    grid: TimeGrid | None = None,
    max_features: int = 12,
    t_max: float | None = None,
) -> SurvShapResult:
    """
    Exact Shapley values over all 2^p coalitions.

    :param model: fitted survival model
    :param x: the explained observation
    :param background: rows supplying the features outside a coalition
    :param grid: explanation grid, the model's event grid by default
    :param max_features: refuse models with more features than this
    """
    p = model.n_features
    if p > max_features:
        raise MethodRefusedError(
            f"exact enumeration is limited to {max_features} features, the model has {p}; "
            "use the sampling or kernel method"
        )
    value = _setup(model, x, background, grid)
    masks = np.arange(1 << p, dtype=np.int64)
    values = value.values(masks)
    sizes = mask_sizes(masks, p)
    weights = np.array([factorial(s) * factorial(p - s - 1) / factorial(p) for s in range(p)])

    attributions = np.zeros((p, len(value.grid)))
    for d in range(p):
        bit = np.int64(1) << d
        without = masks[(masks & bit) == 0]
        marginal = values[without | bit] - values[without]
        attributions[d] = weights[sizes[without]] @ marginal
    result = _result(
        value, model, attributions, ExplainMethod.EXACT, {"max_features": max_features}
    )
    return _finish(result, t_max)


def _permutations(p: int, n_permutations: int, antithetic: bool, rng: np.random.Generator):
    if not antithetic:
        return rng.permuted(np.tile(np.arange(p), (n_permutations, 1)), axis=1)
    forward = rng.permuted(np.tile(np.arange(p), ((n_permutations + 1) // 2, 1)), axis=1)
    both = np.concatenate((forward, forward[:, ::-1]))
    return both[:n_permutations]


def survshap_sampling(
    model: AbstractSurvivalModel,
    x: np.ndarray,
    background: SurvivalDataset | np.ndarray,
    grid: TimeGrid | None = None,
    n_permutations: int = 1000,
    seed: Seed = 0,
    antithetic: bool = True,
    t_max: float | None = None,
) -> SurvShapResult:
    """
    Monte Carlo average of marginal contributions over sampled permutations.

    With ``antithetic`` every permutation is paired with its reverse. The contributions
    of one permutation telescope to S(x*) - e(empty), so the estimate is locally accurate
    whatever the number of permutations.
    """
    if n_permutations < 1:
        raise ValueError(f"n_permutations must be >= 1, got {n_permutations}")
    value = _setup(model, x, background, grid)
    p = value.p
    rng = np.random.default_rng(seed)
    permutations = _permutations(p, n_permutations, antithetic, rng)

    attributions = np.zeros((p, len(value.grid)))
    for start in range(0, n_permutations, PERMUTATION_CHUNK):
        chunk = permutations[start : start + PERMUTATION_CHUNK]
        prefix = np.cumsum(np.int64(1) << chunk.astype(np.int64), axis=1)
        previous = np.concatenate((np.zeros((len(chunk), 1), dtype=np.int64), prefix[:, :-1]), 1)
        unique, inverse = np.unique(
            np.concatenate((prefix, previous)).ravel(), return_inverse=True
        )
        table = value.values(unique)
        inverse = inverse.reshape(2, len(chunk), p)
        marginal = table[inverse[0]] - table[inverse[1]]
        for position in range(p):
            np.add.at(attributions, chunk[:, position], marginal[:, position])
    attributions /= n_permutations

    settings = {
        "n_permutations": n_permutations,
        "antithetic": antithetic,
        "seed": _seed_repr(seed),
    }
    result = _result(value, model, attributions, ExplainMethod.SAMPLING, settings)
    return _finish(result, t_max)


def survshap_kernel(
    model: AbstractSurvivalModel,
    x: np.ndarray,
    background: SurvivalDataset | np.ndarray,
    grid: TimeGrid | None = None,
    n_coalitions: int = 4096,
    seed: Seed = 0,
    t_max: float | None = None,
) -> SurvShapResult:
    """
    Shapley kernel regression solved for all grid times at once.

    All interior coalitions are used for p <= 13, otherwise ``n_coalitions`` are sampled.
    The empty and full coalitions are enforced exactly by eliminating the last feature:
    phi_p = S(x*) - e(empty) - sum of the other attributions.
    """
    p = model.n_features
    if p < 2:
        raise ValueError("the kernel method needs at least two features")
    value = _setup(model, x, background, grid)
    if p <= FULL_ENUMERATION_MAX_FEATURES:
        design = CoalitionDesign.enumerate(p)
    else:
        design = CoalitionDesign.sample(p, n_coalitions, np.random.default_rng(seed))

    Z = design.Z
    total = value.prediction - value.baseline
    target = value.values(design.masks) - value.baseline - Z[:, [-1]] * total[None, :]
    A = Z[:, :-1] - Z[:, [-1]]
    root = np.sqrt(design.weights)[:, None]
    solution, _, rank, _ = np.linalg.lstsq(root * A, root * target, rcond=None)
    if rank < p - 1:
        raise RankDeficientDesignError(
            f"coalition design has rank {rank}, {p - 1} is needed; "
            f"sample more than {len(design.masks)} coalitions"
        )
    attributions = np.vstack((solution, total - solution.sum(axis=0)))

    settings = {"n_coalitions": int(len(design.masks)), "design": design.mapping}
    if p > FULL_ENUMERATION_MAX_FEATURES:
        settings["seed"] = _seed_repr(seed)
    result = _result(value, model, attributions, ExplainMethod.KERNEL, settings)
    return _finish(result, t_max)


def _seed_repr(seed: Seed) -> str:
    return str(seed) if isinstance(seed, int) else "-".join(str(s) for s in seed)


def survshap(
    model: AbstractSurvivalModel,
    x: np.ndarray,
    background: SurvivalDataset | np.ndarray,
    grid: TimeGrid | None = None,
    params: ExplainParams | None = None,
    seed: Seed | None = None,
) -> SurvShapResult:
    """Explain one observation with the estimator named in ``params``"""
    params = ExplainParams() if params is None else params
    seed = params.seed if seed is None else seed
    background = prepare_background(background, params.background_size, params.seed)
    if params.method is ExplainMethod.EXACT:
        return survshap_exact(
            model, x, background, grid, params.exact_max_features, params.t_max
        )
    if params.method is ExplainMethod.SAMPLING:
        return survshap_sampling(
            model, x, background, grid, params.n_permutations, seed, params.antithetic,
            params.t_max,
        )
    if params.method is ExplainMethod.KERNEL:
        return survshap_kernel(model, x, background, grid, params.n_coalitions, seed, params.t_max)
    raise MethodRefusedError(f"{params.method.value} is not a SurvSHAP(t) estimator")


def explain_observations(
    model: AbstractSurvivalModel,
    X: np.ndarray,
    background: SurvivalDataset | np.ndarray,
    grid: TimeGrid | None = None,
    params: ExplainParams | None = None,
    n_jobs: int = 1,
    indices: Sequence[int] | None = None,
) -> list[SurvShapResult]:
    """
    Explain many observations in parallel, results in input order.

    Observation i draws its random numbers from the stream (seed, indices[i]), so the
    output does not depend on ``n_jobs``.
    """
    params = ExplainParams() if params is None else params
    X = model.check_features(X)
    indices = list(range(len(X))) if indices is None else list(indices)
    if len(indices) != len(X):
        raise ValueError("one index is needed per observation")
    background = prepare_background(background, params.background_size, params.seed)
    log.info(f"Explaining {len(X)} observations with the {params.method.value} method")
    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(survshap)(model, X[i], background, grid, params, [params.seed, index])
        for i, index in enumerate(indices)
    )
