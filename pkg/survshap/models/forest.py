"""Random Survival Forest with log-rank splitting

Trees are stored as flat node arrays. Every leaf keeps the Nelson-Aalen increments of
its bootstrap rows on the forest's training event grid, so a saved forest predicts
exactly what the fitted one did.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from survshap.core import (
    StepCurve,
    SurvivalDataset,
    TimeGrid,
    build_event_grid,
    cumulative_hazard_on_grid,
    dense_increments,
)
from survshap.models.model import AbstractSurvivalModel, chf_on_grid
from survshap.pydantic_models import ForestParams

log = logging.getLogger(__name__)

LEAF = -1


def logrank_from_arrays(times: np.ndarray, events: np.ndarray, left: np.ndarray) -> float:
    """Standardized two-sample log-rank statistic, ``left`` marks the first group"""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    left = np.asarray(left, dtype=bool)
    if not events.any() or left.all() or not left.any():
        return 0.0
    event_times = np.unique(times[events])
    at_risk = times[:, None] >= event_times[None, :]
    died = events[:, None] & (times[:, None] == event_times[None, :])
    r = at_risk.sum(axis=0).astype(float)
    d = died.sum(axis=0).astype(float)
    r_left = at_risk[left].sum(axis=0)
    observed = died[left].sum()
    expected = np.sum(d * r_left / r)
    fraction = r_left / r
    variance = np.sum(_variance_factor(r, d) * fraction * (1 - fraction))
    if variance <= 0:
        return 0.0
    return float(abs(observed - expected) / np.sqrt(variance))


def logrank_statistic(left: SurvivalDataset, right: SurvivalDataset) -> float:
    """|O - E| / sqrt(V) of the left group over the pooled event times"""
    times = np.concatenate((left.times, right.times))
    events = np.concatenate((left.events, right.events))
    group = np.arange(len(times)) < left.n_observations
    return logrank_from_arrays(times, events, group)


def _variance_factor(r: np.ndarray, d: np.ndarray) -> np.ndarray:
    # hypergeometric variance d (r - d) / (r - 1), zero where a single row is at risk
    return np.where(r > 1, d * (r - d) / np.maximum(r - 1, 1), 0.0)


@dataclass(frozen=True, eq=False)
class SurvivalTree:
    """
    Binary tree over flat node arrays.

    Internal nodes send rows with ``x[feature] <= threshold`` to ``left``. For leaf nodes
    ``feature`` is -1 and ``leaf`` indexes ``leaf_positions``/``leaf_sizes``, the grid
    positions and sizes of the leaf's cumulative hazard jumps.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray
    leaf_positions: tuple[np.ndarray, ...]
    leaf_sizes: tuple[np.ndarray, ...]
    grid_size: int
    chf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name, dtype in (
            ("feature", int),
            ("threshold", float),
            ("left", int),
            ("right", int),
            ("leaf", int),
        ):
            array = np.array(getattr(self, name), dtype=dtype)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if len(self.leaf_positions) != len(self.leaf_sizes):
            raise ValueError("every leaf needs jump positions and sizes")
        chf = np.array(
            [
                dense_increments(np.asarray(p, dtype=int), np.asarray(s, dtype=float),
                                 self.grid_size)
                for p, s in zip(self.leaf_positions, self.leaf_sizes, strict=True)
            ]
        ).reshape(len(self.leaf_sizes), self.grid_size)
        chf.setflags(write=False)
        object.__setattr__(self, "chf", chf)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_sizes)

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=int)
        for node in range(len(self.feature)):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row"""
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return self.leaf[node]

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f != LEAF}


class _TreeGrower:
    def __init__(
        self,
        X: np.ndarray,
        times: np.ndarray,
        events: np.ndarray,
        grid: TimeGrid,
        params: ForestParams,
        mtry: int,
        rng: np.random.Generator,
    ):
        self.X, self.times, self.events = X, times, events
        self.grid = grid
        self.params = params
        self.mtry = mtry
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf: list[int] = []
        self.leaf_positions: list[np.ndarray] = []
        self.leaf_sizes: list[np.ndarray] = []

    def grow(self) -> SurvivalTree:
        self._grow(np.arange(len(self.times)), 0)
        return SurvivalTree(
            feature=self.feature,
            threshold=self.threshold,
            left=self.left,
            right=self.right,
            leaf=self.leaf,
            leaf_positions=tuple(self.leaf_positions),
            leaf_sizes=tuple(self.leaf_sizes),
            grid_size=len(self.grid),
        )

    def _new_node(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.leaf.append(LEAF)
        return len(self.feature) - 1

    def _grow(self, rows: np.ndarray, depth: int) -> int:
        node = self._new_node()
        split = None
        max_depth = self.params.max_depth
        if len(rows) >= 2 * self.params.min_leaf_size and (max_depth is None or depth < max_depth):
            candidates = np.sort(
                self.rng.choice(self.X.shape[1], size=self.mtry, replace=False)
            )
            split = self._best_split(rows, candidates)
        if split is None:
            position, size = cumulative_hazard_on_grid(
                self.times[rows], self.events[rows], self.grid
            )
            self.leaf[node] = len(self.leaf_positions)
            self.leaf_positions.append(position)
            self.leaf_sizes.append(size)
            return node

        feature, threshold = split
        go_left = self.X[rows, feature] <= threshold
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = self._grow(rows[go_left], depth + 1)
        self.right[node] = self._grow(rows[~go_left], depth + 1)
        return node

    def _best_split(self, rows: np.ndarray, candidates: np.ndarray) -> tuple[int, float] | None:
        """Feature and threshold maximizing the log-rank statistic, None without a valid split

        Ties keep the lower feature index, then the smaller threshold.
        """
        times = self.times[rows]
        events = self.events[rows]
        n = len(rows)
        total_events = int(events.sum())
        if total_events < 2:
            return None
        event_times = np.unique(times[events])
        at_risk = times[:, None] >= event_times[None, :]
        died = events[:, None] & (times[:, None] == event_times[None, :])
        r = at_risk.sum(axis=0).astype(float)
        d = died.sum(axis=0).astype(float)
        variance_factor = _variance_factor(r, d)
        size = np.arange(1, n)
        min_leaf = self.params.min_leaf_size

        best_stat, best = 0.0, None
        for feature in candidates:
            order = np.argsort(self.X[rows, feature], kind="stable")
            values = self.X[rows[order], feature]
            left_events = np.cumsum(events[order])[:-1]
            valid = (
                (values[:-1] < values[1:])
                & (size >= min_leaf)
                & (n - size >= min_leaf)
                & (left_events >= 1)
                & (left_events < total_events)
            )
            if not valid.any():
                continue
            split_at = np.nonzero(valid)[0]
            fraction = np.cumsum(at_risk[order], axis=0)[split_at] / r
            observed = left_events[split_at]
            expected = fraction @ d
            variance = (fraction * (1 - fraction)) @ variance_factor
            stat = np.zeros(len(split_at))
            positive = variance > 0
            stat[positive] = np.abs(observed - expected)[positive] / np.sqrt(variance[positive])
            k = int(np.argmax(stat))
            if stat[k] > best_stat:
                low, high = values[split_at[k]], values[split_at[k] + 1]
                threshold = (low + high) / 2
                if threshold >= high:
                    threshold = low
                best_stat, best = float(stat[k]), (int(feature), float(threshold))
        return best


def _fit_tree(
    dataset: SurvivalDataset, grid: TimeGrid, params: ForestParams, mtry: int, index: int
) -> SurvivalTree:
    rng = np.random.default_rng([params.seed, index])
    sample = rng.integers(0, dataset.n_observations, dataset.n_observations)
    grower = _TreeGrower(
        dataset.features[sample],
        dataset.times[sample],
        dataset.events[sample],
        grid,
        params,
        mtry,
        rng,
    )
    return grower.grow()


@dataclass(frozen=True, eq=False)
class RandomSurvivalForest(AbstractSurvivalModel):
    trees: tuple[SurvivalTree, ...]
    event_grid: TimeGrid
    feature_names: tuple[str, ...]
    params: ForestParams = field(default_factory=ForestParams)

    def __post_init__(self):
        if len(self.trees) == 0:
            raise ValueError("a forest needs at least one tree")
        for tree in self.trees:
            if tree.grid_size != len(self.event_grid):
                raise ValueError("tree leaves do not match the forest event grid")
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def predict_chf_matrix(self, X: np.ndarray, grid: TimeGrid | None = None) -> np.ndarray:
        """Mean of the per-tree leaf cumulative hazards"""
        X = self.check_features(X)
        total = np.zeros((len(X), len(self.event_grid)))
        for tree in self.trees:
            total += tree.chf[tree.apply(X)]
        return chf_on_grid(total / len(self.trees), self.event_grid, grid)

    def predict_survival_matrix(self, X: np.ndarray, grid: TimeGrid | None = None) -> np.ndarray:
        return np.clip(np.exp(-self.predict_chf_matrix(X, grid)), 0.0, 1.0)

    def used_features(self) -> set[int]:
        return set().union(*(tree.used_features() for tree in self.trees))


def rsf_fit(
    dataset: SurvivalDataset,
    params: ForestParams | None = None,
    seed: int | None = None,
    n_jobs: int = 1,
) -> RandomSurvivalForest:
    """
    Fit a Random Survival Forest.

    Each tree grows on a bootstrap sample drawn from its own generator seeded with
    (seed, tree index), so the forest does not depend on ``n_jobs``.

    :param dataset: training data with at least ``2 * min_leaf_size`` rows
    :param params: forest hyperparameters
    :param seed: overrides ``params.seed`` when given
    :param n_jobs: number of joblib workers
    """
    params = ForestParams() if params is None else params
    if seed is not None:
        params = params.model_copy(update={"seed": seed})
    if dataset.n_observations < 2 * params.min_leaf_size:
        raise ValueError(
            f"a forest with min_leaf_size={params.min_leaf_size} needs at least "
            f"{2 * params.min_leaf_size} rows, got {dataset.n_observations}"
        )
    p = dataset.n_features
    mtry = params.max_features or max(1, int(np.sqrt(p)))
    mtry = min(mtry, p)
    grid = build_event_grid(dataset)
    log.info(f"Fitting {params.n_trees} survival trees on {dataset.n_observations} rows")

    trees = Parallel(n_jobs=n_jobs)(
        delayed(_fit_tree)(dataset, grid, params, mtry, index) for index in range(params.n_trees)
    )
    root_only = sum(tree.n_leaves == 1 for tree in trees)
    if root_only:
        log.info(f"{root_only} of {params.n_trees} trees found no valid split")
    return RandomSurvivalForest(tuple(trees), grid, dataset.feature_names, params)


def rsf_predict(
    forest: RandomSurvivalForest, x: np.ndarray, grid: TimeGrid | None = None
) -> StepCurve:
    return forest.predict_survival(x, grid)
