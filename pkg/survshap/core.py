"""Censored-data types, nonparametric estimators and step-function arithmetic

All curves are right-continuous step functions over a ``TimeGrid``. Before the first
grid time a survival curve equals 1 and cumulative hazard or attribution curves equal 0.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from survshap.errors import SchemaError

RESERVED_COLUMNS = ("time", "event")


class CurveKind(str, Enum):
    SURVIVAL = "survival"
    CUMULATIVE_HAZARD = "cumulative-hazard"
    ATTRIBUTION = "attribution"


class Transform(str, Enum):
    IDENTITY = "identity"
    ABSOLUTE = "absolute-value"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing, positive event times t_1 < ... < t_m"""

    times: np.ndarray

    def __post_init__(self):
        times = _frozen(np.atleast_1d(self.times))
        if times.ndim != 1 or len(times) == 0:
            raise ValueError("a time grid needs at least one time")
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            raise ValueError("grid times must be finite and > 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __hash__(self) -> int:
        return hash(self.times.tobytes())

    @property
    def last(self) -> float:
        return float(self.times[-1])

    def segment_lengths(self, t_end: float | None = None) -> np.ndarray:
        """Length of [t_j, t_{j+1}); the last segment runs to ``t_end`` (0 by default)"""
        end = self.last if t_end is None else max(t_end, self.last)
        return np.diff(np.append(self.times, end))

    def within(self, t_start: float, t_end: float) -> "TimeGrid":
        mask = (self.times >= t_start) & (self.times <= t_end)
        return TimeGrid(self.times[mask])


@dataclass(frozen=True, eq=False)
class StepCurve:
    grid: TimeGrid
    values: np.ndarray
    kind: CurveKind = CurveKind.ATTRIBUTION

    def __post_init__(self):
        values = _frozen(np.atleast_1d(self.values))
        kind = CurveKind(self.kind)
        if values.shape != (len(self.grid),):
            raise ValueError(
                f"curve has {values.shape} values for a grid of {len(self.grid)} times"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        if kind is CurveKind.SURVIVAL:
            if np.any(values < 0) or np.any(values > 1):
                raise ValueError("survival values must lie in [0, 1]")
            if np.any(np.diff(values) > 0):
                raise ValueError("survival values must be non-increasing")
        elif kind is CurveKind.CUMULATIVE_HAZARD:
            if np.any(values < 0):
                raise ValueError("cumulative hazard values must be >= 0")
            if np.any(np.diff(values) < 0):
                raise ValueError("cumulative hazard values must be non-decreasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", kind)

    @property
    def default(self) -> float:
        """Implicit value before the first grid time"""
        return 1.0 if self.kind is CurveKind.SURVIVAL else 0.0

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Triplets (x_i, y_i, delta_i) with named features"""

    features: np.ndarray
    feature_names: tuple[str, ...]
    times: np.ndarray
    events: np.ndarray
    ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        features = _frozen(self.features)
        if features.ndim != 2:
            raise SchemaError(f"features must be a matrix, got {features.ndim} dimensions")
        n, p = features.shape
        names = tuple(str(name) for name in self.feature_names)
        if len(names) != p:
            raise SchemaError(f"{len(names)} feature names for {p} feature columns")
        if len(set(names)) != p:
            raise SchemaError(f"feature names must be unique: {names}")
        clash = set(names) & set(RESERVED_COLUMNS)
        if clash:
            raise SchemaError(f"feature names {sorted(clash)} are reserved")
        if not np.all(np.isfinite(features)):
            raise SchemaError("features must be finite")

        times = _frozen(self.times)
        if times.shape != (n,):
            raise SchemaError(f"{times.shape[0]} times for {n} rows")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise SchemaError("observed times must be finite and non-negative")

        events = np.asarray(self.events)
        if events.shape != (n,):
            raise SchemaError(f"{events.shape[0]} event indicators for {n} rows")
        if not np.all(np.isin(events, (0, 1))):
            raise SchemaError("event indicators must be 0 or 1")
        events = events.astype(bool)
        events.setflags(write=False)
        if not events.any():
            raise SchemaError("the dataset contains no events")
        at_zero = np.nonzero(events & (times == 0))[0]
        if len(at_zero):
            raise SchemaError(f"event times must be > 0, row {at_zero[0]} has an event at time 0")

        ids = np.arange(n) if self.ids is None else np.array(self.ids)
        if ids.shape != (n,):
            raise SchemaError(f"{ids.shape[0]} ids for {n} rows")
        ids.setflags(write=False)

        object.__setattr__(self, "features", features)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "ids", ids)

    @property
    def n_observations(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def censoring_rate(self) -> float:
        return float(1 - self.events.mean())

    def __len__(self) -> int:
        return self.n_observations

    def subset(self, rows: Sequence[int] | np.ndarray) -> "SurvivalDataset":
        rows = np.asarray(rows)
        return SurvivalDataset(
            self.features[rows], self.feature_names, self.times[rows], self.events[rows],
            self.ids[rows],
        )

    def with_features(self, features: np.ndarray) -> "SurvivalDataset":
        return SurvivalDataset(features, self.feature_names, self.times, self.events, self.ids)

    def train_test_split(
        self, test_fraction: float = 0.1, seed: int = 0
    ) -> tuple["SurvivalDataset", "SurvivalDataset"]:
        """Seeded random split, 9:1 by default"""
        if not 0 < test_fraction < 1:
            raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
        order = np.random.default_rng(seed).permutation(self.n_observations)
        n_test = int(round(test_fraction * self.n_observations))
        return self.subset(np.sort(order[n_test:])), self.subset(np.sort(order[:n_test]))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.features, columns=list(self.feature_names))
        df["time"] = self.times
        df["event"] = self.events.astype(int)
        return df

    @classmethod
    def from_frame(cls, df: pd.DataFrame, feature_names: Sequence[str] | None = None):
        for column in RESERVED_COLUMNS:
            if column not in df.columns:
                raise SchemaError(f"missing required column '{column}'")
        if feature_names is None:
            feature_names = [c for c in df.columns if c not in RESERVED_COLUMNS]
        missing = [c for c in feature_names if c not in df.columns]
        if missing:
            raise SchemaError(f"missing feature columns {missing}")
        return cls(
            features=df[list(feature_names)].to_numpy(dtype=float),
            feature_names=tuple(feature_names),
            times=df["time"].to_numpy(dtype=float),
            events=df["event"].to_numpy(),
        )


def _risk_table(times: np.ndarray, events: np.ndarray) -> tuple[np.ndarray, ...]:
    """Distinct event times with event counts d_j and at-risk counts r_j"""
    event_times, deaths = np.unique(times[events], return_counts=True)
    at_risk = len(times) - np.searchsorted(np.sort(times), event_times, side="left")
    return event_times, deaths.astype(float), at_risk.astype(float)


def build_event_grid(dataset: SurvivalDataset) -> TimeGrid:
    """Sorted unique times of observations with an event"""
    times = np.unique(dataset.times[dataset.events])
    if len(times) == 0:
        raise SchemaError("the dataset contains no events")
    return TimeGrid(times)


def kaplan_meier(dataset: SurvivalDataset) -> StepCurve:
    event_times, deaths, at_risk = _risk_table(dataset.times, dataset.events)
    survival = np.cumprod(1.0 - deaths / at_risk)
    return StepCurve(TimeGrid(event_times), np.clip(survival, 0.0, 1.0), CurveKind.SURVIVAL)


def censoring_kaplan_meier(dataset: SurvivalDataset) -> StepCurve | None:
    """Kaplan-Meier estimate G of the censoring distribution, None if nothing is censored"""
    censored = ~dataset.events
    if not censored.any():
        return None
    event_times, deaths, at_risk = _risk_table(dataset.times, censored)
    survival = np.cumprod(1.0 - deaths / at_risk)
    return StepCurve(TimeGrid(event_times), np.clip(survival, 0.0, 1.0), CurveKind.SURVIVAL)


def nelson_aalen(dataset: SurvivalDataset) -> StepCurve:
    event_times, deaths, at_risk = _risk_table(dataset.times, dataset.events)
    return StepCurve(
        TimeGrid(event_times), np.cumsum(deaths / at_risk), CurveKind.CUMULATIVE_HAZARD
    )


def chf_to_survival(chf: StepCurve) -> StepCurve:
    if chf.kind is not CurveKind.CUMULATIVE_HAZARD:
        raise ValueError(f"expected a cumulative-hazard curve, got {chf.kind.value}")
    return StepCurve(chf.grid, np.clip(np.exp(-chf.values), 0.0, 1.0), CurveKind.SURVIVAL)


def values_at(curve: StepCurve, t: np.ndarray | float) -> np.ndarray:
    """Right-continuous evaluation at one or many times"""
    index = np.searchsorted(curve.grid.times, t, side="right") - 1
    padded = np.concatenate(([curve.default], curve.values))
    return padded[np.asarray(index) + 1]


def curve_at(curve: StepCurve, t: float) -> float:
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    return float(values_at(curve, t))


def curve_before(curve: StepCurve, t: float) -> float:
    """Left limit of the curve at t"""
    index = np.searchsorted(curve.grid.times, t, side="left") - 1
    return curve.default if index < 0 else float(curve.values[index])


def restrict(curve: StepCurve, grid: TimeGrid) -> StepCurve:
    """Evaluate the curve on another grid"""
    return StepCurve(grid, values_at(curve, grid.times), curve.kind)


def integrate_values(
    times: np.ndarray,
    values: np.ndarray,
    t_start: float,
    t_end: float,
    default: float = 0.0,
) -> np.ndarray:
    """Exact integral of right-continuous steps over [t_start, t_end]

    ``values`` may carry extra leading dimensions; the last axis runs over ``times``.
    """
    if t_start >= t_end:
        raise ValueError(f"t_start ({t_start}) must be smaller than t_end ({t_end})")
    inner = times[(times > t_start) & (times < t_end)]
    knots = np.concatenate(([t_start], inner, [t_end]))
    index = np.searchsorted(times, knots[:-1], side="right") - 1
    values = np.asarray(values, dtype=float)
    padded = np.concatenate(
        (np.full(values.shape[:-1] + (1,), default), values), axis=-1
    )
    return padded[..., index + 1] @ np.diff(knots)


def integrate_step(
    curve: StepCurve,
    t_start: float,
    t_end: float,
    transform: Transform = Transform.IDENTITY,
) -> float:
    values = curve.values
    default = curve.default
    if Transform(transform) is Transform.ABSOLUTE:
        values, default = np.abs(values), abs(default)
    return float(integrate_values(curve.grid.times, values, t_start, t_end, default))


def cumulative_hazard_on_grid(
    times: np.ndarray, events: np.ndarray, grid: TimeGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Nelson-Aalen increments of a sample placed on ``grid``

    Returns the grid positions of the jumps and their sizes d_j / r_j. Event times
    must belong to ``grid``; ``np.cumsum`` of the dense increments gives the curve.
    """
    events = np.asarray(events, dtype=bool)
    if not events.any():
        return np.empty(0, dtype=int), np.empty(0)
    event_times, deaths, at_risk = _risk_table(np.asarray(times, dtype=float), events)
    position = np.searchsorted(grid.times, event_times)
    if np.any(position >= len(grid)) or np.any(grid.times[position] != event_times):
        raise ValueError("event times are not part of the grid")
    return position, deaths / at_risk


def dense_increments(position: np.ndarray, size: np.ndarray, length: int) -> np.ndarray:
    increments = np.zeros(length)
    increments[position] = size
    return np.cumsum(increments)
