from datetime import datetime
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

DEFAULT_HEART_FAILURE_FEATURES = [
    "age",
    "anaemia",
    "creatinine_phosphokinase",
    "ejection_fraction",
    "high_blood_pressure",
    "platelets",
    "serum_creatinine",
    "serum_sodium",
]


class ExplainMethod(str, Enum):
    EXACT = "exact"
    SAMPLING = "sampling"
    KERNEL = "kernel"
    SURVLIME = "survlime"


class ModelKind(str, Enum):
    CPH = "cph"
    RSF = "rsf"


class CoxParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_iter: int = Field(default=100, description="maximum Newton-Raphson iterations", ge=1)
    tol: float = Field(
        default=1e-9,
        description="convergence threshold on the gradient max-norm, taken with respect to "
        "the coefficients of the centered features divided by their standard deviations",
        gt=0,
    )


class ForestParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_trees: int = Field(default=100, description="number of survival trees", ge=1)
    min_leaf_size: int = Field(
        default=10, description="minimum number of observations in a leaf", ge=1
    )
    max_features: int | None = Field(
        default=None,
        description="features tried at each split, the square root of p when unset",
        ge=1,
    )
    max_depth: int | None = Field(default=None, description="maximum tree depth", ge=1)
    seed: int = Field(default=0, description="seed for bootstrap and feature sampling")


class ExplainParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: ExplainMethod = Field(default=ExplainMethod.KERNEL)
    n_permutations: int = Field(
        default=1000, description="permutations drawn by the sampling estimator", ge=1
    )
    antithetic: bool = Field(
        default=True, description="pair every sampled permutation with its reverse"
    )
    background_size: int | None = Field(
        default=None,
        description="cap on background rows, subsampled with the seed when exceeded",
        ge=1,
    )
    n_coalitions: int = Field(
        default=4096,
        description="coalitions sampled by the kernel estimator when p > 13",
        ge=2,
    )
    exact_max_features: int = Field(
        default=12, description="largest p accepted by the exact estimator", ge=1
    )
    t_max: float | None = Field(
        default=None,
        description="upper integration limit of the aggregated importance, last grid time "
        "when unset",
        gt=0,
    )
    seed: int = Field(default=0)


class SurvLimeParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_neighbors: int = Field(default=1000, description="perturbed points around x*", ge=2)
    scale: float = Field(
        default=0.1,
        description="standard deviation of the perturbations per standardized feature",
        gt=0,
    )
    kernel_width: float | None = Field(
        default=None,
        description="Epanechnikov bandwidth on standardized distance, 5% above the "
        "largest neighbour distance when unset",
        gt=0,
    )
    curvature_weights: bool = Field(
        default=True, description="weight log-CHF residuals by the black-box CHF"
    )
    clamp: float = Field(default=1e-12, description="floor for CHF values before logs", gt=0)
    ridge: float = Field(
        default=1.0,
        description="penalty on the squared coefficients in feature standard deviation units, "
        "relative to the weighted mean residual; 0 gives plain least squares",
        ge=0,
    )
    seed: int = Field(default=0)


class MetricParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    csp_alpha: float = Field(default=0.05, gt=0, lt=0.5)
    window_quantiles: tuple[float, float] = Field(
        default=(0.1, 0.9), description="quantiles of observed times bounding the CSP window"
    )
    permutation_repeats: int = Field(default=5, ge=1)

    @model_validator(mode="after")
    def check_window(self):
        low, high = self.window_quantiles
        if not 0 <= low < high <= 1:
            raise ValueError(
                f"window quantiles must satisfy 0 <= low < high <= 1, got {low}, {high}"
            )
        return self


class Exp1Config(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=1000, description="number of observations", ge=1)
    seed: int = Field(default=0)
    administrative_censoring: tuple[float, float] = Field(
        default=(11.0, 16.0), description="bounds of the uniform administrative censoring time"
    )
    right_censoring: tuple[float, float] = Field(
        default=(0.0, 24.0), description="bounds of the uniform right censoring time"
    )
    horizon: float = Field(default=30.0, description="upper end of the root bracket", gt=0)
    epsilon: float = Field(
        default=1e-6, description="lower end of the hazard integration and root bracket", gt=0
    )


class SphereConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center: tuple[float, ...] = Field(default=(0.0, 0.0, 0.0, 0.0, 0.0))
    radius: float = Field(default=8.0, gt=0)
    lam: float = Field(default=1e-5, description="Weibull scale lambda", gt=0)
    shape: float = Field(default=2.0, description="Weibull shape v", gt=0)
    coefficients: tuple[float, ...] = Field(default=(1e-6, 0.1, -0.15, 1e-6, 1e-6))
    n: int = Field(default=1000, ge=1)
    seed: int = Field(default=0)
    event_probability: float = Field(default=0.9, ge=0, le=1)

    @model_validator(mode="after")
    def check_dimensions(self):
        if len(self.center) != len(self.coefficients):
            raise ValueError(
                f"center has {len(self.center)} coordinates but there are "
                f"{len(self.coefficients)} coefficients"
            )
        return self

    @classmethod
    def dataset0(cls, **kwargs) -> "SphereConfig":
        return cls(
            center=(0.0, 0.0, 0.0, 0.0, 0.0),
            coefficients=(1e-6, 0.1, -0.15, 1e-6, 1e-6),
            **kwargs,
        )

    @classmethod
    def dataset1(cls, **kwargs) -> "SphereConfig":
        return cls(
            center=(4.0, -8.0, 2.0, 4.0, 2.0),
            coefficients=(1e-6, -0.15, 1e-6, 1e-6, -0.1),
            **kwargs,
        )


class HeartFailureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str | None = Field(default=None, description="location of the clinical records file")
    features: list[str] = Field(default_factory=lambda: list(DEFAULT_HEART_FAILURE_FEATURES))
    column_renames: dict[str, str] = Field(
        default_factory=lambda: {"DEATH_EVENT": "event"},
        description="renames applied to the header before validation",
    )
    expected_rows: int | None = Field(default=299, ge=1)


class ExperimentParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    test_fraction: float = Field(default=0.1, gt=0, lt=1)
    n_explain: int | None = Field(
        default=100, description="number of observations explained, all when unset", ge=1
    )
    background_size: int | None = Field(
        default=100,
        description="cap on background rows used when explain.background_size is unset",
        ge=1,
    )
    reference_size: int = Field(
        default=10000, description="rows of the ground-truth background sample", ge=1
    )
    reference_explain: int | None = Field(
        default=20,
        description="observations explained against the reference background, n_explain "
        "when unset",
        ge=1,
    )
    reference_background_size: int | None = Field(
        default=2000,
        description="rows of the reference sample used as background, all when unset",
        ge=1,
    )


class RunConfig(BaseModel):
    """Resolved configuration of a run, the sections of the TOML config file"""

    model_config = ConfigDict(extra="forbid")

    exp1: Exp1Config = Field(default_factory=Exp1Config)
    sphere: SphereConfig = Field(default_factory=SphereConfig)
    cox: CoxParams = Field(default_factory=CoxParams)
    forest: ForestParams = Field(default_factory=ForestParams)
    explain: ExplainParams = Field(default_factory=ExplainParams)
    survlime: SurvLimeParams = Field(default_factory=SurvLimeParams)
    metrics: MetricParams = Field(default_factory=MetricParams)
    heart_failure: HeartFailureConfig = Field(default_factory=HeartFailureConfig)
    experiment: ExperimentParams = Field(default_factory=ExperimentParams)


class RunManifest(BaseModel):
    command: str
    arguments: dict[str, str | int | float | bool | None | list[str]] = Field(
        default_factory=dict
    )
    config: RunConfig
    seed: int
    inputs: list[str] = Field(default_factory=list)
    outputs: list[str] = Field(default_factory=list)
    version: str
    started_at: datetime
    duration_seconds: float = Field(ge=0)
