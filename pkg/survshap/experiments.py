"""End-to-end pipelines of the three experiments

Each pipeline returns an ``ExperimentOutput``: a long ``report`` table with the columns
- experiment
- dataset
- model
- method
- metric
- variable
- rank
- time
- value

plus summary tables and the explanation datasets it computed. A failing stage is logged
and re-raised with a note naming the stage.
"""

import logging
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import xarray as xr

from survshap.core import SurvivalDataset, TimeGrid
from survshap.dataset.exp1 import generate_exp1, generate_reference
from survshap.dataset.heart_failure import load_heart_failure
from survshap.dataset.sphere import generate_sphere_dataset
from survshap.eval.metrics import (
    brier_curve,
    csp,
    gt_shapley_curve,
    integrated_brier,
    local_accuracy_curve,
    mean_kendall_tau_h,
    normalized_rmse_curve,
)
from survshap.eval.utils import quantile_window, ranking_distribution, top_k_agreement
from survshap.explain.records import to_dataset
from survshap.explain.shap import SurvShapResult, explain_observations
from survshap.explain.survlime import SurvLimeResult, survlime, survlime_ranking
from survshap.models.cox import CoxModel, cox_fit, cox_local_ranking
from survshap.models.forest import RandomSurvivalForest, rsf_fit
from survshap.models.importance import permutation_importance
from survshap.models.model import AbstractSurvivalModel
from survshap.pydantic_models import ExplainMethod, ExplainParams, RunConfig, SphereConfig

log = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "experiment",
    "dataset",
    "model",
    "method",
    "metric",
    "variable",
    "rank",
    "time",
    "value",
]


@dataclass
class ExperimentOutput:
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    explanations: dict[str, xr.Dataset] = field(default_factory=dict)


@contextmanager
def stage(name: str) -> Iterator[None]:
    log.info(f"Stage {name}")
    try:
        yield
    except Exception as e:
        log.error(f"Stage '{name}' failed: {e}")
        e.add_note(f"failed stage: {name}")
        raise


class MetricReport:
    def __init__(self, experiment: str):
        self.experiment = experiment
        self.rows: list[dict] = []

    def add(self, metric: str, value: float, **columns) -> None:
        self.rows.append(
            {"experiment": self.experiment, "metric": metric, "value": float(value), **columns}
        )

    def add_curve(self, metric: str, grid: TimeGrid, values: np.ndarray, **columns) -> None:
        for t, value in zip(grid.times, values, strict=True):
            self.add(metric, value, time=float(t), **columns)

    def add_distribution(self, rankings, **columns) -> None:
        for row in ranking_distribution(rankings).itertuples():
            self.add("rank_fraction", row.fraction, variable=row.variable, rank=row.rank, **columns)

    def frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.rows).reindex(columns=REPORT_COLUMNS)
        for column in ("dataset", "model", "method", "variable"):
            df[column] = df[column].fillna("")
        df["rank"] = df["rank"].astype("Int64")
        return df


def _explain_rows(n: int, n_explain: int | None) -> np.ndarray:
    return np.arange(n if n_explain is None else min(n, n_explain))


def _fit_models(
    train: SurvivalDataset, config: RunConfig, n_jobs: int
) -> dict[str, AbstractSurvivalModel]:
    with stage("fit cph"):
        cph = cox_fit(train, config.cox.max_iter, config.cox.tol)
    with stage("fit rsf"):
        rsf = rsf_fit(train, config.forest, n_jobs=n_jobs)
    return {"cph": cph, "rsf": rsf}


def explain_params(config: RunConfig, background_size: int | None = None) -> ExplainParams:
    """
    SurvSHAP(t) settings of an experiment.

    SurvLIME falls back to the kernel estimator. An explicit ``background_size`` wins,
    then ``explain.background_size``, then the experiment cap.
    """
    params = config.explain
    updates = {}
    if params.method is ExplainMethod.SURVLIME:
        updates["method"] = ExplainMethod.KERNEL
    if background_size is not None:
        updates["background_size"] = background_size
    elif params.background_size is None:
        updates["background_size"] = config.experiment.background_size
    return params.model_copy(update=updates)


def _survshap(
    model: AbstractSurvivalModel,
    data: SurvivalDataset,
    rows: np.ndarray,
    background: SurvivalDataset,
    config: RunConfig,
    n_jobs: int,
    background_size: int | None = None,
) -> list[SurvShapResult]:
    params = explain_params(config, background_size)
    return explain_observations(
        model, data.features[rows], background, None, params, n_jobs, data.ids[rows].tolist()
    )


def _survlime(
    model: AbstractSurvivalModel,
    data: SurvivalDataset,
    rows: np.ndarray,
    reference: SurvivalDataset,
    config: RunConfig,
) -> list[SurvLimeResult]:
    params = config.survlime
    return [
        survlime(model, data.features[i], reference, params, seed=params.seed + int(i))
        for i in rows
    ]


def _reconstructions(results: Sequence[SurvShapResult]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.stack([r.reconstruction() for r in results]),
        np.stack([r.prediction for r in results]),
    )


def _evaluate_models(
    report: MetricReport,
    models: dict[str, AbstractSurvivalModel],
    test: SurvivalDataset,
    **columns,
) -> None:
    for name, model in models.items():
        with stage(f"evaluate {name}"):
            ibs = integrated_brier(model, test)
            log.info(f"{name}: integrated Brier score {ibs:.4f}")
            report.add("integrated_brier", ibs, model=name, **columns)
            curve = brier_curve(model, test)
            report.add_curve("brier", curve.grid, curve.values, model=name, **columns)


def run_exp1(config: RunConfig | None = None, n_jobs: int = 1, cache_dir: str | None = None):
    """
    Time-dependent effect experiment, explained in-sample.

    Reports model quality, CSP per variable, local accuracy, GT-Shapley and normalized
    RMSE against explanations computed with a large reference background.
    """
    config = RunConfig() if config is None else config
    report = MetricReport("exp1")
    output = ExperimentOutput()
    with stage("generate"):
        data = generate_exp1(config.exp1, n_jobs)
    models = _fit_models(data, config, n_jobs)
    _evaluate_models(report, models, data)

    rows = _explain_rows(data.n_observations, config.experiment.n_explain)
    reference_rows = rows[: config.experiment.reference_explain or len(rows)]
    window = quantile_window(data, config.metrics.window_quantiles)
    with stage("generate reference"):
        reference = generate_reference(
            config.exp1, config.experiment.reference_size, cache_dir, n_jobs
        )

    csp_rows = []
    for name, model in models.items():
        with stage(f"explain {name}"):
            results = _survshap(model, data, rows, data, config, n_jobs)
            output.explanations[f"exp1_{name}"] = to_dataset(results, data.ids[rows].tolist())
        with stage(f"metrics {name}"):
            grid = results[0].grid
            reconstruction, prediction = _reconstructions(results)
            sigma = local_accuracy_curve(reconstruction, prediction, grid)
            report.add_curve("local_accuracy", grid, sigma.values, model=name, method="survshap")
            attributions = np.stack([r.attributions for r in results])
            for d, variable in enumerate(data.feature_names):
                value = csp(attributions[:, d, :], grid, config.metrics.csp_alpha, *window)
                report.add("csp", value, model=name, variable=variable)
                csp_rows.append({"variable": variable, "model": name, "csp": value})
        with stage(f"reference explanations {name}"):
            truth = _survshap(
                model,
                data,
                reference_rows,
                reference,
                config,
                n_jobs,
                config.experiment.reference_background_size or reference.n_observations,
            )
            estimate = attributions[: len(reference_rows)]
            expected = np.stack([r.attributions for r in truth])
            curve = gt_shapley_curve(estimate, expected, grid)
            report.add_curve("gt_shapley", curve.grid, curve.values, model=name)
            for d, variable in enumerate(data.feature_names):
                try:
                    curve = normalized_rmse_curve(estimate, expected, grid, d)
                except ValueError as e:
                    log.warning(f"{name} {variable}: {e}")
                    continue
                report.add_curve(
                    "normalized_rmse", curve.grid, curve.values, model=name, variable=variable
                )

    output.tables["report"] = report.frame()
    output.tables["csp"] = (
        pd.DataFrame(csp_rows).pivot(index="variable", columns="model", values="csp").reset_index()
    )
    output.tables["model_quality"] = _quality_table(output.tables["report"])
    return output


def _quality_table(report: pd.DataFrame) -> pd.DataFrame:
    quality = report[report["metric"] == "integrated_brier"]
    return quality[["dataset", "model", "value"]].rename(columns={"value": "integrated_brier"})


def sphere_configs(config: RunConfig) -> dict[str, SphereConfig]:
    shared = {
        key: getattr(config.sphere, key)
        for key in ("radius", "lam", "shape", "n", "seed", "event_probability")
    }
    return {
        "dataset0": SphereConfig.dataset0(**shared),
        "dataset1": SphereConfig.dataset1(**shared),
    }


def run_exp2(config: RunConfig | None = None, n_jobs: int = 1):
    """
    Ranking fidelity on the two sphere datasets.

    The Cox model is explained by SurvSHAP(t) and SurvLIME and both rankings are compared
    with its own |x b| ranking. The forest is explained by both methods; their ranking
    distributions and local accuracy are reported next to permutation importance.
    """
    config = RunConfig() if config is None else config
    report = MetricReport("exp2")
    output = ExperimentOutput()
    tau_rows = []
    for dataset_name, sphere in sphere_configs(config).items():
        with stage(f"generate {dataset_name}"):
            data = generate_sphere_dataset(sphere)
            train, test = data.train_test_split(config.experiment.test_fraction, sphere.seed)
        models = _fit_models(train, config, n_jobs)
        _evaluate_models(report, models, test, dataset=dataset_name)
        rows = _explain_rows(test.n_observations, config.experiment.n_explain)

        cph: CoxModel = models["cph"]
        with stage(f"explain cph {dataset_name}"):
            shap_results = _survshap(cph, test, rows, train, config, n_jobs)
            lime_results = _survlime(cph, test, rows, train, config)
        truth = [cox_local_ranking(cph, test.features[i]) for i in rows]
        for method, rankings in (
            ("survshap", [r.ranking() for r in shap_results]),
            ("survlime", [survlime_ranking(r) for r in lime_results]),
        ):
            tau = mean_kendall_tau_h(rankings, truth)
            log.info(f"{dataset_name} {method}: mean weighted Kendall tau {tau:.3f}")
            report.add("kendall_tau_h", tau, dataset=dataset_name, model="cph", method=method)
            tau_rows.append({"dataset": dataset_name, "method": method, "kendall_tau_h": tau})

        rsf: RandomSurvivalForest = models["rsf"]
        with stage(f"explain rsf {dataset_name}"):
            shap_results = _survshap(rsf, test, rows, train, config, n_jobs)
            lime_results = _survlime(rsf, test, rows, train, config)
            output.explanations[f"exp2_{dataset_name}_rsf"] = to_dataset(
                shap_results, test.ids[rows].tolist()
            )
        with stage(f"metrics rsf {dataset_name}"):
            _ranking_metrics(report, rsf, test, shap_results, lime_results, config, dataset_name)

    output.tables["report"] = report.frame()
    output.tables["kendall_tau"] = (
        pd.DataFrame(tau_rows)
        .pivot(index="dataset", columns="method", values="kendall_tau_h")
        .reset_index()
    )
    output.tables["model_quality"] = _quality_table(output.tables["report"])
    return output


def _ranking_metrics(
    report: MetricReport,
    model: AbstractSurvivalModel,
    test: SurvivalDataset,
    shap_results: Sequence[SurvShapResult],
    lime_results: Sequence[SurvLimeResult],
    config: RunConfig,
    dataset_name: str,
    model_name: str = "rsf",
) -> None:
    columns = {"dataset": dataset_name, "model": model_name}
    importance = permutation_importance(
        model, test, config.metrics.permutation_repeats, config.explain.seed
    )
    for d, variable in enumerate(importance.feature_names):
        report.add(
            "permutation_importance",
            importance.scores[d],
            variable=variable,
            rank=int(importance.ranks[d]) + 1,
            **columns,
        )
    shap_rankings = [r.ranking() for r in shap_results]
    lime_rankings = [survlime_ranking(r) for r in lime_results]
    report.add_distribution(shap_rankings, method="survshap", **columns)
    report.add_distribution(lime_rankings, method="survlime", **columns)
    for method, rankings in (("survshap", shap_rankings), ("survlime", lime_rankings)):
        agreement = top_k_agreement(rankings, [importance] * len(rankings), k=2)
        report.add("top2_agreement", agreement, method=method, **columns)

    grid = shap_results[0].grid
    reconstruction, prediction = _reconstructions(shap_results)
    sigma = local_accuracy_curve(reconstruction, prediction, grid)
    report.add_curve("local_accuracy", grid, sigma.values, method="survshap", **columns)
    surrogate = np.stack([r.surrogate_survival(grid).values for r in lime_results])
    sigma = local_accuracy_curve(surrogate, prediction, grid)
    report.add_curve("local_accuracy", grid, sigma.values, method="survlime", **columns)


def run_exp3(config: RunConfig | None = None, n_jobs: int = 1, path: str | None = None):
    """
    Heart failure records, both models fitted on every row.

    Rankings from SurvSHAP(t) and SurvLIME are compared with permutation importance.
    """
    config = RunConfig() if config is None else config
    report = MetricReport("exp3")
    output = ExperimentOutput()
    with stage("load heart failure"):
        data = load_heart_failure(path, config=config.heart_failure)
    models = _fit_models(data, config, n_jobs)
    _evaluate_models(report, models, data, dataset="heart_failure")
    rows = _explain_rows(data.n_observations, config.experiment.n_explain)

    for name, model in models.items():
        with stage(f"explain {name}"):
            shap_results = _survshap(model, data, rows, data, config, n_jobs)
            lime_results = _survlime(model, data, rows, data, config)
            output.explanations[f"exp3_{name}"] = to_dataset(shap_results, data.ids[rows].tolist())
        with stage(f"metrics {name}"):
            _ranking_metrics(
                report, model, data, shap_results, lime_results, config, "heart_failure", name
            )

    report_frame = report.frame()
    output.tables["report"] = report_frame
    output.tables["ranking_distribution"] = report_frame[
        report_frame["metric"] == "rank_fraction"
    ][["model", "method", "rank", "variable", "value"]].rename(columns={"value": "fraction"})
    output.tables["model_quality"] = _quality_table(report_frame)
    return output


EXPERIMENTS = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3}
