"""Command line interface

Every command writes ``manifest.json`` next to its outputs. Exit codes are 0 on success,
2 on a validation error and 3 on a computation failure.
"""

import json
import logging
import os
import tomllib
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Annotated

import numpy as np
import pandas as pd
import typer
import xarray as xr
from pydantic import ValidationError

from survshap import __version__
from survshap.data import (
    EXPLANATION_SCHEMA,
    METRIC_SCHEMA,
    PLOT_SCHEMA,
    SURVLIME_SCHEMA,
    read_dataset,
    read_schema,
    read_table,
    write_dataset,
    write_table,
)
from survshap.dataset.exp1 import generate_exp1
from survshap.dataset.sphere import generate_sphere_dataset
from survshap.errors import ComputationError
from survshap.eval.metrics import (
    brier_curve,
    csp,
    gt_shapley_curve,
    integrated_brier,
    local_accuracy_curve,
    normalized_rmse_curve,
)
from survshap.eval.utils import quantile_window, ranking_distribution
from survshap.experiments import EXPERIMENTS, MetricReport, sphere_configs
from survshap.explain.records import (
    grid_of,
    read_explanations,
    to_dataset,
    write_explanations,
    write_survlime,
)
from survshap.explain.shap import explain_observations
from survshap.explain.survlime import survlime
from survshap.models.cox import cox_fit
from survshap.models.forest import rsf_fit
from survshap.models.ranking import ImportanceRanking
from survshap.models.serialization import load_model, save_model
from survshap.pydantic_models import ExplainMethod, ModelKind, RunConfig, RunManifest
from survshap.settings import SurvShapSettings
from survshap.utils.file_path import elapsed_seconds, get_file_path, read_manifest, write_manifest
from survshap.utils.sentry_logging import report_exception, write_sentry

log = logging.getLogger(__name__)

app = typer.Typer(
    help="Time-dependent Shapley explanations for survival models",
    no_args_is_help=True,
    add_completion=False,
)

SEEDED_SECTIONS = ("exp1", "sphere", "forest", "explain", "survlime")


class DatasetKind(str, Enum):
    EXP1 = "exp1"
    DATASET0 = "dataset0"
    DATASET1 = "dataset1"


class Experiment(str, Enum):
    EXP1 = "exp1"
    EXP2 = "exp2"
    EXP3 = "exp3"


@dataclass
class RunState:
    config: RunConfig
    threads: int
    out: str | None = None
    seed: int | None = None
    settings: SurvShapSettings = field(default_factory=SurvShapSettings)


@dataclass
class RunRecord:
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    manifest_dir: str | None = None


def load_config(path: str | None, seed: int | None = None) -> RunConfig:
    """RunConfig from a TOML file, with ``seed`` replacing the seed of every section"""
    sections = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                sections = tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ValueError(f"could not read config file {path}: {e}") from e
    config = RunConfig.model_validate(sections)
    if seed is not None:
        updates = {
            name: getattr(config, name).model_copy(update={"seed": seed})
            for name in SEEDED_SECTIONS
        }
        config = config.model_copy(update=updates)
    return config


def parse_selector(selector: str, n: int) -> np.ndarray:
    """
    Rows named by ``all``, an index ``7``, a range ``10:20`` (end excluded) or a comma
    separated list of these.
    """
    if selector.strip() == "all":
        return np.arange(n)
    rows = []
    for part in selector.split(","):
        part = part.strip()
        try:
            if ":" in part:
                start, stop = (int(v) if v else None for v in part.split(":", 1))
                rows.extend(range(n)[slice(start, stop)])
            else:
                rows.append(int(part))
        except ValueError as e:
            raise ValueError(f"invalid observation selector '{part}'") from e
    rows = np.array(rows, dtype=int)
    if len(rows) == 0:
        raise ValueError(f"selector '{selector}' selects no observation")
    if np.any((rows < 0) | (rows >= n)):
        raise ValueError(f"selector '{selector}' is out of range for {n} rows")
    return rows


def _fail(error: BaseException, code: int) -> None:
    typer.echo(f"error: {error}", err=True)
    for note in getattr(error, "__notes__", []):
        typer.echo(f"  {note}", err=True)
    raise typer.Exit(code)


@contextmanager
def _run(state: RunState, command: str, arguments: dict) -> Iterator[RunRecord]:
    started_at = datetime.now()
    record = RunRecord()
    write_sentry({"command": command, **arguments}, state.settings)
    try:
        yield record
    except ValidationError as e:
        _fail(e, 2)
    except ComputationError as e:
        report_exception(e, state.settings)
        _fail(e, 3)
    except (ValueError, OSError) as e:
        _fail(e, 2)

    manifest = RunManifest(
        command=command,
        arguments={**arguments, "out": state.out},
        config=state.config,
        seed=state.config.explain.seed if state.seed is None else state.seed,
        inputs=record.inputs,
        outputs=record.outputs,
        version=__version__,
        started_at=started_at,
        duration_seconds=elapsed_seconds(started_at),
    )
    path = write_manifest(manifest, record.manifest_dir or record.outputs[0])
    log.info(f"Wrote manifest {path}")


def _generate(state: RunState, record: RunRecord, kind: str, n: int | None = None) -> None:
    kind = DatasetKind(kind)
    config = state.config
    if kind is DatasetKind.EXP1:
        exp1 = config.exp1 if n is None else config.exp1.model_copy(update={"n": n})
        dataset = generate_exp1(exp1, state.threads)
    else:
        sphere = sphere_configs(config)[kind.value]
        if n is not None:
            sphere = sphere.model_copy(update={"n": n})
        dataset = generate_sphere_dataset(sphere)
    path = state.out or f"{kind.value}.csv"
    write_dataset(dataset, path)
    record.outputs.append(path)
    typer.echo(
        f"{kind.value}: {dataset.n_observations} rows, censoring rate {dataset.censoring_rate:.3f}"
    )


def _fit(
    state: RunState,
    record: RunRecord,
    model: str,
    data: str,
    n_trees: int | None = None,
    min_leaf_size: int | None = None,
    max_features: int | None = None,
    max_depth: int | None = None,
    test_fraction: float | None = None,
) -> None:
    kind = ModelKind(model)
    dataset = read_dataset(data)
    record.inputs.append(data)
    train, test = dataset, dataset
    if test_fraction is not None:
        train, test = dataset.train_test_split(test_fraction, state.config.forest.seed)

    if kind is ModelKind.CPH:
        fitted = cox_fit(train, state.config.cox.max_iter, state.config.cox.tol)
    else:
        overrides = {
            key: value
            for key, value in (
                ("n_trees", n_trees),
                ("min_leaf_size", min_leaf_size),
                ("max_features", max_features),
                ("max_depth", max_depth),
            )
            if value is not None
        }
        params = state.config.forest.model_validate(
            {**state.config.forest.model_dump(), **overrides}
        )
        fitted = rsf_fit(train, params, n_jobs=state.threads)

    path = state.out or f"{kind.value}.json"
    save_model(fitted, path)
    record.outputs.append(path)
    split = "in-sample" if test_fraction is None else f"on {test.n_observations} test rows"
    typer.echo(f"integrated Brier score ({split}): {integrated_brier(fitted, test):.4f}")


def _explain(
    state: RunState,
    record: RunRecord,
    model: str,
    data: str,
    select: str = "all",
    method: str = ExplainMethod.KERNEL.value,
    background: str | None = None,
    n_permutations: int | None = None,
    n_coalitions: int | None = None,
    n_neighbors: int | None = None,
    t_max: float | None = None,
) -> None:
    method = ExplainMethod(method)
    fitted = load_model(model)
    dataset = read_dataset(data, list(fitted.feature_names))
    record.inputs.extend([model, data])
    reference = dataset
    if background is not None:
        reference = read_dataset(background, list(fitted.feature_names))
        record.inputs.append(background)
    rows = parse_selector(select, dataset.n_observations)
    ids = dataset.ids[rows].tolist()

    if method is ExplainMethod.SURVLIME:
        params = state.config.survlime
        if n_neighbors is not None:
            params = params.model_copy(update={"n_neighbors": n_neighbors})
        results = [
            survlime(fitted, dataset.features[i], reference, params, seed=params.seed + int(i))
            for i in rows
        ]
        path = state.out or "survlime.csv"
        write_survlime(results, ids, path)
        typer.echo(f"SurvLIME coefficients of {len(results)} observations written to {path}")
    else:
        overrides = {
            key: value
            for key, value in (
                ("n_permutations", n_permutations),
                ("n_coalitions", n_coalitions),
                ("t_max", t_max),
            )
            if value is not None
        }
        params = state.config.explain.model_validate(
            {**state.config.explain.model_dump(), "method": method, **overrides}
        )
        results = explain_observations(
            fitted, dataset.features[rows], reference, None, params, state.threads, ids
        )
        ds = to_dataset(results, ids)
        path = state.out or f"survshap_{method.value}.csv"
        write_explanations(ds, path)
        typer.echo(
            f"{len(results)} explanations written to {path}, "
            f"max reconstruction error {ds.attrs['max_reconstruction_error']:.3e}"
        )
    record.outputs.append(path)


def _aligned(estimate: xr.Dataset, truth: xr.Dataset) -> tuple[xr.Dataset, xr.Dataset]:
    try:
        return xr.align(estimate, truth, join="exact")
    except ValueError as e:
        raise ValueError(f"explanations and ground truth are not aligned: {e}") from e


def _evaluate(
    state: RunState,
    record: RunRecord,
    model: str,
    data: str,
    explanations: str | None = None,
    ground_truth: str | None = None,
) -> None:
    fitted = load_model(model)
    dataset = read_dataset(data, list(fitted.feature_names))
    record.inputs.extend([model, data])
    report = MetricReport("evaluate")
    report.add("integrated_brier", integrated_brier(fitted, dataset))
    curve = brier_curve(fitted, dataset)
    report.add_curve("brier", curve.grid, curve.values)

    if explanations is not None:
        ds = read_explanations(explanations)
        record.inputs.append(explanations)
        grid = grid_of(ds)
        reconstruction = (ds["baseline"] + ds["attribution"].sum("variable")).values
        sigma = local_accuracy_curve(reconstruction, ds["prediction"].values, grid)
        report.add_curve("local_accuracy", grid, sigma.values)
        window = quantile_window(dataset, state.config.metrics.window_quantiles)
        for variable in ds["variable"].values:
            values = ds["attribution"].sel(variable=variable).values
            report.add(
                "csp",
                csp(values, grid, state.config.metrics.csp_alpha, *window),
                variable=str(variable),
            )
        if ground_truth is not None:
            truth = read_explanations(ground_truth)
            record.inputs.append(ground_truth)
            estimate, truth = _aligned(ds, truth)
            curve = gt_shapley_curve(
                estimate["attribution"].values, truth["attribution"].values, grid
            )
            report.add_curve("gt_shapley", curve.grid, curve.values)
            for d, variable in enumerate(estimate["variable"].values):
                curve = normalized_rmse_curve(
                    estimate["attribution"].values, truth["attribution"].values, grid, d
                )
                report.add_curve(
                    "normalized_rmse", curve.grid, curve.values, variable=str(variable)
                )

    df = report.frame()[["metric", "variable", "time", "value"]]
    path = state.out or "metrics.csv"
    write_table(df, path, METRIC_SCHEMA)
    record.outputs.append(path)
    typer.echo(f"integrated Brier score: {df['value'].iloc[0]:.4f}, report written to {path}")


def _reproduce(
    state: RunState,
    record: RunRecord,
    experiment: str,
    heart_failure: str | None = None,
    cache_dir: str | None = None,
    bundle: bool = False,
) -> None:
    experiment = Experiment(experiment)
    out_dir = state.out or f"{experiment.value}_report"
    os.makedirs(out_dir, exist_ok=True)
    record.manifest_dir = out_dir
    kwargs = {}
    if experiment is Experiment.EXP1:
        kwargs["cache_dir"] = cache_dir
    if experiment is Experiment.EXP3:
        path = heart_failure or state.config.heart_failure.path
        if path is None:
            raise ValueError("exp3 needs the heart failure file, pass --heart-failure")
        kwargs["path"] = path
        record.inputs.append(path)

    output = EXPERIMENTS[experiment.value](state.config, state.threads, **kwargs)
    for name, table in output.tables.items():
        path = get_file_path(out_dir, name)
        write_table(table, path, METRIC_SCHEMA)
        record.outputs.append(path)
    for name, ds in output.explanations.items():
        path = get_file_path(out_dir, f"explanations_{name}")
        write_explanations(ds, path)
        record.outputs.append(path)
    if bundle:
        path = get_file_path(out_dir, "report", "json")
        document = {
            "experiment": experiment.value,
            "version": __version__,
            "config": state.config.model_dump(mode="json"),
            "tables": {
                name: json.loads(table.to_json(orient="records"))
                for name, table in output.tables.items()
            },
        }
        with open(path, "w") as f:
            json.dump(document, f, indent=2)
        record.outputs.append(path)
    typer.echo(f"{experiment.value}: {len(record.outputs)} files written to {out_dir}")


def _survshap_plot(paths: list[str], observation: int | None, metric: str | None) -> pd.DataFrame:
    ds = read_explanations(paths[0])
    observation = ds["observation"].values[0] if observation is None else observation
    if observation not in ds["observation"].values:
        raise ValueError(f"observation {observation} is not in {paths[0]}")
    curves = ds["attribution"].sel(observation=observation).to_dataframe().reset_index()
    return pd.DataFrame(
        {
            "series": curves["variable"],
            "x": curves["time"],
            "y": curves["attribution"],
            "group": str(observation),
        }
    )


def _ranking_plot(paths: list[str], observation: int | None, metric: str | None) -> pd.DataFrame:
    frames = []
    for path in paths:
        schema = read_schema(path)
        if schema == EXPLANATION_SCHEMA:
            ds = read_explanations(path)
            names = [str(v) for v in ds["variable"].values]
            rankings = [ImportanceRanking.from_scores(psi, names) for psi in ds["psi"].values]
        elif schema == SURVLIME_SCHEMA:
            df, _ = read_table(path, SURVLIME_SCHEMA)
            rankings = [
                ImportanceRanking.from_scores(rows["score"].to_numpy(), rows["variable"].tolist())
                for _, rows in df.groupby("observation", sort=False)
            ]
        else:
            df, _ = read_table(path, METRIC_SCHEMA)
            df = df[df["metric"] == "rank_fraction"].fillna({"model": "", "method": ""})
            frames.append(
                pd.DataFrame(
                    {
                        "series": df["variable"],
                        "x": df["rank"].astype(int),
                        "y": df["value"],
                        "group": df["model"] + "/" + df["method"],
                    }
                )
            )
            continue
        distribution = ranking_distribution(rankings)
        frames.append(
            pd.DataFrame(
                {
                    "series": distribution["variable"],
                    "x": distribution["rank"],
                    "y": distribution["fraction"],
                    "group": os.path.splitext(os.path.basename(path))[0],
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def _metric_rows(paths: list[str], metric: str) -> pd.DataFrame:
    frames = []
    for path in paths:
        df, _ = read_table(path, METRIC_SCHEMA)
        frames.append(df[df["metric"] == metric])
    df = pd.concat(frames, ignore_index=True)
    if df.empty:
        raise ValueError(f"no '{metric}' rows in {paths}")
    return df.reindex(columns=["dataset", "model", "method", "variable", "time", "value"]).fillna(
        {"dataset": "", "model": "", "method": "", "variable": ""}
    )


def _metric_plot(paths: list[str], observation: int | None, metric: str | None) -> pd.DataFrame:
    if metric is None:
        raise ValueError("the metric plot needs --metric")
    df = _metric_rows(paths, metric)
    series = df["variable"].where(df["variable"] != "", df["model"])
    group = df["dataset"] + "/" + df["model"] + "/" + df["method"]
    return pd.DataFrame({"series": series, "x": df["time"], "y": df["value"], "group": group})


def _brier_plot(paths: list[str], observation: int | None, metric: str | None) -> pd.DataFrame:
    df = _metric_rows(paths, "brier")
    return pd.DataFrame(
        {"series": df["model"], "x": df["time"], "y": df["value"], "group": df["dataset"]}
    )


PLOT_KINDS: dict[str, Callable[[list[str], int | None, str | None], pd.DataFrame]] = {
    "survshap": _survshap_plot,
    "ranking": _ranking_plot,
    "metric": _metric_plot,
    "brier": _brier_plot,
}


def _plotdata(
    state: RunState,
    record: RunRecord,
    kind: str,
    inputs: list[str],
    observation: int | None = None,
    metric: str | None = None,
) -> None:
    if kind not in PLOT_KINDS:
        raise ValueError(
            f"unknown plot kind '{kind}', supported kinds: {', '.join(sorted(PLOT_KINDS))}"
        )
    record.inputs.extend(inputs)
    df = PLOT_KINDS[kind](inputs, observation, metric)
    path = state.out or f"plot_{kind}.csv"
    write_table(df, path, PLOT_SCHEMA)
    record.outputs.append(path)
    typer.echo(f"{len(df)} {kind} plot rows written to {path}")


COMMANDS: dict[str, Callable[..., None]] = {
    "generate": _generate,
    "fit": _fit,
    "explain": _explain,
    "evaluate": _evaluate,
    "reproduce": _reproduce,
    "plotdata": _plotdata,
}


def _dispatch(state: RunState, command: str, **arguments) -> None:
    with _run(state, command, arguments) as record:
        COMMANDS[command](state, record, **arguments)


@app.callback()
def main(
    ctx: typer.Context,
    seed: Annotated[
        int | None, typer.Option(help="seed of every random stream, config values when unset")
    ] = None,
    threads: Annotated[
        int | None, typer.Option(help="parallel workers, available cores by default", min=1)
    ] = None,
    config: Annotated[str | None, typer.Option(help="TOML configuration file")] = None,
    out: Annotated[str | None, typer.Option(help="output file or directory")] = None,
):
    settings = SurvShapSettings()
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        run_config = load_config(config, seed)
    except ValueError as e:
        _fail(e, 2)
    ctx.obj = RunState(
        config=run_config,
        threads=settings.threads if threads is None else threads,
        out=out,
        seed=seed,
        settings=settings,
    )


@app.command()
def generate(
    ctx: typer.Context,
    kind: DatasetKind,
    n: Annotated[int | None, typer.Option(help="number of rows", min=1)] = None,
):
    """Generate a synthetic dataset"""
    _dispatch(ctx.obj, "generate", kind=kind.value, n=n)


@app.command()
def fit(
    ctx: typer.Context,
    model: ModelKind,
    data: str,
    n_trees: Annotated[int | None, typer.Option(min=1)] = None,
    min_leaf_size: Annotated[int | None, typer.Option(min=1)] = None,
    max_features: Annotated[int | None, typer.Option(min=1)] = None,
    max_depth: Annotated[int | None, typer.Option(min=1)] = None,
    test_fraction: Annotated[
        float | None, typer.Option(help="held-out share for the printed score, in-sample if unset")
    ] = None,
):
    """Fit a Cox or Random Survival Forest model and print its integrated Brier score"""
    _dispatch(
        ctx.obj,
        "fit",
        model=model.value,
        data=data,
        n_trees=n_trees,
        min_leaf_size=min_leaf_size,
        max_features=max_features,
        max_depth=max_depth,
        test_fraction=test_fraction,
    )


@app.command()
def explain(
    ctx: typer.Context,
    model: str,
    data: str,
    select: Annotated[str, typer.Option(help="all, an index, start:stop, or a list")] = "all",
    method: ExplainMethod = ExplainMethod.KERNEL,
    background: Annotated[
        str | None, typer.Option(help="background dataset, the explained data by default")
    ] = None,
    n_permutations: Annotated[int | None, typer.Option(min=1)] = None,
    n_coalitions: Annotated[int | None, typer.Option(min=2)] = None,
    n_neighbors: Annotated[int | None, typer.Option(min=2)] = None,
    t_max: Annotated[float | None, typer.Option()] = None,
):
    """Explain selected observations with SurvSHAP(t) or SurvLIME"""
    _dispatch(
        ctx.obj,
        "explain",
        model=model,
        data=data,
        select=select,
        method=method.value,
        background=background,
        n_permutations=n_permutations,
        n_coalitions=n_coalitions,
        n_neighbors=n_neighbors,
        t_max=t_max,
    )


@app.command()
def evaluate(
    ctx: typer.Context,
    model: str,
    data: str,
    explanations: Annotated[str | None, typer.Option()] = None,
    ground_truth: Annotated[
        str | None, typer.Option(help="reference explanations of the same observations")
    ] = None,
):
    """Metric report of a model and optionally of its explanations"""
    _dispatch(
        ctx.obj,
        "evaluate",
        model=model,
        data=data,
        explanations=explanations,
        ground_truth=ground_truth,
    )


@app.command()
def reproduce(
    ctx: typer.Context,
    experiment: Experiment,
    heart_failure: Annotated[str | None, typer.Option(help="heart failure records file")] = None,
    cache_dir: Annotated[
        str | None, typer.Option(help="cache of the exp1 reference sample")
    ] = None,
    bundle: Annotated[bool, typer.Option(help="also write every table to report.json")] = False,
):
    """Run one of the three experiments end to end"""
    _dispatch(
        ctx.obj,
        "reproduce",
        experiment=experiment.value,
        heart_failure=heart_failure,
        cache_dir=cache_dir,
        bundle=bundle,
    )


@app.command()
def plotdata(
    ctx: typer.Context,
    kind: str,
    inputs: list[str],
    observation: Annotated[int | None, typer.Option()] = None,
    metric: Annotated[str | None, typer.Option()] = None,
):
    """Plot-ready table (series, x, y, group) of explanation or metric files"""
    _dispatch(
        ctx.obj, "plotdata", kind=kind, inputs=inputs, observation=observation, metric=metric
    )


@app.command()
def replay(ctx: typer.Context, manifest: str):
    """Run the command recorded in a manifest again with its resolved configuration"""
    state: RunState = ctx.obj
    try:
        recorded = read_manifest(manifest)
    except (OSError, ValueError) as e:
        _fail(e, 2)
    if recorded.command not in COMMANDS:
        _fail(ValueError(f"manifest command '{recorded.command}' cannot be replayed"), 2)
    arguments = dict(recorded.arguments)
    out = arguments.pop("out", None)
    replayed = RunState(
        config=recorded.config,
        threads=state.threads,
        out=state.out or out,
        seed=recorded.seed,
        settings=state.settings,
    )
    _dispatch(replayed, recorded.command, **arguments)


if __name__ == "__main__":
    app()
