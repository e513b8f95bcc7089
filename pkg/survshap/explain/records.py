"""Explanation tables

Explanations of many observations are held as an ``xarray.Dataset`` over the dimensions
(observation, variable, time) and written as long records, one row per variable and time
point:

- observation
- record: attribution, baseline, prediction or psi
- variable (empty for baseline and prediction rows)
- time (empty for psi rows)
- value
- normalized (attribution rows only)
"""

import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd
import xarray as xr

from survshap.core import TimeGrid
from survshap.data import EXPLANATION_SCHEMA, SURVLIME_SCHEMA, read_table, write_table
from survshap.errors import SchemaError
from survshap.explain.shap import SurvShapResult
from survshap.explain.survlime import SurvLimeResult, survlime_ranking

log = logging.getLogger(__name__)

RECORD_COLUMNS = ["observation", "record", "variable", "time", "value", "normalized"]


def to_dataset(results: Sequence[SurvShapResult], ids: Sequence[int] | None = None) -> xr.Dataset:
    if len(results) == 0:
        raise ValueError("no explanations given")
    grid = results[0].grid
    names = results[0].feature_names
    for result in results:
        if result.grid != grid or result.feature_names != names:
            raise ValueError("explanations must share their grid and variables")
    ids = list(range(len(results))) if ids is None else list(ids)
    curve_dims = ("observation", "variable", "time")
    return xr.Dataset(
        {
            "attribution": (curve_dims, np.stack([r.attributions for r in results])),
            "normalized": (curve_dims, np.stack([r.normalized for r in results])),
            "baseline": (("observation", "time"), np.stack([r.baseline for r in results])),
            "prediction": (("observation", "time"), np.stack([r.prediction for r in results])),
            "psi": (("observation", "variable"), np.stack([r.psi for r in results])),
        },
        coords={"observation": ids, "variable": list(names), "time": grid.times},
        attrs={
            "method": results[0].method.value,
            "max_reconstruction_error": max(r.max_reconstruction_error for r in results),
        },
    )


def reconstruction_error(ds: xr.Dataset) -> float:
    reconstruction = ds["baseline"] + ds["attribution"].sum("variable")
    return float(np.abs(reconstruction - ds["prediction"]).max())


def to_records(ds: xr.Dataset) -> pd.DataFrame:
    curves = ds[["attribution", "normalized"]].to_dataframe().reset_index()
    curves = curves.rename(columns={"attribution": "value"})
    curves["record"] = "attribution"
    frames = [curves]
    for name in ("baseline", "prediction"):
        frame = ds[name].to_dataframe().reset_index().rename(columns={name: "value"})
        frame["record"] = name
        frame["variable"] = ""
        frames.append(frame)
    psi = ds["psi"].to_dataframe().reset_index().rename(columns={"psi": "value"})
    psi["record"] = "psi"
    frames.append(psi)
    return pd.concat(frames, ignore_index=True).reindex(columns=RECORD_COLUMNS)


def from_records(df: pd.DataFrame, method: str | None = None) -> xr.Dataset:
    missing = [c for c in RECORD_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"explanation table misses columns {missing}")
    attribution = df[df["record"] == "attribution"]
    if attribution.empty:
        raise SchemaError("explanation table holds no attribution records")
    observations = pd.unique(attribution["observation"])
    variables = pd.unique(attribution["variable"])
    curves = (
        attribution.set_index(["observation", "variable", "time"])[["value", "normalized"]]
        .to_xarray()
        .reindex(observation=observations, variable=variables)
        .rename({"value": "attribution"})
    )
    ds = curves
    for name in ("baseline", "prediction"):
        rows = df[df["record"] == name]
        ds[name] = rows.set_index(["observation", "time"])["value"].to_xarray()
    psi = df[df["record"] == "psi"]
    ds["psi"] = psi.set_index(["observation", "variable"])["value"].to_xarray()
    ds = ds.reindex(observation=observations, variable=variables)
    ds.attrs["method"] = method
    ds.attrs["max_reconstruction_error"] = reconstruction_error(ds)
    return ds


def grid_of(ds: xr.Dataset) -> TimeGrid:
    return TimeGrid(ds["time"].values)


def write_explanations(ds: xr.Dataset, path: str) -> None:
    footer = {
        "method": ds.attrs.get("method"),
        "max_reconstruction_error": f"{reconstruction_error(ds):.3e}",
    }
    write_table(to_records(ds), path, EXPLANATION_SCHEMA, footer)
    log.info(f"Wrote explanations of {ds.sizes['observation']} observations to {path}")


def read_explanations(path: str) -> xr.Dataset:
    df, footer = read_table(path, EXPLANATION_SCHEMA)
    df["variable"] = df["variable"].fillna("").astype(str)
    return from_records(df, footer.get("method"))


def survlime_table(results: Sequence[SurvLimeResult], ids: Sequence[int]) -> pd.DataFrame:
    """
    SurvLIME coefficients with the ranking they induce

    returns a dataframe with the following columns
    - observation
    - variable
    - value (feature value of x*)
    - coefficient
    - score (|value * coefficient|)
    - rank (1 is the most important)
    - loss
    """
    rows = []
    for index, result in zip(ids, results, strict=True):
        ranking = survlime_ranking(result)
        ranks = ranking.ranks
        for d, name in enumerate(result.feature_names):
            rows.append(
                {
                    "observation": index,
                    "variable": name,
                    "value": result.observation[d],
                    "coefficient": result.coefficients[d],
                    "score": ranking.scores[d],
                    "rank": int(ranks[d]) + 1,
                    "loss": result.loss,
                }
            )
    return pd.DataFrame(rows)


def write_survlime(results: Sequence[SurvLimeResult], ids: Sequence[int], path: str) -> None:
    clamped = sum(r.n_clamped for r in results)
    write_table(survlime_table(results, ids), path, SURVLIME_SCHEMA, {"clamped_values": clamped})
    log.info(f"Wrote SurvLIME coefficients of {len(results)} observations to {path}")
