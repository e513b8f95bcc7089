"""Save and load fitted models as versioned JSON documents

Floats are written with their shortest round-trip representation, so a loaded model
predicts bit-identically to the saved one.
"""

import logging
import os
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter

from survshap.core import CurveKind, StepCurve, TimeGrid
from survshap.errors import SchemaError
from survshap.models.cox import CoxModel
from survshap.models.forest import RandomSurvivalForest, SurvivalTree
from survshap.models.model import AbstractSurvivalModel
from survshap.pydantic_models import ForestParams

log = logging.getLogger(__name__)

MODEL_FORMAT = "survshap.model"
MODEL_VERSION = 1


class _Document(BaseModel):
    format: Literal["survshap.model"] = MODEL_FORMAT
    version: int = Field(default=MODEL_VERSION, ge=1)
    feature_names: list[str]
    event_grid: list[float]


class CoxDocument(_Document):
    kind: Literal["cph"] = "cph"
    coefficients: list[float]
    feature_means: list[float]
    baseline_chf: list[float]
    n_iter: int = 0
    log_likelihood: float | None = None


class TreeDocument(BaseModel):
    feature: list[int]
    threshold: list[float | None]
    left: list[int]
    right: list[int]
    leaf: list[int]
    leaf_positions: list[list[int]]
    leaf_sizes: list[list[float]]


class ForestDocument(_Document):
    kind: Literal["rsf"] = "rsf"
    params: ForestParams
    trees: list[TreeDocument]


ModelDocument = Annotated[CoxDocument | ForestDocument, Field(discriminator="kind")]
_adapter = TypeAdapter(ModelDocument)


def _to_document(model: AbstractSurvivalModel) -> CoxDocument | ForestDocument:
    if isinstance(model, CoxModel):
        return CoxDocument(
            feature_names=list(model.feature_names),
            event_grid=model.event_grid.times.tolist(),
            coefficients=model.coefficients.tolist(),
            feature_means=model.feature_means.tolist(),
            baseline_chf=model.baseline_chf.values.tolist(),
            n_iter=model.n_iter,
            log_likelihood=None if np.isnan(model.log_likelihood) else model.log_likelihood,
        )
    if isinstance(model, RandomSurvivalForest):
        trees = [
            TreeDocument(
                feature=tree.feature.tolist(),
                threshold=[None if np.isnan(t) else float(t) for t in tree.threshold],
                left=tree.left.tolist(),
                right=tree.right.tolist(),
                leaf=tree.leaf.tolist(),
                leaf_positions=[np.asarray(p).tolist() for p in tree.leaf_positions],
                leaf_sizes=[np.asarray(s).tolist() for s in tree.leaf_sizes],
            )
            for tree in model.trees
        ]
        return ForestDocument(
            feature_names=list(model.feature_names),
            event_grid=model.event_grid.times.tolist(),
            params=model.params,
            trees=trees,
        )
    raise TypeError(f"cannot serialize a {type(model).__name__}")


def _from_document(document: CoxDocument | ForestDocument) -> AbstractSurvivalModel:
    grid = TimeGrid(np.array(document.event_grid))
    if isinstance(document, CoxDocument):
        return CoxModel(
            coefficients=np.array(document.coefficients),
            baseline_chf=StepCurve(grid, document.baseline_chf, CurveKind.CUMULATIVE_HAZARD),
            feature_means=np.array(document.feature_means),
            feature_names=tuple(document.feature_names),
            n_iter=document.n_iter,
            log_likelihood=(
                float("nan") if document.log_likelihood is None else document.log_likelihood
            ),
        )
    trees = tuple(
        SurvivalTree(
            feature=tree.feature,
            threshold=[np.nan if t is None else t for t in tree.threshold],
            left=tree.left,
            right=tree.right,
            leaf=tree.leaf,
            leaf_positions=tuple(np.array(p, dtype=int) for p in tree.leaf_positions),
            leaf_sizes=tuple(np.array(s, dtype=float) for s in tree.leaf_sizes),
            grid_size=len(grid),
        )
        for tree in document.trees
    )
    return RandomSurvivalForest(trees, grid, tuple(document.feature_names), document.params)


def save_model(model: AbstractSurvivalModel, path: str) -> None:
    document = _to_document(model)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(document.model_dump_json())
    log.info(f"Saved {document.kind} model to {path}")


def load_model(path: str) -> AbstractSurvivalModel:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise SchemaError(f"could not read model file {path}: {e}") from e
    try:
        document = _adapter.validate_json(text)
    except ValueError as e:
        raise SchemaError(f"{path} is not a valid survshap model file: {e}") from e
    if document.version > MODEL_VERSION:
        raise SchemaError(
            f"{path} has model format version {document.version}, "
            f"this version reads up to {MODEL_VERSION}"
        )
    log.info(f"Loaded {document.kind} model from {path}")
    return _from_document(document)
