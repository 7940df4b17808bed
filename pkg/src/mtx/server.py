"""HTTP surface for the pipeline: one dataset, one trait at a time.

POST /api/trait recomputes the distance field, tree, and branch
decomposition into a fresh immutable snapshot and swaps it in under a
lock; GET handlers read whichever snapshot is current, so they never
observe a half-updated state and repeated identical GETs return
identical bodies until the next trait submission.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from .attribute import AttributeMapping
from .dataset import MultiFieldDataset
from .errors import MtxError
from .mergetree import (
    BranchDecomposition,
    MergeTree,
    SimplificationMetric,
    build_merge_tree,
    compute_persistence,
    simplify,
)
from .io_formats import tree_to_dict
from .segmentation import QUERY_METHODS, LabelField, QuerySpec, histogram, run_query
from .traits import DistanceField, compute_distance_field, trait_from_json

_PLACEHOLDER = """<!doctype html>
<html><head><title>mtx explorer</title></head>
<body><h1>mtx API server</h1>
<p>No UI assets are built. The JSON API lives under <code>/api/</code>.</p>
</body></html>"""


@dataclass
class TraitState:
    """Everything derived from one trait submission."""

    trait_doc: dict
    dfield: DistanceField
    tree: MergeTree
    bd: BranchDecomposition
    cache: dict = dc_field(default_factory=dict)
    cache_lock: threading.Lock = dc_field(default_factory=threading.Lock)


class Session:
    def __init__(self, dataset: MultiFieldDataset | None = None):
        self.dataset = dataset
        self.base_fields = dataset.field_names() if dataset else []
        self.state: TraitState | None = None
        self.write_lock = threading.Lock()

    def submit_trait(self, doc: dict) -> TraitState:
        if self.dataset is None:
            raise HTTPException(503, "no dataset loaded")
        try:
            trait, metric, axes = trait_from_json(json.dumps(doc))
            mapping = AttributeMapping(axes).resolve(self.dataset)
            dfield = compute_distance_field(self.dataset, mapping, trait, metric)
        except MtxError as exc:
            raise HTTPException(400, str(exc)) from exc
        tree = build_merge_tree(dfield.field)
        bd = compute_persistence(tree)
        state = TraitState(trait_doc=doc, dfield=dfield, tree=tree, bd=bd)
        with self.write_lock:
            self.state = state
        return state

    def require_dataset(self) -> MultiFieldDataset:
        if self.dataset is None:
            raise HTTPException(503, "no dataset loaded")
        return self.dataset

    def require_state(self) -> TraitState:
        if self.dataset is None:
            raise HTTPException(503, "no dataset loaded")
        if self.state is None:
            raise HTTPException(409, "no trait submitted yet")
        return self.state


def _parse_metric(metric: str, threshold: str) -> SimplificationMetric:
    try:
        return SimplificationMetric(metric, float(threshold))
    except (ValueError, MtxError) as exc:
        raise HTTPException(400, f"bad simplification metric: {exc}") from exc


def _query_spec(method: str, metric: str, threshold: str, cut: str | None) -> QuerySpec:
    if method not in QUERY_METHODS:
        raise HTTPException(400, f"unknown query method '{method}' (have {QUERY_METHODS})")
    if method == "subtrees" and cut is None:
        raise HTTPException(400, "subtrees query needs a 'cut' parameter")
    simp = _parse_metric(metric, threshold)
    try:
        cut_val = float(cut) if cut is not None and method == "subtrees" else None
        return QuerySpec(method=method, metric=simp, cut_level=cut_val)
    except (ValueError, MtxError) as exc:
        raise HTTPException(400, str(exc)) from exc


def _cached_labels(state: TraitState, spec: QuerySpec) -> LabelField:
    key = (spec.method, spec.metric.kind, repr(spec.metric.threshold), repr(spec.cut_level))
    with state.cache_lock:
        hit = state.cache.get(key)
    if hit is not None:
        return hit
    labels = run_query(state.tree, state.bd, spec)
    with state.cache_lock:
        return state.cache.setdefault(key, labels)


def create_app(
    dataset: MultiFieldDataset | None = None, static_dir: str | Path | None = None
) -> FastAPI:
    app = FastAPI(title="mtx explorer API")
    session = Session(dataset)
    app.state.session = session

    @app.get("/api/dataset")
    def dataset_summary():
        ds = session.require_dataset()
        return {
            "dims": list(ds.grid.dims),
            "spacing": list(ds.grid.spacing),
            "origin": list(ds.grid.origin),
            "voxel_count": ds.grid.voxel_count,
            "fields": [
                {
                    "name": f.name,
                    "min": f.min,
                    "max": f.max,
                    "derived": f.name not in session.base_fields,
                }
                for f in ds.fields
            ],
            "metadata": ds.metadata,
        }

    @app.post("/api/trait")
    async def submit_trait(request: Request):
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise HTTPException(400, f"request body is not valid JSON: {exc}") from exc
        state = session.submit_trait(doc)
        values = state.dfield.values
        return {
            "max_distance": float(values.max()),
            "min_distance": float(values.min()),
            "leaf_count": len(state.tree.leaf_ids()),
            "branch_count": len(state.bd.branches),
            "voxel_count": int(values.size),
        }

    @app.get("/api/tree")
    def tree_endpoint(metric: str = "persistence", threshold: str = "0"):
        state = session.require_state()
        simp = _parse_metric(metric, threshold)
        simplified = simplify(state.tree, simp)
        bd = compute_persistence(simplified)
        doc = tree_to_dict(simplified, bd)
        doc["leaf_count"] = len(simplified.leaf_ids())
        return doc

    @app.get("/api/segmentation")
    def segmentation_endpoint(
        method: str,
        metric: str = "persistence",
        threshold: str = "0",
        cut: str | None = None,
    ):
        state = session.require_state()
        spec = _query_spec(method, metric, threshold, cut)
        labels = _cached_labels(state, spec)
        return {
            "legend": [e.to_dict() for e in labels.legend],
            "labels_b64": base64.b64encode(labels.labels.astype("<u4").tobytes()).decode(),
            "voxel_count": int(labels.labels.size),
        }

    @app.get("/api/slice")
    def slice_endpoint(
        axis: str,
        index: int,
        layer: str = "distance",
        segids: str | None = None,
        method: str | None = None,
        metric: str = "persistence",
        threshold: str = "0",
        cut: str | None = None,
    ):
        state = session.require_state()
        grid = state.dfield.grid
        nx, ny, nz = grid.dims
        sizes = {"x": nx, "y": ny, "z": nz}
        if axis not in sizes:
            raise HTTPException(400, f"axis must be one of x, y, z, got '{axis}'")
        if not 0 <= index < sizes[axis]:
            raise HTTPException(416, f"slice index {index} out of range 0..{sizes[axis] - 1}")

        if layer == "distance":
            volume = state.dfield.values.reshape(nz, ny, nx)
        elif layer == "labels":
            if method is None:
                raise HTTPException(400, "labels layer needs segmentation query parameters")
            spec = _query_spec(method, metric, threshold, cut)
            labels = _cached_labels(state, spec).labels.copy()
            if segids is not None and segids != "":
                try:
                    keep = {int(s) for s in segids.split(",")}
                except ValueError as exc:
                    raise HTTPException(400, f"bad segids list: {exc}") from exc
                labels[~np.isin(labels, list(keep))] = 0
            volume = labels.reshape(nz, ny, nx)
        else:
            raise HTTPException(400, f"layer must be 'distance' or 'labels', got '{layer}'")

        if axis == "x":
            plane = volume[:, :, index]  # rows z, cols y
        elif axis == "y":
            plane = volume[:, index, :]  # rows z, cols x
        else:
            plane = volume[index, :, :]  # rows y, cols x
        return {
            "axis": axis,
            "index": index,
            "layer": layer,
            "width": int(plane.shape[1]),
            "height": int(plane.shape[0]),
            "min": float(plane.min()),
            "max": float(plane.max()),
            "values": plane.ravel().tolist(),
        }

    @app.get("/api/histogram")
    def histogram_endpoint(bins: int = 64):
        state = session.require_state()
        if bins < 1:
            raise HTTPException(400, f"bins must be >= 1, got {bins}")
        return {
            "bins": [{"lower": lo, "count": n} for lo, n in histogram(state.dfield, bins)],
            "max": float(state.dfield.values.max()),
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _PLACEHOLDER

    return app
