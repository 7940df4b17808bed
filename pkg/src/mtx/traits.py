"""Traits in attribute space and the distance fields they induce.

A trait is a point set, an axis-aligned box, or a line segment in mapped
attribute coordinates. The trait distance of an attribute point is the
exact minimum metric distance to the trait; pulling it back through the
attribute mapping gives a per-voxel scalar field on the grid.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .attribute import AttributeMapping, AttributePoint, AxisSpec
from .dataset import MultiFieldDataset, ScalarField
from .errors import TraitError

METRIC_KINDS = ("euclidean", "weighted_euclidean", "chebyshev")

# fixed chunk length for the voxel loop; fixed so output bytes do not
# depend on the worker count
_CHUNK = 1 << 16


@dataclass(frozen=True)
class DistanceMetric:
    """Metric on attribute space; weights scale squared per-axis differences."""

    kind: str = "euclidean"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise TraitError(f"unknown metric '{self.kind}' (have {METRIC_KINDS})")
        if self.kind == "weighted_euclidean":
            if not self.weights:
                raise TraitError("weighted_euclidean needs a weights list")
            w = tuple(float(x) for x in self.weights)
            if any(x <= 0 for x in w):
                raise TraitError(f"metric weights must be > 0, got {w}")
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise TraitError(f"metric '{self.kind}' takes no weights")

    def pairwise(self, diff: np.ndarray) -> np.ndarray:
        """Distance for an array of coordinate differences, shape (..., n)."""
        if self.kind == "euclidean":
            return np.sqrt(np.sum(diff * diff, axis=-1))
        if self.kind == "weighted_euclidean":
            w = np.asarray(self.weights, dtype=np.float64)
            return np.sqrt(np.sum(w * diff * diff, axis=-1))
        return np.max(np.abs(diff), axis=-1)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.weights is not None:
            d["weights"] = list(self.weights)
        return d


@dataclass(frozen=True)
class PointSetTrait:
    points: tuple[AttributePoint, ...]

    def __post_init__(self):
        if not self.points:
            raise TraitError("point trait needs at least one point")
        dims = {len(p) for p in self.points}
        if len(dims) > 1:
            raise TraitError(f"trait points have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def n(self) -> int:
        return len(self.points[0])

    def to_dict(self) -> dict:
        return {"kind": "points", "points": [list(p.coords) for p in self.points]}


@dataclass(frozen=True)
class BoxTrait:
    lo: AttributePoint
    hi: AttributePoint
    unbounded: frozenset[int] = dc_field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise TraitError("box lo/hi have different dimensions")
        object.__setattr__(self, "unbounded", frozenset(int(i) for i in self.unbounded))
        for i in self.unbounded:
            if not 0 <= i < len(self.lo):
                raise TraitError(f"unbounded axis index {i} out of range")
        for i, (a, b) in enumerate(zip(self.lo.coords, self.hi.coords)):
            if i not in self.unbounded and a > b:
                raise TraitError(f"box axis {i}: lo {a} > hi {b}")

    @property
    def n(self) -> int:
        return len(self.lo)

    def contains(self, point: AttributePoint) -> bool:
        """Exact membership test."""
        return all(
            i in self.unbounded or self.lo.coords[i] <= c <= self.hi.coords[i]
            for i, c in enumerate(point.coords)
        )

    def to_dict(self) -> dict:
        d: dict = {"kind": "box", "lo": list(self.lo.coords), "hi": list(self.hi.coords)}
        if self.unbounded:
            d["unbounded"] = sorted(self.unbounded)
        return d


@dataclass(frozen=True)
class SegmentTrait:
    a: AttributePoint
    b: AttributePoint

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise TraitError("segment endpoints have different dimensions")

    @property
    def n(self) -> int:
        return len(self.a)

    def to_dict(self) -> dict:
        return {"kind": "segment", "a": list(self.a.coords), "b": list(self.b.coords)}


TraitGeometry = PointSetTrait | BoxTrait | SegmentTrait


@dataclass
class DistanceField:
    """The pulled-back trait distance, one non-negative value per voxel."""

    field: ScalarField
    provenance: dict

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def grid(self):
        return self.field.grid


def _check_metric_dims(metric: DistanceMetric, n: int) -> None:
    if metric.weights is not None and len(metric.weights) != n:
        raise TraitError(f"metric has {len(metric.weights)} weights for {n} axes")


def _segment_chebyshev(points: np.ndarray, a: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Exact min over t in [0,1] of max_i |c_i - t d_i| for each row c.

    The objective is convex piecewise linear in t, so the minimum lies at
    an interval endpoint, at a single-coordinate zero crossing, or where
    two coordinate lines intersect; all candidates are enumerated.
    """
    c = points - a
    n = c.shape[1]
    rows = c.shape[0]
    candidates = [np.zeros(rows), np.ones(rows)]
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            if d[i] != 0.0:
                candidates.append(c[:, i] / d[i])
        for i in range(n):
            for j in range(i + 1, n):
                for s in (1.0, -1.0):
                    den = d[i] - s * d[j]
                    if den != 0.0:
                        candidates.append((c[:, i] - s * c[:, j]) / den)
    best = np.full(rows, np.inf)
    for t in candidates:
        t = np.clip(np.nan_to_num(t, nan=0.0, posinf=0.0, neginf=0.0), 0.0, 1.0)
        val = np.max(np.abs(c - t[:, None] * d[None, :]), axis=1)
        best = np.minimum(best, val)
    return best


def trait_distances(
    points: np.ndarray, trait: TraitGeometry, metric: DistanceMetric
) -> np.ndarray:
    """Minimum trait distance for each attribute point in an (N, n) array."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[1]
    if trait.n != n:
        raise TraitError(f"trait dimension {trait.n} != attribute dimension {n}")
    _check_metric_dims(metric, n)

    if isinstance(trait, PointSetTrait):
        dists = [metric.pairwise(points - p.as_array()) for p in trait.points]
        return np.minimum.reduce(dists)

    if isinstance(trait, BoxTrait):
        lo = trait.lo.as_array().copy()
        hi = trait.hi.as_array().copy()
        for i in trait.unbounded:
            lo[i], hi[i] = -np.inf, np.inf
        proj = np.clip(points, lo, hi)
        return metric.pairwise(points - proj)

    a = trait.a.as_array()
    d = trait.b.as_array() - a
    if metric.kind == "chebyshev":
        return _segment_chebyshev(points, a, d)
    w = np.ones(n) if metric.weights is None else np.asarray(metric.weights)
    denom = float(np.sum(w * d * d))
    if denom == 0.0:
        t = np.zeros(points.shape[0])
    else:
        t = np.clip((points - a) @ (w * d) / denom, 0.0, 1.0)
    return metric.pairwise(points - a - t[:, None] * d[None, :])


def distance_to_trait(
    a: AttributePoint, trait: TraitGeometry, metric: DistanceMetric
) -> float:
    """Exact minimum distance from one attribute point to the trait."""
    return float(trait_distances(a.as_array()[None, :], trait, metric)[0])


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else MTX_THREADS, else 1."""
    if workers is None:
        workers = int(os.environ.get("MTX_THREADS", "1"))
    if workers < 1:
        raise TraitError(f"worker count must be >= 1, got {workers}")
    return workers


def compute_distance_field(
    dataset: MultiFieldDataset,
    mapping: AttributeMapping,
    trait: TraitGeometry,
    metric: DistanceMetric,
    workers: int | None = None,
    name: str = "trait_distance",
) -> DistanceField:
    """Pull the trait distance back onto the grid, one value per voxel.

    The voxel loop runs over fixed-size chunks handed to a thread pool;
    chunk boundaries do not depend on the worker count, so the output is
    bitwise identical for any number of workers.
    """
    if not mapping.resolved:
        mapping.resolve(dataset)
    matrix = mapping.attribute_matrix()
    workers = resolve_workers(workers)

    out = np.empty(matrix.shape[0], dtype=np.float64)
    spans = [(s, min(s + _CHUNK, matrix.shape[0])) for s in range(0, matrix.shape[0], _CHUNK)]

    def run(span):
        s, e = span
        out[s:e] = trait_distances(matrix[s:e], trait, metric)

    if workers == 1 or len(spans) == 1:
        for span in spans:
            run(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))

    provenance = {
        "trait": trait.to_dict(),
        "metric": metric.to_dict(),
        "axes": [{"source": ax.source, "normalize": ax.normalization} for ax in mapping.axes],
    }
    return DistanceField(ScalarField(dataset.grid, name, out), provenance)


def trait_from_json(text: str) -> tuple[TraitGeometry, DistanceMetric, list[AxisSpec]]:
    """Parse and fully validate a trait specification document.

    Expected shape:
      {"axes": [{"source": str, "normalize": "none"|"min_max_unit"}, ...],
       "metric": {"kind": ..., "weights": [...]?},          # optional, euclidean
       "trait": {"kind": "points", "points": [[...], ...]}
              | {"kind": "box", "lo": [...], "hi": [...], "unbounded": [...]?}
              | {"kind": "segment", "a": [...], "b": [...]}}
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraitError(f"trait JSON does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise TraitError("trait JSON must be an object")

    axes_raw = doc.get("axes")
    if not isinstance(axes_raw, list) or not axes_raw:
        raise TraitError("trait JSON needs a non-empty 'axes' list")
    axes = []
    for i, entry in enumerate(axes_raw):
        if not isinstance(entry, dict) or "source" not in entry:
            raise TraitError(f"axes[{i}] needs a 'source' name")
        axes.append(AxisSpec(str(entry["source"]), str(entry.get("normalize", "none"))))
    n = len(axes)

    metric_raw = doc.get("metric", {"kind": "euclidean"})
    if not isinstance(metric_raw, dict) or "kind" not in metric_raw:
        raise TraitError("'metric' needs a 'kind'")
    weights = metric_raw.get("weights")
    metric = DistanceMetric(str(metric_raw["kind"]), tuple(weights) if weights else None)
    _check_metric_dims(metric, n)

    trait_raw = doc.get("trait")
    if not isinstance(trait_raw, dict) or "kind" not in trait_raw:
        raise TraitError("trait JSON needs a 'trait' object with a 'kind'")
    kind = trait_raw["kind"]

    def point(coords, label) -> AttributePoint:
        if not isinstance(coords, (list, tuple)) or len(coords) != n:
            raise TraitError(f"{label} must be a list of {n} coordinates")
        return AttributePoint(tuple(coords))

    if kind == "points":
        pts = trait_raw.get("points")
        if not isinstance(pts, list) or not pts:
            raise TraitError("points trait needs a non-empty 'points' list")
        trait: TraitGeometry = PointSetTrait(
            tuple(point(p, f"points[{i}]") for i, p in enumerate(pts))
        )
    elif kind == "box":
        unbounded = frozenset(int(i) for i in trait_raw.get("unbounded", []))
        trait = BoxTrait(
            point(trait_raw.get("lo"), "box lo"),
            point(trait_raw.get("hi"), "box hi"),
            unbounded,
        )
    elif kind == "segment":
        trait = SegmentTrait(point(trait_raw.get("a"), "segment a"), point(trait_raw.get("b"), "segment b"))
    else:
        raise TraitError(f"unknown trait kind '{kind}'")

    return trait, metric, axes
