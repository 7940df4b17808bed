"""Domain segmentations queried from a merge tree.

Three query styles: one segment per surviving branch of the branch
decomposition (a full partition), one segment per leaf arc of the
simplified tree, and one segment per sub-tree cut off below a level.
Label 0 is reserved for unassigned voxels in all three so the outputs
share one file format. Segment ids are assigned by ascending distance
of the segment minimum, and legend colors come from a fixed palette by
that same rank, so equal inputs always produce identical legends.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import GridDescriptor, ScalarField
from .errors import MtxError
from .mergetree import BranchDecomposition, MergeTree, SimplificationMetric, simplify
from .traits import DistanceField

log = logging.getLogger(__name__)

QUERY_METHODS = ("branch_decomposition", "leaf_arcs", "subtrees")

# fixed categorical palette (matplotlib tab20 order), cycled by segment rank
PALETTE = (
    (31, 119, 180), (174, 199, 232), (255, 127, 14), (255, 187, 120),
    (44, 160, 44), (152, 223, 138), (214, 39, 40), (255, 152, 150),
    (148, 103, 189), (197, 176, 213), (140, 86, 75), (196, 156, 148),
    (227, 119, 194), (247, 182, 210), (127, 127, 127), (199, 199, 199),
    (188, 189, 34), (219, 219, 141), (23, 190, 207), (158, 218, 229),
)


@dataclass(frozen=True)
class QuerySpec:
    method: str
    metric: SimplificationMetric
    cut_level: float | None = None

    def __post_init__(self):
        if self.method not in QUERY_METHODS:
            raise MtxError(f"unknown query method '{self.method}' (have {QUERY_METHODS})")
        if self.method == "subtrees" and self.cut_level is None:
            raise MtxError("subtrees query needs a cut level")
        if self.method != "subtrees" and self.cut_level is not None:
            raise MtxError(f"cut level only applies to subtrees, not {self.method}")


@dataclass
class LegendEntry:
    id: int
    min_value: float
    voxels: int
    color: tuple[int, int, int]
    source: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "min_value": self.min_value,
            "voxels": self.voxels,
            "color": list(self.color),
            "source": self.source,
        }


@dataclass
class LabelField:
    grid: GridDescriptor
    labels: np.ndarray
    legend: list[LegendEntry]

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint32).ravel()
        if labels.size != self.grid.voxel_count:
            raise MtxError(
                f"{labels.size} labels for {self.grid.voxel_count} voxels"
            )
        self.labels = labels

    def segment_ids(self) -> list[int]:
        return [e.id for e in self.legend]


def _assemble(
    grid: GridDescriptor,
    values: np.ndarray,
    segments: list[tuple[np.ndarray, str]],
) -> LabelField:
    """Rank segments by their minimum field value and build labels + legend."""
    ranked = []
    for verts, source in segments:
        seg_vals = values[verts]
        k = int(np.argmin(seg_vals))
        ranked.append((float(seg_vals[k]), int(verts[k]), verts, source))
    ranked.sort(key=lambda r: (r[0], r[1]))

    labels = np.zeros(grid.voxel_count, dtype=np.uint32)
    legend = []
    for rank, (min_val, _, verts, source) in enumerate(ranked):
        seg_id = rank + 1
        labels[verts] = seg_id
        legend.append(
            LegendEntry(
                id=seg_id,
                min_value=min_val,
                voxels=int(verts.size),
                color=PALETTE[rank % len(PALETTE)],
                source=source,
            )
        )
    return LabelField(grid=grid, labels=labels, legend=legend)


def segment_branch_decomposition(
    bd: BranchDecomposition, metric: SimplificationMetric
) -> LabelField:
    """One segment per branch surviving the threshold; a full partition.

    Branches below the threshold fold their vertices into the nearest
    surviving ancestor branch. The master branch always survives.
    """
    tree = bd.tree
    survives = {
        b.id: b.parent is None or bd.metric_value(b, metric.kind) >= metric.threshold
        for b in bd.branches
    }

    def surviving_ancestor(b_id: int) -> int:
        while not survives[b_id]:
            b_id = bd.branches[b_id].parent
        return b_id

    collected: dict[int, list[np.ndarray]] = {
        b.id: [] for b in bd.branches if survives[b.id]
    }
    for b in bd.branches:
        collected[surviving_ancestor(b.id)].append(bd.branch_vertices(b))

    segments = [
        (np.concatenate(chunks), f"branch:{bd.branches[b_id].min_node}")
        for b_id, chunks in collected.items()
    ]
    return _assemble(tree.grid, tree.values, segments)


def segment_leaves(tree: MergeTree, metric: SimplificationMetric) -> LabelField:
    """One segment per leaf of the simplified tree: the leaf's own arc."""
    simplified = simplify(tree, metric)
    segments = []
    for leaf in simplified.leaf_ids():
        arc = simplified.arcs[simplified.out_arc(leaf)]
        segments.append((arc.vertices, f"leaf:{simplified.nodes[leaf].vertex}"))
    return _assemble(tree.grid, tree.values, segments)


def segment_subtrees(
    tree: MergeTree, metric: SimplificationMetric, cut_level: float
) -> LabelField:
    """One segment per maximal sub-tree severed by the cut level.

    A sub-tree is cut where its root-ward arc spans the level (child
    value below, parent value at or above); the segment is every vertex
    of that sub-tree with value strictly below the level. With threshold
    0 this reproduces the connected components of the open sub-level set.
    """
    simplified = simplify(tree, metric)
    values = tree.values
    root_value = simplified.nodes[simplified.root_id].value

    segments = []
    if cut_level > root_value:
        verts = np.concatenate([a.vertices for a in simplified.arcs])
        segments.append((verts, f"subtree:{simplified.nodes[simplified.root_id].vertex}"))
    else:
        for i, arc in enumerate(simplified.arcs):
            child_v = simplified.nodes[arc.child].value
            parent_v = simplified.nodes[arc.parent].value
            if child_v < cut_level <= parent_v:
                verts = np.concatenate(
                    [simplified.arcs[a].vertices for a in simplified.subtree_arcs(i)]
                )
                verts = verts[values[verts] < cut_level]
                segments.append((verts, f"subtree:{simplified.nodes[arc.child].vertex}"))

    if not segments:
        log.warning("cut level %g is below the global minimum; empty labeling", cut_level)
    return _assemble(tree.grid, tree.values, segments)


def run_query(tree: MergeTree, bd: BranchDecomposition, spec: QuerySpec) -> LabelField:
    """Dispatch a query spec to the matching segmentation method."""
    if spec.method == "branch_decomposition":
        return segment_branch_decomposition(bd, spec.metric)
    if spec.method == "leaf_arcs":
        return segment_leaves(tree, spec.metric)
    return segment_subtrees(tree, spec.metric, spec.cut_level)


def histogram(
    field: DistanceField | ScalarField, bins: int
) -> list[tuple[float, int]]:
    """Equal-width histogram over [0, max]; counts sum to the voxel count."""
    if bins < 1:
        raise MtxError(f"bins must be >= 1, got {bins}")
    values = field.values
    top = float(values.max())
    if top <= 0.0:
        counts = [0] * bins
        counts[0] = values.size
        edges = np.linspace(0.0, 0.0, bins + 1)
    else:
        edges = np.linspace(0.0, top, bins + 1)
        counts, _ = np.histogram(values, bins=edges)
        counts = counts.tolist()
    return [(float(edges[i]), int(counts[i])) for i in range(bins)]
