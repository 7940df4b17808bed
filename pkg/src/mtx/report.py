"""Static report rendering: figures plus delimited summaries of one field.

Writes a histogram figure with optional level markers, a mid-volume (or
chosen) slice with the segmentation overlay, and CSV companions for the
histogram, branch table, and segment legend.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mergetree import SimplificationMetric, build_merge_tree, compute_persistence, simplify
from .segmentation import LabelField, QuerySpec, histogram, run_query
from .traits import DistanceField


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _slice_plane(values: np.ndarray, grid, axis: str, index: int) -> np.ndarray:
    nx, ny, nz = grid.dims
    volume = values.reshape(nz, ny, nx)
    if axis == "x":
        return volume[:, :, index]
    if axis == "y":
        return volume[:, index, :]
    return volume[index, :, :]


def render_report(
    dfield: DistanceField,
    outdir: str | Path,
    bins: int = 64,
    levels: tuple[float, ...] = (),
    method: str | None = None,
    metric: SimplificationMetric | None = None,
    cut: float | None = None,
    axis: str = "z",
    index: int | None = None,
) -> list[Path]:
    """Render figures and CSVs into outdir; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = dfield.grid
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y, or z, got '{axis}'")
    sizes = {"x": grid.dims[0], "y": grid.dims[1], "z": grid.dims[2]}
    if index is None:
        index = sizes[axis] // 2
    if not 0 <= index < sizes[axis]:
        raise ValueError(f"slice index {index} out of range 0..{sizes[axis] - 1}")

    written = []

    hist = histogram(dfield, bins)
    _write_csv(outdir / "histogram.csv", ["bin_lower", "count"], [[lo, n] for lo, n in hist])
    written.append(outdir / "histogram.csv")

    fig, ax = plt.subplots(figsize=(7, 3.2))
    edges = [lo for lo, _ in hist]
    counts = [n for _, n in hist]
    width = edges[1] - edges[0] if len(edges) > 1 else 1.0
    ax.bar(edges, counts, width=width, align="edge", color="tab:blue", alpha=0.7)
    for lv in levels:
        ax.axvline(lv, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("distance to trait")
    ax.set_ylabel("voxels")
    fig.tight_layout()
    fig.savefig(outdir / "histogram.png", dpi=130)
    plt.close(fig)
    written.append(outdir / "histogram.png")

    tree = build_merge_tree(dfield.field)
    simp_metric = metric or SimplificationMetric("persistence", 0.0)
    simplified = simplify(tree, simp_metric)
    bd = compute_persistence(simplified)
    _write_csv(
        outdir / "branches.csv",
        ["id", "min_vertex", "min_value", "persistence", "hypervolume", "parent"],
        [
            [
                b.id,
                simplified.nodes[b.min_node].vertex,
                simplified.nodes[b.min_node].value,
                b.persistence,
                b.hypervolume,
                "" if b.parent is None else b.parent,
            ]
            for b in bd.branches
        ],
    )
    written.append(outdir / "branches.csv")

    labels: LabelField | None = None
    if method is not None:
        spec = QuerySpec(method=method, metric=simp_metric, cut_level=cut)
        labels = run_query(tree, compute_persistence(tree), spec)
        _write_csv(
            outdir / "legend.csv",
            ["id", "min_value", "voxels", "r", "g", "b", "source"],
            [[e.id, e.min_value, e.voxels, *e.color, e.source] for e in labels.legend],
        )
        written.append(outdir / "legend.csv")

    plane = _slice_plane(dfield.values, grid, axis, index)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(plane, cmap="gray", origin="lower", interpolation="nearest")
    if labels is not None:
        lab_plane = _slice_plane(labels.labels.astype(np.float64), grid, axis, index)
        overlay = np.zeros(plane.shape + (4,))
        for e in labels.legend:
            mask = lab_plane == e.id
            overlay[mask, 0] = e.color[0] / 255.0
            overlay[mask, 1] = e.color[1] / 255.0
            overlay[mask, 2] = e.color[2] / 255.0
            overlay[mask, 3] = 0.5
        ax.imshow(overlay, origin="lower", interpolation="nearest")
    ax.set_title(f"{axis}={index}")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(outdir / "slice.png", dpi=130)
    plt.close(fig)
    written.append(outdir / "slice.png")

    return written
