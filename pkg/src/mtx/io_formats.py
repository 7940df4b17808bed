"""On-disk formats: MVF datasets, label fields, merge-tree JSON, OBJ meshes.

An MVF dataset is a JSON descriptor next to one raw binary file per
field (little-endian, x-fastest, no header). All JSON is written with
sorted keys and all writers go through a temp-file-plus-rename so
outputs appear atomically and identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .dataset import GridDescriptor, MultiFieldDataset, ScalarField
from .errors import DatasetError
from .levelset import TriangleMesh
from .mergetree import BranchDecomposition, MergeTree
from .segmentation import LabelField, LegendEntry

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, doc) -> None:
    _atomic_write(path, (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode())


def load_dataset(descriptor_path: str | Path) -> MultiFieldDataset:
    """Read an MVF descriptor and every field payload it references."""
    descriptor_path = Path(descriptor_path)
    if not descriptor_path.is_file():
        raise FileNotFoundError(f"dataset descriptor not found: {descriptor_path}")
    try:
        doc = json.loads(descriptor_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{descriptor_path}: descriptor is not valid JSON: {exc}") from exc

    for key in ("dims", "fields"):
        if key not in doc:
            raise DatasetError(f"{descriptor_path}: descriptor lacks '{key}'")
    grid = GridDescriptor(
        dims=tuple(doc["dims"]),
        spacing=tuple(doc.get("spacing", (1.0, 1.0, 1.0))),
        origin=tuple(doc.get("origin", (0.0, 0.0, 0.0))),
    )

    names = [entry.get("name") for entry in doc["fields"]]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise DatasetError(f"{descriptor_path}: duplicate field name: {sorted(dupes)}")

    fields = []
    for entry in doc["fields"]:
        dtype = entry.get("dtype", "f64")
        if dtype not in _DTYPES:
            raise DatasetError(f"{descriptor_path}: unknown dtype '{dtype}'")
        payload = descriptor_path.parent / entry["file"]
        if not payload.is_file():
            raise FileNotFoundError(f"field payload not found: {payload}")
        raw = np.fromfile(payload, dtype=_DTYPES[dtype])
        if raw.size != grid.voxel_count:
            raise DatasetError(
                f"{payload}: payload size mismatch: {raw.size} values for "
                f"{grid.voxel_count} voxels"
            )
        fields.append(ScalarField(grid, entry["name"], raw.astype(np.float64)))

    metadata = {str(k): str(v) for k, v in doc.get("metadata", {}).items()}
    return MultiFieldDataset(grid=grid, fields=fields, metadata=metadata)


def _payload_name(field_name: str, taken: set[str]) -> str:
    base = re.sub(r"[^A-Za-z0-9_.-]", "_", field_name) or "field"
    name = base + ".bin"
    i = 1
    while name in taken:
        name = f"{base}_{i}.bin"
        i += 1
    taken.add(name)
    return name


def store_dataset(
    dataset: MultiFieldDataset, descriptor_path: str | Path, dtype: str = "f64"
) -> None:
    """Write descriptor plus one raw payload per field, round-trip exact at f64."""
    if dtype not in _DTYPES:
        raise DatasetError(f"unknown dtype '{dtype}'")
    descriptor_path = Path(descriptor_path)
    taken: set[str] = set()
    entries = []
    for field in dataset.fields:
        fname = _payload_name(field.name, taken)
        _atomic_write(
            descriptor_path.parent / fname,
            field.values.astype(_DTYPES[dtype]).tobytes(),
        )
        entries.append({"dtype": dtype, "file": fname, "name": field.name})
    _write_json(
        descriptor_path,
        {
            "dims": list(dataset.grid.dims),
            "spacing": list(dataset.grid.spacing),
            "origin": list(dataset.grid.origin),
            "fields": entries,
            "metadata": dataset.metadata,
        },
    )


def legend_sidecar_path(labels_path: str | Path) -> Path:
    return Path(labels_path).with_suffix(".legend.json")


def store_labels(label_field: LabelField, path: str | Path) -> None:
    """Raw little-endian u32 labels plus a JSON legend sidecar."""
    path = Path(path)
    _atomic_write(path, label_field.labels.astype("<u4").tobytes())
    _write_json(legend_sidecar_path(path), [e.to_dict() for e in label_field.legend])


def load_labels(path: str | Path, grid: GridDescriptor) -> LabelField:
    path = Path(path)
    labels = np.fromfile(path, dtype="<u4")
    legend_doc = json.loads(legend_sidecar_path(path).read_text())
    legend = [
        LegendEntry(
            id=int(e["id"]),
            min_value=float(e["min_value"]),
            voxels=int(e["voxels"]),
            color=tuple(e["color"]),
            source=str(e["source"]),
        )
        for e in legend_doc
    ]
    return LabelField(grid=grid, labels=labels, legend=legend)


def tree_to_dict(tree: MergeTree, bd: BranchDecomposition | None = None) -> dict:
    doc = {
        "nodes": [
            {"id": n.id, "kind": n.kind, "value": n.value, "vertex": n.vertex}
            for n in tree.nodes
        ],
        "arcs": [
            {"child": a.child, "parent": a.parent, "size": int(a.vertices.size)}
            for a in tree.arcs
        ],
        "root": tree.root_id,
    }
    if bd is not None:
        doc["branches"] = [
            {
                "id": b.id,
                "min_node": b.min_node,
                "term_node": b.term_node,
                "persistence": b.persistence,
                "hypervolume": b.hypervolume,
                "parent": b.parent,
            }
            for b in bd.branches
        ]
    return doc


def store_tree_json(
    tree: MergeTree, bd: BranchDecomposition | None, path: str | Path
) -> None:
    _write_json(Path(path), tree_to_dict(tree, bd))


def store_mesh_obj(mesh: TriangleMesh, path: str | Path) -> None:
    """ASCII Wavefront OBJ with 1-based face indices."""
    lines = [f"# level set c={mesh.level:.17g}, {len(mesh.vertices)} vertices, "
             f"{len(mesh.triangles)} triangles"]
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode())
