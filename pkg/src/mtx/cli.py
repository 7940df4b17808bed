"""Command line driver: per-stage subcommands with on-disk handoff.

Exit codes: 0 success, 1 runtime or data error, 2 usage error (including
missing input files).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attribute import AttributeMapping
from .dataset import MultiFieldDataset
from .derived import DerivedQuantitySpec, apply_derived_specs
from .errors import MtxError
from .io_formats import (
    load_dataset,
    store_dataset,
    store_labels,
    store_mesh_obj,
    store_tree_json,
)
from .levelset import extract_level_set
from .mergetree import SimplificationMetric, build_merge_tree, compute_persistence, simplify
from .segmentation import QuerySpec, run_query
from .synthetic import SYNTHETIC_KINDS, SyntheticSpec, dataset_derived_specs, generate_synthetic
from .traits import DistanceField, compute_distance_field, trait_from_json

_METHOD_ALIASES = {"bd": "branch_decomposition", "leaves": "leaf_arcs", "subtrees": "subtrees"}


def _load_with_derived(path: str, extra_specs_path: str | None = None) -> MultiFieldDataset:
    dataset = load_dataset(path)
    specs = dataset_derived_specs(dataset)
    if extra_specs_path:
        doc = json.loads(Path(extra_specs_path).read_text())
        specs.extend(DerivedQuantitySpec.from_dict(d) for d in doc)
    apply_derived_specs(dataset, specs)
    return dataset


def _parse_dims(text: str) -> tuple[int, int, int]:
    parts = [p for p in text.replace("x", ",").split(",") if p]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"dims must be 1 or 3 integers, got '{text}'")
    return tuple(int(p) for p in parts)


def _load_distance_field(path: str) -> DistanceField:
    dataset = load_dataset(path)
    if not dataset.fields:
        raise MtxError(f"{path}: no fields in dataset")
    provenance = json.loads(dataset.metadata.get("provenance", "{}"))
    return DistanceField(field=dataset.fields[0], provenance=provenance)


def cmd_info(args) -> int:
    dataset = _load_with_derived(args.dataset)
    base = set(load_dataset(args.dataset).field_names())
    g = dataset.grid
    print(f"dims     {g.dims[0]} x {g.dims[1]} x {g.dims[2]}  ({g.voxel_count} voxels)")
    print(f"spacing  {g.spacing}")
    print(f"origin   {g.origin}")
    print(f"{'field':24s} {'min':>14s} {'max':>14s}")
    for f in dataset.fields:
        tag = "" if f.name in base else "  (derived)"
        print(f"{f.name:24s} {f.min:14.6g} {f.max:14.6g}{tag}")
    if dataset.metadata:
        print("metadata:", ", ".join(sorted(dataset.metadata)))
    return 0


def cmd_distance(args) -> int:
    dataset = _load_with_derived(args.dataset, args.derived)
    trait, metric, axes = trait_from_json(Path(args.trait).read_text())
    mapping = AttributeMapping(axes).resolve(dataset)
    dfield = compute_distance_field(dataset, mapping, trait, metric, workers=args.threads)
    out = MultiFieldDataset(
        grid=dataset.grid,
        fields=[dfield.field],
        metadata={"provenance": json.dumps(dfield.provenance, sort_keys=True)},
    )
    store_dataset(out, args.output)
    print(f"wrote {args.output}: max distance {dfield.values.max():.6g}")
    return 0


def cmd_tree(args) -> int:
    dfield = _load_distance_field(args.field)
    tree = build_merge_tree(dfield.field)
    simplified = simplify(tree, SimplificationMetric(args.metric, args.threshold))
    bd = compute_persistence(simplified)
    store_tree_json(simplified, bd, args.output)
    print(
        f"wrote {args.output}: {len(simplified.leaf_ids())} leaves, "
        f"{len(bd.branches)} branches"
    )
    return 0


def cmd_segment(args) -> int:
    dfield = _load_distance_field(args.field)
    tree = build_merge_tree(dfield.field)
    bd = compute_persistence(tree)
    spec = QuerySpec(
        method=_METHOD_ALIASES[args.method],
        metric=SimplificationMetric(args.metric, args.threshold),
        cut_level=args.cut if args.method == "subtrees" else None,
    )
    labels = run_query(tree, bd, spec)
    store_labels(labels, args.output)
    print(f"wrote {args.output}: {len(labels.legend)} segments")
    return 0


def cmd_mesh(args) -> int:
    dfield = _load_distance_field(args.field)
    mesh = extract_level_set(dfield, args.level)
    store_mesh_obj(mesh, args.output)
    print(f"wrote {args.output}: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(kind=args.kind, dims=args.dims, seed=args.seed)
    dataset = generate_synthetic(spec)
    store_dataset(dataset, args.output)
    print(f"wrote {args.output}: {args.kind} {args.dims}")
    return 0


def cmd_report(args) -> int:
    from .report import render_report

    dfield = _load_distance_field(args.field)
    levels = tuple(float(v) for v in args.levels.split(",")) if args.levels else ()
    metric = SimplificationMetric(args.metric, args.threshold)
    method = _METHOD_ALIASES[args.method] if args.method else None
    written = render_report(
        dfield,
        args.output,
        bins=args.bins,
        levels=levels,
        method=method,
        metric=metric,
        cut=args.cut,
        axis=args.axis,
        index=args.index,
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    dataset = _load_with_derived(args.dataset, args.derived)
    ui_dir = args.ui_dir
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    app = create_app(dataset, static_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _port(text: str) -> int:
    value = int(text)
    if not 1 <= value <= 65535:
        raise argparse.ArgumentTypeError(f"port must be in 1..65535, got {value}")
    return value


def _nonneg_level(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"level must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtx",
        description="Trait-induced distance fields, merge trees, and volume segmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="print a dataset summary")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("distance", help="compute the trait distance field")
    p.add_argument("dataset")
    p.add_argument("--trait", required=True, help="trait JSON file")
    p.add_argument("-o", "--output", required=True, help="output single-field MVF descriptor")
    p.add_argument("--derived", help="extra derived-quantity specs (JSON list)")
    p.add_argument("--threads", type=int, default=None, help="worker count (MTX_THREADS)")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("tree", help="build, simplify, and export the merge tree")
    p.add_argument("field", help="distance field MVF")
    p.add_argument("--metric", choices=("persistence", "hypervolume"), default="persistence")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("-o", "--output", required=True, help="output tree JSON")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("segment", help="run a segmentation query, write labels + legend")
    p.add_argument("field", help="distance field MVF")
    p.add_argument("--method", choices=tuple(_METHOD_ALIASES), required=True)
    p.add_argument("--metric", choices=("persistence", "hypervolume"), default="persistence")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--cut", type=float, help="cut level (subtrees only)")
    p.add_argument("-o", "--output", required=True, help="output label binary")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("mesh", help="extract a level-set surface as OBJ")
    p.add_argument("field", help="distance field MVF")
    p.add_argument("--level", type=_nonneg_level, required=True)
    p.add_argument("-o", "--output", required=True, help="output OBJ path")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    p.add_argument("--dims", type=_parse_dims, default=(32, 32, 32))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output MVF descriptor")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render figures and CSV summaries of a distance field")
    p.add_argument("field", help="distance field MVF")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--levels", help="comma-separated level markers for the histogram")
    p.add_argument("--method", choices=tuple(_METHOD_ALIASES))
    p.add_argument("--metric", choices=("persistence", "hypervolume"), default="persistence")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--cut", type=float)
    p.add_argument("--axis", choices=("x", "y", "z"), default="z")
    p.add_argument("--index", type=int)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the HTTP explorer server")
    p.add_argument("dataset")
    p.add_argument("--derived", help="extra derived-quantity specs (JSON list)")
    p.add_argument("--port", type=_port, default=7878)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", help="directory of built UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "segment" and args.method == "subtrees" and args.cut is None:
        parser.error("segment --method subtrees requires --cut")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"mtx: {exc}", file=sys.stderr)
        return 2
    except MtxError as exc:
        print(f"mtx: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
