"""Trait-induced distance fields, merge trees, and volume segmentation."""

from .attribute import AttributeMapping, AttributePoint, AxisSpec, map_to_attribute
from .dataset import GridDescriptor, MultiFieldDataset, ScalarField
from .derived import DerivedQuantitySpec, apply_derived_specs, compute_derived, eigenvalues_sym3
from .errors import DatasetError, MtxError, TraitError
from .io_formats import (
    load_dataset,
    load_labels,
    store_dataset,
    store_labels,
    store_mesh_obj,
    store_tree_json,
    tree_to_dict,
)
from .levelset import TriangleMesh, extract_level_set
from .mergetree import (
    Branch,
    BranchDecomposition,
    Connectivity,
    MergeTree,
    MergeTreeArc,
    MergeTreeNode,
    SimplificationMetric,
    arc_hypervolumes,
    build_merge_tree,
    compute_hypervolume,
    compute_persistence,
    simplify,
)
from .segmentation import (
    LabelField,
    LegendEntry,
    QuerySpec,
    histogram,
    run_query,
    segment_branch_decomposition,
    segment_leaves,
    segment_subtrees,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .traits import (
    BoxTrait,
    DistanceField,
    DistanceMetric,
    PointSetTrait,
    SegmentTrait,
    TraitGeometry,
    compute_distance_field,
    distance_to_trait,
    trait_from_json,
)

__version__ = "0.1.0"
