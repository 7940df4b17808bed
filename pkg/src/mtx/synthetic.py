"""Synthetic multi-field datasets for tests, demos, and the explorer.

Four generators: Gaussian wells in a single scalar field, a two-point
stress-load analog built from superposed point-load kernels, a bi-variate
pair of compactly supported blob fields with disjoint supports, and a
vector field with two parallel counter-rotating tubes plus a weak
transverse tube and a pressure dip. Every generator is a closed-form
evaluation on the grid, so equal specs produce bit-identical datasets;
the seed is recorded in the metadata. Blob geometry is expressed in
voxel units. Each case study's trait recipe is available as a
``recipe_*`` helper returning a trait JSON document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .dataset import GridDescriptor, MultiFieldDataset, ScalarField
from .derived import DerivedQuantitySpec
from .errors import DatasetError

SYNTHETIC_KINDS = (
    "gaussian_wells",
    "tensor_two_point_analog",
    "bivariate_donor_acceptor",
    "vector_vortex_analog",
)


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    dims: tuple[int, int, int]
    seed: int = 0
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise DatasetError(f"unknown synthetic kind '{self.kind}' (have {SYNTHETIC_KINDS})")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 4 for d in dims):
            raise DatasetError(f"synthetic dims must be >= 4 per axis, got {dims}")
        object.__setattr__(self, "dims", dims)


def _voxel_coords(dims):
    nx, ny, nz = dims
    zz, yy, xx = np.meshgrid(
        np.arange(nz, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nx, dtype=np.float64),
        indexing="ij",
    )
    return xx.ravel(), yy.ravel(), zz.ravel()


def _dist2(xx, yy, zz, center):
    cx, cy, cz = center
    return (xx - cx) ** 2 + (yy - cy) ** 2 + (zz - cz) ** 2


def _bump(r2: np.ndarray, radius: float) -> np.ndarray:
    """Compactly supported C2 bump: (1 - (r/r0)^2)^3 inside, exactly 0 outside."""
    t = 1.0 - r2 / (radius * radius)
    return np.where(t > 0.0, t, 0.0) ** 3


def _default_wells(dims) -> list[dict]:
    nx, ny, nz = dims
    width = max(1.5, 0.08 * min(dims))
    return [
        {"center": [round(0.3 * nx), ny // 2, nz // 2], "width": width, "depth": 0.55},
        {"center": [round(0.7 * nx), ny // 2, nz // 2], "width": width, "depth": 0.35},
    ]


def _gaussian_wells(spec: SyntheticSpec, grid: GridDescriptor) -> MultiFieldDataset:
    wells = spec.params.get("wells") or _default_wells(spec.dims)
    baseline = float(spec.params.get("baseline", 1.0))
    if sum(w["depth"] for w in wells) >= baseline:
        raise DatasetError("well depths must sum below the baseline")
    for w in wells:
        if not all(0 <= w["center"][i] < spec.dims[i] for i in range(3)):
            raise DatasetError(f"well center {w['center']} outside the grid")

    xx, yy, zz = _voxel_coords(spec.dims)
    g = np.full(grid.voxel_count, baseline)
    for w in wells:
        r2 = _dist2(xx, yy, zz, w["center"])
        g -= w["depth"] * np.exp(-r2 / (2.0 * w["width"] ** 2))

    return MultiFieldDataset(
        grid=grid,
        fields=[ScalarField(grid, "g", g)],
        metadata={
            "synthetic_kind": spec.kind,
            "seed": str(spec.seed),
            "baseline": repr(baseline),
            "wells": json.dumps(wells),
        },
    )


def _default_blobs(dims) -> tuple[list[dict], list[dict]]:
    nx, ny, nz = dims
    centers = [
        [round(0.3 * nx), ny // 2, nz // 2],
        [round(0.7 * nx), round(0.32 * ny), nz // 2],
        [round(0.7 * nx), round(0.68 * ny), nz // 2],
    ]
    # largest radius that keeps every support a voxel off the boundary and
    # the three supports pairwise disjoint
    r = 0.15 * min(dims)
    for c in centers:
        for axis in range(3):
            r = min(r, c[axis] - 1, dims[axis] - 2 - c[axis])
    for i, a in enumerate(centers):
        for b in centers[i + 1 :]:
            gap = float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))
            r = min(r, 0.95 * gap / 2.0)
    phih = [{"center": centers[0], "radius": r, "amplitude": 1.0}]
    phip = [
        {"center": centers[1], "radius": r, "amplitude": 1.0},
        {"center": centers[2], "radius": r, "amplitude": 0.8},
    ]
    return phih, phip


def _bivariate_donor_acceptor(spec: SyntheticSpec, grid: GridDescriptor) -> MultiFieldDataset:
    default_h, default_p = _default_blobs(spec.dims)
    phih_blobs = spec.params.get("phih_blobs", default_h)
    phip_blobs = spec.params.get("phip_blobs", default_p)

    # all blob supports must stay pairwise disjoint and off the boundary
    all_blobs = list(phih_blobs) + list(phip_blobs)
    for i, a in enumerate(all_blobs):
        for axis in range(3):
            if a["center"][axis] - a["radius"] < 1 or a["center"][axis] + a["radius"] > spec.dims[axis] - 2:
                raise DatasetError(
                    f"blob at {a['center']} touches the domain boundary; "
                    "the default layout needs dims >= 12 per axis"
                )
        for b in all_blobs[i + 1 :]:
            gap = np.linalg.norm(np.asarray(a["center"], float) - np.asarray(b["center"], float))
            if gap <= a["radius"] + b["radius"]:
                raise DatasetError("blob supports overlap; make them disjoint")

    xx, yy, zz = _voxel_coords(spec.dims)
    phi_h = np.zeros(grid.voxel_count)
    for blob in phih_blobs:
        phi_h += blob["amplitude"] * _bump(_dist2(xx, yy, zz, blob["center"]), blob["radius"])
    phi_p = np.zeros(grid.voxel_count)
    for blob in phip_blobs:
        phi_p += blob["amplitude"] * _bump(_dist2(xx, yy, zz, blob["center"]), blob["radius"])

    return MultiFieldDataset(
        grid=grid,
        fields=[ScalarField(grid, "phi_h", phi_h), ScalarField(grid, "phi_p", phi_p)],
        metadata={
            "synthetic_kind": spec.kind,
            "seed": str(spec.seed),
            "phih_blobs": json.dumps(phih_blobs),
            "phip_blobs": json.dumps(phip_blobs),
        },
    )


def _tensor_two_point_analog(spec: SyntheticSpec, grid: GridDescriptor) -> MultiFieldDataset:
    nx, ny, nz = spec.dims
    sx, sy, sz = grid.spacing
    standoff = float(spec.params.get("standoff", 1.5)) * sz
    fractions = spec.params.get("load_fractions", ((0.35, 0.5), (0.65, 0.5)))
    magnitudes = spec.params.get("magnitudes", (1.0, -1.0))
    top_z = grid.origin[2] + (nz - 1) * sz
    loads = [
        (
            grid.origin[0] + fx * (nx - 1) * sx,
            grid.origin[1] + fy * (ny - 1) * sy,
            top_z + standoff,
        )
        for fx, fy in fractions
    ]

    xx, yy, zz = _voxel_coords(spec.dims)
    wx = grid.origin[0] + xx * sx
    wy = grid.origin[1] + yy * sy
    wz = grid.origin[2] + zz * sz

    comps = {k: np.zeros(grid.voxel_count) for k in ("xx", "yy", "zz", "xy", "xz", "yz")}
    for (px, py, pz), mag in zip(loads, magnitudes):
        vx, vy, vz = wx - px, wy - py, wz - pz
        r2 = vx * vx + vy * vy + vz * vz
        depth = pz - wz  # > 0 since loads sit above the top face
        coef = -3.0 * mag * depth / (2.0 * np.pi * r2 ** 2.5)
        comps["xx"] += coef * vx * vx
        comps["yy"] += coef * vy * vy
        comps["zz"] += coef * vz * vz
        comps["xy"] += coef * vx * vy
        comps["xz"] += coef * vx * vz
        comps["yz"] += coef * vy * vz

    tensor_fields = [f"sigma_{k}" for k in ("xx", "yy", "zz", "xy", "xz", "yz")]
    derived = [
        DerivedQuantitySpec("eigenvalues_sym3", tuple(tensor_fields)).to_dict(),
        DerivedQuantitySpec("westin_anisotropy", tuple(tensor_fields)).to_dict(),
        DerivedQuantitySpec("max_shear", tuple(tensor_fields)).to_dict(),
    ]
    return MultiFieldDataset(
        grid=grid,
        fields=[ScalarField(grid, f"sigma_{k}", v) for k, v in comps.items()],
        metadata={
            "synthetic_kind": spec.kind,
            "seed": str(spec.seed),
            "load_points": json.dumps([list(p) for p in loads]),
            "derived": json.dumps(derived),
        },
    )


def _vector_vortex_analog(spec: SyntheticSpec, grid: GridDescriptor) -> MultiFieldDataset:
    nx, ny, nz = spec.dims
    core = float(spec.params.get("core_radius", max(1.5, 0.08 * min(spec.dims))))
    strength = float(spec.params.get("transverse_strength", 0.4))

    xx, yy, zz = _voxel_coords(spec.dims)
    v_x = np.zeros(grid.voxel_count)
    v_y = np.zeros(grid.voxel_count)
    v_z = np.zeros(grid.voxel_count)
    pressure = np.full(grid.voxel_count, 1.0)

    # two parallel counter-rotating tubes along z, separated in y
    for fy, gamma in ((0.35, 1.0), (0.65, -1.0)):
        cx, cy = 0.5 * (nx - 1), fy * (ny - 1)
        dx, dy = xx - cx, yy - cy
        denom = dx * dx + dy * dy + core * core
        v_x += -gamma * dy / denom
        v_y += gamma * dx / denom
        pressure -= 0.5 * abs(gamma) * core * core / denom

    # weak transverse tube along y, rotating in the xz plane
    cx, cz = 0.5 * (nx - 1), 0.5 * (nz - 1)
    dx, dz = xx - cx, zz - cz
    denom = dx * dx + dz * dz + core * core
    v_x += -strength * dz / denom
    v_z += strength * dx / denom
    pressure -= 0.5 * strength * core * core / denom

    derived = [
        DerivedQuantitySpec("abs", ("v_x",), ("abs_vx",)).to_dict(),
        DerivedQuantitySpec("abs", ("v_y",), ("abs_vy",)).to_dict(),
        DerivedQuantitySpec("abs", ("v_z",), ("abs_vz",)).to_dict(),
    ]
    return MultiFieldDataset(
        grid=grid,
        fields=[
            ScalarField(grid, "v_x", v_x),
            ScalarField(grid, "v_y", v_y),
            ScalarField(grid, "v_z", v_z),
            ScalarField(grid, "pressure", pressure),
        ],
        metadata={
            "synthetic_kind": spec.kind,
            "seed": str(spec.seed),
            "derived": json.dumps(derived),
        },
    )


def generate_synthetic(spec: SyntheticSpec) -> MultiFieldDataset:
    """Evaluate a synthetic spec on a unit-spacing grid at the origin."""
    grid = GridDescriptor(dims=spec.dims)
    builder = {
        "gaussian_wells": _gaussian_wells,
        "tensor_two_point_analog": _tensor_two_point_analog,
        "bivariate_donor_acceptor": _bivariate_donor_acceptor,
        "vector_vortex_analog": _vector_vortex_analog,
    }[spec.kind]
    return builder(spec, grid)


def dataset_derived_specs(dataset: MultiFieldDataset) -> list[DerivedQuantitySpec]:
    """Derived-quantity specs recorded in the dataset metadata, if any."""
    raw = dataset.metadata.get("derived")
    if not raw:
        return []
    return [DerivedQuantitySpec.from_dict(d) for d in json.loads(raw)]


def blob_support_masks(
    dataset: MultiFieldDataset,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Boolean support masks for the bi-variate generator's blobs.

    Returns the union mask of the phi_h blobs and one mask per phi_p blob,
    recomputed from the geometry recorded in the metadata.
    """
    if "phih_blobs" not in dataset.metadata:
        raise DatasetError("dataset has no recorded blob geometry")
    dims = dataset.grid.dims
    xx, yy, zz = _voxel_coords(dims)
    phih = np.zeros(dataset.grid.voxel_count, dtype=bool)
    for blob in json.loads(dataset.metadata["phih_blobs"]):
        phih |= _dist2(xx, yy, zz, blob["center"]) < blob["radius"] ** 2
    phip_masks = [
        _dist2(xx, yy, zz, blob["center"]) < blob["radius"] ** 2
        for blob in json.loads(dataset.metadata["phip_blobs"])
    ]
    return phih, phip_masks


def _abs_peak(dataset: MultiFieldDataset, name: str) -> float:
    f = dataset.get_field(name)
    return max(abs(f.min), abs(f.max))


def recipe_well_points(dataset: MultiFieldDataset) -> dict:
    """Point trait at zero distance from the well field's floor."""
    return {
        "axes": [{"source": "g", "normalize": "none"}],
        "metric": {"kind": "euclidean"},
        "trait": {"kind": "points", "points": [[0.0]]},
    }


def recipe_donor(dataset: MultiFieldDataset) -> dict:
    """Two-point donor trait at (+/- max|phi_h|, 0) in the raw range space."""
    m = _abs_peak(dataset, "phi_h")
    return {
        "axes": [
            {"source": "phi_h", "normalize": "none"},
            {"source": "phi_p", "normalize": "none"},
        ],
        "metric": {"kind": "euclidean"},
        "trait": {"kind": "points", "points": [[m, 0.0], [-m, 0.0]]},
    }


def recipe_acceptor(dataset: MultiFieldDataset) -> dict:
    """Two-point acceptor trait at (0, +/- max|phi_p|)."""
    m = _abs_peak(dataset, "phi_p")
    return {
        "axes": [
            {"source": "phi_h", "normalize": "none"},
            {"source": "phi_p", "normalize": "none"},
        ],
        "metric": {"kind": "euclidean"},
        "trait": {"kind": "points", "points": [[0.0, m], [0.0, -m]]},
    }


def recipe_zero_stress(dataset: MultiFieldDataset) -> dict:
    """Point trait at vanishing principal stresses (unaffected material)."""
    return {
        "axes": [
            {"source": "lambda1", "normalize": "none"},
            {"source": "lambda2", "normalize": "none"},
            {"source": "lambda3", "normalize": "none"},
        ],
        "metric": {"kind": "euclidean"},
        "trait": {"kind": "points", "points": [[0.0, 0.0, 0.0]]},
    }


def recipe_vortex_box(dataset: MultiFieldDataset) -> dict:
    """Box trait: high |v_x| and |v_z|, low |v_y|, low pressure."""
    mx = _abs_peak(dataset, "v_x")
    my = _abs_peak(dataset, "v_y")
    mz = _abs_peak(dataset, "v_z")
    p = dataset.get_field("pressure")
    return {
        "axes": [
            {"source": "abs_vx", "normalize": "none"},
            {"source": "abs_vy", "normalize": "none"},
            {"source": "abs_vz", "normalize": "none"},
            {"source": "pressure", "normalize": "none"},
        ],
        "metric": {"kind": "euclidean"},
        "trait": {
            "kind": "box",
            "lo": [0.45 * mx, 0.0, 0.45 * mz, p.min],
            "hi": [mx, 0.12 * my, mz, p.min + 0.35 * (p.max - p.min)],
        },
    }
