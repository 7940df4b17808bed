"""Per-voxel derived quantities: tensor invariants and simple field combinations.

Symmetric 3x3 tensors are given as six component fields in the order
xx, yy, zz, xy, xz, yz. Principal values are sorted descending so that
lam1 >= lam2 >= lam3 at every voxel, and the shape descriptors follow
the trace-normalized convention

    c_l = (lam1 - lam2) / tr,  c_p = 2 (lam2 - lam3) / tr,  c_s = 3 lam3 / tr

with tr = lam1 + lam2 + lam3, so c_l + c_p + c_s = 1 whenever tr != 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import MultiFieldDataset, ScalarField
from .errors import DatasetError

SYM3_COMPONENT_ORDER = ("xx", "yy", "zz", "xy", "xz", "yz")

# kind -> (input arity, default output names); arity None means >= 1 inputs
_KINDS: dict[str, tuple[int | None, tuple[str, ...]]] = {
    "eigenvalues_sym3": (6, ("lambda1", "lambda2", "lambda3")),
    "westin_anisotropy": (6, ("c_l", "c_p", "c_s")),
    "max_shear": (6, ("max_shear",)),
    "trace": (6, ("trace",)),
    "magnitude": (None, ("magnitude",)),
    "abs": (1, ("abs",)),
}

# relative cutoff below which a tensor trace counts as zero stress
DEGENERATE_TRACE_RTOL = 1e-12


@dataclass(frozen=True)
class DerivedQuantitySpec:
    """Recipe mapping input field names to one or more derived output fields."""

    kind: str
    input_fields: tuple[str, ...]
    output_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DatasetError(f"unknown derived kind '{self.kind}' (have {sorted(_KINDS)})")
        object.__setattr__(self, "input_fields", tuple(self.input_fields))
        arity, defaults = _KINDS[self.kind]
        if arity is not None and len(self.input_fields) != arity:
            raise DatasetError(
                f"derived kind '{self.kind}' takes {arity} input fields, "
                f"got {len(self.input_fields)}"
            )
        if arity is None and len(self.input_fields) < 1:
            raise DatasetError(f"derived kind '{self.kind}' needs at least one input field")
        outputs = tuple(self.output_names) or defaults
        if len(outputs) != len(defaults):
            raise DatasetError(
                f"derived kind '{self.kind}' produces {len(defaults)} outputs, "
                f"got {len(outputs)} names"
            )
        object.__setattr__(self, "output_names", outputs)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input_fields": list(self.input_fields),
            "output_names": list(self.output_names),
        }

    @staticmethod
    def from_dict(d: dict) -> "DerivedQuantitySpec":
        return DerivedQuantitySpec(
            kind=d["kind"],
            input_fields=tuple(d["input_fields"]),
            output_names=tuple(d.get("output_names", ())),
        )


def eigenvalues_sym3(xx, yy, zz, xy, xz, yz) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues of symmetric 3x3 tensors, vectorized, sorted descending.

    Uses the closed-form trigonometric solution of the characteristic
    cubic on the deviatoric part. Near-isotropic tensors (vanishing
    deviator) deflate to the mean eigenvalue, which keeps the formula
    branch-free and deterministic.
    """
    xx, yy, zz, xy, xz, yz = (np.asarray(a, dtype=np.float64) for a in (xx, yy, zz, xy, xz, yz))
    q = (xx + yy + zz) / 3.0
    dxx, dyy, dzz = xx - q, yy - q, zz - q
    p2 = dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * (xy * xy + xz * xz + yz * yz)
    p = np.sqrt(p2 / 6.0)

    # guard: where the deviator vanishes the tensor is isotropic
    scale = np.maximum.reduce([np.abs(a) for a in (xx, yy, zz, xy, xz, yz)])
    degenerate = p <= 1e-14 * np.maximum(scale, 1e-300)
    safe_p = np.where(degenerate, 1.0, p)

    bxx, byy, bzz = dxx / safe_p, dyy / safe_p, dzz / safe_p
    bxy, bxz, byz = xy / safe_p, xz / safe_p, yz / safe_p
    det_b = (
        bxx * (byy * bzz - byz * byz)
        - bxy * (bxy * bzz - byz * bxz)
        + bxz * (bxy * byz - byy * bxz)
    )
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0

    lam1 = q + 2.0 * p * np.cos(phi)
    lam3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3

    lam1 = np.where(degenerate, q, lam1)
    lam2 = np.where(degenerate, q, lam2)
    lam3 = np.where(degenerate, q, lam3)

    # enforce exact descending order against rounding in near-degenerate cases
    stacked = np.sort(np.stack([lam1, lam2, lam3], axis=0), axis=0)
    return stacked[2], stacked[1], stacked[0]


def westin_anisotropy(lam1, lam2, lam3, degenerate_cutoff: float):
    """Linear/planar/spherical shape descriptors; zero where the trace vanishes."""
    tr = lam1 + lam2 + lam3
    degenerate = np.abs(tr) <= degenerate_cutoff
    safe = np.where(degenerate, 1.0, tr)
    c_l = np.where(degenerate, 0.0, (lam1 - lam2) / safe)
    c_p = np.where(degenerate, 0.0, 2.0 * (lam2 - lam3) / safe)
    c_s = np.where(degenerate, 0.0, 3.0 * lam3 / safe)
    return c_l, c_p, c_s, int(np.count_nonzero(degenerate))


def compute_derived(dataset: MultiFieldDataset, spec: DerivedQuantitySpec) -> list[ScalarField]:
    """Evaluate a derived-quantity spec, returning one ScalarField per output.

    Anisotropy kinds record the number of zero-trace voxels they zeroed
    out in the dataset metadata under 'degenerate_voxels:<output>'.
    """
    inputs = [dataset.get_field(n).values for n in spec.input_fields]
    grid = dataset.grid

    if spec.kind in ("eigenvalues_sym3", "westin_anisotropy", "max_shear"):
        lam1, lam2, lam3 = eigenvalues_sym3(*inputs)
        if spec.kind == "eigenvalues_sym3":
            outputs = [lam1, lam2, lam3]
        elif spec.kind == "max_shear":
            outputs = [lam1 - lam3]
        else:
            scale = max(float(np.max(np.abs(a))) for a in inputs)
            cutoff = DEGENERATE_TRACE_RTOL * scale
            c_l, c_p, c_s, n_degen = westin_anisotropy(lam1, lam2, lam3, cutoff)
            outputs = [c_l, c_p, c_s]
            if n_degen:
                key = "degenerate_voxels:" + spec.output_names[0]
                dataset.metadata[key] = str(n_degen)
    elif spec.kind == "trace":
        outputs = [inputs[0] + inputs[1] + inputs[2]]
    elif spec.kind == "magnitude":
        outputs = [np.sqrt(np.sum(np.stack(inputs) ** 2, axis=0))]
    elif spec.kind == "abs":
        outputs = [np.abs(inputs[0])]
    else:  # pragma: no cover - guarded by DerivedQuantitySpec
        raise DatasetError(f"unknown derived kind '{spec.kind}'")

    return [ScalarField(grid, name, vals) for name, vals in zip(spec.output_names, outputs)]


def apply_derived_specs(dataset: MultiFieldDataset, specs: list[DerivedQuantitySpec]) -> None:
    """Compute each spec in order and append the outputs as dataset fields."""
    for spec in specs:
        dataset.add_fields(compute_derived(dataset, spec))
