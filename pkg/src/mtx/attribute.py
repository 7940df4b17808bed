"""Mapping from the spatial domain into an n-dimensional attribute space.

Each axis selects one scalar field (raw or derived, both are plain
dataset fields by the time a mapping is resolved) and optionally rescales
it to [0, 1] over the field's full range. Attribute coordinates are
always the post-normalization values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import MultiFieldDataset
from .errors import TraitError

NORMALIZATIONS = ("none", "min_max_unit")


@dataclass(frozen=True)
class AxisSpec:
    """One attribute axis: a source field name and its normalization mode."""

    source: str
    normalization: str = "none"

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise TraitError(
                f"axis '{self.source}': unknown normalization '{self.normalization}'"
            )


@dataclass(frozen=True)
class AttributePoint:
    """A point in mapped attribute coordinates."""

    coords: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    def __len__(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)


class AttributeMapping:
    """An ordered list of axis specs resolved against a concrete dataset.

    Resolution validates every source name and caches per-axis min/max
    for the normalized axes; a degenerate range (min == max) maps to a
    constant 0 so the axis stays inert.
    """

    def __init__(self, axes: list[AxisSpec]):
        if not axes:
            raise TraitError("attribute mapping needs at least one axis")
        self.axes = list(axes)
        self._columns: np.ndarray | None = None
        self._ranges: list[tuple[float, float]] | None = None

    @property
    def n(self) -> int:
        return len(self.axes)

    def resolve(self, dataset: MultiFieldDataset) -> "AttributeMapping":
        """Bind axis sources to dataset fields and cache normalization ranges."""
        columns = []
        ranges = []
        for axis in self.axes:
            if not dataset.has_field(axis.source):
                raise TraitError(
                    f"axis source '{axis.source}' resolves to no field "
                    f"(have {dataset.field_names()})"
                )
            values = dataset.get_field(axis.source).values
            lo, hi = float(values.min()), float(values.max())
            ranges.append((lo, hi))
            if axis.normalization == "min_max_unit":
                if hi > lo:
                    columns.append((values - lo) / (hi - lo))
                else:
                    columns.append(np.zeros_like(values))
            else:
                columns.append(values)
        self._columns = np.stack(columns, axis=1)
        self._ranges = ranges
        return self

    @property
    def resolved(self) -> bool:
        return self._columns is not None

    def attribute_matrix(self) -> np.ndarray:
        """All voxels mapped at once, shape (voxel_count, n)."""
        if self._columns is None:
            raise TraitError("attribute mapping is not resolved against a dataset")
        return self._columns

    def axis_ranges(self) -> list[tuple[float, float]]:
        """Raw (pre-normalization) per-axis value ranges."""
        if self._ranges is None:
            raise TraitError("attribute mapping is not resolved against a dataset")
        return list(self._ranges)


def map_to_attribute(
    dataset: MultiFieldDataset, mapping: AttributeMapping, voxel_index: int
) -> AttributePoint:
    """Evaluate the attribute mapping at a single voxel."""
    if not mapping.resolved:
        mapping.resolve(dataset)
    matrix = mapping.attribute_matrix()
    if not 0 <= voxel_index < matrix.shape[0]:
        raise TraitError(f"voxel index {voxel_index} out of range 0..{matrix.shape[0] - 1}")
    return AttributePoint(tuple(matrix[voxel_index]))
