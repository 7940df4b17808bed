"""Structured grids and named scalar fields on them.

All fields are vertex-centered: a "voxel" is a vertex of the structured
grid, addressed by a flat index with x varying fastest, then y, then z.
Values are kept as float64 internally regardless of on-disk precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DatasetError


@dataclass(frozen=True)
class GridDescriptor:
    """Vertex counts per axis, world spacing per axis, and world origin."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or len(spacing) != 3 or len(origin) != 3:
            raise DatasetError("grid descriptor needs 3 dims, 3 spacings, 3 origin components")
        if any(d < 1 for d in dims):
            raise DatasetError(f"dims must be >= 1, got {dims}")
        if any(s <= 0 for s in spacing):
            raise DatasetError(f"spacing must be > 0, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def flat_index(self, x: int, y: int, z: int) -> int:
        nx, ny, _ = self.dims
        return x + nx * (y + ny * z)

    def voxel_coords(self, index: int) -> tuple[int, int, int]:
        nx, ny, _ = self.dims
        x = index % nx
        y = (index // nx) % ny
        z = index // (nx * ny)
        return x, y, z

    def world_position(self, index: int) -> np.ndarray:
        x, y, z = self.voxel_coords(index)
        return self.origin + np.array([x, y, z], dtype=np.float64) * np.asarray(self.spacing)


@dataclass
class ScalarField:
    """A named scalar field sampled at every grid vertex, x-fastest flat order."""

    grid: GridDescriptor
    name: str
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if values.size != self.grid.voxel_count:
            raise DatasetError(
                f"field '{self.name}': {values.size} values for "
                f"{self.grid.voxel_count} voxels"
            )
        if not np.all(np.isfinite(values)):
            raise DatasetError(f"field '{self.name}' contains non-finite values")
        self.values = values

    def as_volume(self) -> np.ndarray:
        """View shaped (nz, ny, nx) so that C order matches the flat layout."""
        nx, ny, nz = self.grid.dims
        return self.values.reshape(nz, ny, nx)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())


@dataclass
class MultiFieldDataset:
    """A structured grid plus an ordered collection of scalar fields on it."""

    grid: GridDescriptor
    fields: list[ScalarField] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        names = [f.name for f in self.fields]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise DatasetError(f"duplicate field name: {sorted(dupes)}")
        for f in self.fields:
            if f.grid != self.grid:
                raise DatasetError(f"field '{f.name}' does not share the dataset grid")

    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    def get_field(self, name: str) -> ScalarField:
        for f in self.fields:
            if f.name == name:
                return f
        raise DatasetError(f"no field named '{name}' (have {self.field_names()})")

    def has_field(self, name: str) -> bool:
        return any(f.name == name for f in self.fields)

    def add_fields(self, new_fields: Iterable[ScalarField]) -> None:
        for f in new_fields:
            if self.has_field(f.name):
                raise DatasetError(f"duplicate field name: '{f.name}'")
            if f.grid != self.grid:
                raise DatasetError(f"field '{f.name}' does not share the dataset grid")
            self.fields.append(f)
