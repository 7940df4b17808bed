"""Level-set surfaces of a distance field as triangle meshes.

Extraction is plain marching cubes on vertex values with linear
interpolation along grid edges. Vertex values exactly equal to the
level count as inside (closed sub-level convention, matching the merge
tree's sweep direction), realized by nudging the level up by one ulp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage.measure import marching_cubes

from .dataset import ScalarField
from .errors import MtxError
from .traits import DistanceField


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) world coordinates
    triangles: np.ndarray  # (F, 3) vertex indices
    level: float

    @property
    def empty(self) -> bool:
        return len(self.triangles) == 0

    def edge_counts(self) -> dict[tuple[int, int], int]:
        """How many triangles share each undirected edge."""
        counts: dict[tuple[int, int], int] = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (int(min(a, b)), int(max(a, b)))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edge_counts()) + len(self.triangles)


def extract_level_set(field: DistanceField | ScalarField, c: float) -> TriangleMesh:
    """Marching-cubes surface of the iso-level c, in world coordinates."""
    if c < 0:
        raise MtxError(f"level must be >= 0 for a distance field, got {c}")
    scalar = field.field if isinstance(field, DistanceField) else field
    grid = scalar.grid
    nx, ny, nz = grid.dims

    empty = TriangleMesh(
        vertices=np.zeros((0, 3)), triangles=np.zeros((0, 3), dtype=np.int64), level=c
    )
    if min(nx, ny, nz) < 2:
        return empty

    volume = scalar.as_volume()
    level = np.nextafter(c, np.inf)  # values == c land on the inside
    if not (float(volume.min()) <= level <= float(volume.max())):
        return empty

    sx, sy, sz = grid.spacing
    verts, faces, _, _ = marching_cubes(
        volume, level=level, spacing=(sz, sy, sx), allow_degenerate=False
    )
    # volume axes are (z, y, x); flip to world (x, y, z) and shift by origin
    verts = verts[:, ::-1] + np.asarray(grid.origin)
    return TriangleMesh(vertices=verts, triangles=faces.astype(np.int64), level=c)
