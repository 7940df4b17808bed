import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mtx import GridDescriptor, MultiFieldDataset, ScalarField


@pytest.fixture
def worked_field() -> ScalarField:
    """The 1x1x5 reference field used throughout the merge-tree examples."""
    grid = GridDescriptor(dims=(1, 1, 5))
    return ScalarField(grid, "h", np.array([5.0, 1.0, 4.0, 0.0, 3.0]))


def random_dataset(rng, dims=(8, 8, 8), n_fields=2) -> MultiFieldDataset:
    grid = GridDescriptor(dims=dims)
    fields = [
        ScalarField(grid, f"f{i}", rng.normal(size=grid.voxel_count))
        for i in range(n_fields)
    ]
    return MultiFieldDataset(grid=grid, fields=fields)
