import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtx import (
    DatasetError,
    DerivedQuantitySpec,
    GridDescriptor,
    MultiFieldDataset,
    ScalarField,
    compute_derived,
    eigenvalues_sym3,
)

from oracles import eigvals_charpoly

TENSOR_NAMES = ("xx", "yy", "zz", "xy", "xz", "yz")


def tensor_dataset(components: np.ndarray) -> MultiFieldDataset:
    """components: (n_voxels, 6) in xx,yy,zz,xy,xz,yz order on a 1D grid."""
    n = components.shape[0]
    grid = GridDescriptor(dims=(n, 1, 1))
    fields = [ScalarField(grid, name, components[:, i]) for i, name in enumerate(TENSOR_NAMES)]
    return MultiFieldDataset(grid=grid, fields=fields)


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(DatasetError, match="unknown derived kind"):
            DerivedQuantitySpec("curl", ("a",))

    def test_wrong_arity(self):
        with pytest.raises(DatasetError, match="6 input fields"):
            DerivedQuantitySpec("eigenvalues_sym3", ("a", "b"))

    def test_wrong_output_count(self):
        with pytest.raises(DatasetError, match="3 outputs"):
            DerivedQuantitySpec("eigenvalues_sym3", TENSOR_NAMES, ("only_one",))

    def test_missing_input_field(self):
        ds = tensor_dataset(np.zeros((2, 6)))
        spec = DerivedQuantitySpec("abs", ("nope",))
        with pytest.raises(DatasetError, match="no field named"):
            compute_derived(ds, spec)


class TestEigenvalues:
    def test_identity_tensor(self):
        ds = tensor_dataset(np.array([[1.0, 1, 1, 0, 0, 0]]))
        l1, l2, l3 = compute_derived(ds, DerivedQuantitySpec("eigenvalues_sym3", TENSOR_NAMES))
        assert (l1.values[0], l2.values[0], l3.values[0]) == (1.0, 1.0, 1.0)

    def test_pure_shear_tensor_matches_charpoly_oracle(self):
        # off-diagonal xy=1 only: eigenvalues (1, 0, -1)
        comp = np.array([[0.0, 0, 0, 1, 0, 0]])
        ds = tensor_dataset(comp)
        outs = compute_derived(ds, DerivedQuantitySpec("eigenvalues_sym3", TENSOR_NAMES))
        got = np.array([o.values[0] for o in outs])
        np.testing.assert_allclose(got, [1.0, 0.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(got, eigvals_charpoly(*comp[0]), atol=1e-9)

    def test_random_tensors_match_charpoly_oracle(self):
        rng = np.random.default_rng(42)
        comp = rng.normal(size=(200, 6)) * rng.choice([1e-3, 1.0, 1e3], size=(200, 1))
        l1, l2, l3 = eigenvalues_sym3(*(comp[:, i] for i in range(6)))
        for i in range(comp.shape[0]):
            expected = eigvals_charpoly(*comp[i])
            scale = max(1.0, np.max(np.abs(expected)))
            np.testing.assert_allclose(
                [l1[i], l2[i], l3[i]], expected, atol=1e-8 * scale,
                err_msg=f"tensor {comp[i]}",
            )

    def test_sorted_descending_always(self):
        rng = np.random.default_rng(3)
        comp = rng.normal(size=(500, 6))
        l1, l2, l3 = eigenvalues_sym3(*(comp[:, i] for i in range(6)))
        assert np.all(l1 >= l2) and np.all(l2 >= l3)

    def test_axis_permutation_invariance(self):
        # shuffling coordinate axes of a diagonal tensor leaves the sorted
        # eigenvalues unchanged
        diag = (3.0, -1.0, 2.0)
        results = []
        for perm in itertools.permutations(diag):
            l1, l2, l3 = eigenvalues_sym3(
                np.array([perm[0]]), np.array([perm[1]]), np.array([perm[2]]),
                np.zeros(1), np.zeros(1), np.zeros(1),
            )
            results.append((l1[0], l2[0], l3[0]))
        assert all(np.allclose(r, results[0], atol=1e-12) for r in results)


class TestWestinAnisotropy:
    def test_isotropic_case(self):
        ds = tensor_dataset(np.array([[1.0, 1, 1, 0, 0, 0]]))
        cl, cp, cs = compute_derived(ds, DerivedQuantitySpec("westin_anisotropy", TENSOR_NAMES))
        assert cl.values[0] == pytest.approx(0.0, abs=1e-12)
        assert cp.values[0] == pytest.approx(0.0, abs=1e-12)
        assert cs.values[0] == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
    def test_shape_descriptors_sum_to_one(self, comp):
        comp = np.asarray(comp)[None, :]
        l1, l2, l3 = eigenvalues_sym3(*(comp[:, i] for i in range(6)))
        tr = l1 + l2 + l3
        if abs(tr[0]) < 1e-9 * max(1.0, np.max(np.abs(comp))):
            return  # degenerate voxels are zeroed, identity does not apply
        ds = tensor_dataset(comp)
        cl, cp, cs = compute_derived(ds, DerivedQuantitySpec("westin_anisotropy", TENSOR_NAMES))
        assert cl.values[0] + cp.values[0] + cs.values[0] == pytest.approx(1.0, abs=1e-9)

    def test_zero_tensor_degenerates_to_zero_and_counts(self):
        comp = np.array([[0.0] * 6, [1.0, 1, 1, 0, 0, 0]])
        ds = tensor_dataset(comp)
        cl, cp, cs = compute_derived(ds, DerivedQuantitySpec("westin_anisotropy", TENSOR_NAMES))
        assert cl.values[0] == cp.values[0] == cs.values[0] == 0.0
        assert ds.metadata["degenerate_voxels:c_l"] == "1"


class TestOtherKinds:
    def test_max_shear_diag(self):
        ds = tensor_dataset(np.array([[3.0, 2, 1, 0, 0, 0]]))
        (shear,) = compute_derived(ds, DerivedQuantitySpec("max_shear", TENSOR_NAMES))
        assert shear.values[0] == pytest.approx(2.0)

    def test_trace(self):
        ds = tensor_dataset(np.array([[3.0, 2, 1, 9, 9, 9]]))
        (tr,) = compute_derived(ds, DerivedQuantitySpec("trace", TENSOR_NAMES))
        assert tr.values[0] == pytest.approx(6.0)

    def test_magnitude(self):
        grid = GridDescriptor(dims=(1, 1, 1))
        ds = MultiFieldDataset(grid=grid, fields=[
            ScalarField(grid, "a", np.array([3.0])),
            ScalarField(grid, "b", np.array([4.0])),
        ])
        (mag,) = compute_derived(ds, DerivedQuantitySpec("magnitude", ("a", "b")))
        assert mag.values[0] == pytest.approx(5.0)

    def test_abs(self):
        grid = GridDescriptor(dims=(2, 1, 1))
        ds = MultiFieldDataset(grid=grid, fields=[ScalarField(grid, "a", np.array([-2.0, 2.0]))])
        (out,) = compute_derived(ds, DerivedQuantitySpec("abs", ("a",), ("abs_a",)))
        np.testing.assert_array_equal(out.values, [2.0, 2.0])
        assert out.name == "abs_a"
