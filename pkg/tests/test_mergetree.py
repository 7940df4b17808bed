import numpy as np
import pytest

from mtx import (
    Connectivity,
    GridDescriptor,
    MtxError,
    ScalarField,
    SimplificationMetric,
    arc_hypervolumes,
    build_merge_tree,
    compute_hypervolume,
    compute_persistence,
    simplify,
)

from oracles import sweep_oracle, tree_merge_events


def line_field(values, spacing=(1.0, 1.0, 1.0)) -> ScalarField:
    values = np.asarray(values, dtype=float)
    grid = GridDescriptor(dims=(1, 1, values.size), spacing=spacing)
    return ScalarField(grid, "g", values)


def check_structure(tree):
    """Structural invariants every tree (built or simplified) must satisfy."""
    roots = [n for n in tree.nodes if n.id == tree.root_id]
    assert len(roots) == 1
    seen = np.concatenate([a.vertices for a in tree.arcs])
    assert sorted(seen.tolist()) == list(range(tree.values.size)), "arcs must partition vertices"
    for arc in tree.arcs:
        assert tree.nodes[arc.child].value <= tree.nodes[arc.parent].value
    for node in tree.nodes:
        n_in = len(tree.incoming_arcs(node.id))
        if node.kind == "merge":
            assert n_in >= 2
        if node.id != tree.root_id:
            assert tree.out_arc(node.id) is not None


class TestWorkedExample:
    def test_nodes_and_arcs(self, worked_field):
        tree = build_merge_tree(worked_field)
        by_kind = {}
        for n in tree.nodes:
            by_kind.setdefault(n.kind, []).append((n.vertex, n.value))
        assert sorted(by_kind["leaf_min"]) == [(1, 1.0), (3, 0.0)]
        assert by_kind["merge"] == [(2, 4.0)]
        assert by_kind["root"] == [(0, 5.0)]
        verts = {
            (tree.nodes[a.child].vertex, tree.nodes[a.parent].vertex): sorted(a.vertices.tolist())
            for a in tree.arcs
        }
        assert verts == {(3, 2): [3, 4], (1, 2): [1], (2, 0): [0, 2]}
        check_structure(tree)

    def test_matches_sweep_oracle(self, worked_field):
        tree = build_merge_tree(worked_field)
        nodes, merges = sweep_oracle(worked_field.values, worked_field.grid.dims)
        got_nodes = sorted((n.vertex, n.kind) for n in tree.nodes)
        assert got_nodes == sorted(nodes)
        assert sorted(tree_merge_events(tree)) == sorted(merges)

    def test_persistences(self, worked_field):
        bd = compute_persistence(build_merge_tree(worked_field))
        master = bd.master()
        assert master.persistence == 5.0
        others = [b for b in bd.branches if b.parent is not None]
        assert len(others) == 1 and others[0].persistence == 3.0
        assert others[0].parent == master.id

    def test_simplify_at_3_5_leaves_single_leaf(self, worked_field):
        tree = build_merge_tree(worked_field)
        simplified = simplify(tree, SimplificationMetric("persistence", 3.5))
        assert len(simplified.leaf_ids()) == 1
        assert simplified.nodes[simplified.leaf_ids()[0]].vertex == 3
        check_structure(simplified)


class TestDegenerateShapes:
    def test_monotone_field_single_arc(self):
        tree = build_merge_tree(line_field([0, 1, 2, 3]))
        assert len(tree.leaf_ids()) == 1
        assert len(tree.arcs) == 1
        assert sorted(tree.arcs[0].vertices.tolist()) == [0, 1, 2, 3]
        assert not any(n.kind == "merge" for n in tree.nodes)

    def test_constant_field_single_leaf_at_lowest_id(self):
        grid = GridDescriptor(dims=(3, 3, 1))
        tree = build_merge_tree(ScalarField(grid, "g", np.zeros(9)))
        leaves = tree.leaf_ids()
        assert len(leaves) == 1
        assert tree.nodes[leaves[0]].vertex == 0
        assert tree.arcs[tree.out_arc(leaves[0])].vertices.size == 9
        check_structure(tree)

    def test_single_vertex_grid(self):
        tree = build_merge_tree(line_field([7.0]))
        assert len(tree.nodes) == 2
        assert len(tree.arcs) == 1
        check_structure(tree)

    def test_empty_grid_impossible_by_construction(self):
        with pytest.raises(MtxError):
            Connectivity("edge4").validate(GridDescriptor(dims=(2, 2, 2)))

    def test_edge4_matches_face6_on_slab(self):
        rng = np.random.default_rng(20)
        grid = GridDescriptor(dims=(5, 4, 1))
        field = ScalarField(grid, "g", rng.normal(size=20))
        t4 = build_merge_tree(field, Connectivity("edge4"))
        t6 = build_merge_tree(field, Connectivity("face6"))
        assert [(n.vertex, n.kind) for n in t4.nodes] == [(n.vertex, n.kind) for n in t6.nodes]


class TestOracleEquivalence:
    def test_random_grids_distinct_values(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            dims = tuple(rng.integers(1, 7, size=3))
            grid = GridDescriptor(dims=dims)
            values = rng.permutation(grid.voxel_count).astype(float)
            tree = build_merge_tree(ScalarField(grid, "g", values))
            nodes, merges = sweep_oracle(values, dims)
            assert sorted((n.vertex, n.kind) for n in tree.nodes) == sorted(nodes)
            assert sorted(tree_merge_events(tree)) == sorted(merges)
            check_structure(tree)

    def test_random_grids_with_duplicates(self):
        rng = np.random.default_rng(22)
        for _ in range(15):
            dims = tuple(rng.integers(2, 6, size=3))
            grid = GridDescriptor(dims=dims)
            values = rng.integers(0, 4, size=grid.voxel_count).astype(float)
            tree = build_merge_tree(ScalarField(grid, "g", values))
            nodes, merges = sweep_oracle(values, dims)
            assert sorted((n.vertex, n.kind) for n in tree.nodes) == sorted(nodes)
            assert sorted(tree_merge_events(tree)) == sorted(merges)
            check_structure(tree)

    def test_leaf_count_equals_local_minima_count(self):
        rng = np.random.default_rng(23)
        from oracles import neighbors6

        for _ in range(20):
            dims = tuple(rng.integers(2, 6, size=3))
            grid = GridDescriptor(dims=dims)
            values = rng.integers(0, 5, size=grid.voxel_count).astype(float)
            tree = build_merge_tree(ScalarField(grid, "g", values))
            minima = sum(
                all(
                    (values[u], u) > (values[v], v)
                    for u in neighbors6(v, dims)
                )
                for v in range(grid.voxel_count)
            )
            assert len(tree.leaf_ids()) == minima


class TestHypervolume:
    def test_arc_product_definition(self):
        # arc of height 2 spanning 5 voxels at unit voxel volume
        tree = build_merge_tree(line_field([0, 0.5, 1, 1.5, 2]))
        hv = arc_hypervolumes(tree)
        assert hv[0] == pytest.approx(2.0 * 5.0)

    def test_zero_height_arc(self):
        tree = build_merge_tree(line_field([1, 1, 1]))
        assert arc_hypervolumes(tree)[0] == 0.0

    def test_voxel_volume_scales(self):
        tree = build_merge_tree(line_field([0, 1], spacing=(2.0, 3.0, 1.0)))
        assert arc_hypervolumes(tree)[0] == pytest.approx(1.0 * 2 * 6.0)

    def test_branch_sums_arcs_h1v3_h2v2(self):
        # master branch spans arcs (height 1, 3 voxels) and (height 2, 2
        # voxels): 1x1x6 field with a second shallow leaf forcing the merge
        field = line_field([0.0, 0.25, 0.5, 1.0, 0.9, 3.0])
        tree = build_merge_tree(field)
        bd = compute_persistence(tree)
        master = bd.master()
        arcs = {
            (tree.nodes[tree.arcs[a].child].value, tree.nodes[tree.arcs[a].parent].value):
            tree.arcs[a].vertices.size
            for a in master.arc_ids
        }
        assert arcs == {(0.0, 1.0): 3, (1.0, 3.0): 2}
        assert master.hypervolume == pytest.approx(1 * 3 + 2 * 2)
        _, branch_hv = compute_hypervolume(tree)
        assert branch_hv[master.id] == pytest.approx(7.0)


class TestBranchDecomposition:
    def test_master_connects_global_min_to_global_max(self):
        rng = np.random.default_rng(24)
        grid = GridDescriptor(dims=(5, 5, 3))
        values = rng.permutation(grid.voxel_count).astype(float)
        tree = build_merge_tree(ScalarField(grid, "g", values))
        bd = compute_persistence(tree)
        master = bd.master()
        assert tree.nodes[master.min_node].vertex == int(np.argmin(values))
        assert master.term_node == tree.root_id
        assert master.persistence == pytest.approx(values.max() - values.min())

    def test_branch_vertices_partition(self):
        rng = np.random.default_rng(25)
        grid = GridDescriptor(dims=(6, 5, 4))
        values = rng.normal(size=grid.voxel_count)
        tree = build_merge_tree(ScalarField(grid, "g", values))
        bd = compute_persistence(tree)
        all_verts = np.concatenate([bd.branch_vertices(b) for b in bd.branches])
        assert sorted(all_verts.tolist()) == list(range(grid.voxel_count))

    def test_termination_on_parent_branch(self):
        rng = np.random.default_rng(26)
        grid = GridDescriptor(dims=(4, 4, 4))
        values = rng.permutation(64).astype(float)
        tree = build_merge_tree(ScalarField(grid, "g", values))
        bd = compute_persistence(tree)
        for b in bd.branches:
            if b.parent is None:
                continue
            parent_nodes = {tree.arcs[a].child for a in bd.branches[b.parent].arc_ids}
            parent_nodes |= {tree.arcs[a].parent for a in bd.branches[b.parent].arc_ids}
            assert b.term_node in parent_nodes

    def test_equal_depth_tie_broken_by_vertex_id(self):
        # two symmetric minima of equal depth; survivor is the smaller vertex id
        field = line_field([0.0, 2.0, 0.0])
        tree = build_merge_tree(field)
        bd = compute_persistence(tree)
        master = bd.master()
        assert tree.nodes[master.min_node].vertex == 0
        other = next(b for b in bd.branches if b.parent is not None)
        assert master.persistence == pytest.approx(2.0)
        assert other.persistence == pytest.approx(2.0)


class TestSimplify:
    def test_threshold_zero_is_identity(self, worked_field):
        tree = build_merge_tree(worked_field)
        s = simplify(tree, SimplificationMetric("persistence", 0.0))
        assert [(n.vertex, n.kind) for n in s.nodes] == [(n.vertex, n.kind) for n in tree.nodes]
        assert len(s.arcs) == len(tree.arcs)

    def test_above_global_persistence_keeps_one_leaf(self):
        rng = np.random.default_rng(27)
        grid = GridDescriptor(dims=(5, 5, 5))
        values = rng.normal(size=125)
        tree = build_merge_tree(ScalarField(grid, "g", values))
        s = simplify(tree, SimplificationMetric("persistence", 1e9))
        assert len(s.leaf_ids()) == 1
        assert s.nodes[s.leaf_ids()[0]].vertex == int(np.argmin(values))
        check_structure(s)

    def test_leaf_count_nonincreasing_and_composition(self):
        rng = np.random.default_rng(28)
        for _ in range(25):
            dims = tuple(rng.integers(2, 6, size=3))
            grid = GridDescriptor(dims=dims)
            values = rng.integers(0, 6, size=grid.voxel_count).astype(float)
            tree = build_merge_tree(ScalarField(grid, "g", values))
            t1, t2 = sorted(rng.uniform(0, 6, size=2))
            s1 = simplify(tree, SimplificationMetric("persistence", t1))
            s2 = simplify(tree, SimplificationMetric("persistence", t2))
            assert len(s2.leaf_ids()) <= len(s1.leaf_ids()) <= len(tree.leaf_ids())
            composed = simplify(s1, SimplificationMetric("persistence", t2))
            assert {(n.vertex, n.kind) for n in composed.nodes} == {
                (n.vertex, n.kind) for n in s2.nodes
            }
            check_structure(s1)
            check_structure(s2)

    def test_shift_invariance_scale_covariance(self):
        rng = np.random.default_rng(29)
        grid = GridDescriptor(dims=(4, 4, 4))
        values = rng.normal(size=64)
        bd = compute_persistence(build_merge_tree(ScalarField(grid, "g", values)))
        shifted = compute_persistence(build_merge_tree(ScalarField(grid, "g", values + 10.0)))
        scaled = compute_persistence(build_merge_tree(ScalarField(grid, "g", values * 3.0)))
        for b, bs in zip(bd.branches, shifted.branches):
            assert (bs.min_node, bs.term_node) == (b.min_node, b.term_node)
            assert bs.persistence == pytest.approx(b.persistence, abs=1e-9)
        for b, bs in zip(bd.branches, scaled.branches):
            assert (bs.min_node, bs.term_node) == (b.min_node, b.term_node)
            assert bs.persistence == pytest.approx(3.0 * b.persistence)

    def test_vertex_total_conserved(self):
        rng = np.random.default_rng(30)
        grid = GridDescriptor(dims=(5, 4, 3))
        values = rng.integers(0, 5, size=60).astype(float)
        tree = build_merge_tree(ScalarField(grid, "g", values))
        for t in (0.5, 1.5, 3.0, 10.0):
            s = simplify(tree, SimplificationMetric("persistence", t))
            assert sum(a.vertices.size for a in s.arcs) == 60
            check_structure(s)

    def test_metric_choice_changes_surviving_leaves(self):
        # besides the protected global minimum at vertex 0: a deep-narrow
        # well at vertex 2 (persistence 0.6, hypervolume 0.6) and a
        # shallow-wide well at vertex 6 (persistence 0.5, hypervolume 3.0)
        field = line_field([0.0, 0.9, 0.3, 0.95, 0.55, 0.5, 0.45, 0.5, 0.55, 0.9])
        tree = build_merge_tree(field)
        bd = compute_persistence(tree)
        by_min = {tree.nodes[b.min_node].vertex: b for b in bd.branches}
        assert by_min[2].persistence == pytest.approx(0.6)
        assert by_min[2].hypervolume == pytest.approx(0.6)
        assert by_min[6].persistence == pytest.approx(0.5)
        assert by_min[6].hypervolume == pytest.approx(3.0)

        by_pers = simplify(tree, SimplificationMetric("persistence", 0.55))
        assert {by_pers.nodes[l].vertex for l in by_pers.leaf_ids()} == {0, 2}
        by_hv = simplify(tree, SimplificationMetric("hypervolume", 1.0))
        assert {by_hv.nodes[l].vertex for l in by_hv.leaf_ids()} == {0, 6}
