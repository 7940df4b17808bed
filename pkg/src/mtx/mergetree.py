"""Merge trees of scalar fields over the grid graph.

The tree tracks connected components of sub-level sets swept from the
minimum upward, so leaves sit at local minima. Plateaus and duplicate
values are resolved by the (value, vertex id) total order, which makes
every result deterministic. Each arc owns the vertices that joined the
component while that arc was open; arc vertex lists partition the grid.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field as dc_field

import numpy as np

from .dataset import GridDescriptor, ScalarField
from .errors import MtxError

_LEAF, _MERGE, _ROOT = 0, 1, 2
_KIND_NAMES = {_LEAF: "leaf_min", _MERGE: "merge", _ROOT: "root"}

CONNECTIVITIES = ("face6", "edge4")


@dataclass(frozen=True)
class Connectivity:
    """Neighborhood used for sub-level components: 6-face 3D or 4-edge slab."""

    variant: str = "face6"

    def __post_init__(self):
        if self.variant not in CONNECTIVITIES:
            raise MtxError(f"unknown connectivity '{self.variant}' (have {CONNECTIVITIES})")

    def validate(self, grid: GridDescriptor) -> None:
        if self.variant == "edge4" and grid.dims[2] != 1:
            raise MtxError("edge4 connectivity requires a single-slice grid (dims[2] == 1)")


def _sweep_impl(order, nx, ny, nz):
    """Union-find sweep in ascending (value, vertex id) order.

    Returns node vertices/kinds in creation order, arc child/parent node
    ids, and the arc id every vertex was assigned to. The root is always
    a distinct final node at the globally last vertex of the order.
    """
    n = order.size
    uf = np.full(n, -1, dtype=np.int64)
    uf_size = np.ones(n, dtype=np.int64)
    comp_arc = np.full(n, -1, dtype=np.int64)

    node_vertex = np.empty(n + n + 2, dtype=np.int64)
    node_kind = np.empty(n + n + 2, dtype=np.int8)
    n_nodes = 0
    arc_child = np.empty(n + 1, dtype=np.int64)
    arc_parent = np.full(n + 1, -1, dtype=np.int64)
    n_arcs = 0
    arc_of_vertex = np.empty(n, dtype=np.int64)
    nbr_roots = np.empty(6, dtype=np.int64)
    nxy = nx * ny

    for k in range(n):
        v = order[k]
        x = v % nx
        y = (v // nx) % ny
        z = v // nxy

        m = 0
        for d in range(6):
            if d == 0:
                if x == 0:
                    continue
                u = v - 1
            elif d == 1:
                if x == nx - 1:
                    continue
                u = v + 1
            elif d == 2:
                if y == 0:
                    continue
                u = v - nx
            elif d == 3:
                if y == ny - 1:
                    continue
                u = v + nx
            elif d == 4:
                if z == 0:
                    continue
                u = v - nxy
            else:
                if z == nz - 1:
                    continue
                u = v + nxy
            if uf[u] < 0:
                continue
            r = u
            while uf[r] != r:
                uf[r] = uf[uf[r]]
                r = uf[r]
            seen = False
            for j in range(m):
                if nbr_roots[j] == r:
                    seen = True
                    break
            if not seen:
                nbr_roots[m] = r
                m += 1

        if m == 0:
            node_vertex[n_nodes] = v
            node_kind[n_nodes] = _LEAF
            arc_child[n_arcs] = n_nodes
            uf[v] = v
            comp_arc[v] = n_arcs
            arc_of_vertex[v] = n_arcs
            n_nodes += 1
            n_arcs += 1
        elif m == 1:
            r = nbr_roots[0]
            arc_of_vertex[v] = comp_arc[r]
            uf[v] = r
            uf_size[r] += 1
        else:
            node_vertex[n_nodes] = v
            node_kind[n_nodes] = _MERGE
            for j in range(m):
                arc_parent[comp_arc[nbr_roots[j]]] = n_nodes
            arc_child[n_arcs] = n_nodes
            arc_of_vertex[v] = n_arcs
            big = nbr_roots[0]
            for j in range(1, m):
                r = nbr_roots[j]
                if uf_size[r] > uf_size[big]:
                    uf[big] = r
                    uf_size[r] += uf_size[big]
                    big = r
                else:
                    uf[r] = big
                    uf_size[big] += uf_size[r]
            uf[v] = big
            uf_size[big] += 1
            comp_arc[big] = n_arcs
            n_nodes += 1
            n_arcs += 1

    root_vertex = order[n - 1]
    node_vertex[n_nodes] = root_vertex
    node_kind[n_nodes] = _ROOT
    r = root_vertex
    while uf[r] != r:
        r = uf[r]
    arc_parent[comp_arc[r]] = n_nodes
    n_nodes += 1

    return (
        node_vertex[:n_nodes].copy(),
        node_kind[:n_nodes].copy(),
        arc_child[:n_arcs].copy(),
        arc_parent[:n_arcs].copy(),
        arc_of_vertex,
    )


try:
    from numba import njit

    _sweep = njit(cache=True)(_sweep_impl)
except ImportError:  # pragma: no cover - numba is a declared dependency
    _sweep = _sweep_impl


@dataclass
class MergeTreeNode:
    id: int
    vertex: int
    value: float
    kind: str


@dataclass
class MergeTreeArc:
    child: int
    parent: int
    vertices: np.ndarray


@dataclass
class MergeTree:
    nodes: list[MergeTreeNode]
    arcs: list[MergeTreeArc]
    root_id: int
    values: np.ndarray
    grid: GridDescriptor
    connectivity: str = "face6"
    _in_arcs: dict[int, list[int]] = dc_field(default_factory=dict, repr=False)
    _out_arc: dict[int, int] = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._in_arcs = {n.id: [] for n in self.nodes}
        self._out_arc = {}
        for i, arc in enumerate(self.arcs):
            self._in_arcs[arc.parent].append(i)
            self._out_arc[arc.child] = i

    def node(self, node_id: int) -> MergeTreeNode:
        return self.nodes[node_id]

    def incoming_arcs(self, node_id: int) -> list[int]:
        """Arc indexes whose parent is this node (its child arcs)."""
        return self._in_arcs[node_id]

    def out_arc(self, node_id: int) -> int | None:
        """Index of the arc leading root-ward, None for the root."""
        return self._out_arc.get(node_id)

    def leaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind == "leaf_min"]

    def global_min_leaf(self) -> int:
        return min(self.leaf_ids(), key=lambda i: (self.nodes[i].value, self.nodes[i].vertex))

    def subtree_arcs(self, arc_index: int) -> list[int]:
        """This arc plus every arc strictly below its child node."""
        result = []
        stack = [arc_index]
        while stack:
            a = stack.pop()
            result.append(a)
            stack.extend(self.incoming_arcs(self.arcs[a].child))
        return result


def build_merge_tree(field: ScalarField, conn: Connectivity = Connectivity()) -> MergeTree:
    """Augmented join tree of the field under the given connectivity."""
    conn.validate(field.grid)
    values = field.values
    if values.size == 0:
        raise MtxError("cannot build a merge tree over an empty grid")
    nx, ny, nz = field.grid.dims

    # stable sort = ascending value with vertex id breaking ties
    order = np.argsort(values, kind="stable").astype(np.int64)
    node_vertex, node_kind, arc_child, arc_parent, arc_of_vertex = _sweep(order, nx, ny, nz)

    nodes = [
        MergeTreeNode(i, int(v), float(values[v]), _KIND_NAMES[int(k)])
        for i, (v, k) in enumerate(zip(node_vertex, node_kind))
    ]

    # vertex lists per arc, kept in sweep order
    arcs_in_order = arc_of_vertex[order]
    perm = np.argsort(arcs_in_order, kind="stable")
    sorted_verts = order[perm]
    counts = np.bincount(arc_of_vertex, minlength=len(arc_child))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    arcs = [
        MergeTreeArc(int(c), int(p), sorted_verts[offsets[i] : offsets[i + 1]])
        for i, (c, p) in enumerate(zip(arc_child, arc_parent))
    ]

    return MergeTree(
        nodes=nodes,
        arcs=arcs,
        root_id=len(nodes) - 1,
        values=values,
        grid=field.grid,
        connectivity=conn.variant,
    )


@dataclass(frozen=True)
class SimplificationMetric:
    """Which branch weight drives simplification and the cutoff below which
    branches are merged away."""

    kind: str = "persistence"
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in ("persistence", "hypervolume"):
            raise MtxError(f"unknown simplification metric '{self.kind}'")
        if self.threshold < 0:
            raise MtxError(f"threshold must be >= 0, got {self.threshold}")


@dataclass
class Branch:
    id: int
    min_node: int
    term_node: int
    persistence: float
    hypervolume: float
    parent: int | None
    arc_ids: list[int]


@dataclass
class BranchDecomposition:
    branches: list[Branch]
    tree: MergeTree

    def master(self) -> Branch:
        return next(b for b in self.branches if b.parent is None)

    def branch_vertices(self, branch: Branch) -> np.ndarray:
        return np.concatenate([self.tree.arcs[a].vertices for a in branch.arc_ids])

    def metric_value(self, branch: Branch, kind: str) -> float:
        return branch.persistence if kind == "persistence" else branch.hypervolume


def arc_hypervolumes(tree: MergeTree, voxel_volume: float | None = None) -> np.ndarray:
    """Per-arc (height x contained volume); height is parent minus child value."""
    if voxel_volume is None:
        voxel_volume = tree.grid.voxel_volume
    out = np.empty(len(tree.arcs))
    for i, arc in enumerate(tree.arcs):
        height = tree.nodes[arc.parent].value - tree.nodes[arc.child].value
        out[i] = height * arc.vertices.size * voxel_volume
    return out


def compute_persistence(tree: MergeTree) -> BranchDecomposition:
    """Elder-rule branch decomposition with (value, vertex id) tie-breaking.

    At every merge node the child side holding the deepest minimum
    continues upward; each terminated side becomes a branch paired with
    the merge value. The surviving branch pairs the global minimum with
    the global maximum and is the parent-less master branch.
    """
    n_nodes = len(tree.nodes)
    deep_val = np.empty(n_nodes)
    deep_vid = np.empty(n_nodes, dtype=np.int64)
    # children precede parents in (value, vertex) order by construction
    for node in sorted(tree.nodes, key=lambda nd: (nd.value, nd.vertex)):
        arcs_in = tree.incoming_arcs(node.id)
        if not arcs_in:
            deep_val[node.id], deep_vid[node.id] = node.value, node.vertex
        else:
            best = min((deep_val[tree.arcs[a].child], deep_vid[tree.arcs[a].child]) for a in arcs_in)
            deep_val[node.id], deep_vid[node.id] = best

    arc_hv = arc_hypervolumes(tree)
    branches: list[Branch] = []
    # (entry arc, termination node, parent branch id), FIFO so the master is id 0
    queue: list[tuple[int, int, int | None]] = [
        (tree.incoming_arcs(tree.root_id)[0], tree.root_id, None)
    ]
    qi = 0
    while qi < len(queue):
        entry_arc, term_node, parent_branch = queue[qi]
        qi += 1
        branch_id = len(branches)
        arc_ids = [entry_arc]
        cur = tree.arcs[entry_arc].child
        while tree.incoming_arcs(cur):
            arcs_in = sorted(
                tree.incoming_arcs(cur),
                key=lambda a: (deep_val[tree.arcs[a].child], deep_vid[tree.arcs[a].child]),
            )
            for other in arcs_in[1:]:
                queue.append((other, cur, branch_id))
            arc_ids.append(arcs_in[0])
            cur = tree.arcs[arcs_in[0]].child
        branches.append(
            Branch(
                id=branch_id,
                min_node=cur,
                term_node=term_node,
                persistence=tree.nodes[term_node].value - tree.nodes[cur].value,
                hypervolume=float(sum(arc_hv[a] for a in arc_ids)),
                parent=parent_branch,
                arc_ids=arc_ids,
            )
        )
    return BranchDecomposition(branches=branches, tree=tree)


def compute_hypervolume(
    tree: MergeTree, voxel_volume: float | None = None
) -> tuple[np.ndarray, list[float]]:
    """Hypervolume per arc and per elder-rule branch."""
    arc_hv = arc_hypervolumes(tree, voxel_volume)
    bd = compute_persistence(tree)
    if voxel_volume is None:
        branch_hv = [b.hypervolume for b in bd.branches]
    else:
        branch_hv = [float(sum(arc_hv[a] for a in b.arc_ids)) for b in bd.branches]
    return arc_hv, branch_hv


def simplify(tree: MergeTree, metric: SimplificationMetric) -> MergeTree:
    """Prune leaf branches whose metric falls below the threshold.

    Repeatedly removes the lowest-metric candidate leaf (ties broken by
    leaf vertex id), folding its vertices into the parent arc; merge
    nodes left unary are dissolved by concatenating their arcs. The
    branch holding the global minimum is never a candidate. Returns a
    new tree; the input is left untouched.
    """
    vv = tree.grid.voxel_volume
    node_value = {n.id: n.value for n in tree.nodes}
    node_vertex = {n.id: n.vertex for n in tree.nodes}
    node_kind = {n.id: n.kind for n in tree.nodes}
    # arc id -> [child, parent, list of vertex-array chunks]
    arcs: dict[int, list] = {
        i: [a.child, a.parent, [a.vertices]] for i, a in enumerate(tree.arcs)
    }
    in_arcs = {n.id: set(tree.incoming_arcs(n.id)) for n in tree.nodes}
    out_arc = {a.child: i for i, a in enumerate(tree.arcs)}
    alive = {n.id for n in tree.nodes}

    protected = tree.global_min_leaf()

    def leaf_metric(leaf: int) -> float:
        a = out_arc[leaf]
        height = node_value[arcs[a][1]] - node_value[leaf]
        if metric.kind == "persistence":
            return height
        return height * sum(chunk.size for chunk in arcs[a][2]) * vv

    heap = [
        (leaf_metric(l), node_vertex[l], l)
        for l in tree.leaf_ids()
        if l != protected
    ]
    heapq.heapify(heap)

    while heap:
        mval, vid, leaf = heapq.heappop(heap)
        if leaf not in alive:
            continue
        current = leaf_metric(leaf)
        if current > mval:
            heapq.heappush(heap, (current, vid, leaf))
            continue
        if current >= metric.threshold:
            break

        a = out_arc[leaf]
        merge_node = arcs[a][1]
        parent_arc = out_arc[merge_node]
        arcs[parent_arc][2].extend(arcs[a][2])
        in_arcs[merge_node].discard(a)
        del arcs[a]
        del out_arc[leaf]
        alive.discard(leaf)

        if len(in_arcs[merge_node]) == 1:
            b = next(iter(in_arcs[merge_node]))
            o = out_arc[merge_node]
            grand = arcs[o][1]
            arcs[b][2].extend(arcs[o][2])
            arcs[b][1] = grand
            in_arcs[grand].discard(o)
            in_arcs[grand].add(b)
            del arcs[o]
            del out_arc[merge_node]
            alive.discard(merge_node)

    # rebuild with compact ids, nodes ordered by (value, vertex)
    kept = sorted(alive, key=lambda i: (node_value[i], node_vertex[i]))
    remap = {old: new for new, old in enumerate(kept)}
    new_nodes = [
        MergeTreeNode(remap[i], node_vertex[i], node_value[i], node_kind[i]) for i in kept
    ]
    new_arcs = [
        MergeTreeArc(remap[child], remap[parent], np.concatenate(chunks))
        for child, parent, chunks in (arcs[k] for k in sorted(arcs))
    ]
    return MergeTree(
        nodes=new_nodes,
        arcs=new_arcs,
        root_id=remap[tree.root_id],
        values=tree.values,
        grid=tree.grid,
        connectivity=tree.connectivity,
    )
