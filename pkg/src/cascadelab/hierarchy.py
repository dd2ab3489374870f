"""Hierarchy trees and the blockmodel graphs they define.

A tree is node weighted. Each leaf owns a block of graph vertices, and the
weight between two vertices is the weight of the lowest common ancestor of
their leaves (the leaf itself for two vertices of one block). Vertex ids are
handed out contiguously, leaf by leaf, in pre-order, so every subtree covers
one contiguous id range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy import sparse

from .errors import ModeMismatch, MonotonicityViolation, UnknownVertex, ValidationError, WeightOutOfRange
from .report import fmt_float
from .rng import stream

MAX_NODES = 1 << 20
DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"


@dataclass
class TreeNode:
    id: int
    weight: float
    children: tuple[int, ...] = ()
    block_size: int = 0

    @property
    def is_leaf(self) -> bool:
        return not self.children


class HierarchyTree:
    """Rooted, node-weighted tree whose leaves carry vertex blocks.

    Construction checks structure and the monotone weight order; unary nodes
    are allowed here and removed by :func:`normalize_tree`.
    """

    def __init__(self, nodes: Iterable[TreeNode], mode: str = DETERMINISTIC):
        if mode not in (DETERMINISTIC, STOCHASTIC):
            raise ValidationError(f"unknown tree mode {mode!r}")
        self.mode = mode
        self.nodes: dict[int, TreeNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise ValidationError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        if not self.nodes:
            raise ValidationError("tree has no nodes")
        if len(self.nodes) > MAX_NODES:
            raise ValidationError(f"tree exceeds {MAX_NODES} nodes")
        self._index()

    def _index(self) -> None:
        parent: dict[int, int | None] = {nid: None for nid in self.nodes}
        for node in self.nodes.values():
            if len(node.children) > 2:
                raise ValidationError(f"node {node.id} has more than two children")
            if node.weight < 0 or not np.isfinite(node.weight):
                raise ValidationError(f"node {node.id} has invalid weight {node.weight}")
            for c in node.children:
                if c not in self.nodes:
                    raise ValidationError(f"node {node.id} references missing child {c}")
                if parent[c] is not None:
                    raise ValidationError(f"node {c} has two parents")
                parent[c] = node.id
            if node.is_leaf and node.block_size < 1:
                raise ValidationError(f"leaf {node.id} needs a positive block_size")
        roots = [nid for nid, p in parent.items() if p is None]
        if len(roots) != 1:
            raise ValidationError(f"expected one root, found {len(roots)}")
        self.root = roots[0]
        self.parent = parent

        # iterative pre-order walk assigns depth and contiguous vertex ranges
        self.depth: dict[int, int] = {}
        self.preorder: list[int] = []
        stack = [(self.root, 0)]
        while stack:
            nid, d = stack.pop()
            self.depth[nid] = d
            self.preorder.append(nid)
            for c in reversed(self.nodes[nid].children):
                stack.append((c, d + 1))
        if len(self.preorder) != len(self.nodes):
            raise ValidationError("tree is not connected")

        self.leaves = [nid for nid in self.preorder if self.nodes[nid].is_leaf]
        self.leaf_start: dict[int, int] = {}
        offset = 0
        for leaf in self.leaves:
            self.leaf_start[leaf] = offset
            offset += self.nodes[leaf].block_size
        self.n_vertices = offset
        self.vertex_leaf = np.empty(offset, dtype=np.int64)
        for leaf in self.leaves:
            s = self.leaf_start[leaf]
            self.vertex_leaf[s : s + self.nodes[leaf].block_size] = leaf

        self.span: dict[int, tuple[int, int]] = {}
        for nid in reversed(self.preorder):
            node = self.nodes[nid]
            if node.is_leaf:
                s = self.leaf_start[nid]
                self.span[nid] = (s, s + node.block_size)
            else:
                lo = self.span[node.children[0]][0]
                hi = self.span[node.children[-1]][1]
                self.span[nid] = (lo, hi)

    # structural helpers -------------------------------------------------
    def weight(self, nid: int) -> float:
        return self.nodes[nid].weight

    def children(self, nid: int) -> tuple[int, ...]:
        return self.nodes[nid].children

    def is_full(self) -> bool:
        return all(len(n.children) in (0, 2) for n in self.nodes.values())

    def internal_nodes(self) -> list[int]:
        return [nid for nid in self.preorder if not self.nodes[nid].is_leaf]

    def vertices_of(self, nid: int) -> range:
        lo, hi = self.span[nid]
        return range(lo, hi)

    def height_order(self) -> list[int]:
        """Node ids sorted so that children always precede their parent."""
        return list(reversed(self.preorder))

    def check_monotone(self) -> None:
        for nid, p in self.parent.items():
            if p is not None and self.nodes[nid].weight < self.nodes[p].weight:
                raise MonotonicityViolation(
                    f"node {nid} weight {self.nodes[nid].weight} is below its parent {p} weight {self.nodes[p].weight}"
                )

    def lca(self, a: int, b: int) -> int:
        while self.depth[a] > self.depth[b]:
            a = self.parent[a]
        while self.depth[b] > self.depth[a]:
            b = self.parent[b]
        while a != b:
            a, b = self.parent[a], self.parent[b]
        return a

    def leaf_of(self, v: int) -> int:
        if not 0 <= v < self.n_vertices:
            raise UnknownVertex(v)
        return int(self.vertex_leaf[v])

    def iter_blocks(self) -> Iterator[tuple[int, tuple[int, int], tuple[int, int] | None]]:
        """Yield (node, range_a, range_b) for every group of vertex pairs sharing an LCA.

        Leaves yield their own block with ``range_b`` None (pairs inside the block).
        """
        for nid in self.preorder:
            node = self.nodes[nid]
            if node.is_leaf:
                yield nid, self.span[nid], None
            elif len(node.children) == 2:
                yield nid, self.span[node.children[0]], self.span[node.children[1]]

    def copy(self) -> "HierarchyTree":
        return HierarchyTree(
            [TreeNode(n.id, n.weight, tuple(n.children), n.block_size) for n in self.nodes.values()], self.mode
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HierarchyTree):
            return NotImplemented
        return self.mode == other.mode and self.root == other.root and self.nodes == other.nodes

    def __repr__(self) -> str:
        return f"HierarchyTree(mode={self.mode!r}, nodes={len(self.nodes)}, N={self.n_vertices})"


@dataclass
class WeightedGraph:
    n_vertices: int
    edges: np.ndarray  # (E, 2) int, u < v
    weights: np.ndarray  # (E,) float, all > 0
    vertex_leaf: np.ndarray | None = None

    def weight_matrix(self) -> sparse.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        vals = np.concatenate([self.weights, self.weights])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_vertices, self.n_vertices))

    def edge_dict(self) -> dict[tuple[int, int], float]:
        return {(int(u), int(v)): float(w) for (u, v), w in zip(self.edges, self.weights)}


@dataclass
class SampledGraph:
    n_vertices: int
    edges: np.ndarray  # (E, 2) int, u < v
    seed: int = 0
    _adj: sparse.csr_matrix | None = field(default=None, repr=False, compare=False)

    def adjacency(self) -> sparse.csr_matrix:
        if self._adj is None:
            u, v = self.edges[:, 0], self.edges[:, 1]
            rows = np.concatenate([u, v])
            cols = np.concatenate([v, u])
            self._adj = sparse.csr_matrix(
                (np.ones(len(rows)), (rows, cols)), shape=(self.n_vertices, self.n_vertices)
            )
        return self._adj

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampledGraph):
            return NotImplemented
        return self.n_vertices == other.n_vertices and np.array_equal(self.edges, other.edges)


def normalize_tree(tree: HierarchyTree) -> HierarchyTree:
    """Splice out unary nodes, promoting their child; weights are checked first."""
    tree.check_monotone()
    nodes = {nid: TreeNode(n.id, n.weight, tuple(n.children), n.block_size) for nid, n in tree.nodes.items()}

    def resolve(nid: int) -> int:
        while len(nodes[nid].children) == 1:
            nid = nodes[nid].children[0]
        return nid

    keep = []
    for nid in tree.preorder:
        node = nodes[nid]
        if len(node.children) == 1:
            continue
        node.children = tuple(resolve(c) for c in node.children)
        keep.append(node)
    return HierarchyTree(keep, tree.mode)


def edge_weight(tree: HierarchyTree, u: int, v: int) -> float:
    if u == v:
        raise ValidationError("edge_weight needs two distinct vertices")
    a, b = tree.leaf_of(u), tree.leaf_of(v)
    return tree.weight(tree.lca(a, b))


def _pairs(range_a: tuple[int, int], range_b: tuple[int, int] | None) -> np.ndarray:
    if range_b is None:
        idx = np.arange(*range_a)
        if len(idx) < 2:
            return np.empty((0, 2), dtype=np.int64)
        iu, ju = np.triu_indices(len(idx), k=1)
        return np.stack([idx[iu], idx[ju]], axis=1)
    a = np.arange(*range_a)
    b = np.arange(*range_b)
    grid = np.stack(np.meshgrid(a, b, indexing="ij"), axis=-1).reshape(-1, 2)
    return np.sort(grid, axis=1)


def materialize(tree: HierarchyTree) -> WeightedGraph:
    if tree.mode != DETERMINISTIC:
        raise ModeMismatch("materialize needs a deterministic tree")
    chunks, weights = [], []
    for nid, ra, rb in tree.iter_blocks():
        w = tree.weight(nid)
        if w <= 0:
            continue
        pairs = _pairs(ra, rb)
        chunks.append(pairs)
        weights.append(np.full(len(pairs), w))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    wts = np.concatenate(weights) if weights else np.empty(0)
    order = np.lexsort((edges[:, 1], edges[:, 0])) if len(edges) else np.empty(0, dtype=np.int64)
    return WeightedGraph(tree.n_vertices, edges[order], wts[order], tree.vertex_leaf.copy())


def sample(tree: HierarchyTree, seed: int) -> SampledGraph:
    if tree.mode != STOCHASTIC:
        raise ModeMismatch("sample needs a stochastic tree")
    for node in tree.nodes.values():
        if not 0.0 <= node.weight <= 1.0:
            raise WeightOutOfRange(f"node {node.id} weight {node.weight} is not a probability")
    rng = stream(seed, 0x5A)
    chunks = []
    for nid, ra, rb in tree.iter_blocks():
        p = tree.weight(nid)
        pairs = _pairs(ra, rb)
        if p <= 0 or len(pairs) == 0:
            continue
        if p >= 1:
            chunks.append(pairs)
            continue
        keep = rng.random(len(pairs)) < p
        chunks.append(pairs[keep])
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0])) if len(edges) else np.empty(0, dtype=np.int64)
    return SampledGraph(tree.n_vertices, edges[order].astype(np.int64), int(seed))


# serialization ---------------------------------------------------------


def tree_to_dict(tree: HierarchyTree) -> dict:
    nodes = []
    for nid in tree.preorder:
        n = tree.nodes[nid]
        entry = {"id": n.id, "weight": n.weight, "children": list(n.children) if n.children else None}
        if n.is_leaf:
            entry["block_size"] = n.block_size
        nodes.append(entry)
    return {"mode": tree.mode, "nodes": nodes}


def tree_from_dict(data: dict) -> HierarchyTree:
    try:
        raw = data["nodes"]
        mode = data.get("mode", DETERMINISTIC)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError("tree JSON needs a 'nodes' list") from exc
    if len(raw) > MAX_NODES:
        raise ValidationError(f"tree file exceeds {MAX_NODES} nodes")
    nodes = []
    for entry in raw:
        try:
            children = tuple(int(c) for c in (entry.get("children") or ()))
            nodes.append(
                TreeNode(int(entry["id"]), float(entry["weight"]), children, int(entry.get("block_size", 0) or 0))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad tree node entry {entry!r}") from exc
    return HierarchyTree(nodes, mode)


def dump_tree(tree: HierarchyTree) -> str:
    return json.dumps(tree_to_dict(tree), indent=1)


def load_tree(text: str) -> HierarchyTree:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"tree file is not JSON: {exc}") from exc
    return tree_from_dict(data)


def dump_edges(n_vertices: int, edges: np.ndarray, weights: np.ndarray | None = None, fmt=None) -> str:
    fmt = fmt or fmt_float
    lines = [f"# N={n_vertices}"]
    if weights is None:
        weights = np.ones(len(edges))
    for (u, v), w in zip(edges, weights):
        lines.append(f"{int(u)}\t{int(v)}\t{fmt(float(w))}")
    return "\n".join(lines) + "\n"


def parse_edges(text: str) -> tuple[int, np.ndarray, np.ndarray]:
    n = None
    edges, weights = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("N="):
                try:
                    n = int(body[2:])
                except ValueError as exc:
                    raise ValidationError(f"bad header on line {lineno}") from exc
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ValidationError(f"line {lineno}: expected 'u<TAB>v<TAB>weight'")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
        edges.append((u, v))
        weights.append(w)
    if n is None:
        raise ValidationError("graph file lacks the '# N=<int>' header")
    arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    if len(arr) and (arr.min() < 0 or arr.max() >= n):
        raise ValidationError("edge endpoint outside 0..N-1")
    return n, arr, np.array(weights, dtype=float)


def weighted_graph_from_text(text: str) -> WeightedGraph:
    n, edges, weights = parse_edges(text)
    if np.any(edges[:, 0] == edges[:, 1]):
        raise ValidationError("self-loops are not allowed")
    if np.any(weights <= 0):
        raise ValidationError("stored edge weights must be positive")
    edges = np.sort(edges, axis=1)
    if len({(int(u), int(v)) for u, v in edges}) != len(edges):
        raise ValidationError("duplicate undirected edge")
    return WeightedGraph(n, edges, weights)
