import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascadelab.errors import ModeMismatch, MonotonicityViolation, ValidationError, WeightOutOfRange
from cascadelab.hierarchy import (
    DETERMINISTIC,
    STOCHASTIC,
    HierarchyTree,
    TreeNode,
    dump_edges,
    dump_tree,
    edge_weight,
    load_tree,
    materialize,
    normalize_tree,
    parse_edges,
    sample,
)


def two_leaf(root_w, wa=5.0, wb=3.0, sa=1, sb=1, mode=DETERMINISTIC):
    return HierarchyTree([TreeNode(0, root_w, (1, 2)), TreeNode(1, wa, (), sa), TreeNode(2, wb, (), sb)], mode)


def test_unary_node_is_spliced_out():
    tree = HierarchyTree([TreeNode(0, 1, (1, 3)), TreeNode(1, 2, (2,)), TreeNode(2, 5, (), 2), TreeNode(3, 4, (), 1)])
    norm = normalize_tree(tree)
    assert 1 not in norm.nodes
    assert norm.children(0) == (2, 3)
    assert norm.weight(2) == 5
    assert norm.n_vertices == 3


def test_full_tree_is_unchanged():
    tree = two_leaf(1.0)
    assert normalize_tree(tree) == tree


def test_heavier_parent_is_rejected():
    tree = HierarchyTree([TreeNode(0, 3, (1,)), TreeNode(1, 1, (), 1)])
    with pytest.raises(MonotonicityViolation):
        normalize_tree(tree)


def test_edge_weight_is_lca_weight():
    tree = two_leaf(1.0, sa=2, sb=1)
    assert edge_weight(tree, 0, 1) == 5
    assert edge_weight(tree, 0, 2) == 1
    assert edge_weight(two_leaf(0.0), 0, 1) == 0


def test_materialize_small_cases():
    assert len(materialize(two_leaf(0.0)).edges) == 0
    tri = materialize(HierarchyTree([TreeNode(0, 2.0, (), 3)]))
    assert sorted(map(tuple, tri.edges.tolist())) == [(0, 1), (0, 2), (1, 2)]
    assert np.all(tri.weights == 2.0)


@st.composite
def trees(draw, mode=DETERMINISTIC):
    """Random full trees with monotone weights in [0, 1]."""
    nodes = []

    def build(depth, floor):
        nid = len(nodes)
        nodes.append(None)
        w = draw(st.floats(floor, 1.0))
        if depth >= 3 or draw(st.booleans()):
            nodes[nid] = TreeNode(nid, w, (), draw(st.integers(1, 3)))
        else:
            left = build(depth + 1, w)
            right = build(depth + 1, w)
            nodes[nid] = TreeNode(nid, w, (left, right))
        return nid

    build(0, 0.0)
    return HierarchyTree(nodes, mode)


@given(trees())
def test_materialize_matches_pairwise_lca(tree):
    g = materialize(tree)
    got = {tuple(e): w for e, w in zip(g.edges.tolist(), g.weights.tolist())}
    for u in range(tree.n_vertices):
        for v in range(u + 1, tree.n_vertices):
            w = edge_weight(tree, u, v)
            assert got.get((u, v), 0.0) == w


@given(trees())
def test_tree_json_round_trip(tree):
    assert load_tree(dump_tree(tree)) == tree


@given(trees(mode=STOCHASTIC), st.integers(0, 2**32))
def test_sample_is_seed_deterministic(tree, seed):
    assert sample(tree, seed) == sample(tree, seed)


def test_sample_edge_frequency_matches_weight():
    tree = two_leaf(0.5, 1.0, 1.0, mode=STOCHASTIC)
    hits = sum(len(sample(tree, s).edges) for s in range(10_000))
    assert abs(hits / 10_000 - 0.5) <= 0.02


def test_sample_extremes():
    full = HierarchyTree([TreeNode(0, 1.0, (1, 2)), TreeNode(1, 1.0, (), 2), TreeNode(2, 1.0, (), 2)], STOCHASTIC)
    assert len(sample(full, 1).edges) == 6
    empty = HierarchyTree([TreeNode(0, 0.0, (1, 2)), TreeNode(1, 0.0, (), 2), TreeNode(2, 0.0, (), 2)], STOCHASTIC)
    assert len(sample(empty, 1).edges) == 0


def test_mode_checks():
    with pytest.raises(ModeMismatch):
        sample(two_leaf(0.5), 0)
    with pytest.raises(ModeMismatch):
        materialize(two_leaf(0.5, 1.0, 1.0, mode=STOCHASTIC))
    with pytest.raises(WeightOutOfRange):
        sample(two_leaf(0.5, 2.0, 1.0, mode=STOCHASTIC), 0)


def test_bad_tree_json():
    with pytest.raises(ValidationError):
        load_tree('{"mode": "deterministic"}')
    with pytest.raises(ValidationError):
        load_tree('{"nodes": [{"id": 0, "weight": 1, "children": [7]}]}')


def test_edge_list_round_trip():
    g = materialize(two_leaf(0.25, sa=2, sb=2))
    n, edges, weights = parse_edges(dump_edges(g.n_vertices, g.edges, g.weights))
    assert n == g.n_vertices
    assert np.array_equal(edges, g.edges)
    assert np.allclose(weights, g.weights)
