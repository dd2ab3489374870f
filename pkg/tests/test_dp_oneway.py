import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascadelab.dp_oneway import (
    MINUS,
    PLUS,
    OneWayInstance,
    SeedPlan,
    brute_force_oneway,
    dp_solve,
    dump_thresholds,
    leaf_init,
    parse_thresholds,
    random_instance,
    reconstruct,
    solve,
    verify_plan,
)
from cascadelab.errors import InfeasibleTarget, ModeMismatch, ValidationError
from cascadelab.hierarchy import STOCHASTIC, HierarchyTree, TreeNode, edge_weight
from cascadelab.rng import stream


def two_singletons(theta=(0.4, 0.4), w=0.5, k=1):
    tree = HierarchyTree([TreeNode(0, w, (1, 2)), TreeNode(1, 1.0, (), 1), TreeNode(2, 1.0, (), 1)])
    return OneWayInstance(tree, np.array(theta), k)


def naive_oneway_best(inst):
    """Every seed set times every sign vector, simulated with dictionaries."""
    tree = inst.tree
    internal = tree.internal_nodes()
    n = inst.n_vertices
    best = 0
    for signs in itertools.product((PLUS, MINUS), repeat=len(internal)):
        sign = dict(zip(internal, signs))
        # influence u -> v exists inside a leaf, or across a node along its sign
        weight = {}
        for u in range(n):
            for v in range(n):
                if u == v:
                    continue
                lu, lv = tree.leaf_of(u), tree.leaf_of(v)
                top = tree.lca(lu, lv)
                if lu == lv:
                    weight[u, v] = edge_weight(tree, u, v)
                    continue
                left = tree.children(top)[0]
                lo, hi = tree.span[left]
                u_left = lo <= u < hi
                if (sign[top] == PLUS) == u_left:
                    weight[u, v] = tree.weight(top)
        for seeds in itertools.combinations(range(n), inst.k):
            infected = set(seeds)
            while True:
                new = {
                    v
                    for v in range(n)
                    if v not in infected
                    and sum(weight.get((u, v), 0.0) for u in infected) >= inst.thresholds[v] - 1e-9 * max(1, inst.thresholds[v])
                }
                if not new:
                    break
                infected |= new
            best = max(best, len(infected))
    return best


def test_leaf_init_examples():
    assert leaf_init([0.5, 1.5], 0.5, 1, 2) == 0
    assert leaf_init([2, 3], 1.0, 0, 1) == 2
    assert leaf_init([2, 3], 1.0, 0, 0) == 0


def test_two_singletons_reach_both():
    inst = two_singletons()
    table = dp_solve(inst)
    assert table.answer == 2
    plan = reconstruct(table, 2)
    assert len(plan.seeds) == 1
    # the sign must point from the seeded leaf toward the other one
    seeded_left = plan.seeds[0] == 0
    assert plan.signs[0] == (PLUS if seeded_left else MINUS)
    assert verify_plan(inst, plan) == 2
    flipped = SeedPlan(plan.seeds, {0: MINUS if plan.signs[0] == PLUS else PLUS}, 2)
    assert verify_plan(inst, flipped) == 1


def test_single_leaf_seeds_highest_thresholds():
    tree = HierarchyTree([TreeNode(0, 0.1, (), 5)])
    inst = OneWayInstance(tree, np.array([0.9, 0.1, 0.5, 0.7, 0.3]), 2)
    plan = solve(inst)
    assert sorted(plan.seeds) == [0, 3]
    assert dp_solve(inst).answer == int(np.flatnonzero(dp_solve(inst).H[0][2] <= 1e-9).max())


def test_budget_extremes():
    rng = stream(4, 1)
    inst = random_instance(rng, n_max=8)
    full = OneWayInstance(inst.tree, inst.thresholds, inst.n_vertices)
    assert dp_solve(full).answer == inst.n_vertices
    assert brute_force_oneway(full)[0] == inst.n_vertices
    none = OneWayInstance(inst.tree, inst.thresholds + 0.01, 0)
    assert brute_force_oneway(none)[0] == 0
    plan = reconstruct(dp_solve(none), 0)
    assert plan.seeds == []


def test_unreachable_target():
    table = dp_solve(two_singletons(theta=(5.0, 5.0)))
    with pytest.raises(InfeasibleTarget):
        reconstruct(table, 2)


def test_instance_validation():
    tree = HierarchyTree([TreeNode(0, 0.5, (1, 2)), TreeNode(1, 1.0, (), 1), TreeNode(2, 1.0, (), 1)], STOCHASTIC)
    with pytest.raises(ModeMismatch):
        OneWayInstance(tree, np.array([1.0, 1.0]), 1)
    with pytest.raises(ValidationError):
        two_singletons(theta=(1.0, np.inf))


@given(st.integers(0, 2**32))
def test_dp_is_sound_and_bounded(seed):
    inst = random_instance(stream(seed, 7), n_max=7, k_max=3)
    best, _ = brute_force_oneway(inst)
    for aware in (False, True):
        table = dp_solve(inst, aware)
        plan = reconstruct(table, table.answer)
        assert verify_plan(inst, plan) >= table.answer
        assert table.answer <= best


@pytest.mark.parametrize("seed", range(12))
def test_brute_force_matches_naive_oracle(seed):
    inst = random_instance(stream(seed, 11), n_max=6, k_max=2, leaves=(1, 4))
    assert brute_force_oneway(inst)[0] == naive_oneway_best(inst)


def test_plan_and_threshold_files_round_trip():
    plan = SeedPlan([1, 4], {0: PLUS, 3: MINUS}, 5)
    assert SeedPlan.from_json(plan.to_json()) == plan
    theta = np.array([0.125, 1.5, 0.0])
    assert np.array_equal(parse_thresholds(dump_thresholds(theta)), theta)
    with pytest.raises(ValidationError):
        parse_thresholds("0\t1\n0\t2\n")
