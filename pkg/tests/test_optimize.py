import itertools
import math

import numpy as np
import pytest

from cascadelab.aseq import ASequence
from cascadelab.cascade import CascadeInstance, InfluenceSpec, Network, ThresholdSpec, exact_sigma_bucket
from cascadelab.errors import TooLarge
from cascadelab.optimize import brute_force, greedy


def symmetric(n, edges, a, k):
    return CascadeInstance(Network.from_parts(n, edges), InfluenceSpec.symmetric(ASequence(a)), ThresholdSpec.uniform(n), k)


def random_concave(rng, n):
    """Random instance whose local influence has shrinking increments, hence submodular sigma."""
    steps = np.sort(rng.uniform(0.05, 1.0, size=3))[::-1]
    steps = steps / max(1.0, steps.sum())
    a = tuple(np.minimum(np.concatenate([[0.0], np.cumsum(steps)]), 1.0))
    pairs = [p for p in itertools.combinations(range(n), 2) if rng.random() < 0.5]
    return symmetric(n, pairs, a, int(rng.integers(1, 4)))


def test_single_edge():
    inst = symmetric(2, [(0, 1)], (0, 0.5, 1.0), 1)
    assert brute_force(inst) == ((0,), pytest.approx(1.5))
    assert greedy(inst, exact=True).sigma == pytest.approx(1.5)


def test_four_cycle_prefers_opposite_seeds():
    inst = symmetric(4, [(0, 1), (1, 2), (2, 3), (3, 0)], (0, 0, 1.0), 2)
    best, sigma = brute_force(inst)
    assert best == (0, 2) and sigma == pytest.approx(4.0)
    assert exact_sigma_bucket(inst, (0, 1)) == pytest.approx(2.0)


def test_empty_budget():
    inst = symmetric(3, [(0, 1)], (0, 0.5, 1.0), 0)
    assert greedy(inst).steps == []
    assert brute_force(inst) == ((), 0.0)


def test_full_budget_infects_everything():
    inst = symmetric(4, [(0, 1), (2, 3)], (0, 0.3, 1.0), 4)
    trace = greedy(inst, exact=True)
    assert sorted(trace.seeds) == [0, 1, 2, 3] and trace.sigma == pytest.approx(4.0)


def test_cap():
    with pytest.raises(TooLarge):
        brute_force(symmetric(30, [], (0, 1.0), 10), cap=1000)


def test_cumulative_matches_direct_evaluation():
    rng = np.random.default_rng(3)
    inst = random_concave(rng, 6)
    trace = greedy(inst, exact=True)
    assert trace.sigma == pytest.approx(exact_sigma_bucket(inst, trace.seeds, limit=6))


@pytest.mark.parametrize("exact", [True, False])
def test_lazy_equals_naive(exact):
    rng = np.random.default_rng(11)
    for _ in range(20):
        inst = random_concave(rng, int(rng.integers(3, 7)))
        lazy = greedy(inst, 300, 5, exact=exact, lazy=True)
        naive = greedy(inst, 300, 5, exact=exact, lazy=False)
        assert lazy.seeds == naive.seeds


def test_greedy_never_beats_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(15):
        inst = random_concave(rng, int(rng.integers(3, 7)))
        g = greedy(inst, exact=True).sigma
        _, opt = brute_force(inst)
        assert g <= opt + 1e-9
        assert g >= (1 - 1 / math.e) * opt


def test_threads_do_not_change_picks():
    inst = random_concave(np.random.default_rng(2), 7)
    assert greedy(inst, 400, 9, threads=1).rows() == greedy(inst, 400, 9, threads=4).rows()
