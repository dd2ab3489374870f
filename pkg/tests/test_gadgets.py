import numpy as np
import pytest

from cascadelab.aseq import ASequence
from cascadelab.cascade import CascadeInstance, InfluenceSpec, Network, ThresholdSpec, exact_infection_probabilities
from cascadelab.errors import NoCrossing, Unachievable, ValidationError
from cascadelab.gadgets import (
    build_and,
    build_and_a1zero,
    build_directed_edge,
    build_filter,
    build_scaling_down,
    choose_lambda0,
    a1zero_block_output,
    directed_edge_layers,
    filter_vertex_count,
    junction_probability,
    load_gadget,
    measure_gadget,
    paths_model,
    phi_bounds,
    realize_separation,
    save_gadget,
    scaling_lengths,
)
from cascadelab.quasisub import SeparationParams, choose_params

A = ASequence((0, 0.3, 0.9, 1.0))
SHARP = ASequence((0, 0.2, 1.0))
ZERO = ASequence((0, 0, 0.5, 1.0))


def exact_probs(n, edges, a, seeds):
    inst = CascadeInstance(Network.from_parts(n, edges), InfluenceSpec.symmetric(a), ThresholdSpec.uniform(n))
    return exact_infection_probabilities(inst, seeds, limit=n)


def test_scaling_edge_cases():
    assert scaling_lengths(0.5, 0.6, A) == ((), 0.0)
    lengths, modeled = scaling_lengths(A.a1**2, 1e-3, A)
    assert lengths == (2,) and modeled == pytest.approx(A.a1**2)
    with pytest.raises(Unachievable):
        scaling_lengths(1.5, 0.01, A)


@pytest.mark.parametrize("alpha", [0.1, 0.2, 0.35])
def test_scaling_model_matches_exact_enumeration(alpha):
    g = build_scaling_down(alpha, 0.02, A)
    if g.n_vertices > 10:
        pytest.skip("too many vertices to enumerate")
    probs = exact_probs(g.n_vertices, g.edges, A, [0])
    assert probs[1] == pytest.approx(paths_model(g.contract["path_lengths"], A), abs=1e-12)
    assert abs(probs[1] - alpha) <= 0.02


def test_one_layer_filter_is_one_block():
    params = choose_params(A, 0.1)
    g = build_filter(params, 1, A)
    sep = realize_separation(params, A)
    interior = sum(length - 1 for length in sep.lengths)
    assert len(g.input_sets[0]) == params.h == g.contract["Lambda"]
    assert g.n_vertices == filter_vertex_count(params.h, 1, interior)


def test_filter_size_grows_geometrically():
    params = choose_params(A, 0.1)
    sizes = [build_filter(params, layers, A).contract["Lambda"] for layers in (1, 2, 3)]
    assert sizes == [params.h, params.h**2, params.h**3]


@pytest.mark.parametrize("pu,pv", [(0.0, 0.0), (0.3, 0.3), (0.1, 0.7), (1.0, 0.5)])
def test_junction_matches_exact_mixture(pu, pv):
    # u - w - v with u, v seeded independently: average the four seed patterns
    total = 0.0
    for su in (0, 1):
        for sv in (0, 1):
            weight = (pu if su else 1 - pu) * (pv if sv else 1 - pv)
            seeds = [x for x, on in ((0, su), (2, sv)) if on]
            total += weight * exact_probs(3, [(0, 1), (1, 2)], A, seeds)[1]
    assert junction_probability(pu, pv, A) == pytest.approx(total)


def test_phi_bounds_bracket_the_junction():
    p0 = 0.2
    t_plus, t_minus, f_plus = phi_bounds(p0, A)
    assert t_minus == pytest.approx(junction_probability(p0, p0, A))
    assert t_plus == pytest.approx(junction_probability(1.1 * p0, 1.1 * p0, A))
    assert f_plus >= junction_probability(0.5 * p0, 1.1 * p0, A)


def test_and_tower_shapes():
    two = build_and(2, 0.5, 0.05, 0.01, SHARP, delta=0.3, max_layers=2)
    assert [g["level"] for g in two.contract["level_groups"]] == [1]
    assert len(two.input_sets) == 2
    four = build_and(4, 0.5, 0.05, 0.01, SHARP, delta=0.3, max_layers=2)
    groups = four.contract["level_groups"]
    assert [(g["level"], g["groups"]) for g in groups] == [(1, 2), (2, 1)]
    assert all(len(s) == four.contract["Lambda"] for s in four.input_sets)


def test_and_separates_true_from_false():
    g = build_and(2, 0.5, 0.05, 0.01, SHARP, delta=0.3, max_layers=3)
    p0 = g.contract["p0"]
    top = g.contract["types"]["C"]
    on = measure_gadget(g, [p0, p0], 4000, 1, SHARP)
    off = measure_gadget(g, [p0, 0.5 * p0], 4000, 2, SHARP)
    se = np.hypot(on["stderr"], off["stderr"])
    assert on["frequency"] - off["frequency"] >= top["true_output_floor"] - top["false_output_ceiling"] - 6 * se


def test_directed_edge_layer_formula():
    assert directed_edge_layers(4, 0.1, 0.5) == 7


def test_directed_edge_needs_low_p1():
    params = SeparationParams.from_h_delta(2, 0.4, A)
    with pytest.raises((NoCrossing, ValidationError)):
        build_directed_edge(2, 0.1, params, A)


def test_directed_edge_transmits_forward():
    params = SeparationParams.from_h_delta(5, 0.5, ASequence((0, 0.1, 1.0)))
    edge = build_directed_edge(2, 0.25, params, ASequence((0, 0.1, 1.0)), 0.01, L=2)
    res = measure_gadget(edge, [1.0], 4000, 3, ASequence((0, 0.1, 1.0)))
    assert res["frequency"] - 3 * res["stderr"] > 0


def test_lambda0_is_the_smallest_that_lifts():
    lam = choose_lambda0(ZERO)
    assert a1zero_block_output(0.5 * ZERO.a2, lam, ZERO) >= 0.5 * ZERO.a2
    assert a1zero_block_output(0.5 * ZERO.a2, lam - 1, ZERO) < 0.5 * ZERO.a2


def test_a1zero_tower_blocks_a_silent_input():
    g = build_and_a1zero(4, 3, ZERO)
    res = measure_gadget(g, [1.0, 1.0, 0.0, 1.0], 5000, 4, ZERO)
    assert res["frequency"] == 0.0


def test_zero_drive_never_fires():
    g = build_filter(choose_params(A, 0.1), 2, A)
    assert measure_gadget(g, [0.0], 500, 0, A)["frequency"] == 0.0


def test_measurement_ignores_threads():
    g = build_filter(choose_params(A, 0.1), 2, A)
    assert measure_gadget(g, [0.3], 3000, 9, A, threads=1) == measure_gadget(g, [0.3], 3000, 9, A, threads=4)


def test_gadget_files_round_trip():
    g = build_and_a1zero(2, 3, ZERO)
    back = load_gadget(*save_gadget(g))
    assert back.kind == g.kind and back.output == g.output and back.input_sets == g.input_sets
    assert np.array_equal(np.sort(back.edges, axis=1), np.sort(g.edges, axis=1))
