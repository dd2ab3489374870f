"""Gadget graphs for symmetric influence with uniform thresholds.

Builders compute analytic probabilities with a forward-only propagation
model; :func:`measure_gadget` is the ground truth. All gadgets are plain
undirected graphs with designated input sets and a single output vertex.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .aseq import ASequence
from .cascade import InfluenceSpec, Network, propagate
from .errors import InfeasibleBetas, NoCrossing, NoLambda0, Unachievable, ValidationError
from .hierarchy import dump_edges, parse_edges
from .quasisub import (
    FixedPointReport,
    SeparationParams,
    block_output,
    choose_params,
    find_fixed_points,
    iterate_map,
)
from .rng import chunk_sizes, ordered_map, stream

MAX_PATH = 400
DEFAULT_SCALE_EPS = 1e-3
MAX_LAYERS = 6
MAX_LAMBDA = 10_000


@dataclass
class Gadget:
    kind: str
    n_vertices: int
    edges: np.ndarray
    input_sets: list[list[int]]
    output: int
    contract: dict = field(default_factory=dict)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def network(self) -> Network:
        return Network.from_parts(self.n_vertices, self.edges)

    def sidecar(self) -> dict:
        return {"type": self.kind, "params": self.contract, "input_sets": self.input_sets, "output": self.output}


class GraphBuilder:
    """Grows an undirected graph (plus optional arcs) by stamping templates."""

    def __init__(self):
        self.n = 0
        self._edges: list[np.ndarray] = []
        self._arcs: list[np.ndarray] = []

    def add(self, count: int = 1) -> np.ndarray:
        ids = np.arange(self.n, self.n + count, dtype=np.int64)
        self.n += count
        return ids

    def one(self) -> int:
        return int(self.add(1)[0])

    def edges(self, pairs) -> None:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs):
            self._edges.append(pairs)

    def arcs(self, pairs) -> None:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs):
            self._arcs.append(pairs)

    def stamp(self, template: Gadget, bind: dict[int, int] | None = None) -> np.ndarray:
        """Copy ``template`` in; ``bind`` maps template vertices onto existing ids."""
        bind = bind or {}
        mapping = np.empty(template.n_vertices, dtype=np.int64)
        free = np.ones(template.n_vertices, dtype=bool)
        for local, target in bind.items():
            mapping[local] = target
            free[local] = False
        mapping[free] = self.add(int(free.sum()))
        self.edges(mapping[template.edges])
        return mapping

    def edge_array(self) -> np.ndarray:
        return np.concatenate(self._edges) if self._edges else np.empty((0, 2), dtype=np.int64)

    def arc_array(self) -> np.ndarray:
        return np.concatenate(self._arcs) if self._arcs else np.empty((0, 2), dtype=np.int64)

    def gadget(self, kind: str, input_sets, output: int, contract: dict) -> Gadget:
        return Gadget(kind, self.n, self.edge_array(), [list(map(int, s)) for s in input_sets], int(output), contract)


# probability scaling ------------------------------------------------------


def paths_model(lengths: Sequence[int], a: ASequence) -> float:
    """Forward-model probability that v fires when u is infected.

    A path of length l reaches v's neighbor with probability a_1^(l-1); the
    path ends are independent, and v fires with a_J for J infected ends.
    """
    top = a.last_index
    dist = np.zeros(top + 1)
    dist[0] = 1.0
    for length in lengths:
        q = a.a1 ** (length - 1)
        new = dist * (1 - q)
        new[1:] += dist[:-1] * q
        new[top] += dist[top] * q
        dist = new
    return float(dist @ a.table())


@functools.lru_cache(maxsize=256)
def _scaling_lengths(alpha: float, eps: float, values: tuple[float, ...]) -> tuple[tuple[int, ...], float]:
    a = ASequence(values)
    lengths: list[int] = []
    p = 0.0
    while not (alpha - eps < p <= alpha):
        length = 2
        while paths_model(lengths + [length], a) > alpha:
            length += 1
            if length > MAX_PATH:
                raise Unachievable(f"cannot approach alpha={alpha} within {eps} using paths up to {MAX_PATH}")
        lengths.append(length)
        p = paths_model(lengths, a)
    return tuple(lengths), p


def scaling_lengths(alpha: float, eps: float, a: ASequence) -> tuple[tuple[int, ...], float]:
    """Path lengths of the scaling-down gadget and its modeled factor."""
    if not 0 < alpha <= a.p_star:
        raise Unachievable(f"alpha={alpha} must lie in (0, p*={a.p_star}]")
    if a.a1 <= 0:
        raise ValidationError("scaling-down paths need a_1 > 0")
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if eps >= alpha:
        return (), 0.0
    return _scaling_lengths(float(alpha), float(eps), a.values)


def _paths_template(lengths: Sequence[int]) -> np.ndarray:
    """Edges over local ids: 0 = u, 1 = v, then path interiors in order."""
    edges = []
    nxt = 2
    for length in lengths:
        chain = [0] + list(range(nxt, nxt + length - 1)) + [1]
        nxt += length - 1
        edges.extend(zip(chain, chain[1:]))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def build_scaling_down(alpha: float, eps: float, a: ASequence) -> Gadget:
    lengths, modeled = scaling_lengths(alpha, eps, a)
    edges = _paths_template(lengths)
    n = 2 + sum(length - 1 for length in lengths)
    contract = {"alpha": alpha, "eps": eps, "modeled_factor": modeled, "path_lengths": list(lengths)}
    return Gadget("scaling_down", n, edges, [[0]], 1, contract)


def _add_paths(builder: GraphBuilder, u: int, v: int, template: np.ndarray, interior: int) -> None:
    mapping = np.empty(interior + 2, dtype=np.int64)
    mapping[0], mapping[1] = u, v
    mapping[2:] = builder.add(interior)
    builder.edges(mapping[template])


# filter -------------------------------------------------------------------


@dataclass(frozen=True)
class RealizedSeparation:
    """Separation block after the scaling gadget is fixed: the map it actually implements."""

    nominal: SeparationParams
    lengths: tuple[int, ...]
    params: SeparationParams
    report: FixedPointReport


def realize_separation(params: SeparationParams, a: ASequence, scale_eps: float = DEFAULT_SCALE_EPS) -> RealizedSeparation:
    lengths, factor = scaling_lengths(params.alpha, scale_eps, a)
    realized = SeparationParams(params.h, factor, 1.0 - params.h * factor * a.a1)
    return RealizedSeparation(params, lengths, realized, find_fixed_points(realized, a))


def filter_layers(
    sep: RealizedSeparation, a: ASequence, low: float, high: float, eps1: float, eps2: float, max_layers: int = MAX_LAYERS
) -> int:
    """Fewest layers sending ``low`` below eps1 and ``high`` above p2 - eps2 (capped)."""
    p2 = sep.report.p2
    x_lo, x_hi = low, high
    for layers in range(1, max_layers + 1):
        x_lo = iterate_map(x_lo, sep.params, a, 1)
        x_hi = iterate_map(x_hi, sep.params, a, 1)
        if x_lo < eps1 and x_hi > p2 - eps2:
            return layers
    return max_layers


def _filter_contract(sep: RealizedSeparation, layers: int, a: ASequence, low: float, high: float) -> dict:
    out_low = iterate_map(low, sep.params, a, layers)
    out_high = iterate_map(high, sep.params, a, layers)
    return {
        "Lambda": sep.params.h**layers,
        "h": sep.params.h,
        "layers": layers,
        "alpha": sep.nominal.alpha,
        "delta": sep.nominal.delta,
        "alpha_realized": sep.params.alpha,
        "delta_realized": sep.params.delta,
        "p1": sep.report.p1,
        "p2": sep.report.p2,
        "drive_low": low,
        "eps1": out_low,
        "drive_high": high,
        # driving at p2 itself lands within the bisection tolerance of p2
        "eps2": max(0.0, sep.report.p2 - out_high),
    }


def _stamp_filter(builder: GraphBuilder, sep: RealizedSeparation, layers: int, inputs: np.ndarray | None = None):
    """Add an l-layer filter; returns (input ids, output id)."""
    h = sep.params.h
    template = _paths_template(sep.lengths)
    interior = sum(length - 1 for length in sep.lengths)
    if inputs is None:
        inputs = builder.add(h**layers)
    current = np.asarray(inputs)
    for _ in range(layers):
        outputs = builder.add(len(current) // h)
        scaled = builder.add(len(current))
        for x, s in zip(current, scaled):
            _add_paths(builder, int(x), int(s), template, interior)
        builder.edges(np.stack([scaled, np.repeat(outputs, h)], axis=1))
        current = outputs
    return np.asarray(inputs), int(current[0])


def build_filter(
    params: SeparationParams,
    layers: int,
    a: ASequence,
    scale_eps: float = DEFAULT_SCALE_EPS,
    drive_low: float | None = None,
    drive_high: float | None = None,
) -> Gadget:
    if layers < 1:
        raise ValidationError("a filter needs at least one layer")
    sep = realize_separation(params, a, scale_eps)
    low = 0.5 * sep.report.p1 if drive_low is None else drive_low
    high = 0.5 * (sep.report.p1 + sep.report.p2) if drive_high is None else drive_high
    builder = GraphBuilder()
    inputs, out = _stamp_filter(builder, sep, layers)
    contract = _filter_contract(sep, layers, a, low, high)
    contract["scale_eps"] = scale_eps
    contract["path_lengths"] = list(sep.lengths)
    return builder.gadget("filter", [inputs], out, contract)


def filter_vertex_count(h: int, layers: int, interior: int) -> int:
    blocks = sum(h ** (layers - i) for i in range(1, layers + 1))
    return h**layers + blocks * (h * (1 + interior) + 1)


# AND gadgets ----------------------------------------------------------------


@dataclass(frozen=True)
class And2Betas:
    beta: float
    phiT_plus: float
    phiT_minus: float
    phiF_plus: float


@dataclass(frozen=True)
class AndParams:
    I: int
    Lambda: int
    p0: float
    p2: float
    eps1: float
    eps2: float


def junction_probability(pu: float, pv: float, a: ASequence) -> float:
    """Chance the shared neighbor w of u and v fires."""
    return (a.a2 - 2 * a.a1) * pu * pv + a.a1 * pu + a.a1 * pv


def phi_bounds(p0: float, a: ASequence) -> tuple[float, float, float]:
    c = a.a2 - 2 * a.a1
    t_plus = c * (1.1 * p0) ** 2 + 2 * a.a1 * (1.1 * p0)
    t_minus = c * p0**2 + 2 * a.a1 * p0
    f_plus = 0.55 * c * p0**2 + 1.6 * a.a1 * p0
    return t_plus, t_minus, f_plus


def betas_feasible(b: And2Betas, p1: float, p2: float, p_star: float) -> bool:
    return 0 < b.beta <= p_star and b.beta * b.phiT_plus < p2 and b.beta * b.phiT_minus > p1 and b.beta * b.phiF_plus < p1


def choose_betas(p0: float, a: ASequence, p1: float, p2: float) -> And2Betas:
    """Midpoint of the feasible beta interval."""
    t_plus, t_minus, f_plus = phi_bounds(p0, a)
    if t_minus <= 0:
        raise InfeasibleBetas("threshold p0 must be positive")
    lo = p1 / t_minus
    hi = min(p1 / f_plus if f_plus > 0 else math.inf, p2 / t_plus, a.p_star)
    if not lo < hi:
        raise InfeasibleBetas(f"no beta satisfies the system: lower {lo:.6g} >= upper {hi:.6g}")
    return And2Betas(0.5 * (lo + hi), t_plus, t_minus, f_plus)


def _beta_eps(b: And2Betas, p1: float, scale_eps: float) -> float:
    # keep the realized beta above the lower edge of the feasible interval
    return min(scale_eps, 0.5 * (b.beta - p1 / b.phiT_minus))


def _and2_template(
    sep: RealizedSeparation, layers: int, betas: And2Betas, a: ASequence, scale_eps: float
) -> tuple[Gadget, float]:
    eps = _beta_eps(betas, sep.report.p1, scale_eps)
    beta_lengths, beta_real = scaling_lengths(betas.beta, eps, a)
    builder = GraphBuilder()
    f_inputs, out = _stamp_filter(builder, sep, layers)
    lam = len(f_inputs)
    us, vs, ws = builder.add(lam), builder.add(lam), builder.add(lam)
    builder.edges(np.stack([us, ws], axis=1))
    builder.edges(np.stack([vs, ws], axis=1))
    template = _paths_template(beta_lengths)
    interior = sum(length - 1 for length in beta_lengths)
    for w, x in zip(ws, f_inputs):
        _add_paths(builder, int(w), int(x), template, interior)
    g = builder.gadget("and2", [us, vs], out, {})
    return g, beta_real


def build_and2(p0: float, betas: And2Betas, filter: Gadget, a: ASequence, scale_eps: float = DEFAULT_SCALE_EPS) -> Gadget:
    c = filter.contract
    if not betas_feasible(betas, c["p1"], c["p2"], a.p_star):
        raise InfeasibleBetas("betas violate the feasibility system for this filter")
    params = SeparationParams(c["h"], c["alpha"], c["delta"])
    sep = realize_separation(params, a, c.get("scale_eps", scale_eps))
    g, beta_real = _and2_template(sep, c["layers"], betas, a, scale_eps)
    g.contract = _and2_contract(p0, betas, beta_real, sep, c["layers"], a)
    return g


def _and2_contract(p0, betas, beta_real, sep, layers, a) -> dict:
    true_in = beta_real * betas.phiT_minus
    false_in = beta_real * betas.phiF_plus
    return {
        "p0": p0,
        "beta": betas.beta,
        "beta_realized": beta_real,
        "phiT_plus": betas.phiT_plus,
        "phiT_minus": betas.phiT_minus,
        "phiF_plus": betas.phiF_plus,
        "p1": sep.report.p1,
        "p2": sep.report.p2,
        "layers": layers,
        "Lambda": sep.params.h**layers,
        "true_output_floor": iterate_map(true_in, sep.params, a, layers),
        "false_output_ceiling": iterate_map(false_in, sep.params, a, layers),
    }


def _check_power_of_two(I: int) -> int:
    if I < 2 or I & (I - 1):
        raise ValidationError("I must be a power of two, at least 2")
    return I.bit_length() - 1


def build_and(
    I: int,
    p0: float,
    eps1: float,
    eps2: float,
    a: ASequence,
    *,
    delta: float = 0.1,
    params: SeparationParams | None = None,
    max_layers: int = MAX_LAYERS,
    scale_eps: float = DEFAULT_SCALE_EPS,
) -> Gadget:
    """I-input AND tower built from 2-input AND gadgets of three types.

    Type A (threshold p0) sits at level 1, type B (threshold p2 - eps2) at
    the middle levels, and type C (threshold p2 - eps2, tight eps1) on top.
    """
    levels = _check_power_of_two(I)
    if a.a1 <= 0:
        raise ValidationError("use build_and_a1zero when a_1 = 0")
    params = params or choose_params(a, delta)
    sep = realize_separation(params, a, scale_eps)
    p1, p2 = sep.report.p1, sep.report.p2
    if not 0 < eps2 < p2:
        raise ValidationError("eps2 must lie in (0, p2)")
    p0_b = p2 - eps2
    eps1_ab = p0_b / 3
    betas_a = choose_betas(p0, a, p1, p2)
    betas_b = choose_betas(p0_b, a, p1, p2)

    def layers_for(b: And2Betas, target_eps1: float) -> int:
        return filter_layers(sep, a, b.beta * b.phiF_plus, b.beta * b.phiT_minus, target_eps1, eps2, max_layers)

    # a one-level tower's top block reads the raw inputs, so it keeps p0
    betas_c = betas_b if levels > 1 else betas_a
    layers_c = layers_for(betas_c, eps1)
    layers_ab = max(layers_for(betas_a, eps1_ab), layers_for(betas_b, eps1_ab)) if levels > 1 else layers_c
    templates = {}
    contracts = {}
    for kind, betas, layers in (("A", betas_a, layers_ab), ("B", betas_b, layers_ab), ("C", betas_c, layers_c)):
        g, beta_real = _and2_template(sep, layers, betas, a, scale_eps)
        templates[kind] = g
        contracts[kind] = _and2_contract(p0 if betas is betas_a else p0_b, betas, beta_real, sep, layers, a)

    lam0 = params.h**layers_ab
    lam_c = params.h**layers_c

    def kind_at(level: int) -> str:
        if level == levels:
            return "C"
        return "A" if level == 1 else "B"

    builder = GraphBuilder()
    sets, out = _grow_tower(builder, levels, lambda level: templates[kind_at(level)])
    contract = {
        "I": I,
        "Lambda": lam0 ** (levels - 1) * lam_c,
        "Lambda0": lam0,
        "LambdaC": lam_c,
        "p0": p0,
        "p1": p1,
        "p2": p2,
        "eps1_target": eps1,
        "eps2": eps2,
        "delta": params.delta,
        "h": params.h,
        "types": contracts,
        "level_groups": [
            {"level": i, "groups": 2 ** (levels - i), "per_group": lam0 ** (levels - i - 1) * lam_c if i < levels else 1}
            for i in range(1, levels + 1)
        ],
    }
    return builder.gadget("and", sets, out, contract)


def _grow_tower(builder: GraphBuilder, levels: int, template_at) -> tuple[list[np.ndarray], int]:
    """Binary tower of 2-input blocks; each lower block's output is an input vertex above.

    Returns the 2**levels input sets (ordered by side, top side first) and
    the top output.
    """

    def grow(level: int, out: int | None) -> tuple[list[np.ndarray], int]:
        tpl = template_at(level)
        mapping = builder.stamp(tpl, {} if out is None else {tpl.output: out})
        sides = [mapping[np.asarray(s)] for s in tpl.input_sets]
        if level == 1:
            return sides, int(mapping[tpl.output])
        sets: list[np.ndarray] = []
        for side in sides:
            parts = [grow(level - 1, int(v))[0] for v in side]
            sets.extend(np.concatenate([p[j] for p in parts]) for j in range(len(parts[0])))
        return sets, int(mapping[tpl.output])

    return grow(levels, None)


# directed edge --------------------------------------------------------------


@dataclass(frozen=True)
class DirectedEdgeParams:
    Upsilon: int
    eps: float
    L: int
    b: float | None = None


def directed_edge_layers(upsilon: int, eps: float, delta: float) -> int:
    return math.ceil(math.log(upsilon / eps) / math.log(1.0 / (1.0 - delta)) + 1)


def build_directed_edge(
    Upsilon: int, eps: float, params: SeparationParams, a: ASequence, scale_eps: float = DEFAULT_SCALE_EPS, L: int | None = None
) -> Gadget:
    if a.a1 <= 0:
        raise ValidationError("the directed edge gadget needs a_1 > 0")
    if Upsilon < 1 or not 0 < eps < 1:
        raise ValidationError("need Upsilon >= 1 and eps in (0, 1)")
    sep = realize_separation(params, a, scale_eps)
    if not sep.report.p1 < a.a1:
        raise NoCrossing(f"p1={sep.report.p1:.6g} is not below a_1={a.a1}")
    layers = directed_edge_layers(Upsilon, eps, params.delta) if L is None else int(L)
    builder = GraphBuilder()
    u = builder.one()
    inputs, out = _stamp_filter(builder, sep, layers)
    builder.edges(np.stack([np.full(len(inputs), u), inputs], axis=1))
    h = params.h
    contract = {
        "Upsilon": Upsilon,
        "eps": eps,
        "L": layers,
        "h": h,
        "delta": params.delta,
        "alpha": params.alpha,
        "alpha_realized": sep.params.alpha,
        "p1": sep.report.p1,
        "p2": sep.report.p2,
        "leak_model": Upsilon * h**layers * (a.a1 * sep.params.alpha) ** layers,
        "leak_model_nominal": Upsilon * h**layers * (a.a1 * params.alpha) ** layers,
        "forward_model": iterate_map(a.a1, sep.params, a, layers),
    }
    return builder.gadget("directed_edge", [[u]], out, contract)


# a_1 = 0 AND ------------------------------------------------------------------


def a1zero_block_output(x: float, lambda0: int, a: ASequence) -> float:
    """Output probability of the 2-input block when every input fires with probability x."""
    q = a.a2 * x * x
    return float(block_output(q, lambda0, a)[0])


def choose_lambda0(a: ASequence, cap: int = MAX_LAMBDA) -> int:
    half = 0.5 * a.a2
    for lam in range(2, cap + 1):
        if a1zero_block_output(half, lam, a) >= half:
            return lam
    raise NoLambda0(f"no Lambda0 up to {cap} lifts y(a2/2) to a2/2")


def _a1zero_block(lambda0: int) -> Gadget:
    # local ids: 0 output, then u_i, v_i, w_i blocks
    us = np.arange(1, 1 + lambda0)
    vs = us + lambda0
    ws = vs + lambda0
    edges = np.concatenate(
        [np.stack([us, ws], 1), np.stack([vs, ws], 1), np.stack([ws, np.zeros(lambda0, dtype=np.int64)], 1)]
    )
    return Gadget("and2_a1zero", 3 * lambda0 + 1, edges, [us.tolist(), vs.tolist()], 0, {"Lambda0": lambda0})


def build_and_a1zero(I: int, Lambda0: int | None, a: ASequence, cap: int = MAX_LAMBDA) -> Gadget:
    levels = _check_power_of_two(I)
    if a.a1 != 0 or not a.a2 > 0:
        raise ValidationError("this construction needs a_1 = 0 < a_2")
    lam = choose_lambda0(a, cap) if Lambda0 is None else int(Lambda0)
    block = _a1zero_block(lam)
    builder = GraphBuilder()
    sets, out = _grow_tower(builder, levels, lambda level: block)
    blocks = sum(2 ** (levels - i) * lam ** (levels - i) for i in range(1, levels + 1))
    contract = {
        "I": I,
        "Lambda0": lam,
        "Lambda": lam**levels,
        "blocks": blocks,
        "modeled_half_a2": a1zero_block_output(0.5 * a.a2, lam, a),
    }
    return builder.gadget("and_a1zero", sets, out, contract)


# measurement --------------------------------------------------------------------


def _chunk_for(n: int) -> int:
    r = max(16, min(2048, (1 << 23) // max(n, 1)))
    return 1 << (r.bit_length() - 1)


def measure_gadget(
    gadget: Gadget,
    input_probs: Sequence[float],
    trials: int,
    seed: int,
    a: ASequence,
    threads: int | None = None,
    watch: Iterable[int] | None = None,
    extra_seeds: Iterable[int] = (),
) -> dict:
    """Monte Carlo output frequency with inputs seeded independently per set.

    ``watch`` adds frequencies for further vertices (e.g. the input of a
    directed edge when measuring reverse leakage); ``extra_seeds`` are always
    seeded.
    """
    if trials < 1:
        raise ValidationError("trials must be positive")
    if len(input_probs) != len(gadget.input_sets):
        raise ValidationError("need one probability per input set")
    net = gadget.network()
    influence = InfluenceSpec.symmetric(a)
    n = gadget.n_vertices
    watch = [gadget.output] + [int(w) for w in (watch or [])]
    extra = np.array(sorted(set(int(s) for s in extra_seeds)), dtype=np.int64)
    sizes = chunk_sizes(trials, _chunk_for(n))

    def work(c: int) -> np.ndarray:
        rng = stream(seed, 0x6A, c)
        reps = sizes[c]
        seeded = np.zeros((n, reps), dtype=bool)
        for s, p in zip(gadget.input_sets, input_probs):
            if p > 0:
                seeded[np.asarray(s)] = rng.random((len(s), reps)) < p
        if len(extra):
            seeded[extra] = True
        theta = 1.0 - rng.random((n, reps))
        infected, _ = propagate(net.incoming, influence, theta, seeded)
        return infected[watch].astype(float)

    hits = np.concatenate(ordered_map(work, range(len(sizes)), threads), axis=1)
    freq = hits.mean(axis=1)
    se = np.sqrt(np.maximum(freq * (1 - freq), 0) / trials)
    result = {"frequency": float(freq[0]), "stderr": float(se[0]), "trials": trials}
    if len(watch) > 1:
        result["watched"] = [{"vertex": w, "frequency": float(f), "stderr": float(s)} for w, f, s in zip(watch[1:], freq[1:], se[1:])]
    return result


def reverse_leak_gadget(edge: Gadget, upsilon: int) -> tuple[Gadget, int, list[int]]:
    """Upsilon copies of a directed edge sharing the input u; returns (graph, u, outputs)."""
    builder = GraphBuilder()
    u = builder.one()
    local_u = edge.input_sets[0][0]
    outputs = []
    for _ in range(upsilon):
        mapping = builder.stamp(edge, {local_u: u})
        outputs.append(int(mapping[edge.output]))
    g = builder.gadget("directed_edge_reverse", [outputs], u, {"Upsilon": upsilon})
    return g, u, outputs


def measure_directed_edge(edge: Gadget, a: ASequence, trials: int, seed: int, threads: int | None = None) -> dict:
    forward = measure_gadget(edge, [1.0], trials, seed, a, threads)
    upsilon = int(edge.contract["Upsilon"])
    rev, _u, _outs = reverse_leak_gadget(edge, upsilon)
    backward = measure_gadget(rev, [1.0], trials, seed + 1, a, threads)
    return {
        "b": forward["frequency"],
        "b_stderr": forward["stderr"],
        "leak": backward["frequency"],
        "leak_stderr": backward["stderr"],
        "trials": trials,
    }


def save_gadget(gadget: Gadget) -> tuple[str, str]:
    """TSV edge list plus JSON sidecar text."""
    return dump_edges(gadget.n_vertices, gadget.edges), json.dumps(gadget.sidecar(), indent=1, default=_jsonable)


def load_gadget(tsv: str, sidecar: str) -> Gadget:
    n, edges, _ = parse_edges(tsv)
    meta = json.loads(sidecar)
    return Gadget(meta["type"], n, edges, [list(s) for s in meta["input_sets"]], int(meta["output"]), meta.get("params", {}))


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")
