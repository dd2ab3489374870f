"""Instance generators that encode VertexCover / SetCover into seeding problems.

Three families:

* a deterministic hierarchical blockmodel with linear influence and unit
  thresholds (``build_hbm_reduction``);
* a stochastic hierarchical blockmodel with counting influence and integer
  thresholds (``build_shbm_reduction``);
* general graphs with a symmetric influence sequence and uniform thresholds,
  glued from gadgets (``build_setcover_reduction``).

Every bundle carries a YES witness (when one exists), a payoff region and
the named vertex groups needed to check how a cascade travels through it.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .aseq import ASequence
from .cascade import InfluenceSpec, Network, ThresholdSpec, propagate
from .errors import AssumptionViolation, TooLarge, ValidationError
from .gadgets import (
    DEFAULT_SCALE_EPS,
    Gadget,
    GraphBuilder,
    build_and,
    build_and_a1zero,
    build_directed_edge,
    realize_separation,
)
from .hierarchy import DETERMINISTIC, STOCHASTIC, HierarchyTree, TreeNode, dump_edges, dump_tree, materialize, sample
from .quasisub import choose_params
from .report import dumps_json
from .rng import CHUNK, ordered_map, stream

EXHAUSTIVE_CAP = 10_000_000


# problem instances ----------------------------------------------------------------


@dataclass
class VertexCoverInstance:
    n: int
    edges: list[tuple[int, int]]
    k: int

    def __post_init__(self):
        self.edges = [(int(u), int(v)) for u, v in self.edges]
        if self.n < 1 or not self.edges:
            raise ValidationError("need n >= 1 vertices and at least one edge")
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n) or u == v:
                raise ValidationError(f"bad edge ({u}, {v})")
        if not 0 <= self.k <= self.n:
            raise ValidationError("cover budget must lie in 0..n")

    @property
    def m(self) -> int:
        return len(self.edges)

    def covers(self, chosen: Iterable[int]) -> bool:
        s = set(chosen)
        return all(u in s or v in s for u, v in self.edges)

    def find_cover(self) -> tuple[int, ...] | None:
        """First size-k cover in lexicographic order (so covers holding vertex 0 come first)."""
        for combo in itertools.combinations(range(self.n), self.k):
            if self.covers(combo):
                return combo
        return None

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "edges": [list(e) for e in self.edges], "k": self.k})

    @classmethod
    def from_json(cls, text: str) -> "VertexCoverInstance":
        d = json.loads(text)
        return cls(int(d["n"]), [tuple(e) for e in d["edges"]], int(d["k"]))


@dataclass
class SetCoverInstance:
    n: int
    subsets: list[list[int]]
    k: int

    def __post_init__(self):
        self.subsets = [sorted(set(int(x) for x in s)) for s in self.subsets]
        if self.n < 1 or not self.subsets:
            raise ValidationError("need a non-empty universe and at least one subset")
        for s in self.subsets:
            if any(not 0 <= x < self.n for x in s):
                raise ValidationError("subset element outside the universe")
        covered = set().union(*self.subsets)
        if len(covered) != self.n:
            raise ValidationError("every element must lie in at least one subset")
        if not 0 <= self.k <= len(self.subsets):
            raise ValidationError("budget k must lie in 0..K")

    @property
    def K(self) -> int:
        return len(self.subsets)

    def padded(self) -> "SetCoverInstance":
        """Grow the universe to a power of two; new elements join every subset."""
        n2 = 1 << max(1, (self.n - 1).bit_length())
        extra = list(range(self.n, n2))
        return SetCoverInstance(n2, [s + extra for s in self.subsets], self.k)

    def covers(self, chosen: Iterable[int]) -> bool:
        got = set()
        for i in chosen:
            got.update(self.subsets[i])
        return len(got) == self.n

    def find_cover(self) -> tuple[int, ...] | None:
        for combo in itertools.combinations(range(self.K), self.k):
            if self.covers(combo):
                return combo
        return None

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "subsets": self.subsets, "k": self.k})

    @classmethod
    def from_json(cls, text: str) -> "SetCoverInstance":
        d = json.loads(text)
        return cls(int(d["n"]), [list(s) for s in d["subsets"]], int(d["k"]))


# bundles ----------------------------------------------------------------------------


@dataclass
class ReductionBundle:
    """A generated instance with its witness, payoff region and named groups.

    ``expected_yes_floor`` and ``expected_no_ceiling`` count payoff-region
    infections (not counting seeds) predicted at the bundle's parameters.
    """

    kind: str
    n_vertices: int
    k: int
    influence: InfluenceSpec
    thresholds: ThresholdSpec
    yes_strategy: list[int] | None
    payoff_region: np.ndarray
    expected_yes_floor: int
    expected_no_ceiling: int
    params: dict
    groups: dict[str, np.ndarray] = field(default_factory=dict)
    levels: list[np.ndarray] = field(default_factory=list)
    tree: HierarchyTree | None = None
    edges: np.ndarray | None = None
    arcs: np.ndarray | None = None
    orbits: list[tuple[int, int]] | None = None

    def __post_init__(self):
        if self.yes_strategy is not None:
            if len(self.yes_strategy) != self.k:
                raise ValidationError("witness size differs from k")
            if np.isin(self.yes_strategy, self.payoff_region).any():
                raise ValidationError("witness overlaps the payoff region")

    @property
    def stochastic(self) -> bool:
        return self.tree is not None and self.tree.mode == STOCHASTIC

    def network(self, sample_seed: int | None = None) -> Network:
        if self.tree is not None and self.tree.mode == DETERMINISTIC:
            return Network.from_weighted_graph(materialize(self.tree))
        if self.tree is not None:
            if sample_seed is None:
                raise ValidationError("stochastic bundles need a sample seed")
            return Network.from_sampled(sample(self.tree, sample_seed))
        return Network.from_parts(self.n_vertices, self.edges, self.arcs)

    def sidecar(self) -> dict:
        return {
            "kind": self.kind,
            "n_vertices": self.n_vertices,
            "k": self.k,
            "yes_strategy": self.yes_strategy,
            "payoff_region": _ranges(self.payoff_region),
            "expected_yes_floor": self.expected_yes_floor,
            "expected_no_ceiling": self.expected_no_ceiling,
            "params": self.params,
            "groups": {k: _ranges(v) for k, v in self.groups.items()},
            "levels": [_ranges(v) for v in self.levels],
        }


def _ranges(ids) -> list[list[int]]:
    """Compress sorted-or-not vertex ids into [start, stop) runs."""
    arr = np.unique(np.asarray(ids, dtype=np.int64))
    if len(arr) == 0:
        return []
    breaks = np.flatnonzero(np.diff(arr) != 1)
    starts = np.concatenate([[arr[0]], arr[breaks + 1]])
    stops = np.concatenate([arr[breaks] + 1, [arr[-1] + 1]])
    return [[int(a), int(b)] for a, b in zip(starts, stops)]


def expand_ranges(runs) -> np.ndarray:
    if not runs:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([np.arange(a, b) for a, b in runs])


# balanced top ------------------------------------------------------------------------


class _Ids:
    def __init__(self):
        self.next = 0

    def __call__(self) -> int:
        self.next += 1
        return self.next - 1


def _balanced(nodes: list[TreeNode], ids: _Ids, subtrees: list[int], weight) -> int:
    """Full binary tree over ``subtrees`` (left half gets the ceiling); returns its root id."""
    if len(subtrees) == 1:
        return subtrees[0]
    half = (len(subtrees) + 1) // 2
    left = _balanced(nodes, ids, subtrees[:half], weight)
    right = _balanced(nodes, ids, subtrees[half:], weight)
    nid = ids()
    nodes.append(TreeNode(nid, float(weight), (left, right)))
    return nid


# HBM ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class HbmReductionParams:
    W: int
    M: int
    delta: Fraction
    epsilon: float = 0.5
    M_full: float | None = None

    def __post_init__(self):
        if self.W < 1 or self.M < 1 or not self.delta > 0 or not self.epsilon > 0:
            raise ValidationError("W, M, delta and epsilon must be positive")

    @staticmethod
    def default_delta(vc: VertexCoverInstance, W: int) -> Fraction:
        """Small enough that everything outside C_1 and level 1 moves B by less than w_1m / 10."""
        n, m, kb = vc.n, vc.m, vc.k
        c = (n + kb - 1) * W + (n - 1) * (m - 1) + 2
        spread = (n - 1) * (2 * W + m) + 1 + Fraction(1, W)
        return 1 / (2 * (10 * (W + m - 1) * spread + c))

    @classmethod
    def full_scale(cls, vc: VertexCoverInstance, epsilon: float = 0.5) -> "HbmReductionParams":
        W = vc.n * vc.m
        m_eps = vc.n * (2 * W + vc.m) - 1
        m_full = float(m_eps) ** (1.0 / epsilon)
        return cls(W, math.ceil(m_full), cls.default_delta(vc, W), epsilon, m_full)

    @classmethod
    def desk(cls, vc: VertexCoverInstance, M: int = 64, W: int | None = None, epsilon: float = 0.5) -> "HbmReductionParams":
        W = vc.n * vc.m if W is None else W
        m_full = float(vc.n * (2 * W + vc.m) - 1) ** (1.0 / epsilon)
        return cls(W, M, cls.default_delta(vc, W), epsilon, m_full)

    def k(self, vc: VertexCoverInstance) -> int:
        return vc.n + vc.k


def hbm_weight(vc: VertexCoverInstance, W: int, delta: Fraction, i: int, j: int) -> Fraction:
    """Weight of level node (i, j); i and j are 1-based."""
    n, kb = vc.n, vc.k
    base = 1 - (n + kb - 1) * W * delta - (n - 1) * (j - 1) * delta - 2 * delta
    u, v = vc.edges[j - 1]
    if i - 1 in (u, v):
        base += delta
    return base / (W - 1 + j)


def check_hbm_assumptions(vc: VertexCoverInstance) -> None:
    if not vc.n > vc.k:
        raise AssumptionViolation(f"need n > k (n={vc.n}, k={vc.k})")
    if not vc.m > vc.n + vc.k:
        raise AssumptionViolation(f"need m > n + k (m={vc.m}, n + k={vc.n + vc.k})")


def build_hbm_reduction(vc: VertexCoverInstance, params: HbmReductionParams) -> ReductionBundle:
    check_hbm_assumptions(vc)
    n, m, W, M, delta = vc.n, vc.m, params.W, params.M, Fraction(params.delta)
    weights = {(i, j): hbm_weight(vc, W, delta, i, j) for i in range(1, n + 1) for j in range(1, m + 1)}
    if min(weights.values()) <= 0:
        raise AssumptionViolation("delta too large: some level weight is not positive")
    nodes: list[TreeNode] = []
    ids = _Ids()
    leaf = {}

    def add_leaf(name, size, weight) -> int:
        nid = ids()
        nodes.append(TreeNode(nid, float(weight), (), size))
        leaf[name] = nid
        return nid

    roots = []
    for i in range(1, n + 1):
        # chain from level 1 upward: w_i1 holds v_i1 and C_i
        below = ids()
        nodes.append(TreeNode(below, float(weights[i, 1]), (add_leaf(("v", i, 1), 1, 1), add_leaf(("C", i), W, 1))))
        for j in range(2, m + 1):
            nid = ids()
            if i == 1 and j == m:
                top = add_leaf(("B",), M, weights[i, j])
            else:
                top = add_leaf(("v", i, j), 1, 1)
            nodes.append(TreeNode(nid, float(weights[i, j]), (top, below)))
            below = nid
        if m == 1 and i == 1:
            raise AssumptionViolation("need m >= 2 to attach the payoff bundle")
        root_i = ids()
        nodes.append(TreeNode(root_i, float(delta * (1 + Fraction(1, W))), (add_leaf(("D", i), W, 1), below)))
        roots.append(root_i)
    _balanced(nodes, ids, roots, float(delta))
    tree = HierarchyTree(nodes, DETERMINISTIC)

    def span(name) -> np.ndarray:
        return np.arange(*tree.span[leaf[name]])

    groups = {}
    for i in range(1, n + 1):
        groups[f"C_{i}"] = span(("C", i))
        groups[f"D_{i}"] = span(("D", i))
        for j in range(1, m + 1):
            if not (i == 1 and j == m):
                groups[f"v_{i}_{j}"] = span(("v", i, j))
    groups["B"] = span(("B",))
    # B stands in for v_1m, so it belongs to the last level
    levels = [
        np.concatenate([groups[f"v_{i}_{j}"] if f"v_{i}_{j}" in groups else groups["B"] for i in range(1, n + 1)])
        for j in range(1, m + 1)
    ]
    cover = vc.find_cover()
    witness = None
    if cover is not None:
        witness = [int(groups[f"C_{i}"][0]) for i in range(1, n + 1)] + [int(groups[f"D_{i + 1}"][0]) for i in cover]
    orbits = [tree.span[nid] for nid in tree.leaves]
    param_doc = {
        "W": W,
        "M": M,
        "delta": str(delta),
        "epsilon": params.epsilon,
        "M_full": params.M_full,
        "W_full": n * m,
        "M_eps_identity": n * (2 * W + m) - 1,
        "vc": {"n": n, "m": m, "k": vc.k, "edges": [list(e) for e in vc.edges]},
        "cover": list(cover) if cover is not None else None,
    }
    return ReductionBundle(
        kind="hbm",
        n_vertices=tree.n_vertices,
        k=params.k(vc),
        influence=InfluenceSpec.linear(),
        thresholds=ThresholdSpec.degenerate(1.0, tree.n_vertices),
        yes_strategy=witness,
        payoff_region=groups["B"],
        expected_yes_floor=M if cover is not None else 0,
        expected_no_ceiling=0,
        params=param_doc,
        groups=groups,
        levels=levels,
        tree=tree,
        orbits=orbits,
    )


# SHBM ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class ShbmReductionParams:
    W: int
    M: int
    delta: Fraction
    Delta: Fraction

    def __post_init__(self):
        if self.W < 2:
            raise ValidationError("W must be at least 2")
        if self.M < 1:
            raise ValidationError("M must be positive")

    @classmethod
    def for_instance(cls, vc: VertexCoverInstance, W: int, M: int) -> "ShbmReductionParams":
        delta = Fraction(1, 10 * vc.m * vc.n**2 * vc.k)
        return cls(W, M, delta, delta * vc.m * vc.n**2)

    @staticmethod
    def full_W(vc: VertexCoverInstance) -> int:
        return vc.m**10 * vc.n**10


def check_shbm_assumptions(vc: VertexCoverInstance) -> None:
    if not vc.m > vc.n > vc.k**2 + 2:
        raise AssumptionViolation(f"need m > n > k^2 + 2 (m={vc.m}, n={vc.n}, k={vc.k})")
    if vc.n & (vc.n - 1):
        raise AssumptionViolation("n must be a power of two")
    if vc.k < 1:
        raise AssumptionViolation("cover budget must be positive")


def shbm_omega(n: int, W: int, j: int, iota: int) -> int:
    before = (j - 1) * (n - 2) + (iota - 1)
    return before * W**3 + (n - 1) * before * W**2


def shbm_offsets(n: int, ij: int, ij2: int) -> np.ndarray:
    """(n-2) x n multipliers of W^2: zero in columns ij, ij2 (0-based), cyclic elsewhere."""
    free = [c for c in range(n) if c not in (ij, ij2)]
    out = np.zeros((n - 2, n), dtype=np.int64)
    for r in range(n - 2):
        for p, c in enumerate(free):
            out[r, c] = (p - r) % (n - 2) + 1
    return out


def shbm_thresholds(vc: VertexCoverInstance, params: ShbmReductionParams) -> dict[tuple[int, int, int], Fraction]:
    """Exact theta[i, j, iota] (all 1-based)."""
    n, W, D = vc.n, params.W, params.Delta
    table = {}
    for j in range(1, vc.m + 1):
        u, v = sorted(vc.edges[j - 1])
        offs = shbm_offsets(n, u, v)
        for iota in range(1, n - 1):
            base = shbm_omega(n, W, j, iota) + (1 - D) * W**2
            for i in range(1, n + 1):
                table[i, j, iota] = base + int(offs[iota - 1, i - 1]) * W**2
    return table


def shbm_payoff_threshold(vc: VertexCoverInstance, params: ShbmReductionParams) -> Fraction:
    n, m, W = vc.n, vc.m, params.W
    return m * (n - 2) * W**3 + (n - 1) * m * (n - 2) * W**2 + (1 - params.Delta) * W**2


def shbm_vertex_count(vc: VertexCoverInstance, params: ShbmReductionParams) -> int:
    n, m, W = vc.n, vc.m, params.W
    return params.M + n * m * (n - 2) * W**3 + n * vc.k * W**2


def build_shbm_reduction(vc: VertexCoverInstance, params: ShbmReductionParams) -> ReductionBundle:
    check_shbm_assumptions(vc)
    n, m, W, kb = vc.n, vc.m, params.W, vc.k
    theta = shbm_thresholds(vc, params)
    nodes: list[TreeNode] = []
    ids = _Ids()
    leaves = []
    for i in range(1, n + 1):
        size = kb * W**2 + m * (n - 2) * W**3 + (params.M if i == 1 else 0)
        nid = ids()
        nodes.append(TreeNode(nid, 1.0, (), size))
        leaves.append(nid)
    _balanced(nodes, ids, leaves, 1.0 / W)
    tree = HierarchyTree(nodes, STOCHASTIC)
    values = np.empty(tree.n_vertices)
    groups: dict[str, np.ndarray] = {}
    for i in range(1, n + 1):
        lo = tree.span[leaves[i - 1]][0]
        groups[f"B_{i}"] = np.arange(lo, lo + kb * W**2)
        values[groups[f"B_{i}"]] = np.inf
        cur = lo + kb * W**2
        for j in range(1, m + 1):
            for iota in range(1, n - 1):
                ids_ = np.arange(cur, cur + W**3)
                groups[f"B_{i}_{j}_{iota}"] = ids_
                values[ids_] = float(theta[i, j, iota])
                cur += W**3
        if i == 1:
            groups["C"] = np.arange(cur, cur + params.M)
            values[groups["C"]] = float(shbm_payoff_threshold(vc, params))
    levels = [
        np.concatenate([groups[f"B_{i}_{j}_{iota}"] for i in range(1, n + 1)]) for j in range(1, m + 1) for iota in range(1, n - 1)
    ] + [groups["C"]]
    cover = vc.find_cover()
    witness = None
    if cover is not None:
        witness = [int(v) for c in cover for v in groups[f"B_{c + 1}"][: W**2]]
    param_doc = {
        "W": W,
        "W_full": ShbmReductionParams.full_W(vc),
        "M": params.M,
        "delta": str(params.delta),
        "Delta": str(params.Delta),
        "vc": {"n": n, "m": m, "k": kb, "edges": [list(e) for e in vc.edges]},
        "cover": list(cover) if cover is not None else None,
        "cover_has_A1": bool(cover is not None and 0 in cover),
    }
    return ReductionBundle(
        kind="shbm",
        n_vertices=tree.n_vertices,
        k=kb * W**2,
        influence=InfluenceSpec.counting(),
        thresholds=ThresholdSpec(values),
        yes_strategy=witness,
        payoff_region=groups["C"],
        expected_yes_floor=params.M if cover is not None else 0,
        expected_no_ceiling=0,
        params=param_doc,
        groups=groups,
        levels=levels,
        tree=tree,
    )


@dataclass
class GoodSampleReport:
    good: bool
    condition1: bool
    condition2: bool
    worst_low: float
    worst_high: float
    max_cross_edges: int
    draws: int
    violations: list[str]


def check_good_sample(graph, bundle: ReductionBundle, draws: int = 32, seed: int = 0) -> GoodSampleReport:
    """Check both concentration conditions on a sampled graph.

    Condition 1 is exhaustive. Condition 2 quantifies over all subsets, so
    it is probed with ``draws`` random (D_i, D_-i) pairs per clique plus one
    greedy draw that packs the highest cross degrees together.
    """
    if bundle.kind != "shbm":
        raise ValidationError("good samples are defined for the stochastic reduction")
    vc = bundle.params["vc"]
    n, m, W = vc["n"], vc["m"], bundle.params["W"]
    delta = Fraction(bundle.params["delta"])
    kb = vc["k"]
    N = bundle.n_vertices
    adj = graph.adjacency() if hasattr(graph, "adjacency") else graph
    clique = bundle.tree.vertex_leaf
    leaf_order = {leaf: idx for idx, leaf in enumerate(bundle.tree.leaves)}
    clique_idx = np.array([leaf_order[l] for l in clique])
    names = [(i, j, t) for i in range(1, n + 1) for j in range(1, m + 1) for t in range(1, n - 1)]
    cols = np.concatenate([np.full(W**3, c) for c in range(len(names))])
    rows = np.concatenate([bundle.groups[f"B_{i}_{j}_{t}"] for i, j, t in names])
    member = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, len(names)))
    counts = (adj @ member).toarray()
    owner = np.array([i - 1 for i, _, _ in names])
    outside = clique_idx[:, None] != owner[None, :]
    lo_bound = float((1 - delta) * W**2)
    hi_bound = float((1 + delta) * W**2)
    vals = counts[outside]
    violations = []
    worst_low = float(vals.min()) if len(vals) else math.inf
    worst_high = float(vals.max()) if len(vals) else -math.inf
    cond1 = bool(len(vals) == 0 or (worst_low > lo_bound and worst_high < hi_bound))
    if not cond1:
        violations.append(f"condition 1: neighbor counts span [{worst_low}, {worst_high}], need ({lo_bound:.6g}, {hi_bound:.6g})")
    size_in = max(1, math.ceil(delta * W**2))
    size_out = (kb + 1) * W**2
    limit = W**3.6
    rng = stream(seed, 0x6D)
    worst = 0
    total_draws = 0
    csr = adj.tocsr()
    for c in range(n):
        inside = np.flatnonzero(clique_idx == c)
        outs = np.flatnonzero(clique_idx != c)
        if len(inside) < size_in or len(outs) < size_out:
            continue
        cross_deg = np.asarray(csr[inside][:, outs].sum(axis=1)).ravel()
        picks = [rng.choice(len(inside), size_in, replace=False) for _ in range(draws)]
        picks.append(np.argsort(-cross_deg, kind="stable")[:size_in])
        for p in picks:
            sub = csr[inside[p]][:, outs]
            per_out = np.asarray(sub.sum(axis=0)).ravel()
            if p is picks[-1]:
                chosen = np.argsort(-per_out, kind="stable")[:size_out]
            else:
                chosen = rng.choice(len(outs), size_out, replace=False)
            worst = max(worst, int(per_out[chosen].sum()))
            total_draws += 1
    cond2 = worst < limit
    if not cond2:
        violations.append(f"condition 2: {worst} cross edges, need < W^3.6 = {limit:.6g}")
    return GoodSampleReport(cond1 and cond2, cond1, cond2, worst_low, worst_high, worst, total_draws, violations)


# set cover ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SetCoverParams:
    """Desk-scale knobs; None means derive from the instance."""

    delta: float = 0.1
    M1: int | None = None
    M2: int | None = None
    and_layers: int = 2
    upsilon: int | None = None
    edge_eps: float | None = None
    edge_layers: int | None = None
    lambda0: int | None = None
    eps: float | None = None
    scale_eps: float = DEFAULT_SCALE_EPS


def sequence_eps(a: ASequence, n: int) -> float:
    """2 (p* - a_floor(a_1 n))."""
    return 2.0 * (a.p_star - a[int(math.floor(a.a1 * n))])


def junction_template() -> Gadget:
    """Pair-to-vertex connector for a_1 = 0.

    Local ids: 0, 1 are the pair (A, B), 2 is the target clique vertex C,
    then X1, X2, Y1, Y2, D, E. Each of the seven non-pair vertices needs two
    infected neighbors, so C fires with probability a_2^7 when A and B are
    seeded, while an infected C alone cannot reach A or B.
    """
    A, B, C, X1, X2, Y1, Y2, D, E = range(9)
    edges = [
        (A, X1), (B, X1), (A, X2), (B, X2),
        (X1, Y1), (X2, Y1), (X1, Y2), (X2, Y2),
        (Y1, D), (X1, D), (Y2, E), (X2, E),
        (D, C), (E, C),
    ]  # fmt: skip
    return Gadget("pair_junction", 9, np.array(edges, dtype=np.int64), [[A, B]], C, {"internal": 6})


def _clique_edges(ids: np.ndarray) -> np.ndarray:
    iu, ju = np.triu_indices(len(ids), k=1)
    return np.stack([ids[iu], ids[ju]], axis=1)


def build_setcover_reduction(
    sc: SetCoverInstance, variant: str, a: ASequence, params: SetCoverParams | None = None
) -> ReductionBundle:
    params = params or SetCoverParams()
    if sc.n & (sc.n - 1) or sc.n < 2:
        raise AssumptionViolation("universe size must be a power of two, at least 2 (see SetCoverInstance.padded)")
    if variant in ("directed", "undirected"):
        if not a.a1 > 0:
            raise AssumptionViolation(f"the {variant} variant needs a_1 > 0")
        return _setcover_positive(sc, variant, a, params)
    if variant == "a1zero":
        if a.a1 != 0 or not a.a2 > 0:
            raise AssumptionViolation("the a1zero variant needs a_1 = 0 < a_2")
        return _setcover_a1zero(sc, a, params)
    raise ValidationError(f"unknown variant {variant!r}")


def _setcover_positive(sc: SetCoverInstance, variant: str, a: ASequence, params: SetCoverParams) -> ReductionBundle:
    n = sc.n
    sep_params = choose_params(a, params.delta)
    sep = realize_separation(sep_params, a, params.scale_eps)
    p2 = sep.report.p2
    eps = sequence_eps(a, n) if params.eps is None else params.eps
    eps1, eps2 = 1.0 / n, p2 / 100.0
    p0 = a.a1 * (a.p_star - eps) if variant == "directed" else a.p_star * (p2 - eps2)
    gate = build_and(n, p0, eps1, eps2, a, params=sep_params, max_layers=params.and_layers, scale_eps=params.scale_eps)
    lam = gate.contract["Lambda"]
    M2 = n**2 if params.M2 is None else params.M2
    M1 = n**10 * lam if params.M1 is None else params.M1
    m = M2 * lam
    g = GraphBuilder()
    subset_v = g.add(sc.K)
    cliques = [g.add(m) for _ in range(n)]
    for c in cliques:
        g.edges(_clique_edges(c))
    edge_gadget = None
    if variant == "undirected":
        upsilon = m * n if params.upsilon is None else params.upsilon
        edge_eps = m**-2 if params.edge_eps is None else params.edge_eps
        edge_gadget = build_directed_edge(upsilon, edge_eps, sep_params, a, params.scale_eps, L=params.edge_layers)

    def connect(src: np.ndarray, dst: np.ndarray) -> None:
        if edge_gadget is None:
            g.arcs(np.stack([src, dst], axis=1))
            return
        u_local = edge_gadget.input_sets[0][0]
        for s, d in zip(src, dst):
            g.stamp(edge_gadget, {u_local: int(s), edge_gadget.output: int(d)})

    for s, members in enumerate(sc.subsets):
        for e in members:
            connect(np.full(m, subset_v[s]), cliques[e])
    payoff = []
    outputs = []
    for copy in range(M2):
        mapping = g.stamp(gate)
        for e in range(n):
            inputs = mapping[np.asarray(gate.input_sets[e])]
            connect(cliques[e][copy * lam : (copy + 1) * lam], inputs)
        out = int(mapping[gate.output])
        outputs.append(out)
        bundle_ids = g.add(M1)
        g.edges(np.stack([np.full(M1, out), bundle_ids], axis=1))
        payoff.append(bundle_ids)
    payoff_ids = np.concatenate(payoff)
    cover = sc.find_cover()
    witness = [int(subset_v[i]) for i in cover] if cover is not None else None
    yes_floor = math.floor(a.a1 * (p2 - eps2) * M1 * M2)
    no_ceiling = math.ceil(a.a1 * eps1 * M1 * M2 + sc.k * M1)
    param_doc = {
        "variant": variant,
        "n": n,
        "K": sc.K,
        "k": sc.k,
        "eps": eps,
        "p0": p0,
        "p1": sep.report.p1,
        "p2": p2,
        "eps1": eps1,
        "eps2": eps2,
        "Lambda": lam,
        "m": m,
        "M1": M1,
        "M2": M2,
        "and": gate.contract,
        "directed_edge": edge_gadget.contract if edge_gadget is not None else None,
        "cover": list(cover) if cover is not None else None,
    }
    groups = {"subsets": subset_v, "outputs": np.array(outputs)}
    for e, c in enumerate(cliques):
        groups[f"clique_{e}"] = c
    return ReductionBundle(
        kind=f"setcover-{variant}",
        n_vertices=g.n,
        k=sc.k,
        influence=InfluenceSpec.symmetric(a),
        thresholds=ThresholdSpec.uniform(g.n),
        yes_strategy=witness,
        payoff_region=payoff_ids,
        expected_yes_floor=yes_floor,
        expected_no_ceiling=no_ceiling,
        params=param_doc,
        groups=groups,
        edges=g.edge_array(),
        arcs=g.arc_array(),
    )


def _setcover_a1zero(sc: SetCoverInstance, a: ASequence, params: SetCoverParams) -> ReductionBundle:
    n = sc.n
    tower = build_and_a1zero(2 * n, params.lambda0, a)
    lam = tower.contract["Lambda"]
    M2 = n**2 if params.M2 is None else params.M2
    M1 = n ** (int(math.log2(tower.contract["Lambda0"] or 2)) + 10) if params.M1 is None else params.M1
    m = 2 * M2 * lam
    g = GraphBuilder()
    pairs = g.add(2 * sc.K).reshape(sc.K, 2)
    cliques = [[g.add(m), g.add(m)] for _ in range(n)]
    for pair in cliques:
        for c in pair:
            g.edges(_clique_edges(c))
    junction = junction_template()
    for s, members in enumerate(sc.subsets):
        A, B = int(pairs[s, 0]), int(pairs[s, 1])
        for e in members:
            for c in cliques[e]:
                for v in c:
                    g.stamp(junction, {0: A, 1: B, 2: int(v)})
    outputs = []
    for t in range(2 * M2):
        bind = {}
        for e in range(n):
            for side in range(2):
                local = tower.input_sets[2 * e + side]
                targets = cliques[e][side][t * lam : (t + 1) * lam]
                bind.update({int(lv): int(gv) for lv, gv in zip(local, targets)})
        mapping = g.stamp(tower, bind)
        outputs.append(int(mapping[tower.output]))
    payoff = []
    for s in range(M2):
        ids_ = g.add(M1)
        for out in outputs[2 * s : 2 * s + 2]:
            g.edges(np.stack([np.full(M1, out), ids_], axis=1))
        payoff.append(ids_)
    payoff_ids = np.concatenate(payoff)
    cover = sc.find_cover()
    witness = [int(v) for i in cover for v in pairs[i]] if cover is not None else None
    half = 0.5 * a.a2
    param_doc = {
        "variant": "a1zero",
        "n": n,
        "K": sc.K,
        "k": sc.k,
        "Lambda0": tower.contract["Lambda0"],
        "Lambda": lam,
        "m": m,
        "M1": M1,
        "M2": M2,
        "junction_transmit": a.a2**7,
        "cover": list(cover) if cover is not None else None,
    }
    groups = {"pairs": pairs.ravel(), "outputs": np.array(outputs)}
    for e, (c0, c1) in enumerate(cliques):
        groups[f"clique_{e}_0"] = c0
        groups[f"clique_{e}_1"] = c1
    return ReductionBundle(
        kind="setcover-a1zero",
        n_vertices=g.n,
        k=2 * sc.k,
        influence=InfluenceSpec.symmetric(a),
        thresholds=ThresholdSpec.uniform(g.n),
        yes_strategy=witness,
        payoff_region=payoff_ids,
        expected_yes_floor=math.floor(half**2 * a.a2 * M1 * M2),
        expected_no_ceiling=math.ceil(2 * sc.k * (M1 + tower.n_vertices)),
        params=param_doc,
        groups=groups,
        edges=g.edge_array(),
        arcs=g.arc_array(),
    )


# verification -------------------------------------------------------------------------


@dataclass
class YesReport:
    payoff_rate: float
    stderr: float
    trials: int
    order_ok: bool | None
    order_rate: float | None
    stalled_level: int | None = None


def _level_order_ok(rounds: np.ndarray, levels: Sequence[np.ndarray]) -> tuple[bool, int | None]:
    """Every level completes before any later level fires.

    Seeds (round 0) are ignored. Returns (order held, index of the first
    level left incomplete).
    """
    fired_at = [rounds[lvl] for lvl in levels]
    stall = next((i for i, r in enumerate(fired_at) if np.any(r < 0)), None)
    upto = len(levels) if stall is None else stall + 1
    for i in range(upto - 1):
        done = fired_at[i].max()
        later = np.concatenate(fired_at[i + 1 :])
        later = later[later > 0]
        if len(later) and later.min() <= done:
            return False, stall
    return True, stall


def verify_yes_strategy(
    bundle: ReductionBundle, trials: int = 1, seed: int = 0, seeds: Sequence[int] | None = None, threads: int | None = None
) -> YesReport:
    """Run the cascade from the witness (or ``seeds``) and measure the payoff region.

    Deterministic bundles run once. Stochastic bundles draw one graph per
    trial; uniform-threshold bundles draw thresholds per trial.
    """
    chosen = bundle.yes_strategy if seeds is None else list(seeds)
    if chosen is None:
        raise ValidationError("bundle has no YES witness")
    payoff = bundle.payoff_region
    n = bundle.n_vertices
    chosen = sorted(set(int(s) for s in chosen))
    payoff_free = np.setdiff1d(payoff, chosen)
    if bundle.thresholds.is_deterministic and not bundle.stochastic:
        net = bundle.network()
        seeded = np.zeros((n, 1), dtype=bool)
        seeded[chosen] = True
        infected, rounds = propagate(net.incoming, bundle.influence, bundle.thresholds.values[:, None], seeded, True)
        rate = float(infected[payoff_free, 0].mean()) if len(payoff_free) else 1.0
        ok, stall = _level_order_ok(rounds[:, 0], bundle.levels) if bundle.levels else (None, None)
        return YesReport(rate, 0.0, 1, ok, None if ok is None else float(ok), stall)

    def one(t: int):
        rng = stream(seed, 0x7E, t)
        if bundle.stochastic:
            net = bundle.network(int(rng.integers(0, 2**63 - 1)))
        else:
            net = bundle.network()
        theta = bundle.thresholds.realize(rng, 1)
        seeded = np.zeros((n, 1), dtype=bool)
        seeded[chosen] = True
        infected, rounds = propagate(net.incoming, bundle.influence, theta, seeded, bool(bundle.levels))
        rate = float(infected[payoff_free, 0].mean()) if len(payoff_free) else 1.0
        ok = _level_order_ok(rounds[:, 0], bundle.levels)[0] if bundle.levels else None
        return rate, ok

    if not bundle.stochastic:
        net = bundle.network()
        rates = []
        # batch threshold draws; every chunk owns its own stream
        sizes = [min(CHUNK, trials - s) for s in range(0, trials, CHUNK)]

        def work(c: int) -> np.ndarray:
            rng = stream(seed, 0x7F, c)
            theta = bundle.thresholds.realize(rng, sizes[c])
            seeded = np.zeros((n, sizes[c]), dtype=bool)
            seeded[chosen] = True
            infected, _ = propagate(net.incoming, bundle.influence, theta, seeded)
            return infected[payoff_free].mean(axis=0) if len(payoff_free) else np.ones(sizes[c])

        rates = np.concatenate(ordered_map(work, range(len(sizes)), threads))
        se = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0
        return YesReport(float(rates.mean()), se, trials, None, None)
    results = ordered_map(one, range(trials), threads)
    rates = np.array([r for r, _ in results])
    oks = [o for _, o in results if o is not None]
    se = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0
    return YesReport(float(rates.mean()), se, trials, all(oks) if oks else None, float(np.mean(oks)) if oks else None)


def _compositions(sizes: Sequence[int], k: int):
    """All count vectors c with 0 <= c_l <= sizes[l] and sum k, in lexicographic order."""
    n = len(sizes)
    suffix = np.concatenate([np.cumsum(np.asarray(sizes)[::-1])[::-1], [0]])
    out = [0] * n

    def rec(pos: int, left: int):
        if left == 0:
            yield tuple(out)
            return
        if pos == n:
            return
        lo = max(0, left - int(suffix[pos + 1]))
        for c in range(lo, min(sizes[pos], left) + 1):
            out[pos] = c
            yield from rec(pos + 1, left - c)
        out[pos] = 0

    yield from rec(0, k)


def _count_compositions(sizes: Sequence[int], k: int) -> int:
    ways = [1] + [0] * k
    for s in sizes:
        nxt = [0] * (k + 1)
        for total, w in enumerate(ways):
            if w:
                for c in range(0, min(s, k - total) + 1):
                    nxt[total + c] += w
        ways = nxt
    return ways[k]


def verify_no_gap_small(
    bundle: ReductionBundle,
    mode: str = "exhaustive",
    cap: int = EXHAUSTIVE_CAP,
    probes: int = 256,
    seed: int = 0,
    batch: int = 4096,
    avoid_payoff: bool = False,
    stop_above: int | None = None,
) -> int:
    """Largest number of non-seed payoff vertices any probed seed set infects.

    Exhaustive mode walks seed sets up to symmetry when the bundle lists
    orbits (blocks of interchangeable vertices), otherwise all k-subsets.
    ``avoid_payoff`` drops seed sets that touch the payoff region.
    ``stop_above`` returns early once a batch beats it, which is enough to
    refute a gap.
    Random-threshold and sampled bundles are judged on one fixed draw.
    """
    if bundle.k == 0:
        return 0
    n = bundle.n_vertices
    rng_net = stream(seed, 0x7A)
    net = bundle.network(int(rng_net.integers(0, 2**63 - 1)) if bundle.stochastic else None)
    theta_col = bundle.thresholds.realize(stream(seed, 0x7B), 1)
    payoff = bundle.payoff_region

    def evaluate(columns: list[list[int]]) -> int:
        seeded = np.zeros((n, len(columns)), dtype=bool)
        for c, col in enumerate(columns):
            seeded[col, c] = True
        theta = np.repeat(theta_col, len(columns), axis=1)
        infected, _ = propagate(net.incoming, bundle.influence, theta, seeded)
        hit = infected[payoff] & ~seeded[payoff]
        return int(hit.sum(axis=0).max())

    if mode == "exhaustive":
        if bundle.orbits:
            in_payoff = np.isin([lo for lo, _ in bundle.orbits], payoff)
            sizes = [0 if (avoid_payoff and hit) else hi - lo for (lo, hi), hit in zip(bundle.orbits, in_payoff)]
            total = _count_compositions(sizes, bundle.k)
            if total > cap:
                raise TooLarge(f"{total} seed orbits exceed the cap {cap}")
            gen = (
                [v for (lo, _), c in zip(bundle.orbits, comp) for v in range(lo, lo + c)]
                for comp in _compositions(sizes, bundle.k)
            )
        else:
            pool = np.setdiff1d(np.arange(n), payoff) if avoid_payoff else np.arange(n)
            total = math.comb(len(pool), bundle.k)
            if total > cap:
                raise TooLarge(f"C({len(pool)}, {bundle.k}) = {total} exceeds the cap {cap}")
            gen = (list(c) for c in itertools.combinations(pool.tolist(), bundle.k))
        best = 0
        while True:
            cols = list(itertools.islice(gen, batch))
            if not cols:
                return best
            best = max(best, evaluate(cols))
            if stop_above is not None and best > stop_above:
                return best
    if mode == "heuristic":
        rng = stream(seed, 0x7C)
        pool = np.setdiff1d(np.arange(n), payoff) if avoid_payoff else np.arange(n)
        cols = [sorted(rng.choice(pool, bundle.k, replace=False).tolist()) for _ in range(probes)]
        if bundle.yes_strategy is not None:
            cols.append(list(bundle.yes_strategy))
        return max(evaluate(cols[i : i + batch]) for i in range(0, len(cols), batch))
    raise ValidationError(f"unknown mode {mode!r}")


# files ------------------------------------------------------------------------------


def save_bundle(bundle: ReductionBundle) -> tuple[str, str, str]:
    """(structure text, structure kind, sidecar JSON). Trees go out as JSON, graphs as TSV."""
    side = bundle.sidecar()
    if bundle.tree is not None:
        side["thresholds"] = [None if not np.isfinite(t) else float(t) for t in bundle.thresholds.values]
        return dump_tree(bundle.tree), "tree", dumps_json(side)
    text = dump_edges(bundle.n_vertices, bundle.edges)
    if bundle.arcs is not None and len(bundle.arcs):
        text += "".join(f"# arc\t{int(u)}\t{int(v)}\n" for u, v in bundle.arcs)
    return text, "graph", dumps_json(side)
