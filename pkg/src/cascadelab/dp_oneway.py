"""Exact seeding for hierarchical blockmodels under one-way influence.

Every internal node carries a sign: ``+`` lets its left child's block
influence the right one, ``-`` the reverse. Edges inside a leaf block stay
two-way. ``H[t][i, nu]`` is the least uniform outside influence that lets
``i`` seeds placed in the subtree of ``t`` infect at least ``nu`` of its
vertices.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .cascade import InfluenceSpec, Network, propagate
from .errors import InfeasibleTarget, ModeMismatch, TooLarge, ValidationError
from .hierarchy import DETERMINISTIC, HierarchyTree, TreeNode
from .report import fmt_float
from .rng import stream

ZERO_TOL = 1e-9
BRUTE_CAP = 1_000_000
PLUS, MINUS = "+", "-"


@dataclass
class OneWayInstance:
    tree: HierarchyTree
    thresholds: np.ndarray
    k: int

    def __post_init__(self):
        if self.tree.mode != DETERMINISTIC:
            raise ModeMismatch("one-way seeding needs a deterministic tree")
        if not self.tree.is_full():
            raise ValidationError("tree must be normalized (every internal node has two children)")
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        if self.thresholds.shape != (self.tree.n_vertices,):
            raise ValidationError("need one threshold per vertex")
        if not np.all(np.isfinite(self.thresholds)) or np.any(self.thresholds < 0):
            raise ValidationError("thresholds must be finite and non-negative")
        if not 0 <= self.k <= self.tree.n_vertices:
            raise ValidationError("budget k must lie in 0..N")

    @property
    def n_vertices(self) -> int:
        return self.tree.n_vertices


@dataclass
class DPTable:
    """Per-node tables plus the choices that produced each internal entry.

    Leaf entries need no stored choice: seeds always go to the block's
    highest thresholds.
    """

    instance: OneWayInstance
    H: dict[int, np.ndarray]
    sign: dict[int, np.ndarray] = field(default_factory=dict)
    split_i: dict[int, np.ndarray] = field(default_factory=dict)
    split_nu: dict[int, np.ndarray] = field(default_factory=dict)
    cascade_aware: bool = False

    @property
    def k(self) -> int:
        return self.instance.k

    @property
    def answer(self) -> int:
        row = self.H[self.instance.tree.root][self.k]
        return int(np.flatnonzero(row <= ZERO_TOL).max())


@dataclass
class SeedPlan:
    seeds: list[int]
    signs: dict[int, str]
    nu: int

    def to_json(self) -> str:
        return json.dumps({"seeds": self.seeds, "signs": {str(k): v for k, v in sorted(self.signs.items())}, "nu": self.nu})

    @classmethod
    def from_json(cls, text: str) -> "SeedPlan":
        data = json.loads(text)
        return cls([int(s) for s in data["seeds"]], {int(k): v for k, v in data["signs"].items()}, int(data["nu"]))


# leaf initialization ------------------------------------------------------------


def leaf_init(block: Iterable[float], w: float, i: int, nu: int, cascade_aware: bool = False) -> float:
    """Least outside influence for ``i`` seeds in a block to reach ``nu`` infections.

    Seeds take the highest thresholds; every other threshold drops by i*w.
    The plain rule reads off the (nu-i)-th smallest remaining threshold. The
    cascade-aware rule also credits w from each earlier non-seed infection.
    """
    t = np.sort(np.asarray(list(block), dtype=float))
    return float(_leaf_table(t, w, i, cascade_aware)[nu]) if nu <= len(t) else math.inf


def _leaf_table(t_sorted: np.ndarray, w: float, i: int, cascade_aware: bool) -> np.ndarray:
    s = len(t_sorted)
    i_eff = min(i, s)
    row = np.zeros(s + 1)
    rest = t_sorted[: s - i_eff] - i_eff * w
    if cascade_aware:
        rest = np.maximum.accumulate(rest - w * np.arange(len(rest)))
    row[i_eff + 1 :] = np.maximum(rest, 0.0)
    return row


# dynamic program ----------------------------------------------------------------


def _merge(HL: np.ndarray, HR: np.ndarray, w: float, k: int):
    """Best (value, sign, i_L, nu_L) for every (i, nu) at a node with children tables HL, HR.

    + feeds nu_L * w into the right child, - feeds nu_R * w into the left.
    Ties keep + first, then the smaller i_L, then the smaller nu_L.
    """
    sL, sR = HL.shape[1] - 1, HR.shape[1] - 1
    s = sL + sR
    best = np.full((k + 1, s + 1), np.inf)
    sign = np.zeros((k + 1, s + 1), dtype=np.int8)
    bi = np.zeros((k + 1, s + 1), dtype=np.int32)
    bn = np.zeros((k + 1, s + 1), dtype=np.int32)
    nuL = np.arange(sL + 1)[:, None]
    nuR = np.arange(sR + 1)[None, :]
    cols = nuL + nuR  # target nu of each (nu_L, nu_R) cell
    rows = np.broadcast_to(nuL, cols.shape)
    for sgn in (0, 1):
        for i in range(k + 1):
            for iL in range(i + 1):
                left = HL[iL][:, None]
                right = HR[i - iL][None, :]
                if sgn == 0:
                    cand = np.maximum(left, np.maximum(right - nuL * w, 0.0))
                else:
                    cand = np.maximum(np.maximum(left - nuR * w, 0.0), right)
                # skew so column = target nu; argmin picks the smallest nu_L on ties
                skew = np.full((sL + 1, s + 1), np.inf)
                skew[rows, cols] = cand
                arg = np.argmin(skew, axis=0)
                val = skew[arg, np.arange(s + 1)]
                better = val < best[i]
                best[i][better] = val[better]
                sign[i][better] = sgn
                bi[i][better] = iL
                bn[i][better] = arg[better]
    return best, sign, bi, bn


def dp_solve(instance: OneWayInstance, cascade_aware: bool = False) -> DPTable:
    tree, k = instance.tree, instance.k
    table = DPTable(instance, {}, cascade_aware=cascade_aware)
    for nid in tree.height_order():
        node = tree.nodes[nid]
        if node.is_leaf:
            lo, hi = tree.span[nid]
            t = np.sort(instance.thresholds[lo:hi])
            table.H[nid] = np.stack([_leaf_table(t, node.weight, i, cascade_aware) for i in range(k + 1)])
        else:
            left, right = node.children
            best, sgn, bi, bn = _merge(table.H[left], table.H[right], node.weight, k)
            table.H[nid], table.sign[nid], table.split_i[nid], table.split_nu[nid] = best, sgn, bi, bn
    return table


def reconstruct(table: DPTable, nu_target: int) -> SeedPlan:
    inst = table.instance
    tree = inst.tree
    root_row = table.H[tree.root][table.k]
    if not 0 <= nu_target < len(root_row) or root_row[nu_target] > ZERO_TOL:
        raise InfeasibleTarget(f"nu={nu_target} is not reachable with k={table.k} and no outside influence")
    seeds: list[int] = []
    signs: dict[int, str] = {}
    stack = [(tree.root, table.k, nu_target)]
    while stack:
        nid, i, nu = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            lo, hi = tree.span[nid]
            ids = np.arange(lo, hi)
            order = np.lexsort((ids, inst.thresholds[lo:hi]))
            take = min(i, hi - lo)
            if take:
                seeds.extend(int(v) for v in ids[order[len(order) - take :]])
            continue
        signs[nid] = PLUS if table.sign[nid][i, nu] == 0 else MINUS
        iL, nuL = int(table.split_i[nid][i, nu]), int(table.split_nu[nid][i, nu])
        left, right = node.children
        stack.append((right, i - iL, nu - nuL))
        stack.append((left, iL, nuL))
    return SeedPlan(sorted(seeds), signs, nu_target)


def solve(instance: OneWayInstance, cascade_aware: bool = False) -> SeedPlan:
    table = dp_solve(instance, cascade_aware)
    return reconstruct(table, table.answer)


# oracles ----------------------------------------------------------------------


def oriented_network(tree: HierarchyTree, signs: dict[int, str]) -> Network:
    """Weighted network with cross-block influence pointing along each node's sign."""
    edges, ew, arcs, aw = [], [], [], []
    for nid, ra, rb in tree.iter_blocks():
        w = tree.weight(nid)
        if w <= 0:
            continue
        if rb is None:
            idx = np.arange(*ra)
            iu, ju = np.triu_indices(len(idx), k=1)
            edges.append(np.stack([idx[iu], idx[ju]], 1))
            ew.append(np.full(len(iu), w))
            continue
        if nid not in signs:
            raise ValidationError(f"internal node {nid} has no sign")
        src, dst = (ra, rb) if signs[nid] == PLUS else (rb, ra)
        grid = np.stack(np.meshgrid(np.arange(*src), np.arange(*dst), indexing="ij"), -1).reshape(-1, 2)
        arcs.append(grid)
        aw.append(np.full(len(grid), w))
    cat = lambda xs, shape: np.concatenate(xs) if xs else np.empty(shape)  # noqa: E731
    return Network.from_parts(
        tree.n_vertices,
        cat(edges, (0, 2)).astype(np.int64),
        cat(arcs, (0, 2)).astype(np.int64),
        cat(ew, (0,)),
        cat(aw, (0,)),
        weighted=True,
    )


def verify_plan(instance: OneWayInstance, plan: SeedPlan) -> int:
    net = oriented_network(instance.tree, plan.signs)
    seeded = np.zeros((instance.n_vertices, 1), dtype=bool)
    seeded[list(plan.seeds), 0] = True
    infected, _ = propagate(net.incoming, InfluenceSpec.linear(), instance.thresholds[:, None], seeded)
    return int(infected.sum())


def _batched_oneway(instance: OneWayInstance, plus: np.ndarray, seeded: np.ndarray) -> np.ndarray:
    """Infected counts for many (sign vector, seed set) columns at once.

    ``plus`` is (internal nodes, C) booleans, ``seeded`` is (N, C).
    """
    tree = instance.tree
    internal = tree.internal_nodes()
    limit = instance.thresholds[:, None] - ZERO_TOL * np.maximum(1.0, instance.thresholds[:, None])
    x = seeded.copy()
    while True:
        totals = np.zeros(x.shape)
        for nid in tree.leaves:
            lo, hi = tree.span[nid]
            w = tree.weight(nid)
            if hi - lo > 1 and w > 0:
                block = x[lo:hi].astype(float)
                totals[lo:hi] += w * (block.sum(0) - block)
        for j, nid in enumerate(internal):
            w = tree.weight(nid)
            if w <= 0:
                continue
            (a0, a1), (b0, b1) = tree.span[tree.children(nid)[0]], tree.span[tree.children(nid)[1]]
            totals[b0:b1] += w * np.where(plus[j], x[a0:a1].sum(0), 0)
            totals[a0:a1] += w * np.where(plus[j], 0, x[b0:b1].sum(0))
        nxt = x | (totals >= limit)
        if np.array_equal(nxt, x):
            return x.sum(0)
        x = nxt


def brute_force_oneway(instance: OneWayInstance, cap: int = BRUTE_CAP, batch: int = 1 << 16) -> tuple[int, SeedPlan]:
    tree, n, k = instance.tree, instance.n_vertices, instance.k
    internal = tree.internal_nodes()
    n_sets = math.comb(n, k)
    combos = 2 ** len(internal) * n_sets
    if combos > cap:
        raise TooLarge(f"{combos} sign/seed combinations exceed the cap {cap}")
    seed_sets = list(itertools.combinations(range(n), k))
    sign_vecs = list(itertools.product((True, False), repeat=len(internal)))
    pairs = [(s, z) for s in range(len(sign_vecs)) for z in range(len(seed_sets))]
    best, witness = -1, None
    for start in range(0, len(pairs), batch):
        chunk = pairs[start : start + batch]
        plus = np.array([sign_vecs[s] for s, _ in chunk], dtype=bool).T.reshape(len(internal), len(chunk))
        seeded = np.zeros((n, len(chunk)), dtype=bool)
        for c, (_, z) in enumerate(chunk):
            seeded[list(seed_sets[z]), c] = True
        counts = _batched_oneway(instance, plus, seeded)
        c = int(np.argmax(counts))
        if counts[c] > best:
            best = int(counts[c])
            s, z = chunk[c]
            witness = SeedPlan(list(seed_sets[z]), {nid: PLUS if sign_vecs[s][j] else MINUS for j, nid in enumerate(internal)}, best)
    return best, witness


# thresholds file ----------------------------------------------------------------


def dump_thresholds(values: np.ndarray) -> str:
    return "".join(f"{v}\t{fmt_float(float(t))}\n" for v, t in enumerate(values))


def parse_thresholds(text: str, n: int | None = None) -> np.ndarray:
    found: dict[int, float] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValidationError(f"line {lineno}: expected 'vertex<TAB>theta'")
        try:
            v, t = int(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
        if v in found:
            raise ValidationError(f"line {lineno}: vertex {v} listed twice")
        found[v] = t
    n = len(found) if n is None else n
    if sorted(found) != list(range(n)):
        raise ValidationError(f"thresholds must cover vertices 0..{n - 1} exactly once")
    return np.array([found[v] for v in range(n)])


def random_tree(rng: np.random.Generator, n_vertices: int, n_leaves: int) -> HierarchyTree:
    """Random full binary tree over ``n_leaves`` non-empty blocks with weights growing downward."""
    if not 1 <= n_leaves <= n_vertices:
        raise ValidationError("need 1 <= leaves <= vertices")
    sizes = np.ones(n_leaves, dtype=int) + rng.multinomial(n_vertices - n_leaves, np.full(n_leaves, 1 / n_leaves))
    nodes: list[TreeNode] = []
    next_id = [0]

    def build(lo: int, hi: int, floor: float) -> int:
        nid = next_id[0]
        next_id[0] += 1
        weight = floor + float(rng.uniform(0, 0.5))
        if hi - lo == 1:
            nodes.append(TreeNode(nid, weight, (), int(sizes[lo])))
            return nid
        cut = int(rng.integers(lo + 1, hi))
        node = TreeNode(nid, weight)
        nodes.append(node)
        node.children = (build(lo, cut, weight), build(cut, hi, weight))
        return nid

    build(0, n_leaves, 0.0)
    return HierarchyTree(nodes)


def random_instance(rng: np.random.Generator, n_max: int = 12, k_max: int = 3, leaves: tuple[int, int] = (1, 6)) -> OneWayInstance:
    """Small random instance with degenerate thresholds in [0, 2]."""
    n_leaves = min(int(rng.integers(leaves[0], leaves[1] + 1)), n_max)
    n = int(rng.integers(n_leaves, n_max + 1))
    tree = random_tree(rng, n, n_leaves)
    theta = rng.uniform(0, 2.0, size=tree.n_vertices).round(3)
    k = int(rng.integers(0, min(k_max, tree.n_vertices) + 1))
    return OneWayInstance(tree, theta, k)


def bench_dp(sizes: Iterable[int], budgets: Iterable[int], seed: int, repeats: int = 3) -> list[dict]:
    """Wall time of dp_solve on random trees with about N/4 leaves; best of ``repeats``."""
    rows = []
    for n in sizes:
        for k in budgets:
            rng = stream(seed, 0xB0, n, k)
            tree = random_tree(rng, n, max(1, n // 4))
            inst = OneWayInstance(tree, rng.uniform(0, 2.0, size=n), min(k, n))
            best = math.inf
            for _ in range(repeats):
                start = time.perf_counter()
                dp_solve(inst)
                best = min(best, time.perf_counter() - start)
            rows.append({"N": n, "k": k, "seconds": best})
    return rows


def loglog_slope(xs: Iterable[float], ys: Iterable[float]) -> float:
    return float(np.polyfit(np.log(list(xs)), np.log(list(ys)), 1)[0])
