"""General threshold cascades: simulation, Monte Carlo and exact expectation.

The engine is batched: a state is an (N, R) boolean array holding R
independent realizations side by side, and each synchronous round costs one
sparse-times-dense product. Single cascades are the R = 1 case.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .aseq import ASequence
from .errors import SpecMismatch, TooLarge, ValidationError
from .hierarchy import HierarchyTree, SampledGraph, WeightedGraph, sample
from .rng import chunk_sizes, ordered_map, stream

# a vertex fires when f >= theta; this slack absorbs float rounding in sums
# that are meant to hit a threshold exactly
TIE_TOL = 1e-9

LINEAR = "linear"
COUNTING = "counting"
SYMMETRIC = "symmetric"


@dataclass
class Network:
    """Influence carrier: ``matrix[u, v]`` is the weight u exerts on v."""

    n_vertices: int
    matrix: sparse.csr_matrix
    weighted: bool = False
    _incoming: sparse.csr_matrix | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_parts(
        cls,
        n_vertices: int,
        edges: np.ndarray | Sequence = (),
        arcs: np.ndarray | Sequence = (),
        edge_weights: np.ndarray | None = None,
        arc_weights: np.ndarray | None = None,
        weighted: bool = False,
    ) -> "Network":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        arcs = np.asarray(arcs, dtype=np.int64).reshape(-1, 2)
        ew = np.ones(len(edges)) if edge_weights is None else np.asarray(edge_weights, dtype=float)
        aw = np.ones(len(arcs)) if arc_weights is None else np.asarray(arc_weights, dtype=float)
        rows = np.concatenate([edges[:, 0], edges[:, 1], arcs[:, 0]])
        cols = np.concatenate([edges[:, 1], edges[:, 0], arcs[:, 1]])
        vals = np.concatenate([ew, ew, aw])
        if len(rows) and (rows.min() < 0 or max(rows.max(), cols.max()) >= n_vertices):
            raise ValidationError("edge endpoint outside the vertex range")
        if np.any(rows == cols):
            raise ValidationError("self-loops are not allowed")
        mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n_vertices, n_vertices))
        if not weighted:
            # repeated pairs still count as one neighbor
            mat.data[:] = 1.0
        return cls(n_vertices, mat, weighted)

    @classmethod
    def from_weighted_graph(cls, g: WeightedGraph) -> "Network":
        return cls.from_parts(g.n_vertices, g.edges, edge_weights=g.weights, weighted=True)

    @classmethod
    def from_sampled(cls, g: SampledGraph) -> "Network":
        return cls.from_parts(g.n_vertices, g.edges)

    @property
    def incoming(self) -> sparse.csr_matrix:
        """Transpose, so ``incoming @ state`` sums influence arriving at each vertex."""
        if self._incoming is None:
            self._incoming = self.matrix.T.tocsr()
        return self._incoming


@dataclass(frozen=True)
class InfluenceSpec:
    variant: str
    a: ASequence | None = None

    def __post_init__(self):
        if self.variant not in (LINEAR, COUNTING, SYMMETRIC):
            raise ValidationError(f"unknown influence variant {self.variant!r}")
        if self.variant == SYMMETRIC and self.a is None:
            raise ValidationError("symmetric influence needs a sequence")

    @classmethod
    def linear(cls) -> "InfluenceSpec":
        return cls(LINEAR)

    @classmethod
    def counting(cls) -> "InfluenceSpec":
        return cls(COUNTING)

    @classmethod
    def symmetric(cls, a: ASequence | Sequence[float]) -> "InfluenceSpec":
        return cls(SYMMETRIC, a if isinstance(a, ASequence) else ASequence(tuple(a)))

    def check(self, network: Network) -> None:
        if self.variant == LINEAR and not network.weighted:
            raise SpecMismatch("linear influence needs a weighted graph")
        if self.variant != LINEAR and network.weighted:
            raise SpecMismatch(f"{self.variant} influence needs an unweighted graph")

    def apply(self, totals: np.ndarray) -> np.ndarray:
        """Map summed neighbor weight (or neighbor count) to f_v."""
        if self.variant != SYMMETRIC:
            return totals
        table = self.a.table()
        idx = np.minimum(np.rint(totals), len(table) - 1).astype(np.int64)
        return table[idx]


@dataclass
class ThresholdSpec:
    """Per-vertex thresholds: a finite value means Degenerate(value), NaN means Uniform01."""

    values: np.ndarray

    @classmethod
    def degenerate(cls, theta: Iterable[float] | float, n: int | None = None) -> "ThresholdSpec":
        if np.isscalar(theta):
            if n is None:
                raise ValidationError("a scalar threshold needs the vertex count")
            arr = np.full(n, float(theta))
        else:
            arr = np.asarray(list(theta), dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise ValidationError("degenerate thresholds must be non-negative numbers")
        return cls(arr)

    @classmethod
    def uniform(cls, n: int) -> "ThresholdSpec":
        return cls(np.full(n, np.nan))

    @property
    def n_vertices(self) -> int:
        return len(self.values)

    @property
    def uniform_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def is_deterministic(self) -> bool:
        return not self.uniform_mask.any()

    @property
    def is_uniform(self) -> bool:
        return bool(self.uniform_mask.all())

    def realize(self, rng: np.random.Generator | None, reps: int) -> np.ndarray:
        """(N, reps) realized thresholds. Uniform draws land in (0, 1]."""
        out = np.repeat(self.values[:, None], reps, axis=1)
        mask = self.uniform_mask
        if mask.any():
            # 1 - U keeps draws in (0, 1], matching the (a_i, a_{i+1}] buckets
            out[mask] = 1.0 - rng.random((int(mask.sum()), reps))
        return out


@dataclass
class CascadeInstance:
    graph: Network
    influence: InfluenceSpec
    thresholds: ThresholdSpec
    k: int = 0

    def __post_init__(self):
        self.influence.check(self.graph)
        if self.thresholds.n_vertices != self.graph.n_vertices:
            raise ValidationError("threshold count differs from vertex count")
        if not 0 <= self.k <= self.graph.n_vertices:
            raise ValidationError("budget k must lie in 0..N")

    @property
    def n_vertices(self) -> int:
        return self.graph.n_vertices


@dataclass(frozen=True)
class SigmaEstimate:
    mean: float
    stderr: float
    replications: int


@dataclass
class CascadeResult:
    infected: frozenset
    rounds: list[list[int]]

    @property
    def size(self) -> int:
        return len(self.infected)


def _effective(theta: np.ndarray) -> np.ndarray:
    return theta - TIE_TOL * np.maximum(1.0, np.abs(np.where(np.isfinite(theta), theta, 0.0)))


def propagate(
    incoming: sparse.csr_matrix,
    influence: InfluenceSpec,
    theta: np.ndarray,
    seeded: np.ndarray,
    record_rounds: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Run R cascades at once.

    ``theta`` and ``seeded`` are (N, R). Returns the final infected mask and,
    if asked, the round in which each vertex fired (0 for seeds, -1 never).
    """
    infected = seeded.astype(bool).copy()
    n, reps = infected.shape
    limit = _effective(theta)
    # seeds are few per column, so a sparse product beats a dense sweep
    totals = (incoming @ sparse.csr_matrix(infected, dtype=float)).toarray()
    rounds = np.where(infected, 0, -1) if record_rounds else None
    # first round is a dense sweep; later rounds only revisit entries next to fresh infections
    rows, cols = np.nonzero(~infected & (influence.apply(totals) >= limit))
    r = 0
    while len(rows):
        r += 1
        infected[rows, cols] = True
        if record_rounds:
            rounds[rows, cols] = r
        fresh = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, reps))
        touched = (incoming @ fresh).tocoo()
        tr, tc = touched.row, touched.col
        totals[tr, tc] += touched.data
        keep = ~infected[tr, tc]
        tr, tc = tr[keep], tc[keep]
        fire = influence.apply(totals[tr, tc]) >= limit[tr, tc]
        rows, cols = tr[fire], tc[fire]
    return infected, rounds


def _seed_mask(n: int, seeds: Iterable[int], reps: int = 1) -> np.ndarray:
    mask = np.zeros((n, reps), dtype=bool)
    for s in seeds:
        if not 0 <= int(s) < n:
            raise ValidationError(f"seed {s} outside 0..{n - 1}")
        mask[int(s), :] = True
    return mask


def run_cascade(instance: CascadeInstance, thresholds: Sequence[float], seeds: Iterable[int]) -> CascadeResult:
    theta = np.asarray(thresholds, dtype=float).reshape(-1, 1)
    if len(theta) != instance.n_vertices:
        raise ValidationError("need one realized threshold per vertex")
    seeds = sorted(set(int(s) for s in seeds))
    infected, rounds = propagate(
        instance.graph.incoming, instance.influence, theta, _seed_mask(instance.n_vertices, seeds), True
    )
    rounds = rounds[:, 0]
    trace = [sorted(np.flatnonzero(rounds == r).tolist()) for r in range(int(rounds.max()) + 1)]
    return CascadeResult(frozenset(np.flatnonzero(infected[:, 0]).tolist()), trace)


def _summarize(sizes: np.ndarray) -> SigmaEstimate:
    reps = len(sizes)
    mean = float(sizes.mean())
    stderr = float(sizes.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return SigmaEstimate(mean, stderr, reps)


def sample_sizes(
    instance: CascadeInstance, seeds: Iterable[int], replications: int, seed: int, threads: int | None = None, tag: int = 0x51
) -> np.ndarray:
    """Infected-set size for each replication, in replication order."""
    if replications < 1:
        raise ValidationError("replications must be positive")
    seeds = sorted(set(int(s) for s in seeds))
    n = instance.n_vertices
    if instance.thresholds.is_deterministic:
        infected, _ = propagate(
            instance.graph.incoming, instance.influence, instance.thresholds.values[:, None], _seed_mask(n, seeds)
        )
        return np.full(replications, float(infected.sum()))
    sizes = chunk_sizes(replications)

    def work(c: int) -> np.ndarray:
        theta = instance.thresholds.realize(stream(seed, tag, c), sizes[c])
        infected, _ = propagate(instance.graph.incoming, instance.influence, theta, _seed_mask(n, seeds, sizes[c]))
        return infected.sum(axis=0).astype(float)

    return np.concatenate(ordered_map(work, range(len(sizes)), threads))


def estimate_sigma(
    instance: CascadeInstance, seeds: Iterable[int], replications: int, seed: int, threads: int | None = None
) -> SigmaEstimate:
    return _summarize(sample_sizes(instance, seeds, replications, seed, threads))


def _bucket_levels(a: ASequence) -> tuple[np.ndarray, np.ndarray]:
    """Representative thresholds and probabilities of the positive-mass buckets.

    Bucket (a_i, a_{i+1}] is represented by its right end; the leftover mass
    above p* can never be reached and is represented by +inf.
    """
    vals = a.table()
    reps, probs = [], []
    for lo, hi in zip(vals, vals[1:]):
        if hi > lo:
            reps.append(hi)
            probs.append(hi - lo)
    if a.p_star < 1.0:
        reps.append(np.inf)
        probs.append(1.0 - a.p_star)
    return np.array(reps), np.array(probs)


def exact_infection_probabilities(
    instance: CascadeInstance, seeds: Iterable[int], limit: int = 10, batch: int = 1 << 15
) -> np.ndarray:
    """Per-vertex infection probability, summed over every bucket assignment of the free vertices."""
    if instance.influence.variant != SYMMETRIC or not instance.thresholds.is_uniform:
        raise SpecMismatch("exact evaluation needs symmetric influence and uniform thresholds")
    n = instance.n_vertices
    if n > limit:
        raise TooLarge(f"N={n} exceeds the exact-evaluation limit {limit}")
    seeds = sorted(set(int(s) for s in seeds))
    free = [v for v in range(n) if v not in set(seeds)]
    out = np.zeros(n)
    out[seeds] = 1.0
    if not free:
        return out
    levels, probs = _bucket_levels(instance.influence.a)
    base = len(levels)
    total = base ** len(free)
    incoming = instance.graph.incoming
    for start in range(0, total, batch):
        idx = np.arange(start, min(total, start + batch))
        digits = np.empty((len(free), len(idx)), dtype=np.int64)
        rest = idx.copy()
        for j in range(len(free)):
            digits[j] = rest % base
            rest //= base
        theta = np.zeros((n, len(idx)))
        theta[free] = levels[digits]
        weight = np.prod(probs[digits], axis=0)
        infected, _ = propagate(incoming, instance.influence, theta, _seed_mask(n, seeds, len(idx)))
        out[free] += infected[free].astype(float) @ weight
    return out


def exact_sigma_bucket(instance: CascadeInstance, seeds: Iterable[int], limit: int = 10, batch: int = 1 << 15) -> float:
    return float(exact_infection_probabilities(instance, seeds, limit, batch).sum())


def estimate_sigma_pre_sampling(
    tree: HierarchyTree,
    influence: InfluenceSpec,
    thresholds: ThresholdSpec,
    seeds: Iterable[int],
    replications: int,
    seed: int,
    threads: int | None = None,
) -> SigmaEstimate:
    if replications < 1:
        raise ValidationError("replications must be positive")
    if influence.variant == LINEAR:
        raise SpecMismatch("sampled graphs are unweighted; use counting or symmetric influence")
    if thresholds.n_vertices != tree.n_vertices:
        raise ValidationError("threshold count differs from vertex count")
    seeds = sorted(set(int(s) for s in seeds))
    n = tree.n_vertices
    sizes = chunk_sizes(replications)

    def work(c: int) -> np.ndarray:
        rng = stream(seed, 0x53, c)
        out = np.empty(sizes[c])
        graph_seeds = rng.integers(0, 2**63 - 1, size=sizes[c])
        theta = thresholds.realize(rng, sizes[c])
        mask = _seed_mask(n, seeds)
        for j in range(sizes[c]):
            net = Network.from_sampled(sample(tree, int(graph_seeds[j])))
            infected, _ = propagate(net.incoming, influence, theta[:, j : j + 1], mask)
            out[j] = infected.sum()
        return out

    return _summarize(np.concatenate(ordered_map(work, range(len(sizes)), threads)))


def all_seed_sets(n: int, k: int) -> Iterable[tuple[int, ...]]:
    return itertools.combinations(range(n), k)
