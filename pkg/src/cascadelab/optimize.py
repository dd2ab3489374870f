"""Seed-set optimizers for general cascade instances: lazy greedy and exhaustive search."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cascade import CascadeInstance, exact_sigma_bucket, sample_sizes
from .errors import TooLarge
from .rng import ordered_map, stream

BRUTE_CAP = 200_000
GAIN_DIGITS = 10


@dataclass
class GreedyStep:
    step: int
    vertex: int
    marginal_mean: float
    marginal_stderr: float
    cumulative_mean: float


@dataclass
class GreedyTrace:
    steps: list[GreedyStep] = field(default_factory=list)
    evaluations: int = 0

    @property
    def seeds(self) -> list[int]:
        return [s.vertex for s in self.steps]

    @property
    def sigma(self) -> float:
        return self.steps[-1].cumulative_mean if self.steps else 0.0

    def rows(self) -> list[dict]:
        return [
            {
                "step": s.step,
                "vertex": s.vertex,
                "marginal_mean": s.marginal_mean,
                "marginal_stderr": s.marginal_stderr,
                "cumulative_mean": s.cumulative_mean,
            }
            for s in self.steps
        ]


COLUMNS = ["step", "vertex", "marginal_mean", "marginal_stderr", "cumulative_mean"]


def _step_seed(seed: int, step: int) -> int:
    return int(stream(seed, 0x6E, step).integers(0, 2**63 - 1))


class _Evaluator:
    """Marginal gains for one greedy step, all on the same random draws."""

    def __init__(self, instance: CascadeInstance, replications: int, seed: int, exact: bool, threads: int | None):
        self.instance = instance
        self.replications = replications
        self.seed = seed
        self.exact = exact
        self.threads = threads
        self.calls = 0

    def base(self, chosen: Sequence[int], step: int):
        if self.exact:
            return exact_sigma_bucket(self.instance, chosen, limit=self.instance.n_vertices)
        return sample_sizes(self.instance, chosen, self.replications, _step_seed(self.seed, step), threads=1)

    def gains(self, chosen: Sequence[int], base, candidates: Sequence[int], step: int) -> list[tuple[float, float]]:
        def one(i: int) -> tuple[float, float]:
            with_v = list(chosen) + [candidates[i]]
            if self.exact:
                return exact_sigma_bucket(self.instance, with_v, limit=self.instance.n_vertices) - base, 0.0
            diff = sample_sizes(self.instance, with_v, self.replications, _step_seed(self.seed, step), threads=1) - base
            se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
            return float(diff.mean()), se

        self.calls += len(candidates)
        return ordered_map(one, range(len(candidates)), self.threads)

    @staticmethod
    def mean(base) -> float:
        return float(base) if np.isscalar(base) else float(np.mean(base))


def _key(gain: float) -> float:
    # quantized so float noise cannot reorder equal gains
    return -round(gain, GAIN_DIGITS)


def greedy(
    instance: CascadeInstance,
    replications: int = 1000,
    seed: int = 0,
    *,
    exact: bool = False,
    lazy: bool = True,
    threads: int | None = None,
) -> GreedyTrace:
    """Pick ``instance.k`` seeds, each maximizing the estimated marginal gain.

    Ties go to the smallest vertex id. All candidates within a step share one
    set of threshold draws. The lazy variant keeps stale gains as upper
    bounds and only refreshes the current top of the queue.
    """
    ev = _Evaluator(instance, replications, seed, exact, threads)
    trace = GreedyTrace()
    chosen: list[int] = []
    n = instance.n_vertices
    if instance.k == 0:
        return trace
    base = ev.base(chosen, 0)
    first = ev.gains(chosen, base, list(range(n)), 0)
    heap = [(_key(g), v, 0, g, se) for v, (g, se) in enumerate(first)]
    heapq.heapify(heap)
    for step in range(instance.k):
        if step:
            base = ev.base(chosen, step)
        if lazy:
            while True:
                key, v, stamp, g, se = heapq.heappop(heap)
                if stamp == step:
                    break
                (g, se), = ev.gains(chosen, base, [v], step)
                heapq.heappush(heap, (_key(g), v, step, g, se))
        else:
            rest = [v for v in range(n) if v not in chosen]
            scored = ev.gains(chosen, base, rest, step) if step else [first[v] for v in rest]
            best = min(range(len(rest)), key=lambda i: (_key(scored[i][0]), rest[i]))
            v, (g, se) = rest[best], scored[best]
        chosen.append(v)
        trace.steps.append(GreedyStep(step, v, g, se, ev.mean(base) + g))
    trace.evaluations = ev.calls
    return trace


def brute_force(
    instance: CascadeInstance,
    exact: bool = True,
    replications: int = 1000,
    seed: int = 0,
    cap: int = BRUTE_CAP,
    threads: int | None = None,
) -> tuple[tuple[int, ...], float]:
    """Best size-k seed set by exhaustive search; ties go to the lexicographically first set."""
    n, k = instance.n_vertices, instance.k
    total = math.comb(n, k)
    if total > cap:
        raise TooLarge(f"C({n}, {k}) = {total} exceeds the cap {cap}")
    if k == 0:
        return (), 0.0
    sets = list(itertools.combinations(range(n), k))
    if exact:
        score: Callable[[int], float] = lambda i: exact_sigma_bucket(instance, sets[i], limit=n)
    else:
        score = lambda i: float(sample_sizes(instance, sets[i], replications, seed, threads=1).mean())
    values = ordered_map(score, range(len(sets)), threads)
    best = min(range(len(sets)), key=lambda i: (_key(values[i]), sets[i]))
    return sets[best], float(values[best])
