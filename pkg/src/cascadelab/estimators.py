"""Estimator-style front ends: configure in ``__init__``, solve in ``fit``, read ``*_`` attributes.

The budget lives on the estimator, so one configured seeder can be cloned
and fitted against many instances.
"""

from __future__ import annotations

import dataclasses

from sklearn.base import BaseEstimator

from .cascade import CascadeInstance
from .dp_oneway import OneWayInstance, brute_force_oneway, dp_solve, reconstruct, verify_plan
from .hierarchy import HierarchyTree
from .optimize import brute_force, greedy


class OneWayDPSeeder(BaseEstimator):
    """Optimal seeds for one-way hierarchical instances via the tree DP.

    ``fit(tree, thresholds)`` sets ``seeds_``, ``signs_``, ``nu_`` (the DP's
    guaranteed count) and ``achieved_`` (the count from replaying the plan).
    """

    def __init__(self, k: int = 1, cascade_aware: bool = False):
        self.k = k
        self.cascade_aware = cascade_aware

    def fit(self, tree: HierarchyTree, thresholds=None):
        inst = OneWayInstance(tree, thresholds, self.k)
        self.table_ = dp_solve(inst, self.cascade_aware)
        self.plan_ = reconstruct(self.table_, self.table_.answer)
        self.seeds_ = self.plan_.seeds
        self.signs_ = self.plan_.signs
        self.nu_ = self.plan_.nu
        self.achieved_ = verify_plan(inst, self.plan_)
        return self


class OneWayBruteForceSeeder(BaseEstimator):
    def __init__(self, k: int = 1, cap: int = 1_000_000):
        self.k = k
        self.cap = cap

    def fit(self, tree: HierarchyTree, thresholds=None):
        best, plan = brute_force_oneway(OneWayInstance(tree, thresholds, self.k), self.cap)
        self.seeds_, self.signs_, self.nu_ = plan.seeds, plan.signs, best
        return self


def _with_budget(instance: CascadeInstance, k: int) -> CascadeInstance:
    return dataclasses.replace(instance, k=k)


class GreedySeeder(BaseEstimator):
    """Lazy greedy under common random numbers (or exact bucket evaluation)."""

    def __init__(self, k: int = 1, replications: int = 1000, seed: int = 0, exact: bool = False, lazy: bool = True, threads=None):
        self.k = k
        self.replications = replications
        self.seed = seed
        self.exact = exact
        self.lazy = lazy
        self.threads = threads

    def fit(self, instance: CascadeInstance, y=None):
        self.trace_ = greedy(
            _with_budget(instance, self.k),
            self.replications,
            self.seed,
            exact=self.exact,
            lazy=self.lazy,
            threads=self.threads,
        )
        self.seeds_ = self.trace_.seeds
        self.sigma_ = self.trace_.sigma
        return self


class BruteForceSeeder(BaseEstimator):
    def __init__(self, k: int = 1, exact: bool = True, replications: int = 1000, seed: int = 0, cap: int = 200_000, threads=None):
        self.k = k
        self.exact = exact
        self.replications = replications
        self.seed = seed
        self.cap = cap
        self.threads = threads

    def fit(self, instance: CascadeInstance, y=None):
        best, sigma = brute_force(
            _with_budget(instance, self.k), self.exact, self.replications, self.seed, self.cap, self.threads
        )
        self.seeds_ = list(best)
        self.sigma_ = sigma
        return self
