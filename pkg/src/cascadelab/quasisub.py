"""2-quasi-submodular sequences and the separation map's fixed points.

A separation block feeds h inputs, each scaled down by alpha, into one
output vertex. If every input is infected with probability x, the output is
infected with probability y(x) = E[a_J], J ~ Binomial(h, alpha * x).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .aseq import ASequence
from .errors import DomainError, NoAdmissibleParams, NoCrossing, ValidationError

GRID_STEP = 1e-4
DEFAULT_TOL = 1e-9
H_CAP = 10_000


@dataclass(frozen=True)
class SeparationParams:
    h: int
    alpha: float
    delta: float

    def __post_init__(self):
        if self.h < 2:
            raise ValidationError("fan-in h must be at least 2")
        if not 0 < self.alpha <= 1:
            raise ValidationError("alpha must lie in (0, 1]")
        if not 0 < self.delta < 1:
            raise ValidationError("delta must lie in (0, 1)")

    @classmethod
    def from_h_delta(cls, h: int, delta: float, a: ASequence) -> "SeparationParams":
        """Derive alpha so that h * alpha * a_1 = 1 - delta holds exactly."""
        if a.a1 <= 0:
            raise ValidationError("a_1 must be positive to solve for alpha")
        return cls(int(h), (1.0 - delta) / (h * a.a1), float(delta))

    def check_constraint(self, a: ASequence) -> None:
        if a.a1 > 0 and abs(self.h * self.alpha * a.a1 - (1.0 - self.delta)) > 1e-12:
            raise ValidationError("parameters violate h * alpha * a_1 = 1 - delta")


@dataclass(frozen=True)
class FixedPointReport:
    p1: float
    p2: float
    gamma: float
    tol: float
    params: SeparationParams

    def to_dict(self) -> dict:
        return {
            "p1": self.p1,
            "p2": self.p2,
            "gamma": self.gamma,
            "h": self.params.h,
            "alpha": self.params.alpha,
            "delta": self.params.delta,
        }


def check_2qs(a: ASequence) -> bool:
    if not a.a2 > 2 * a.a1:
        return False
    vals = a.table(max(a.last_index, 2))
    diffs = np.diff(vals)[1:]  # a_i - a_{i-1} for i >= 2
    return bool(np.all(diffs[1:] <= diffs[:-1]))


def block_output(z: np.ndarray | float, h: int, a: ASequence) -> np.ndarray:
    """E[a_J] for J ~ Binomial(h, z), vectorized over z."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    # scipy's pmf overflows near the subnormal range, where the output is 0 anyway
    z = np.where(z < 1e-300, 0.0, z)
    top = min(a.last_index, h)
    out = np.zeros_like(z)
    for i in range(1, top):
        if a[i]:
            out += a[i] * stats.binom.pmf(i, h, z)
    # indices >= top all read the tail value (or i == h exactly when h <= last index)
    out += a[top] * stats.binom.sf(top - 1, h, z)
    return out


def separation_map(x: float, params: SeparationParams, a: ASequence) -> float:
    z = params.alpha * x
    if z > 1 + 1e-12 or x < 0:
        raise DomainError(f"alpha * x = {z} outside [0, 1]")
    return float(block_output(min(z, 1.0), params.h, a)[0])


def phi(gamma: float | np.ndarray, a: ASequence):
    g = np.asarray(gamma, dtype=float)
    e = np.exp(-g)
    return a.a2 * (1 - e - g * e) - a.a1 * (g - g * e)


def admissible_gamma(a: ASequence, tol: float = DEFAULT_TOL) -> float:
    """Right end of the region where phi is positive, approached from inside.

    Returns a gamma with phi(gamma) > 0 within ``tol`` of the boundary, or 0
    when phi has no positive region (a_2 <= 2 a_1).
    """
    if a.a1 <= 0:
        return math.inf
    if a.a2 <= 2 * a.a1:
        return 0.0
    upper = 2 * a.a2 / a.a1 + 2
    grid = np.linspace(0, upper, 20001)[1:]
    vals = phi(grid, a)
    neg = np.flatnonzero(vals <= 0)
    pos = np.flatnonzero(vals > 0)
    if len(pos) == 0 or len(neg) == 0:
        return 0.0
    first_neg = neg[neg > pos[0]][0]
    lo, hi = grid[first_neg - 1], grid[first_neg]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi(mid, a) > 0:
            lo = mid
        else:
            hi = mid
    return float(lo)


def _crossings(params: SeparationParams, a: ASequence, step: float = GRID_STEP) -> tuple[np.ndarray, np.ndarray]:
    x_max = min(1.0, 1.0 / params.alpha)
    xs = np.arange(1, int(math.floor(x_max / step)) + 1) * step
    if xs[-1] < x_max:
        xs = np.append(xs, x_max)
    d = block_output(params.alpha * xs, params.h, a) - xs
    return xs, d


def find_fixed_points(params: SeparationParams, a: ASequence, tol: float = DEFAULT_TOL) -> FixedPointReport:
    if a.a1 <= 0:
        raise ValidationError("fixed-point analysis needs a_1 > 0")
    xs, d = _crossings(params, a)
    sign = np.sign(d)
    changes = np.flatnonzero(sign[:-1] != sign[1:])
    if len(changes) < 2 or sign[0] >= 0:
        raise NoCrossing(f"map has no pair of interior fixed points for h={params.h}, alpha={params.alpha:.6g}")
    if len(changes) > 2 and not _pattern_ok(sign):
        raise NoCrossing("map crosses the diagonal more than twice")

    def g(x):
        return separation_map(x, params, a) - x

    i1, i2 = changes[0], changes[-1]
    p1 = optimize.bisect(g, xs[i1], xs[i1 + 1], xtol=tol)
    p2 = optimize.bisect(g, xs[i2], xs[i2 + 1], xtol=tol)
    if not 0 < p1 < p2 <= a.p_star + tol:
        raise NoCrossing("fixed points out of order")
    return FixedPointReport(float(p1), float(p2), admissible_gamma(a, tol), tol, params)


def _pattern_ok(sign: np.ndarray) -> bool:
    # zeros on the grid are tolerated; otherwise the runs must read - + -
    runs = [s for s in sign if s != 0]
    compact = [runs[0]] + [s for prev, s in zip(runs, runs[1:]) if s != prev]
    return compact == [-1, 1, -1]


def sign_pattern(params: SeparationParams, a: ASequence, report: FixedPointReport, step: float = 1e-3) -> bool:
    """Grid check that y - x is negative, positive, negative around p1 and p2."""
    x_max = min(1.0, 1.0 / params.alpha)
    xs = np.arange(step, x_max + 1e-12, step)
    d = block_output(params.alpha * xs, params.h, a) - xs
    slack = 10 * report.tol
    below = xs < report.p1 - slack
    middle = (xs > report.p1 + slack) & (xs < report.p2 - slack)
    above = xs > report.p2 + slack
    return bool(np.all(d[below] < 0) and np.all(d[middle] > 0) and np.all(d[above] < 0))


def choose_params(a: ASequence, delta: float, h_cap: int = H_CAP, tol: float = DEFAULT_TOL) -> SeparationParams:
    if a.a1 <= 0:
        raise ValidationError("a_1 = 0 leaves h * alpha * a_1 = 1 - delta unsatisfiable")
    if not 0 < delta < 0.5:
        raise ValidationError("delta must lie in (0, 0.5)")
    for h in range(2, h_cap + 1):
        if (1.0 - delta) / (h * a.a1) > a.p_star:
            continue
        params = SeparationParams.from_h_delta(h, delta, a)
        try:
            find_fixed_points(params, a, tol)
        except NoCrossing:
            continue
        return params
    raise NoAdmissibleParams(f"no fan-in up to {h_cap} gives two fixed points")


def iterate_map(x0: float, params: SeparationParams, a: ASequence, times: int) -> float:
    x = x0
    for _ in range(times):
        x = separation_map(x, params, a)
    return x


def report_json(report: FixedPointReport) -> str:
    return json.dumps(report.to_dict(), indent=1)
