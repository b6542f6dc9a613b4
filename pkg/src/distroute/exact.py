"""Exact set-partitioning baseline over enumerated connected districts.

Small instances only: every connected district with size in bounds is listed,
priced by an oracle, and the cheapest cover by exactly k districts is found
by a memoised branch-and-bound on bitmasks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .partition import InstanceConfig, Solution, connected_sets
from .region import RegionModel


class ExactError(RuntimeError):
    pass


class _Ordered:
    """Stand-in generator that always picks the last extension vertex."""

    @staticmethod
    def integers(high):
        return high - 1


def enumerate_districts(region: RegionModel, n_lo: int, n_hi: int, cap: int | None = 200_000) -> list[frozenset]:
    """All connected unit sets with n_lo <= size <= n_hi, each listed once.

    Sets are generated from their smallest unit over units >= that root, so
    no district appears twice. Raises ExactError above ``cap`` districts.
    """
    out: list[frozenset] = []
    nb = region.neighbors
    for root in range(region.n):
        allowed = set(range(root, region.n))
        for d in connected_sets(root, allowed, nb, n_lo, n_hi, _Ordered()):
            out.append(d)
            if cap is not None and len(out) > cap:
                raise ExactError(f"more than {cap} candidate districts; instance too large for the exact baseline")
    out.sort(key=lambda d: (len(d), sorted(d)))
    return out


@dataclass
class ExactResult:
    value: float
    districts: list[frozenset]
    nodes: int
    candidates: int
    meta: dict = field(default_factory=dict)

    def solution(self, n: int) -> Solution:
        ordered = sorted(self.districts, key=lambda d: (len(d), min(d)))
        return Solution.from_districts(ordered, n)


def solve_set_partitioning(n: int, districts: Sequence[frozenset], costs: Sequence[float], k: int,
                           n_lo: int | None = None, n_hi: int | None = None) -> ExactResult:
    """Cheapest selection of exactly ``k`` districts covering units 0..n-1 once.

    Raises ExactError when no such cover exists.
    """
    if len(districts) != len(costs):
        raise ExactError("districts and costs differ in length")
    sizes = [len(d) for d in districts]
    n_lo = n_lo if n_lo is not None else (min(sizes) if sizes else 1)
    n_hi = n_hi if n_hi is not None else (max(sizes) if sizes else 1)
    masks = [sum(1 << u for u in d) for d in districts]
    by_low: list[list[tuple[float, int, int]]] = [[] for _ in range(n)]
    rate = np.full(n, math.inf)
    for idx, (d, mask, c) in enumerate(zip(districts, masks, costs)):
        if not d or max(d) >= n or min(d) < 0:
            raise ExactError(f"district {sorted(d)} has units outside 0..{n - 1}")
        by_low[min(d)].append((float(c), mask, idx))
        share = float(c) / len(d)
        for u in d:
            rate[u] = min(rate[u], share)
    for lst in by_low:
        lst.sort()
    if np.isinf(rate).any():
        missing = np.flatnonzero(np.isinf(rate)).tolist()
        raise ExactError(f"units {missing} are not covered by any candidate district")

    memo: dict[tuple[int, int], tuple[float, bool, int]] = {}
    nodes = [0]

    def bound(mask: int) -> float:
        total, u = 0.0, 0
        while mask:
            if mask & 1:
                total += rate[u]
            mask >>= 1
            u += 1
        return total

    def solve(mask: int, m: int, ub: float) -> float:
        if mask == 0:
            return 0.0 if m == 0 else math.inf
        r = bin(mask).count("1")
        if not m * n_lo <= r <= m * n_hi:
            return math.inf
        key = (mask, m)
        lb = 0.0
        hit = memo.get(key)
        if hit is not None:
            val, exact, _ = hit
            if exact:
                return val if val < ub else math.inf
            lb = val
        lb = max(lb, bound(mask))
        if lb >= ub:
            return math.inf
        nodes[0] += 1
        low = (mask & -mask).bit_length() - 1
        best, choice = math.inf, -1
        for c, dmask, idx in by_low[low]:
            if dmask & mask != dmask:
                continue
            cutoff = min(ub, best) - c
            if cutoff <= 0:
                break  # candidates are sorted by cost
            sub = solve(mask ^ dmask, m - 1, cutoff)
            if c + sub < best:
                best, choice = c + sub, idx
        if best < ub:
            memo[key] = (best, True, choice)
            return best
        memo[key] = (ub, False, -1)
        return math.inf

    full = (1 << n) - 1
    value = solve(full, k, math.inf)
    if math.isinf(value):
        raise ExactError(f"no partition into exactly {k} candidate districts exists")
    chosen, mask, m = [], full, k
    while mask:
        _, exact, idx = memo[(mask, m)]
        assert exact
        chosen.append(districts[idx])
        mask ^= masks[idx]
        m -= 1
    return ExactResult(value, chosen, nodes[0], len(districts))


def solve_exact(config: InstanceConfig, oracle, cap: int | None = 200_000) -> ExactResult:
    """Enumerate, price with ``oracle`` and solve one instance to optimality."""
    cands = enumerate_districts(config.region, config.n_lo, config.n_hi, cap=cap)
    costs = oracle.predict_many(cands)
    res = solve_set_partitioning(config.region.n, cands, costs, config.k, config.n_lo, config.n_hi)
    res.meta = {"oracle": getattr(oracle, "kind", type(oracle).__name__)}
    return res
