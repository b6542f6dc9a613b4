"""Iterated local search over connected k-partitions with a pluggable cost oracle."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .partition import InstanceConfig, Solution, initial_solution, validate_solution
from .region import is_connected

P_RM = 0.015
IMPROVEMENT_TOL = 1e-9


@dataclass(frozen=True)
class Move:
    kind: str            # "relocate" or "swap"
    u: int
    source: int          # district of u before the move
    target: int          # district u ends up in
    v: int | None = None  # swap partner, moving target -> source
    delta: float | None = None

    def with_delta(self, delta: float) -> "Move":
        return Move(self.kind, self.u, self.source, self.target, self.v, delta)


class CostCache:
    """Oracle costs keyed by district member set."""

    def __init__(self, oracle):
        self.oracle = oracle
        self.table: dict[frozenset, float] = {}
        self.calls = 0

    def get_many(self, districts: Sequence[frozenset]) -> list[float]:
        missing = list(dict.fromkeys(d for d in districts if d not in self.table))
        if missing:
            self.calls += len(missing)
            for d, c in zip(missing, np.asarray(self.oracle.predict_many(missing), dtype=float)):
                self.table[d] = float(c)
        return [self.table[d] for d in districts]

    def total(self, solution: Solution) -> float:
        return float(sum(self.get_many(solution.districts())))


class _State:
    """Mutable partition: per-district member sets plus the unit -> district map."""

    def __init__(self, solution: Solution):
        self.assign = list(solution.assignment)
        self.members = [set(d) for d in solution.districts()]
        self.k = solution.k

    def solution(self, meta=None) -> Solution:
        return Solution(list(self.assign), self.k, dict(meta or {}))

    def apply(self, m: Move) -> None:
        self.members[m.source].discard(m.u)
        self.members[m.target].add(m.u)
        self.assign[m.u] = m.target
        if m.v is not None:
            self.members[m.target].discard(m.v)
            self.members[m.source].add(m.v)
            self.assign[m.v] = m.source

    def revert(self, m: Move) -> None:
        self.apply(inverse(m))

    def after(self, m: Move) -> tuple[frozenset, frozenset]:
        src, tgt = set(self.members[m.source]), set(self.members[m.target])
        src.discard(m.u)
        tgt.add(m.u)
        if m.v is not None:
            tgt.discard(m.v)
            src.add(m.v)
        return frozenset(src), frozenset(tgt)


def inverse(m: Move) -> Move:
    if m.kind == "swap":
        # after the swap v sits in the source district and u in the target
        return Move("swap", m.v, m.source, m.target, m.u, None if m.delta is None else -m.delta)
    return Move("relocate", m.u, m.target, m.source, None, None if m.delta is None else -m.delta)


def apply_move(solution: Solution, m: Move) -> Solution:
    st = _State(solution)
    st.apply(m)
    return st.solution(solution.meta)


def _border(members_i: set, members_j: set, neighbors) -> set[int]:
    return {u for u in members_i if any(w in members_j for w in neighbors[u])}


def border(config: InstanceConfig, solution: Solution, i: int, j: int) -> set[int]:
    """Units of district i with at least one neighbour in district j."""
    if i == j:
        raise ValueError("border needs two different districts")
    d = solution.districts()
    return _border(set(d[i]), set(d[j]), config.region.neighbors)


def _pair_moves(st: _State, i: int, j: int, config: InstanceConfig) -> list[Move]:
    nb = config.region.neighbors
    mi, mj = st.members[i], st.members[j]
    bij, bji = sorted(_border(mi, mj, nb)), sorted(_border(mj, mi, nb))
    moves = []
    if len(mi) > config.n_lo and len(mj) < config.n_hi:
        moves += [Move("relocate", u, i, j) for u in bij]
    if len(mj) > config.n_lo and len(mi) < config.n_hi:
        moves += [Move("relocate", v, j, i) for v in bji]
    moves += [Move("swap", u, i, j, v) for u in bij for v in bji]
    out = []
    for m in moves:
        src, tgt = st.after(m)
        if is_connected(src, nb) and is_connected(tgt, nb):
            out.append(m)
    return out


def feasible_moves(config: InstanceConfig, solution: Solution, i: int, j: int) -> list[Move]:
    """All size- and connectivity-preserving Relocate/Swap moves between districts i and j."""
    return _pair_moves(_State(solution), i, j, config)


def _connected_pairs(st: _State, neighbors) -> list[tuple[int, int]]:
    pairs = set()
    for u, du in enumerate(st.assign):
        for w in neighbors[u]:
            dw = st.assign[w]
            if du < dw:
                pairs.add((du, dw))
    return sorted(pairs)


def _move_valid(st: _State, m: Move, config: InstanceConfig) -> bool:
    """Re-check a move against the current state (it may have gone stale)."""
    nb = config.region.neighbors
    if st.assign[m.u] != m.source or (m.v is not None and st.assign[m.v] != m.target):
        return False
    if not any(st.assign[w] == m.target for w in nb[m.u]):
        return False
    if m.v is not None and not any(st.assign[w] == m.source for w in nb[m.v]):
        return False
    if m.v is None and not (len(st.members[m.source]) > config.n_lo and len(st.members[m.target]) < config.n_hi):
        return False
    src, tgt = st.after(m)
    return is_connected(src, nb) and is_connected(tgt, nb)


def _descend(st: _State, config: InstanceConfig, cache: CostCache, rng: np.random.Generator,
             deadline: float | None = None, stats: dict | None = None) -> None:
    nb = config.region.neighbors
    improved = True
    while improved:
        improved = False
        pairs = _connected_pairs(st, nb)
        for p in rng.permutation(len(pairs)):
            i, j = pairs[p]
            moves = _pair_moves(st, i, j, config)
            if not moves:
                continue
            before = cache.get_many([frozenset(st.members[i]), frozenset(st.members[j])])
            base = before[0] + before[1]
            after = [st.after(m) for m in moves]
            costs = cache.get_many([d for pair in after for d in pair])
            best, best_delta = None, -IMPROVEMENT_TOL * max(1.0, abs(base))
            for idx, m in enumerate(moves):
                delta = costs[2 * idx] + costs[2 * idx + 1] - base
                if delta < best_delta:
                    best, best_delta = m, delta
            if best is not None:
                st.apply(best.with_delta(best_delta))
                improved = True
                if stats is not None:
                    stats["moves"] = stats.get("moves", 0) + 1
        # a started sweep is always finished so the result is a local optimum
        if deadline is not None and time.perf_counter() > deadline and not improved:
            break


def local_search(config: InstanceConfig, solution: Solution, oracle, rng: np.random.Generator,
                 cache: CostCache | None = None) -> Solution:
    """Best-move descent per district pair until a full sweep finds no improvement."""
    cache = cache or CostCache(oracle)
    st = _State(solution)
    _descend(st, config, cache, rng)
    return st.solution(solution.meta)


def _shake(st: _State, config: InstanceConfig, p_rm: float, rng: np.random.Generator,
           stats: dict | None) -> None:
    pairs = _connected_pairs(st, config.region.neighbors)
    for p in rng.permutation(len(pairs)):
        i, j = pairs[p]
        for m in _pair_moves(st, i, j, config):
            if not _move_valid(st, m, config):
                continue
            if stats is not None:
                stats["considered"] = stats.get("considered", 0) + 1
            if rng.random() < p_rm:
                st.apply(m)
                if stats is not None:
                    stats["applied"] = stats.get("applied", 0) + 1


def perturb(config: InstanceConfig, solution: Solution, p_rm: float = P_RM,
            rng: np.random.Generator | None = None, stats: dict | None = None) -> Solution:
    """Apply each currently feasible move with probability ``p_rm``, ignoring cost.

    ``stats`` (optional) receives counts of moves considered and applied.
    """
    if not 0.0 <= p_rm < 1.0:
        raise ValueError("p_rm must lie in [0, 1)")
    rng = rng if rng is not None else np.random.default_rng()
    st = _State(solution)
    _shake(st, config, p_rm, rng, stats)
    return st.solution(solution.meta)


@dataclass
class SearchLog:
    rows: list[tuple[int, float, float]] = field(default_factory=list)  # (iter, best cost, seconds)
    iterations: int = 0
    oracle_calls: int = 0
    initial_cost: float = float("nan")

    def to_csv(self) -> str:
        lines = ["iter,oracle_cost,seconds"]
        lines += [f"{i},{c:.10g},{s:.3f}" for i, c, s in self.rows]
        return "\n".join(lines) + "\n"


def solve_ils(config: InstanceConfig, oracle, seed: int = 0, budget_seconds: float | None = None,
              budget_iters: int | None = None, p_rm: float = P_RM, initial: Solution | None = None,
              cache: CostCache | None = None) -> tuple[Solution, SearchLog]:
    """Construct, descend, then alternate perturbation and descent; keep the best.

    Stops after ``budget_iters`` perturbation rounds or ``budget_seconds`` of
    wall time, whichever comes first. With only an iteration budget the run
    is fully determined by ``seed``.
    """
    if budget_seconds is None and budget_iters is None:
        budget_seconds = config.time_budget
    start = time.perf_counter()
    deadline = start + budget_seconds if budget_seconds is not None else None
    rng = np.random.default_rng(seed)
    cache = cache or CostCache(oracle)
    sol = initial if initial is not None else initial_solution(config, seed=seed)
    log = SearchLog()
    log.initial_cost = cache.total(sol)
    st = _State(sol)
    _descend(st, config, cache, rng)
    current = st.solution()
    best, best_cost = current, cache.total(current)
    log.rows.append((0, best_cost, time.perf_counter() - start))
    it = 0
    while True:
        if budget_iters is not None and it >= budget_iters:
            break
        if deadline is not None and time.perf_counter() >= deadline:
            break
        it += 1
        _shake(st, config, p_rm, rng, None)
        _descend(st, config, cache, rng, deadline)
        cost = cache.total(st.solution())
        if cost < best_cost:
            best, best_cost = st.solution(), cost
        log.rows.append((it, best_cost, time.perf_counter() - start))
    log.iterations = it
    log.oracle_calls = cache.calls
    best.meta = {"seed": seed, "p_rm": p_rm, "iterations": it, "oracle_cost": best_cost,
                 "oracle": getattr(oracle, "kind", type(oracle).__name__)}
    problems = validate_solution(best, config)
    if problems:  # defensive: moves preserve every invariant
        raise RuntimeError("search produced an infeasible solution: " + "; ".join(problems))
    return best, log
