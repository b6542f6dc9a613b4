"""Tour lengths for a depot plus customer points.

``tsp_cost`` runs nearest-neighbour construction followed by first-improvement
2-opt and Or-opt until neither finds an improving move. ``tsp_exact`` is an
exhaustive depth-first enumeration used as a test oracle on tiny inputs.
Kernels are compiled with numba; node 0 is always the depot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

EXACT_LIMIT = 10
NEIGHBOURS = 16
NEIGHBOUR_THRESHOLD = 40
_EPS = 1e-10


class TSPError(ValueError):
    pass


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]  # customer indices in visiting order, depot implicit
    length: float


def _distance_matrix(depot, customers) -> np.ndarray:
    pts = np.vstack([np.asarray(depot, dtype=float).reshape(1, 2),
                     np.asarray(customers, dtype=float).reshape(-1, 2)])
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


@numba.njit(cache=True)
def _nearest_neighbour(D, rank):
    N = D.shape[0]
    tour = np.zeros(N, dtype=np.int64)
    used = np.zeros(N, dtype=np.bool_)
    used[0] = True
    cur = 0
    for k in range(1, N):
        best = -1
        bd = np.inf
        for c in range(1, N):
            if used[c]:
                continue
            d = D[cur, c]
            if d < bd or (d == bd and rank[c] < rank[best]):
                bd = d
                best = c
        tour[k] = best
        used[best] = True
        cur = best
    return tour


@numba.njit(cache=True)
def _reverse(tour, pos, lo, hi):
    while lo < hi:
        a = tour[lo]
        b = tour[hi]
        tour[lo] = b
        tour[hi] = a
        pos[b] = lo
        pos[a] = hi
        lo += 1
        hi -= 1


@numba.njit(cache=True)
def _two_opt_full(tour, pos, D):
    N = tour.shape[0]
    improved = False
    for i in range(N - 2):
        for j in range(i + 2, N):
            if i == 0 and j == N - 1:
                continue
            a = tour[i]
            b = tour[i + 1]
            c = tour[j]
            d = tour[(j + 1) % N]
            delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
            if delta < -1e-10:
                _reverse(tour, pos, i + 1, j)
                improved = True
    return improved


@numba.njit(cache=True)
def _two_opt_neighbours(tour, pos, D, nbrs):
    N = tour.shape[0]
    improved = False
    for i in range(N):
        a = tour[i]
        for k in range(nbrs.shape[1]):
            c = nbrs[a, k]
            pa = pos[a]
            pc = pos[c]
            lo = min(pa, pc)
            hi = max(pa, pc)
            if hi - lo < 2 or (lo == 0 and hi == N - 1):
                continue
            x = tour[lo]
            y = tour[lo + 1]
            z = tour[hi]
            w = tour[(hi + 1) % N]
            delta = D[x, z] + D[y, w] - D[x, y] - D[z, w]
            if delta < -1e-10:
                _reverse(tour, pos, lo + 1, hi)
                improved = True
    return improved


@numba.njit(cache=True)
def _or_opt(tour, pos, D):
    N = tour.shape[0]
    improved = False
    for L in range(1, 4):
        s = 1
        while s + L - 1 <= N - 1:
            e = s + L - 1
            p = tour[s - 1]
            first = tour[s]
            last = tour[e]
            nx = tour[(e + 1) % N]
            gain = D[p, first] + D[last, nx] - D[p, nx]
            best = -1e-10
            bj = -1
            brev = False
            for j in range(N):
                if j >= s - 1 and j <= e:
                    continue
                u = tour[j]
                v = tour[(j + 1) % N]
                add = D[u, first] + D[last, v] - D[u, v]
                if add - gain < best:
                    best = add - gain
                    bj = j
                    brev = False
                add = D[u, last] + D[first, v] - D[u, v]
                if add - gain < best:
                    best = add - gain
                    bj = j
                    brev = True
            if bj >= 0:
                seg = tour[s:e + 1].copy()
                if brev:
                    seg = seg[::-1].copy()
                rest = np.empty(N - L, dtype=np.int64)
                m = 0
                insert_at = -1
                for q in range(N):
                    if q >= s and q <= e:
                        continue
                    rest[m] = tour[q]
                    if q == bj:
                        insert_at = m
                    m += 1
                k = 0
                for q in range(insert_at + 1):
                    tour[k] = rest[q]
                    k += 1
                for q in range(L):
                    tour[k] = seg[q]
                    k += 1
                for q in range(insert_at + 1, N - L):
                    tour[k] = rest[q]
                    k += 1
                for q in range(N):
                    pos[tour[q]] = q
                improved = True
            s += 1
    return improved


@numba.njit(cache=True)
def _local_search(D, rank, nbrs, use_nbrs):
    tour = _nearest_neighbour(D, rank)
    N = tour.shape[0]
    pos = np.empty(N, dtype=np.int64)
    for q in range(N):
        pos[tour[q]] = q
    if N <= 3:
        return tour
    while True:
        if use_nbrs and _two_opt_neighbours(tour, pos, D, nbrs):
            continue
        if _two_opt_full(tour, pos, D):
            continue
        if _or_opt(tour, pos, D):
            continue
        break
    return tour


@numba.njit(cache=True)
def _cycle_length(tour, D):
    N = tour.shape[0]
    total = 0.0
    for q in range(N):
        total += D[tour[q], tour[(q + 1) % N]]
    return total


@numba.njit(cache=True)
def _exact(D):
    N = D.shape[0]
    n = N - 1
    best = np.inf
    best_path = np.zeros(n, dtype=np.int64)
    path = np.zeros(n, dtype=np.int64)
    used = np.zeros(N, dtype=np.bool_)
    partial = np.zeros(n + 1)
    cand = np.ones(n + 1, dtype=np.int64)
    depth = 0
    while depth >= 0:
        if cand[depth] > n:
            depth -= 1
            if depth >= 0:
                used[path[depth]] = False
            continue
        c = cand[depth]
        cand[depth] += 1
        if used[c]:
            continue
        prev = path[depth - 1] if depth > 0 else 0
        cost = partial[depth] + D[prev, c]
        if cost >= best:
            continue
        if depth == n - 1:
            # each cycle and its mirror image: keep the one ending on the larger index
            if n >= 2 and c < path[0]:
                continue
            total = cost + D[c, 0]
            if total < best:
                best = total
                best_path[:depth] = path[:depth]
                best_path[depth] = c
            continue
        path[depth] = c
        used[c] = True
        partial[depth + 1] = cost
        depth += 1
        cand[depth] = 1
    return best, best_path


def _nbr_table(D: np.ndarray) -> np.ndarray:
    k = min(NEIGHBOURS, D.shape[0] - 1)
    order = np.argsort(D + np.diag(np.full(D.shape[0], np.inf)), axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :k])


_EMPTY_NBRS = np.zeros((1, 1), dtype=np.int64)


def tsp_cost(depot, customers, seed: int = 0) -> Tour:
    """Heuristic tour through ``customers`` starting and ending at ``depot``."""
    customers = np.asarray(customers, dtype=float).reshape(-1, 2)
    n = len(customers)
    if n == 0:
        return Tour((), 0.0)
    D = _distance_matrix(depot, customers)
    rank = np.concatenate([[0], 1 + np.random.default_rng(seed).permutation(n)]).astype(np.int64)
    use_nbrs = n > NEIGHBOUR_THRESHOLD
    nbrs = _nbr_table(D) if use_nbrs else _EMPTY_NBRS
    tour = _local_search(D, rank, nbrs, use_nbrs)
    return Tour(tuple(int(c) - 1 for c in tour[1:]), float(_cycle_length(tour, D)))


def tsp_length(depot, customers, seed: int = 0) -> float:
    return tsp_cost(depot, customers, seed).length


def tsp_exact(depot, customers) -> Tour:
    """Optimal tour by exhaustive enumeration; refuses more than 10 customers."""
    customers = np.asarray(customers, dtype=float).reshape(-1, 2)
    n = len(customers)
    if n > EXACT_LIMIT:
        raise TSPError(f"tsp_exact is limited to {EXACT_LIMIT} customers, got {n}")
    if n == 0:
        return Tour((), 0.0)
    D = _distance_matrix(depot, customers)
    best, path = _exact(D)
    return Tour(tuple(int(c) - 1 for c in path), float(best))


def tour_length(depot, customers, order) -> float:
    """Length of depot -> customers[order...] -> depot."""
    pts = np.asarray(customers, dtype=float).reshape(-1, 2)
    if len(order) == 0:
        return 0.0
    seq = np.vstack([np.asarray(depot, dtype=float)[None], pts[list(order)], np.asarray(depot, dtype=float)[None]])
    return float(np.linalg.norm(np.diff(seq, axis=0), axis=1).sum())
