"""Ranked hypothesis generation: optimal assignment, Murty, k-shortest paths."""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

INF = math.inf


class InfeasibleAssignment(ValueError):
    pass


def _row_cost(C, cols) -> float:
    # summed in row order so every route reports bit-identical costs
    total = 0.0
    for r, c in enumerate(cols):
        total += C[r, c]
    return total


def hungarian(C) -> tuple[np.ndarray, float]:
    """Minimum-cost assignment of every row to a distinct column.

    Returns ``(cols, cost)`` with ``cols[i]`` the column of row ``i``.
    Raises :class:`InfeasibleAssignment` when some row cannot be assigned at
    finite cost.
    """
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    if n == 0:
        return np.zeros(0, dtype=int), 0.0
    if n > m:
        raise InfeasibleAssignment(f"{n} rows cannot be assigned to {m} columns")
    try:
        rows, cols = linear_sum_assignment(C)
    except ValueError as exc:
        raise InfeasibleAssignment(str(exc)) from None
    out = np.empty(n, dtype=int)
    out[rows] = cols
    cost = _row_cost(C, out)
    if not math.isfinite(cost):
        raise InfeasibleAssignment("no finite-cost assignment")
    return out, cost


def _solve_node(C, include, exclude):
    """Best assignment with some (row, col) pairs forced and others forbidden."""
    n, m = C.shape
    sub = C.copy()
    for r, c in exclude:
        sub[r, c] = INF
    cols = np.full(n, -1, dtype=int)
    fixed_rows, fixed_cols = set(), set()
    for r, c in include:
        cols[r] = c
        fixed_rows.add(r)
        fixed_cols.add(c)
    free_rows = [r for r in range(n) if r not in fixed_rows]
    free_cols = [c for c in range(m) if c not in fixed_cols]
    if free_rows:
        reduced = sub[np.ix_(free_rows, free_cols)]
        # drop columns nobody can use; keeps the solver fast on sparse matrices
        usable = np.isfinite(reduced).any(axis=0)
        reduced = reduced[:, usable]
        sol = reduced.argmin(axis=1) if reduced.shape[1] else None
        # distinct row minima are already optimal
        if sol is None or len(set(sol.tolist())) < len(sol) or not np.isfinite(reduced[np.arange(len(sol)), sol]).all():
            try:
                sol, _ = hungarian(reduced)
            except InfeasibleAssignment:
                return None
        col_map = np.asarray(free_cols)[usable]
        for r, c in zip(free_rows, sol):
            cols[r] = col_map[c]
    cost = _row_cost(C, cols)
    if not math.isfinite(cost):
        return None
    return tuple(int(c) for c in cols), cost


def murty_iter(C):
    """Lazily yield ``(cols, cost)`` of a rectangular problem in non-decreasing cost.

    Murty's partitioning: each popped solution spawns children that forbid
    one of its free assignments while fixing the ones before it.  Children
    wait in the queue under their parent's cost, a lower bound on their own,
    and are only solved when that bound reaches the top.  Unsolved nodes
    sort ahead of solved ones at equal keys, so ties still come out in
    column order.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if n == 0:
        yield (), 0.0
        return
    if n == 1:
        # a single row ranks by sorting its finite entries
        row = C[0]
        for c in np.argsort(row, kind="stable"):
            if not math.isfinite(row[c]):
                return
            yield (int(c),), float(row[c])
        return
    seq = itertools.count()
    heap = [(-INF, 0, next(seq), (), frozenset())]
    while heap:
        key, solved, tag, include, exclude = heapq.heappop(heap)
        if not solved:
            sol = _solve_node(C, include, exclude)
            if sol is not None:
                heapq.heappush(heap, (sol[1], 1, sol[0], include, exclude))
            continue
        cols = tag
        yield cols, key
        fixed = {r for r, _ in include}
        inc = list(include)
        for r in range(n):
            if r in fixed:
                continue
            heapq.heappush(heap, (key, 0, next(seq), tuple(inc), exclude | {(r, cols[r])}))
            inc.append((r, cols[r]))


def murty_matrix(C, n_best: int) -> list:
    """Murty's ranked assignments on a rectangular cost matrix (rows <= cols).

    Returns up to ``n_best`` pairs ``(cols, cost)`` in non-decreasing cost;
    equal costs come out in a deterministic order.
    """
    if n_best < 1:
        raise ValueError("n_best must be >= 1")
    return list(itertools.islice(murty_iter(C), n_best))


@dataclass(frozen=True)
class AssignCostMatrix:
    """Detection costs ``D`` (targets x groups) and per-target misdetection costs.

    The full matrix is ``[D | M]`` with ``M`` diagonal; the misdetection
    column of target ``i`` is ``n_groups + i``.
    """

    D: np.ndarray
    miss: np.ndarray

    @property
    def n_groups(self) -> int:
        return self.D.shape[1]

    def full(self) -> np.ndarray:
        n = self.D.shape[0]
        M = np.full((n, n), INF)
        M[np.arange(n), np.arange(n)] = self.miss
        return np.hstack([self.D, M])


def murty(C, n_best: int) -> list:
    """Ranked assignments.

    With an :class:`AssignCostMatrix`, each assignment is a tuple holding the
    group index per target, or ``-1`` for a misdetection.  A plain array is
    treated as a generic rectangular problem.
    """
    if n_best < 1:
        raise ValueError("n_best must be >= 1")
    return list(itertools.islice(murty_ranked(C), n_best))


def murty_ranked(C):
    """Generator form of :func:`murty`."""
    if not isinstance(C, AssignCostMatrix):
        yield from murty_iter(C)
        return
    G = C.n_groups
    for cols, cost in murty_iter(C.full()):
        yield tuple(c if c < G else -1 for c in cols), cost


def k_shortest_paths(C, K: int) -> list:
    """K cheapest row-wise column choices of an ``n x 2`` cost matrix.

    Each row of the layered graph picks column 0 (the target survives) or
    column 1 (it dies), so every top-to-bottom path is a survivor subset.
    Returns ``(subset, cost)`` pairs, subset as a sorted tuple of row
    indices that chose column 0, in non-decreasing cost; equal costs are
    ordered lexicographically on the column-choice vector.
    """
    C = np.asarray(C, dtype=float)
    if K < 1:
        raise ValueError("K must be >= 1")
    n = C.shape[0]
    if n == 0:
        return [((), 0.0)]
    if np.any(~np.isfinite(C).any(axis=1)):
        return []
    base = np.where(C[:, 0] <= C[:, 1], 0, 1)
    delta = np.abs(C[:, 0] - C[:, 1])
    flippable = [r for r in np.argsort(delta, kind="stable") if math.isfinite(delta[r])]
    d = [float(delta[r]) for r in flippable]

    # best-first enumeration of subset sums of the sorted non-negative deltas
    found = []
    heap = [(0.0, -1, ())]
    kth = None
    while heap:
        s, last, chosen = heapq.heappop(heap)
        if kth is not None and s > kth + 1e-9 * max(1.0, abs(kth)):
            break
        found.append(chosen)
        if len(found) == K:
            kth = s
        nxt = last + 1
        if nxt < len(d):
            heapq.heappush(heap, (s + d[nxt], nxt, chosen + (nxt,)))
            if last >= 0:
                heapq.heappush(heap, (s - d[last] + d[nxt], nxt, chosen[:-1] + (nxt,)))
    paths = []
    for chosen in found:
        cols = base.copy()
        for j in chosen:
            r = flippable[j]
            cols[r] = 1 - cols[r]
        paths.append((tuple(int(c) for c in cols), _row_cost(C, cols)))
    paths.sort(key=lambda p: (p[1], p[0]))
    return [(tuple(r for r in range(n) if cols[r] == 0), cost) for cols, cost in paths[:K]]
