"""Independent brute-force references. Nothing here imports the package."""

from __future__ import annotations

import itertools
import math


def connected(n: int, edges) -> bool:
    adj = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, stack = {0}, [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def canon(n: int, edges) -> tuple:
    return min(
        tuple(sorted(tuple(sorted((p[u], p[v]))) for u, v in edges))
        for p in itertools.permutations(range(n))
    )


def connected_graphs(n: int) -> list[tuple]:
    """Unlabeled connected graphs on ``n`` nodes as canonical edge tuples."""
    pairs = list(itertools.combinations(range(n), 2))
    found = set()
    for r in range(n - 1, len(pairs) + 1):
        for edges in itertools.combinations(pairs, r):
            if connected(n, edges):
                found.add(canon(n, edges))
    return sorted(found)


def _nbrs(n, edges):
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def threshold_closure(n: int, edges, h) -> set[int]:
    """Final active set of the deterministic threshold model (order free)."""
    adj = _nbrs(n, edges)
    active: set[int] = set()
    grew = True
    while grew:
        grew = False
        for v in range(n):
            if v not in active and len(adj[v] & active) >= h[v]:
                active.add(v)
                grew = True
    return active


def best_uncertain(n: int, edges, h) -> int | None:
    """Fewest imprecise nodes over all threshold-consistent activation orders.

    With one unit of exposure per active neighbor, the best schedule measures
    a node exactly iff it activates at exposure equal to its threshold (or at
    0 when the threshold is 0). ``None`` when no order activates everyone.
    """
    adj = _nbrs(n, edges)
    best = None
    for order in itertools.permutations(range(n)):
        on: set[int] = set()
        bad = 0
        ok = True
        for v in order:
            e = len(adj[v] & on)
            if e < h[v]:
                ok = False
                break
            bad += e != h[v]
            on.add(v)
        if ok and (best is None or bad < best):
            best = bad
    return best


def atlas_counts(max_order: int = 4) -> tuple[int, int]:
    """(supporting, always uncertain) counted per assignment orbit."""
    supporting = always = 0
    for n in range(2, max_order + 1):
        for edges in connected_graphs(n):
            autos = [
                p for p in itertools.permutations(range(n))
                if canon_same(edges, p)
            ]
            seen = set()
            for h in itertools.product(range(n), repeat=n):
                if any(h[v] > sum(1 for e in edges if v in e) for v in range(n)):
                    continue
                orbit = min(tuple(h[p.index(i)] for i in range(n)) for p in autos)
                if orbit in seen:
                    continue
                seen.add(orbit)
                least = best_uncertain(n, edges, h)
                if least is None:
                    continue
                supporting += 1
                always += least >= 1
    return supporting, always


def canon_same(edges, perm) -> bool:
    mapped = {tuple(sorted((perm[u], perm[v]))) for u, v in edges}
    return mapped == {tuple(sorted(e)) for e in edges}


def icm_mean_size(n: int, edges, seed_node: int, p: float) -> float:
    """Exact expected outbreak size of the independent cascade via live-edge worlds."""
    total = 0.0
    m = len(edges)
    for mask in range(1 << m):
        live = [edges[i] for i in range(m) if mask >> i & 1]
        k = len(live)
        prob = p**k * (1 - p) ** (m - k)
        adj = _nbrs(n, live)
        seen, stack = {seed_node}, [seed_node]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        total += prob * len(seen)
    return total


def geometric_pmf(k: int, p: float) -> float:
    return (1 - p) ** (k - 1) * p


def gini_pairs(xs) -> float:
    """Mean absolute difference form."""
    n = len(xs)
    mu = sum(xs) / n
    if mu == 0:
        return 0.0
    return sum(abs(a - b) for a in xs for b in xs) / (2 * n * n * mu)


def binom_sd(n: int, p: float) -> float:
    return math.sqrt(n * p * (1 - p))


def pull_critical_values(adj: dict, innovators, p: float, rng) -> dict:
    """SI-pull without traces: per sweep, each inactive node flips a coin per unseen exposure unit."""
    active = set(innovators)
    seen = {v: 0 for v in adj}
    crit = {}
    order = sorted(adj)
    while True:
        pending = [v for v in order if v not in active]
        rng.shuffle(pending)
        progressed = False
        for v in pending:
            exposure = len(adj[v] & active)
            for c in range(seen[v] + 1, exposure + 1):
                if rng.random() < p:
                    crit[v] = c
                    active.add(v)
                    progressed = True
                    break
            seen[v] = exposure
        if not progressed:
            return crit
