"""Undirected weighted graphs, random generators and small-graph enumeration.

Nodes are non-negative integers. Graphs are treated as immutable once built;
the only mutator, :meth:`Graph.with_weight`, returns a copy.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_SMALL_ORDER = 5
WS_MAX_ATTEMPTS = 100


class ParameterError(ValueError):
    """Invalid generator or enumeration parameters."""


class UndefinedStatsError(ValueError):
    """Statistics requested for a graph on which they are not defined."""


class Graph:
    """Simple undirected graph with non-negative edge weights.

    Args:
        nodes: node ids; nodes without edges are allowed.
        edges: ``(u, v)`` or ``(u, v, weight)`` tuples. Endpoints not listed
            in ``nodes`` are added.
    """

    __slots__ = ("_adj", "_nodes")

    def __init__(self, nodes: Iterable[int] = (), edges: Iterable[Sequence] = ()):
        adj: dict[int, dict[int, float]] = {int(v): {} for v in nodes}
        for edge in edges:
            if len(edge) == 2:
                u, v = edge
                w = 1.0
            else:
                u, v, w = edge
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise ParameterError(f"self-loop on node {u}")
            if w < 0:
                raise ParameterError(f"negative weight on edge ({u}, {v})")
            adj.setdefault(u, {})
            adj.setdefault(v, {})
            if v in adj[u]:
                raise ParameterError(f"duplicate edge ({u}, {v})")
            adj[u][v] = w
            adj[v][u] = w
        self._adj = adj
        self._nodes = tuple(sorted(adj))

    @property
    def nodes(self) -> tuple[int, ...]:
        return self._nodes

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node) -> bool:
        return node in self._adj

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self._adj == other._adj

    def __hash__(self):
        return hash((self._nodes, self.edges()))

    def __repr__(self) -> str:
        return f"Graph(nodes={self.node_count}, edges={self.edge_count})"

    def neighbors(self, node: int) -> dict[int, float]:
        """Neighbor -> weight mapping (read-only by convention)."""
        return self._adj[node]

    def degree(self, node: int) -> int:
        return len(self._adj[node])

    def strength(self, node: int) -> float:
        """Total incident edge weight."""
        return sum(self._adj[node].values())

    def weight(self, u: int, v: int) -> float:
        return self._adj[u][v]

    def has_edge(self, u: int, v: int) -> bool:
        return u in self._adj and v in self._adj[u]

    def edges(self) -> tuple[tuple[int, int, float], ...]:
        """Edges as sorted ``(u, v, w)`` with ``u < v``."""
        return tuple(
            (u, v, w)
            for u in self._nodes
            for v, w in sorted(self._adj[u].items())
            if u < v
        )

    def with_weight(self, u: int, v: int, weight: float) -> Graph:
        """Copy of the graph with the weight of existing edge ``(u, v)`` replaced."""
        if not self.has_edge(u, v):
            raise KeyError(f"no edge ({u}, {v})")
        edges = [
            (a, b, weight if {a, b} == {u, v} else w) for a, b, w in self.edges()
        ]
        return Graph(self._nodes, edges)

    def is_connected(self) -> bool:
        if not self._nodes:
            return True
        start = self._nodes[0]
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in self._adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == len(self._nodes)

    def is_symmetric(self) -> bool:
        return all(
            self._adj[v].get(u) == w
            for u, nbrs in self._adj.items()
            for v, w in nbrs.items()
        )

    def relabel(self, mapping: dict[int, int]) -> Graph:
        return Graph(
            (mapping[v] for v in self._nodes),
            ((mapping[u], mapping[v], w) for u, v, w in self.edges()),
        )


@dataclass(frozen=True)
class GraphStats:
    mean_degree: float
    global_clustering: float
    dyad_count: int
    triangle_count: int
    connected_triples: int


def _check_growth_params(n: int, m: int) -> None:
    if not isinstance(n, (int, np.integer)) or not isinstance(m, (int, np.integer)):
        raise ParameterError("n and m must be integers")
    if m < 1 or n <= m:
        raise ParameterError(f"need n > m >= 1, got n={n}, m={m}")


def _random_subset(seq: list[int], m: int, rng: random.Random) -> set[int]:
    # Sampling from the repeated-node list gives degree-proportional choice.
    targets: set[int] = set()
    while len(targets) < m:
        targets.add(seq[rng.randrange(len(seq))])
    return targets


def generate_ba(n: int, m: int, seed=None) -> Graph:
    """Barabasi-Albert preferential attachment grown from a star on ``m + 1`` nodes."""
    return generate_plc(n, m, 0.0, seed)


def generate_plc(n: int, m: int, p_triangle: float, seed=None) -> Graph:
    """Holme-Kim power-law graph with tunable clustering.

    Each new node makes one preferential attachment, then ``m - 1`` further
    links; each of these is, with probability ``p_triangle``, a triad-closing
    link to a random neighbor of the previous target, and otherwise another
    preferential attachment. Growth starts from a star on ``m + 1`` nodes, so
    the result has exactly ``m * (n - m)`` edges.
    """
    _check_growth_params(n, m)
    if not 0.0 <= p_triangle <= 1.0:
        raise ParameterError(f"p_triangle must be in [0, 1], got {p_triangle}")
    rng = random.Random(seed)
    adj: dict[int, set[int]] = {v: set() for v in range(n)}

    def link(a: int, b: int) -> None:
        adj[a].add(b)
        adj[b].add(a)

    for v in range(m):
        link(m, v)
    repeated = list(range(m)) + [m] * m
    for source in range(m + 1, n):
        candidates = list(_random_subset(repeated, m, rng))
        rng.shuffle(candidates)
        target = candidates.pop()
        link(source, target)
        repeated.append(target)
        count = 1
        while count < m:
            if p_triangle > 0 and rng.random() < p_triangle:
                closable = sorted(adj[target] - adj[source] - {source})
                if closable:
                    nbr = closable[rng.randrange(len(closable))]
                    link(source, nbr)
                    repeated.append(nbr)
                    count += 1
                    continue
            while candidates and candidates[-1] in adj[source]:
                candidates.pop()
            if not candidates:
                # All preferential picks consumed by triad closures.
                pool = [u for u in repeated if u != source and u not in adj[source]]
                candidates = [pool[rng.randrange(len(pool))]]
            target = candidates.pop()
            link(source, target)
            repeated.append(target)
            count += 1
        repeated.extend([source] * m)
    return Graph(range(n), ((u, v) for u in range(n) for v in adj[u] if u < v))


def _ws_once(n: int, k_ring: int, p_rewire: float, rng: random.Random) -> Graph:
    adj: dict[int, set[int]] = {v: set() for v in range(n)}
    half = k_ring // 2
    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= p_rewire or v not in adj[u]:
                continue
            if len(adj[u]) >= n - 1:
                continue
            w = rng.randrange(n)
            while w == u or w in adj[u]:
                w = rng.randrange(n)
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    return Graph(range(n), ((u, v) for u in range(n) for v in adj[u] if u < v))


def derive_subseed(seed, index: int) -> int:
    """Deterministic 64-bit child seed; independent of how many siblings are drawn."""
    base = 0 if seed is None else int(seed)
    state = np.random.SeedSequence(base, spawn_key=(index,)).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def generate_ws(n: int, k_ring: int, p_rewire: float, seed=None) -> Graph:
    """Watts-Strogatz small world graph, regenerated until connected."""
    if k_ring <= 0 or k_ring % 2:
        raise ParameterError(f"k_ring must be a positive even integer, got {k_ring}")
    if k_ring >= n:
        raise ParameterError(f"need k_ring < n, got k_ring={k_ring}, n={n}")
    if not 0.0 <= p_rewire <= 1.0:
        raise ParameterError(f"p_rewire must be in [0, 1], got {p_rewire}")
    for attempt in range(WS_MAX_ATTEMPTS):
        rng = random.Random(seed if attempt == 0 else derive_subseed(seed, attempt))
        g = _ws_once(n, k_ring, p_rewire, rng)
        if g.is_connected():
            return g
    raise ParameterError(
        f"no connected Watts-Strogatz graph after {WS_MAX_ATTEMPTS} attempts"
    )


def canonical_form(g: Graph) -> tuple[int, tuple[tuple[int, int], ...], tuple[int, ...]]:
    """Minimal relabelled edge set over all node permutations.

    Returns ``(order, edges, perm)`` where ``perm[i]`` is the canonical label
    of ``g.nodes[i]``. Exponential in order; intended for order <= 5.
    """
    nodes = g.nodes
    index = {v: i for i, v in enumerate(nodes)}
    pairs = [(index[u], index[v]) for u, v, _ in g.edges()]
    best = None
    for perm in itertools.permutations(range(len(nodes))):
        key = tuple(sorted(tuple(sorted((perm[a], perm[b]))) for a, b in pairs))
        if best is None or key < best[0]:
            best = (key, perm)
    if best is None:
        return 0, (), ()
    return len(nodes), best[0], best[1]


def graph_id(g: Graph) -> str:
    """Stable text id of the isomorphism class, e.g. ``3:0-1,0-2,1-2``."""
    order, edges, _ = canonical_form(g)
    return f"{order}:" + ",".join(f"{a}-{b}" for a, b in edges)


def automorphisms(g: Graph) -> list[tuple[int, ...]]:
    """Node permutations (by position in ``g.nodes``) that preserve the edge set."""
    nodes = g.nodes
    index = {v: i for i, v in enumerate(nodes)}
    edges = {frozenset((index[u], index[v])) for u, v, _ in g.edges()}
    return [
        perm
        for perm in itertools.permutations(range(len(nodes)))
        if {frozenset((perm[a], perm[b])) for a, b in map(tuple, edges)} == edges
    ]


def enumerate_small_graphs(min_order: int, max_order: int) -> list[Graph]:
    """One canonically labelled representative per connected isomorphism class.

    Ordered by (order, edge count, canonical edge list).
    """
    if not 2 <= min_order <= max_order <= MAX_SMALL_ORDER:
        raise ParameterError(
            f"need 2 <= min_order <= max_order <= {MAX_SMALL_ORDER}, "
            f"got ({min_order}, {max_order})"
        )
    result = []
    for order in range(min_order, max_order + 1):
        pairs = list(itertools.combinations(range(order), 2))
        classes: set[tuple] = set()
        for size in range(order - 1, len(pairs) + 1):
            for subset in itertools.combinations(pairs, size):
                g = Graph(range(order), subset)
                if not g.is_connected():
                    continue
                _, edges, _ = canonical_form(g)
                classes.add(edges)
        for edges in sorted(classes, key=lambda e: (len(e), e)):
            result.append(Graph(range(order), edges))
    return result


def graph_stats(g: Graph) -> GraphStats:
    """Mean degree and global clustering (3 x triangles / connected triples).

    Clustering is reported as 0.0 when the graph has no connected triple.
    """
    if g.node_count == 0:
        raise UndefinedStatsError("statistics are undefined on the empty graph")
    adj = {v: set(g.neighbors(v)) for v in g.nodes}
    triangles = 0
    for u, v, _ in g.edges():
        triangles += sum(1 for w in adj[u] & adj[v] if w > v)
    triples = sum(len(nbrs) * (len(nbrs) - 1) // 2 for nbrs in adj.values())
    clustering = 3.0 * triangles / triples if triples else 0.0
    return GraphStats(
        mean_degree=2.0 * g.edge_count / g.node_count,
        global_clustering=clustering,
        dyad_count=g.edge_count,
        triangle_count=triangles,
        connected_triples=triples,
    )


def induced_subgraph(g: Graph, nodes: Iterable[int]) -> Graph:
    keep = set(nodes)
    missing = keep.difference(g.nodes)
    if missing:
        raise KeyError(f"unknown node(s): {sorted(missing)}")
    return Graph(
        keep, ((u, v, w) for u, v, w in g.edges() if u in keep and v in keep)
    )


def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def write_edgelist(g: Graph, path) -> None:
    """Write ``u<TAB>v<TAB>weight`` lines. Isolated nodes are not representable."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in g.edges():
            fh.write(f"{u}\t{v}\t{_fmt_weight(w)}\n")


def read_edgelist(path) -> Graph:
    edges = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        try:
            if len(fields) == 2:
                edges.append((int(fields[0]), int(fields[1]), 1.0))
            elif len(fields) == 3:
                edges.append((int(fields[0]), int(fields[1]), float(fields[2])))
            else:
                raise ValueError(f"expected 2 or 3 fields, got {len(fields)}")
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if edges[-1][0] < 0 or edges[-1][1] < 0:
            raise ValueError(f"{path}:{lineno}: node ids must be non-negative")
    return Graph((), edges)
