"""Threshold and SI (independent cascade) simulations with full exposure traces.

Every node update is recorded, whether or not the node activates, so that
threshold intervals can be recovered afterwards (see :mod:`opacity.measurement`).

Updating schedule for the threshold and SI-pull models: inactive nodes are
visited in a freshly shuffled order, one update per time step. A complete pass
in which nobody activates means every inactive node was checked consecutively
without activating, and the run stops.
"""

from __future__ import annotations

import csv
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from opacity.graph import Graph, ParameterError, derive_subseed

MODES = ("integer", "real", "fractional")
TRACE_HEADER = ("step", "node", "exposure", "active_before", "activated_now")
_FRACTION_TOL = 1e-12


class Event(NamedTuple):
    step: int
    node: int
    exposure: float
    active_before: bool
    activated_now: bool


@dataclass(frozen=True)
class ThresholdAssignment:
    """Per-node critical values.

    ``integer`` thresholds are whole numbers of weighted active neighbors,
    ``real`` thresholds are non-negative reals on the same scale, and
    ``fractional`` thresholds are shares of incident weight in [0, 1].
    ``seed_nodes`` are switched on at step 0 whatever the mode.
    """

    mode: str
    values: Mapping[int, float]
    seed_nodes: frozenset = frozenset()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown threshold mode {self.mode!r}")
        object.__setattr__(self, "values", {int(k): float(v) for k, v in self.values.items()})
        object.__setattr__(self, "seed_nodes", frozenset(int(v) for v in self.seed_nodes))
        for node, h in self.values.items():
            if math.isnan(h) or h < 0:
                raise ParameterError(f"threshold of node {node} must be >= 0, got {h}")
            if self.mode == "integer" and not h.is_integer():
                raise ParameterError(f"integer threshold of node {node} is {h}")
            if self.mode == "fractional" and h > 1:
                raise ParameterError(f"fractional threshold of node {node} is {h} > 1")
        unknown = self.seed_nodes - self.values.keys()
        if unknown:
            raise ParameterError(f"seed nodes without thresholds: {sorted(unknown)}")

    @property
    def fractional(self) -> bool:
        return self.mode == "fractional"

    def __getitem__(self, node: int) -> float:
        return self.values[node]


@dataclass(frozen=True)
class SIConfig:
    p: float
    dynamics: str = "pull"

    def __post_init__(self):
        if self.dynamics not in ("pull", "push"):
            raise ParameterError(f"dynamics must be 'pull' or 'push', got {self.dynamics!r}")
        # p = 0 is accepted so degenerate no-transmission runs can be checked.
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"transmission probability must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class CascadeTrace:
    """Time-ordered update events of one run.

    ``exposure_units`` maps a node to the exposure change caused by one
    neighbor activating; it is only set for fractional runs (where exposure
    is a share of incident weight). Missing nodes have unit 1.
    """

    nodes: tuple[int, ...]
    events: tuple[Event, ...]
    final_active: frozenset
    fractional: bool = False
    exposure_units: Mapping[int, float] = field(default_factory=dict)
    _by_node: dict = field(default_factory=dict, compare=False, repr=False)

    def events_for(self, node: int) -> list[Event]:
        if not self._by_node:
            index: dict[int, list[Event]] = {v: [] for v in self.nodes}
            for ev in self.events:
                index[ev.node].append(ev)
            self._by_node.update(index)
        return self._by_node[node]

    def exposure_unit(self, node: int) -> float:
        return self.exposure_units.get(node, 1.0)

    def activation_order(self) -> list[int]:
        return [ev.node for ev in self.events if ev.activated_now]


def _adjacency(g: Graph) -> tuple[list[int], dict[int, int], list[list[tuple[int, float]]]]:
    nodes = list(g.nodes)
    index = {v: i for i, v in enumerate(nodes)}
    nbrs = [[(index[u], w) for u, w in sorted(g.neighbors(v).items())] for v in nodes]
    return nodes, index, nbrs


def _trace(nodes, events, active, fractional=False, units=None) -> CascadeTrace:
    return CascadeTrace(
        nodes=tuple(nodes),
        events=tuple(events),
        final_active=frozenset(nodes[i] for i, a in enumerate(active) if a),
        fractional=fractional,
        exposure_units=units or {},
    )


def run_threshold_cascade(g: Graph, thresholds: ThresholdAssignment, seed=None) -> CascadeTrace:
    """Deterministic threshold model under random sequential updating.

    A node activates on an update when its exposure (weighted count of active
    neighbors, or that weight divided by its total incident weight in
    fractional mode) reaches its threshold.
    """
    nodes, index, nbrs = _adjacency(g)
    missing = set(nodes) - thresholds.values.keys()
    if missing:
        raise ParameterError(f"nodes without thresholds: {sorted(missing)[:10]}")
    frac = thresholds.fractional
    h = [thresholds.values[v] for v in nodes]
    strength = [sum(w for _, w in row) for row in nbrs]
    if frac and not thresholds.seed_nodes and min(h, default=1.0) > 0:
        raise ParameterError("fractional run needs seed nodes or a zero threshold")

    rng = random.Random(seed)
    n = len(nodes)
    active = [False] * n
    weight_on = [0.0] * n
    events: list[Event] = []

    seeds = sorted(index[v] for v in thresholds.seed_nodes)
    for i in seeds:
        events.append(Event(0, nodes[i], 0.0, False, True))
        active[i] = True
    for i in seeds:
        for j, w in nbrs[i]:
            weight_on[j] += w

    step = 0
    while True:
        inactive = [i for i in range(n) if not active[i]]
        if not inactive:
            break
        rng.shuffle(inactive)
        changed = False
        for i in inactive:
            step += 1
            if frac:
                e = weight_on[i] / strength[i] if strength[i] > 0 else 0.0
                fire = e >= h[i] - _FRACTION_TOL
            else:
                e = weight_on[i]
                fire = e >= h[i]
            events.append(Event(step, nodes[i], e, False, fire))
            if fire:
                active[i] = True
                changed = True
                for j, w in nbrs[i]:
                    weight_on[j] += w
        if not changed:
            break

    units = {}
    if frac:
        units = {nodes[i]: 1.0 / strength[i] for i in range(n) if strength[i] > 0}
    return _trace(nodes, events, active, frac, units)


def _check_innovators(g: Graph, innovators: Iterable[int]) -> list[int]:
    chosen = sorted(set(innovators))
    if not chosen:
        raise ParameterError("at least one innovator is required")
    unknown = [v for v in chosen if v not in g]
    if unknown:
        raise KeyError(f"unknown innovator(s): {unknown}")
    return chosen


def run_si_pull(
    g: Graph, cfg: SIConfig, innovators: Iterable[int], seed=None
) -> tuple[CascadeTrace, dict[int, int]]:
    """SI model where an updating node flips one coin per newly active neighbor.

    Exposure is the number of active neighbors (edge weights are ignored).
    Returns the trace and the critical value of every node that activated
    after the start: exposure at its previous update plus the index of the
    first coin that came up heads. Innovators have no critical value.
    """
    if cfg.dynamics != "pull":
        raise ParameterError("run_si_pull needs dynamics='pull'")
    nodes, index, nbrs = _adjacency(g)
    rng = random.Random(seed)
    n = len(nodes)
    active = [False] * n
    count_on = [0] * n
    last_seen = [0] * n
    events: list[Event] = []
    critical: dict[int, int] = {}

    starters = [index[v] for v in _check_innovators(g, innovators)]
    for i in starters:
        events.append(Event(0, nodes[i], 0, False, True))
        active[i] = True
    for i in starters:
        for j, _ in nbrs[i]:
            count_on[j] += 1

    p = cfg.p
    step = 0
    while True:
        inactive = [i for i in range(n) if not active[i]]
        if not inactive:
            break
        rng.shuffle(inactive)
        changed = False
        for i in inactive:
            step += 1
            e = count_on[i]
            fire = False
            for coin in range(1, e - last_seen[i] + 1):
                if rng.random() < p:
                    fire = True
                    critical[nodes[i]] = last_seen[i] + coin
                    break
            events.append(Event(step, nodes[i], e, False, fire))
            last_seen[i] = e
            if fire:
                active[i] = True
                changed = True
                for j, _ in nbrs[i]:
                    count_on[j] += 1
        if not changed:
            break
    return _trace(nodes, events, active), critical


def run_si_push(
    g: Graph, cfg: SIConfig, innovators: Iterable[int], seed=None
) -> tuple[CascadeTrace, dict[int, int]]:
    """SI model where each active node gets one attempt per inactive neighbor.

    An unspent active node is drawn at random, its neighbors are shuffled and
    every inactive one records its exposure and flips a single coin,
    activating immediately on heads. A node's critical value is the number of
    attempts it received up to and including the successful one.
    """
    if cfg.dynamics != "push":
        raise ParameterError("run_si_push needs dynamics='push'")
    nodes, index, nbrs = _adjacency(g)
    rng = random.Random(seed)
    n = len(nodes)
    active = [False] * n
    count_on = [0] * n
    attempts = [0] * n
    events: list[Event] = []
    critical: dict[int, int] = {}

    starters = [index[v] for v in _check_innovators(g, innovators)]
    for i in starters:
        events.append(Event(0, nodes[i], 0, False, True))
        active[i] = True
    for i in starters:
        for j, _ in nbrs[i]:
            count_on[j] += 1
    unspent = list(starters)
    n_active = len(starters)

    p = cfg.p
    step = 0
    while unspent and n_active < n:
        step += 1
        k = rng.randrange(len(unspent))
        i = unspent[k]
        unspent[k] = unspent[-1]
        unspent.pop()
        order = [j for j, _ in nbrs[i]]
        rng.shuffle(order)
        for j in order:
            if active[j]:
                continue
            attempts[j] += 1
            fire = rng.random() < p
            events.append(Event(step, nodes[j], count_on[j], False, fire))
            if fire:
                active[j] = True
                n_active += 1
                critical[nodes[j]] = attempts[j]
                unspent.append(j)
                for x, _ in nbrs[j]:
                    count_on[x] += 1
    return _trace(nodes, events, active), critical


def replicate(
    run: Callable[[int], object], n_reps: int, base_seed, jobs: int = 1
) -> list:
    """Run ``run(derive_subseed(base_seed, r))`` for ``r`` in ``range(n_reps)``.

    Results come back in replicate order whatever ``jobs`` is; with
    ``jobs > 1`` the callable must be picklable.
    """
    if n_reps < 1:
        raise ParameterError(f"n_reps must be >= 1, got {n_reps}")
    seeds = [derive_subseed(base_seed, r) for r in range(n_reps)]
    if jobs <= 1 or n_reps == 1:
        return [run(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, seeds, chunksize=max(1, n_reps // (4 * jobs))))


def _fmt_number(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def write_trace_csv(trace: CascadeTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for ev in trace.events:
            writer.writerow(
                (ev.step, ev.node, _fmt_number(ev.exposure),
                 int(ev.active_before), int(ev.activated_now))
            )


def read_trace_csv(
    path, nodes: Sequence[int] | None = None, exposure_units: Mapping[int, float] | None = None
) -> CascadeTrace:
    """Read a trace file. ``nodes`` defaults to the nodes seen in the events."""
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                step, node, exposure, before, now = row
                events.append(
                    Event(int(step), int(node), float(exposure), bool(int(before)), bool(int(now)))
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    seen = sorted({ev.node for ev in events})
    active = frozenset(ev.node for ev in events if ev.activated_now)
    return CascadeTrace(
        nodes=tuple(sorted(nodes)) if nodes is not None else tuple(seen),
        events=tuple(events),
        final_active=active,
        fractional=bool(exposure_units),
        exposure_units=dict(exposure_units or {}),
    )
