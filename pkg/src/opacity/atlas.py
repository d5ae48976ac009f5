"""Exhaustive opacity survey over small connected graphs.

For every connected graph of a given order range and every integer threshold
assignment with ``0 <= h_i <= degree_i`` (up to graph automorphism), check
whether the assignment supports a full cascade and how often Condition 1
leaves some node's threshold uncertain.

Two views of "always uncertain" are produced:

* Monte Carlo: every one of ``runs_per_combo`` simulated cascades had at least
  one uncertain node.
* Exact: even the most informative updating schedule cannot avoid an
  uncertain node. Extra non-activating updates can only tighten lower bounds,
  so the best schedule re-checks every not-yet-eligible node between
  consecutive activations. A node activating at exposure ``e`` is then
  precise iff ``e == h > 0`` (or ``e == 0`` for an innovator), and the check
  reduces to enumerating threshold-consistent activation orders.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

from opacity.cascade import ThresholdAssignment, run_threshold_cascade
from opacity.graph import (
    Graph,
    ParameterError,
    automorphisms,
    derive_subseed,
    enumerate_small_graphs,
    graph_id,
)
from opacity.measurement import build_intervals

SURVEY_HEADER = (
    "graph_id", "thresholds", "supports", "mean_uncertain",
    "always_uncertain", "mean_precise_fraction",
)


@dataclass(frozen=True)
class ComboRecord:
    graph_id: str
    thresholds: tuple[int, ...]
    supports_diffusion: bool
    mean_uncertain: float
    always_uncertain: bool
    mean_precise_fraction: float
    mc_always_uncertain: bool
    min_uncertain: int
    labeled_count: int


def enumerate_assignments(g: Graph) -> list[tuple[int, ...]]:
    """All vectors with ``0 <= h_i <= degree_i``, indexed like ``g.nodes``."""
    if g.node_count > 5:
        raise ParameterError("threshold enumeration is limited to order <= 5")
    return list(itertools.product(*(range(g.degree(v) + 1) for v in g.nodes)))


def _masks(g: Graph) -> list[int]:
    index = {v: i for i, v in enumerate(g.nodes)}
    return [sum(1 << index[u] for u in g.neighbors(v)) for v in g.nodes]


def supports_diffusion(g: Graph, thresholds) -> bool:
    """True iff the (order independent) fixed point activates every node."""
    masks = _masks(g)
    h = list(thresholds)
    n = len(masks)
    on = 0
    grew = True
    while grew:
        grew = False
        for i in range(n):
            if not on >> i & 1 and (masks[i] & on).bit_count() >= h[i]:
                on |= 1 << i
                grew = True
    return on == (1 << n) - 1


def exact_min_uncertain(g: Graph, thresholds, innovators_precise: bool = True) -> int:
    """Fewest uncertain nodes over all activation orders, best-case updating.

    Unit edge weights and integer thresholds are assumed.
    """
    masks = tuple(_masks(g))
    h = tuple(int(x) for x in thresholds)
    n = len(masks)
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def best(on: int) -> int:
        if on == full:
            return 0
        result = math.inf
        for i in range(n):
            if on >> i & 1:
                continue
            e = (masks[i] & on).bit_count()
            if e < h[i]:
                continue
            if e == 0:
                cost = 0 if innovators_precise else 1
            else:
                cost = 0 if e == h[i] else 1
            result = min(result, cost + best(on | 1 << i))
        return result

    out = best(0)
    if out is math.inf:
        raise ValueError("assignment does not support diffusion")
    return int(out)


def unique_assignments(g: Graph) -> list[tuple[tuple[int, ...], int]]:
    """Lexicographically smallest member of each automorphism orbit, with orbit size."""
    autos = automorphisms(g)
    orbits: dict[tuple[int, ...], int] = {}
    for h in enumerate_assignments(g):
        images = []
        for perm in autos:
            moved = [0] * len(h)
            for i, p in enumerate(perm):
                moved[p] = h[i]
            images.append(tuple(moved))
        rep = min(images)
        orbits[rep] = orbits.get(rep, 0) + 1
    return sorted(orbits.items())


def _mc_stats(g: Graph, h, runs: int, seed, innovators_precise: bool) -> tuple[float, float, bool]:
    thresholds = ThresholdAssignment("integer", dict(zip(g.nodes, h)))
    uncertain_counts = []
    precise_fracs = []
    for r in range(runs):
        trace = run_threshold_cascade(g, thresholds, derive_subseed(seed, r))
        if len(trace.final_active) != g.node_count:
            raise AssertionError(f"supporting combo {h} stalled on {graph_id(g)}")
        ivs = build_intervals(trace).values()
        precise = sum(iv.is_precise(innovators_precise) for iv in ivs)
        uncertain_counts.append(g.node_count - precise)
        precise_fracs.append(precise / g.node_count)
    return (
        sum(uncertain_counts) / runs,
        sum(precise_fracs) / runs,
        all(c >= 1 for c in uncertain_counts),
    )


def survey(
    min_order: int = 2,
    max_order: int = 4,
    runs_per_combo: int = 100,
    seed=0,
    innovators_precise: bool = True,
) -> list[ComboRecord]:
    """One record per (graph, threshold orbit), supporting or not."""
    if runs_per_combo < 1:
        raise ParameterError("runs_per_combo must be >= 1")
    records = []
    for gi, g in enumerate(enumerate_small_graphs(min_order, max_order)):
        gid = graph_id(g)
        graph_seed = derive_subseed(seed, gi)
        for ci, (h, orbit) in enumerate(unique_assignments(g)):
            if not supports_diffusion(g, h):
                records.append(
                    ComboRecord(gid, h, False, math.nan, False, math.nan, False, -1, orbit)
                )
                continue
            mean_unc, mean_prec, mc_always = _mc_stats(
                g, h, runs_per_combo, derive_subseed(graph_seed, ci), innovators_precise
            )
            least = exact_min_uncertain(g, h, innovators_precise)
            records.append(
                ComboRecord(gid, h, True, mean_unc, least >= 1, mean_prec, mc_always, least, orbit)
            )
    return records


def survey_summary(records: list[ComboRecord]) -> dict:
    supporting = [r for r in records if r.supports_diffusion]
    always = sum(r.always_uncertain for r in supporting)
    return {
        "combinations": len(records),
        "supporting": len(supporting),
        "always_uncertain": always,
        "always_uncertain_share": always / len(supporting) if supporting else math.nan,
        "mc_always_uncertain": sum(r.mc_always_uncertain for r in supporting),
        "supporting_labeled": sum(r.labeled_count for r in supporting),
        "graphs": len({r.graph_id for r in records}),
    }


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(round(x, 12))


def write_survey_csv(records: list[ComboRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SURVEY_HEADER)
        for r in records:
            writer.writerow((
                r.graph_id,
                " ".join(map(str, r.thresholds)),
                int(r.supports_diffusion),
                _fmt(r.mean_uncertain),
                int(r.always_uncertain),
                _fmt(r.mean_precise_fraction),
            ))


def plot_points(records: list[ComboRecord]) -> list[dict]:
    """Scatter rows: one x position per graph, one point per supporting combo."""
    order = {}
    rows = []
    for r in records:
        if not r.supports_diffusion:
            continue
        x = order.setdefault(r.graph_id, len(order))
        rows.append({
            "graph_index": x,
            "graph_id": r.graph_id,
            "thresholds": " ".join(map(str, r.thresholds)),
            "mean_uncertain": r.mean_uncertain,
            "mean_precise_fraction": r.mean_precise_fraction,
            "always_uncertain": int(r.always_uncertain),
        })
    return rows
