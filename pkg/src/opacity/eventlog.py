"""Threshold intervals and p(k) curves from timestamped adoption logs.

An actor's updates (e.g. posts) are the only moments it is known to have
looked at its neighbors. For an adoption at ``t`` the gaps between
consecutive updates are scanned backwards from ``t`` until one contains at
least one neighbor adoption; the number of neighbor adoptions in that gap is
``T*`` and the threshold lies in ``[before, before + T*]``, where ``before``
counts neighbor adoptions strictly before the start of the gap. An update
at time ``s`` sees only adoptions stamped earlier than ``s``. ``T* == 1`` is
the precise case.

Log layout on disk (integer epoch-second timestamps)::

    edges.csv      actor_a,actor_b
    updates.csv    actor,timestamp
    adoptions.csv  actor,behavior,timestamp
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats

from opacity.cascade import CascadeTrace
from opacity.estimation import InsufficientDataError
from opacity.graph import Graph, graph_stats, induced_subgraph
from opacity.measurement import Status, ThresholdInterval

DAY_SECONDS = 86400
CURVE_HEADER = ("behavior", "variant", "k", "adopted", "ever_exposed", "p")


class LogParseError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class LogInvariantError(ValueError):
    def __init__(self, actor, message: str):
        super().__init__(f"actor {actor}: {message}")
        self.actor = actor


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class AdoptionLog:
    actors: tuple[int, ...]
    edges: frozenset
    updates: dict[int, tuple[int, ...]]
    adoptions: dict[str, dict[int, int]]
    _nbrs: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def behaviors(self) -> list[str]:
        return sorted(self.adoptions)

    def neighbors(self, actor: int) -> set[int]:
        if not self._nbrs:
            index: dict[int, set[int]] = {a: set() for a in self.actors}
            for u, v in self.edges:
                index[u].add(v)
                index[v].add(u)
            self._nbrs.update(index)
        return self._nbrs.get(actor, set())

    def contact_graph(self) -> Graph:
        return Graph(self.actors, sorted(self.edges))


def _rows(path: Path, width: int):
    """Yield ``(lineno, fields)`` after the header; an empty file yields nothing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise LogParseError(path, lineno, f"expected {width} fields, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _int(path, lineno, text, what):
    try:
        return int(text)
    except ValueError:
        raise LogParseError(path, lineno, f"{what} must be an integer, got {text!r}") from None


def build_log(edges, updates, adoptions) -> AdoptionLog:
    """Validated log from in-memory parts.

    ``updates`` maps actor -> timestamps in the order observed, which must be
    strictly increasing. ``adoptions`` maps behavior -> actor -> time; every
    adoption time must be one of the actor's updates.
    """
    actors: set[int] = set(updates)
    pairs = set()
    for u, v in edges:
        if u == v:
            raise LogInvariantError(u, "self-loop in contact edges")
        pairs.add((min(u, v), max(u, v)))
        actors.update((u, v))
    clean_updates = {}
    for actor, times in updates.items():
        times = tuple(times)
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise LogInvariantError(actor, f"update times not strictly increasing ({a} then {b})")
        clean_updates[actor] = times
    clean_adoptions: dict[str, dict[int, int]] = {}
    for behavior, by_actor in adoptions.items():
        clean_adoptions[behavior] = {}
        for actor, t in by_actor.items():
            times = clean_updates.get(actor, ())
            i = bisect.bisect_left(times, t)
            if i == len(times) or times[i] != t:
                raise LogInvariantError(actor, f"adoption of {behavior!r} at {t} is not an update time")
            clean_adoptions[behavior][actor] = t
            actors.add(actor)
    for a in actors:
        clean_updates.setdefault(a, ())
    return AdoptionLog(tuple(sorted(actors)), frozenset(pairs), clean_updates, clean_adoptions)


def ingest_log(directory) -> AdoptionLog:
    """Read ``edges.csv``, ``updates.csv`` and ``adoptions.csv`` from a directory.

    Repeated adoptions of one behavior by one actor keep the earliest.
    """
    root = Path(directory)
    edges = []
    for lineno, (a, b) in _rows(root / "edges.csv", 2):
        edges.append((_int(root / "edges.csv", lineno, a, "actor"),
                      _int(root / "edges.csv", lineno, b, "actor")))
    updates: dict[int, list[int]] = defaultdict(list)
    for lineno, (a, t) in _rows(root / "updates.csv", 2):
        updates[_int(root / "updates.csv", lineno, a, "actor")].append(
            _int(root / "updates.csv", lineno, t, "timestamp"))
    adoptions: dict[str, dict[int, int]] = defaultdict(dict)
    for lineno, (a, g, t) in _rows(root / "adoptions.csv", 3):
        actor = _int(root / "adoptions.csv", lineno, a, "actor")
        when = _int(root / "adoptions.csv", lineno, t, "timestamp")
        if not g:
            raise LogParseError(root / "adoptions.csv", lineno, "empty behavior name")
        prev = adoptions[g].get(actor)
        adoptions[g][actor] = when if prev is None else min(prev, when)
    return build_log(edges, dict(updates), dict(adoptions))


def write_log(log: AdoptionLog, directory) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("actor_a", "actor_b"))
        w.writerows(sorted(log.edges))
    with open(root / "updates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("actor", "timestamp"))
        for actor in log.actors:
            w.writerows((actor, t) for t in log.updates[actor])
    with open(root / "adoptions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("actor", "behavior", "timestamp"))
        for g in log.behaviors:
            w.writerows((a, g, t) for a, t in sorted(log.adoptions[g].items()))


def trace_to_log(trace: CascadeTrace, graph: Graph, behavior: str = "g", time_scale: int = 1) -> AdoptionLog:
    """Re-express a count-exposure trace as an adoption log.

    Step-0 events (seeds switched on together) share time 0; the ``k``-th
    event overall happens at ``k * time_scale``. Each node's events are its
    updates and its activating event is its adoption.
    """
    if trace.fractional:
        raise ValueError("only count-exposure traces can be exported")
    updates: dict[int, list[int]] = {v: [] for v in trace.nodes}
    adopted = {}
    for k, ev in enumerate(trace.events, start=1):
        t = 0 if ev.step == 0 else k * time_scale
        updates[ev.node].append(t)
        if ev.activated_now:
            adopted[ev.node] = t
    edges = [(u, v) for u, v, _ in graph.edges()]
    return build_log(edges, updates, {behavior: adopted})


@dataclass
class BehaviorIntervals:
    behavior: str
    intervals: dict[int, ThresholdInterval]
    t_star: dict[int, int | None]


def build_behavior_intervals(log: AdoptionLog, behavior: str) -> BehaviorIntervals:
    if behavior not in log.adoptions:
        raise KeyError(f"behavior {behavior!r} not in log")
    adopted = log.adoptions[behavior]
    intervals = {}
    t_star: dict[int, int | None] = {}
    for actor, t in sorted(adopted.items()):
        nbr_times = sorted(adopted[j] for j in log.neighbors(actor) if j in adopted)
        # exposure at an update counts neighbor adoptions strictly earlier
        upper = bisect.bisect_left(nbr_times, t)
        if upper == 0:
            intervals[actor] = ThresholdInterval(actor, 0.0, 0.0, Status.INNOVATOR)
            t_star[actor] = 0
            continue
        times = log.updates[actor]
        pos = bisect.bisect_left(times, t)
        lower = None
        star = None
        for j in range(pos, 0, -1):
            start = times[j - 1]
            before = bisect.bisect_left(nbr_times, start)
            count = bisect.bisect_left(nbr_times, times[j]) - before
            if count >= 1:
                lower, star = before, count
                break
        status = Status.PRECISE if star == 1 else Status.IMPRECISE
        intervals[actor] = ThresholdInterval(
            actor, None if lower is None else float(lower), float(upper), status
        )
        t_star[actor] = star
    return BehaviorIntervals(behavior, intervals, t_star)


def precise_rates_by_exposure(intervals, max_k: int | None = None) -> dict:
    """Precise share per exposure-at-adoption level, innovators excluded.

    Returns ``{"levels": {k: (precise, total, rate)}, "all": (precise, total, rate)}``
    where the aggregate covers the levels shown.
    """
    if isinstance(intervals, BehaviorIntervals):
        intervals = intervals.intervals
    levels: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    for iv in intervals.values():
        if iv.status in (Status.INNOVATOR, Status.NEVER_ACTIVATED):
            continue
        k = int(round(iv.upper))
        if max_k is not None and k > max_k:
            continue
        levels[k][1] += 1
        levels[k][0] += iv.status is Status.PRECISE
    table = {k: (p, n, p / n) for k, (p, n) in sorted(levels.items())}
    p_all = sum(v[0] for v in table.values())
    n_all = sum(v[1] for v in table.values())
    return {"levels": table, "all": (p_all, n_all, p_all / n_all if n_all else math.nan)}


@dataclass
class PkCurve:
    variant: str
    points: dict[int, tuple[int, int, float]]

    def p(self, k: int) -> float:
        adopted, exposed, p = self.points.get(k, (0, 0, math.nan))
        return p


def _assigned_exposure(iv: ThresholdInterval, variant: str, lower_offset: int) -> int:
    if variant == "upper":
        return int(round(iv.upper))
    if iv.status is Status.INNOVATOR or iv.lower is None:
        return 0
    return min(int(round(iv.lower)) + lower_offset, int(round(iv.upper)))


def pk_curves(
    log: AdoptionLog,
    behavior: str,
    variant: str,
    intervals: BehaviorIntervals | None = None,
    lower_offset: int = 0,
) -> PkCurve:
    """Probability of adopting at exposure ``k`` given ever being ``k``-exposed.

    The upper variant places each adoption at its interval maximum (the EAA),
    the lower variant at its minimum (unbounded minima count as 0). With
    ``lower_offset=1`` the lower variant uses the smallest whole threshold the
    interval allows instead. An adopter counts as ``k``-exposed for every
    ``k`` up to its assigned exposure; a non-adopter for every ``k`` up to its
    final number of adopting neighbors.
    """
    if variant not in ("upper", "lower"):
        raise ValueError(f"variant must be 'upper' or 'lower', got {variant!r}")
    if intervals is None:
        intervals = build_behavior_intervals(log, behavior)
    adopted = log.adoptions[behavior]
    reached = []
    at_k: dict[int, int] = defaultdict(int)
    for actor in log.actors:
        if actor in adopted:
            k = _assigned_exposure(intervals.intervals[actor], variant, lower_offset)
            at_k[k] += 1
        else:
            k = sum(1 for j in log.neighbors(actor) if j in adopted)
        reached.append(k)
    top = max(reached, default=-1)
    counts = [0] * (top + 2)
    for k in reached:
        counts[k] += 1
    points = {}
    exposed = 0
    for k in range(top, -1, -1):
        exposed += counts[k]
        if exposed:
            points[k] = (at_k.get(k, 0), exposed, at_k.get(k, 0) / exposed)
    return PkCurve(variant, dict(sorted(points.items())))


def classify_reinforcement(upper: PkCurve, lower: PkCurve) -> str:
    values = [upper.p(1), upper.p(2), lower.p(1), lower.p(2)]
    if any(math.isnan(v) for v in values):
        raise InsufficientDataError("both curves need points at k = 1 and k = 2")
    u1, u2, l1, l2 = values
    rising_upper, rising_lower = u2 > u1, l2 > l1
    if rising_upper and rising_lower:
        return "reinforcement-supported"
    if rising_upper:
        return "reinforcement-uncertain"
    if rising_lower:
        return "lower-only-increasing"
    return "decreasing-both"


def gini(values) -> float:
    xs = sorted(float(v) for v in values)
    n = len(xs)
    total = sum(xs)
    if n == 0 or total == 0:
        return 0.0
    return sum((2 * i - n - 1) * x for i, x in enumerate(xs, start=1)) / (n * total)


def burstiness_gini(log: AdoptionLog, behavior: str, day_seconds: int = DAY_SECONDS, offset_seconds: int = 0) -> float:
    """Gini of daily adoption counts between the first and last adoption day."""
    times = list(log.adoptions.get(behavior, {}).values())
    if not times:
        raise DegenerateDataError(f"no adoptions of {behavior!r}")
    days = [(t + offset_seconds) // day_seconds for t in times]
    first = min(days)
    counts = [0] * (max(days) - first + 1)
    for d in days:
        counts[d - first] += 1
    return gini(counts)


def pearson(xs, ys) -> tuple[float, float]:
    """Pearson r and two-sided p-value from a t distribution with n - 2 df."""
    if len(xs) != len(ys):
        raise ValueError("xs and ys differ in length")
    n = len(xs)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 pairs, got {n}")
    mx = sum(xs) / n
    my = sum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = sum(d * d for d in dx)
    syy = sum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise DegenerateDataError("zero variance")
    r = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return r, float(2 * stats.t.sf(abs(t), n - 2))


def analyze_behavior(log: AdoptionLog, behavior: str, max_k: int = 5, lower_offset: int = 0,
                     day_seconds: int = DAY_SECONDS) -> dict:
    intervals = build_behavior_intervals(log, behavior)
    upper = pk_curves(log, behavior, "upper", intervals)
    lower = pk_curves(log, behavior, "lower", intervals, lower_offset)
    try:
        label = classify_reinforcement(upper, lower)
    except InsufficientDataError:
        label = "insufficient-data"
    adopters = list(log.adoptions[behavior])
    sub = induced_subgraph(log.contact_graph(), adopters)
    clustering = graph_stats(sub).global_clustering if adopters else None
    rates = precise_rates_by_exposure(intervals, max_k)
    statuses = [iv.status for iv in intervals.intervals.values()]
    return {
        "behavior": behavior,
        "adopters": len(adopters),
        "innovators": statuses.count(Status.INNOVATOR),
        "precise": statuses.count(Status.PRECISE),
        "imprecise": statuses.count(Status.IMPRECISE),
        "classification": label,
        "lower_decreasing": lower.p(2) < lower.p(1),
        "clustering": clustering,
        "gini": burstiness_gini(log, behavior, day_seconds),
        "precise_rates": {str(k): r for k, (_, _, r) in rates["levels"].items()},
        "precise_rate_all": rates["all"][2],
        "upper": upper,
        "lower": lower,
        "intervals": intervals,
    }


def correlations(summaries: list[dict]) -> dict:
    """Pearson correlation of clustering and burstiness with a decreasing lower curve."""
    out = {}
    flags = [float(s["lower_decreasing"]) for s in summaries]
    for key in ("clustering", "gini"):
        pairs = [(s[key], f) for s, f in zip(summaries, flags) if s[key] is not None]
        try:
            r, p = pearson([a for a, _ in pairs], [b for _, b in pairs])
            out[key] = {"r": r, "p_value": p, "n": len(pairs)}
        except (InsufficientDataError, DegenerateDataError) as exc:
            out[key] = {"r": None, "p_value": None, "n": len(pairs), "note": str(exc)}
    return out


def write_curves_csv(rows: list[tuple[str, PkCurve]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for behavior, curve in rows:
            for k, (adopted, exposed, p) in curve.points.items():
                w.writerow((behavior, curve.variant, k, adopted, exposed, repr(round(p, 12))))


def summary_json(summary: dict) -> dict:
    """JSON-safe subset of :func:`analyze_behavior` output."""
    skip = {"upper", "lower", "intervals"}
    out = {k: v for k, v in summary.items() if k not in skip}
    out["p_upper"] = {str(k): v[2] for k, v in summary["upper"].points.items()}
    out["p_lower"] = {str(k): v[2] for k, v in summary["lower"].points.items()}
    return json.loads(json.dumps(out))
