"""Threshold intervals recovered from cascade traces.

A node that updates without activating at exposure ``lo`` and later activates
at exposure ``hi`` has its threshold inside ``(lo, hi]``. The exposure at
activation (EAA) is the upper end; the threshold is pinned exactly when the
bracketing updates are separated by a single neighbor activation.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from opacity.cascade import CascadeTrace

_TOL = 1e-9


class Status(str, Enum):
    PRECISE = "precise"
    IMPRECISE = "imprecise"
    INNOVATOR = "innovator-by-assumption"
    NEVER_ACTIVATED = "never-activated"


class NoActivationError(LookupError):
    """The node never activated in the trace."""


@dataclass(frozen=True)
class ThresholdInterval:
    """``lower`` is None when unbounded; ``upper`` is None for non-adopters."""

    node: int
    lower: float | None
    upper: float | None
    status: Status

    @property
    def width(self) -> float:
        if self.lower is None or self.upper is None:
            return math.inf
        return self.upper - self.lower

    def is_precise(self, innovators_precise: bool = True) -> bool:
        if self.status is Status.INNOVATOR:
            return innovators_precise
        return self.status is Status.PRECISE


def eaa(trace: CascadeTrace, node: int) -> float:
    """Exposure recorded at the node's first activating update."""
    for ev in trace.events_for(node):
        if ev.activated_now:
            return ev.exposure
    raise NoActivationError(f"node {node} never activated")


def classify(interval: ThresholdInterval, unit: float = 1.0) -> Status:
    """Condition-1 status of an interval.

    ``unit`` is the exposure change produced by one neighbor activating
    (1 for counts, ``1 / degree`` for fractional exposure). Intervals of any
    other width, including the degenerate width 0, are imprecise.
    """
    if interval.status in (Status.INNOVATOR, Status.NEVER_ACTIVATED):
        return interval.status
    if interval.lower is None or interval.upper is None:
        return Status.IMPRECISE
    if abs(interval.width - unit) <= _TOL * max(1.0, unit):
        return Status.PRECISE
    return Status.IMPRECISE


def build_interval(trace: CascadeTrace, node: int) -> ThresholdInterval:
    """Interval for one node.

    The lower end is the exposure at the latest non-activating update whose
    exposure is below the EAA. For the threshold and pull models that is
    simply the previous update; under push dynamics a node can be re-checked
    at unchanged exposure, and such repeats carry no new information.
    """
    if node not in trace.nodes:
        raise KeyError(f"unknown node {node}")
    events = trace.events_for(node)
    for pos, ev in enumerate(events):
        if ev.activated_now:
            upper = ev.exposure
            break
    else:
        seen = [ev.exposure for ev in events]
        return ThresholdInterval(node, max(seen) if seen else None, None, Status.NEVER_ACTIVATED)

    if abs(upper) <= _TOL:
        return ThresholdInterval(node, 0.0, upper, Status.INNOVATOR)
    lower = None
    for ev in reversed(events[:pos]):
        if ev.exposure < upper - _TOL:
            lower = ev.exposure
            break
    draft = ThresholdInterval(node, lower, upper, Status.IMPRECISE)
    return ThresholdInterval(node, lower, upper, classify(draft, trace.exposure_unit(node)))


def build_intervals(trace: CascadeTrace) -> dict[int, ThresholdInterval]:
    return {v: build_interval(trace, v) for v in trace.nodes}


@dataclass
class MeasurementSummary:
    """Counts pooled over traces. Innovators are kept out of ``by_level``."""

    n_traces: int
    activations: int
    innovators: int
    precise: int
    imprecise: int
    by_level: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def mean_activations(self) -> float:
        return self.activations / self.n_traces

    @property
    def mean_precise(self) -> float:
        return self.precise / self.n_traces

    @property
    def precise_rate(self) -> float:
        measured = self.precise + self.imprecise
        return self.precise / measured if measured else math.nan

    def rate(self, level: int) -> float:
        precise, total = self.by_level.get(level, (0, 0))
        return precise / total if total else math.nan

    def as_dict(self) -> dict:
        return {
            "n_traces": self.n_traces,
            "activations": self.activations,
            "innovators": self.innovators,
            "precise": self.precise,
            "imprecise": self.imprecise,
            "mean_activations": self.mean_activations,
            "mean_precise": self.mean_precise,
            "precise_rate": self.precise_rate,
            "by_level": {
                str(k): {"precise": p, "total": t, "rate": p / t}
                for k, (p, t) in sorted(self.by_level.items())
            },
        }


def measurement_summary(traces: Iterable[CascadeTrace]) -> MeasurementSummary:
    """Precise/imprecise counts, grouped by EAA in neighbor units."""
    traces = list(traces)
    if not traces:
        raise ValueError("measurement_summary needs at least one trace")
    levels: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    activations = innovators = precise = imprecise = 0
    for trace in traces:
        for iv in build_intervals(trace).values():
            if iv.status is Status.NEVER_ACTIVATED:
                continue
            activations += 1
            if iv.status is Status.INNOVATOR:
                innovators += 1
                continue
            level = round(iv.upper / trace.exposure_unit(iv.node))
            levels[level][1] += 1
            if iv.status is Status.PRECISE:
                precise += 1
                levels[level][0] += 1
            else:
                imprecise += 1
    return MeasurementSummary(
        n_traces=len(traces),
        activations=activations,
        innovators=innovators,
        precise=precise,
        imprecise=imprecise,
        by_level={k: tuple(v) for k, v in sorted(levels.items())},
    )


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def write_intervals_csv(intervals: Iterable[ThresholdInterval], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("node", "lower", "upper", "status"))
        for iv in intervals:
            writer.writerow((iv.node, _fmt(iv.lower), _fmt(iv.upper), iv.status.value))


def read_intervals_csv(path) -> list[ThresholdInterval]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(
                ThresholdInterval(
                    int(row["node"]),
                    float(row["lower"]) if row["lower"] else None,
                    float(row["upper"]) if row["upper"] else None,
                    Status(row["status"]),
                )
            )
    return out
