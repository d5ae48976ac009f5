"""Experiment configuration and per-replication jobs.

A configuration is a nested mapping (loaded from YAML by the CLI)::

    kind: simulate
    seed: 7
    replications: 200
    graph: {kind: plc, n: 1000, m: 6, p_triangle: 0.1}
    contagion:
      model: threshold            # threshold | si-pull | si-push
      thresholds: {distribution: linear, alpha: 5, beta: 3, noise_sd: 1}

Each replication draws its own graph, thresholds and update order from
seeds split off the replication seed, so results do not depend on how many
replications run or in which order.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from importlib import resources
from typing import Any

import numpy as np
import yaml

from opacity.cascade import (
    CascadeTrace,
    SIConfig,
    ThresholdAssignment,
    run_si_pull,
    run_si_push,
    run_threshold_cascade,
)
from opacity.estimation import STRATEGIES, draw_covariates, estimate_thresholds, rmse
from opacity.graph import (
    Graph,
    ParameterError,
    derive_subseed,
    generate_ba,
    generate_plc,
    generate_ws,
    read_edgelist,
)
from opacity.measurement import Status, build_intervals, measurement_summary

KINDS = ("simulate", "atlas", "estimate", "analyze-log", "figure4", "table1")
PRESETS = ("triad", "table1", "figure3", "figure4", "figure5", "noiseless", "divergence")

GRAPH_SEED, THRESHOLD_SEED, DYNAMICS_SEED = 0, 1, 2


class ConfigError(ValueError):
    pass


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("opacity.presets").joinpath(f"{name}.yaml").read_text("utf-8")
    return yaml.safe_load(text)


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        elif value is not None:
            out[key] = value
    return out


def validate(cfg: dict) -> dict:
    if cfg.get("kind") not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}")
    if cfg.get("seed") is None and cfg["kind"] != "analyze-log":
        raise ConfigError("a seed is required")
    reps = cfg.get("replications", 1)
    if not isinstance(reps, int) or reps < 1:
        raise ConfigError(f"replications must be a positive integer, got {reps!r}")
    return cfg


# graphs -------------------------------------------------------------------

_FIXED = {
    "triad": (3, [(0, 1), (0, 2), (1, 2)]),
}


def build_graph(spec: dict, seed) -> Graph:
    kind = spec.get("kind")
    if kind == "ba":
        return generate_ba(spec["n"], spec["m"], seed)
    if kind == "plc":
        return generate_plc(spec["n"], spec["m"], spec.get("p_triangle", 0.1), seed)
    if kind == "ws":
        return generate_ws(spec["n"], spec["k_ring"], spec.get("p_rewire", 0.1), seed)
    if kind == "edgelist":
        return read_edgelist(spec["path"])
    if kind == "path":
        n = spec["n"]
        return Graph(range(n), [(i, i + 1) for i in range(n - 1)])
    if kind == "star":
        leaves = spec["leaves"]
        return Graph(range(leaves + 1), [(0, i) for i in range(1, leaves + 1)])
    if kind == "complete":
        n = spec["n"]
        return Graph(range(n), [(i, j) for i in range(n) for j in range(i + 1, n)])
    if kind in _FIXED:
        n, edges = _FIXED[kind]
        return Graph(range(n), edges)
    raise ConfigError(f"unknown graph kind {kind!r}")


# thresholds ---------------------------------------------------------------


def draw_thresholds(spec: dict, g: Graph, rng: np.random.Generator) -> tuple[ThresholdAssignment, np.ndarray | None]:
    """Threshold assignment for ``g`` and, for linear thresholds, the covariate vector."""
    dist = spec.get("distribution", "constant")
    mode = spec.get("mode")
    nodes = g.nodes
    n = len(nodes)
    x = None
    if dist == "explicit":
        values = np.asarray(spec["values"], dtype=float)
        if len(values) != n:
            raise ConfigError(f"explicit thresholds need {n} values, got {len(values)}")
        mode = mode or "integer"
    elif dist == "constant":
        values = np.full(n, float(spec["value"]))
        mode = mode or ("fractional" if spec["value"] < 1 else "integer")
    elif dist == "linear":
        cov = draw_covariates(
            n, rng,
            alpha=spec.get("alpha", 5.0), beta=spec.get("beta", 3.0),
            noise_sd=spec.get("noise_sd", 1.0), covariate=spec.get("covariate", "normal"),
        )
        values, x = cov.thresholds, cov.x
        mode = mode or "real"
        if mode == "integer":
            values = np.ceil(values)
    elif dist == "normal":
        values = rng.normal(spec.get("mean", 5.0), spec.get("sd", 1.0), n)
        mode = mode or "integer"
        values = np.maximum(np.rint(values), 0.0) if mode == "integer" else np.maximum(values, 0.0)
    elif dist == "exponential":
        values = rng.exponential(spec.get("scale", 3.0), n)
        mode = mode or "integer"
        if mode == "integer":
            values = np.rint(values)
        elif mode == "fractional":
            values = values / values.max()
    else:
        raise ConfigError(f"unknown threshold distribution {dist!r}")

    seed_nodes: list[int] = []
    share = spec.get("seed_fraction", 0.0)
    if share:
        k = max(1, int(round(share * n)))
        picks = rng.choice(n, size=k, replace=False)
        seed_nodes = [nodes[i] for i in sorted(picks)]
    assignment = ThresholdAssignment(mode, dict(zip(nodes, values.tolist())), frozenset(seed_nodes))
    return assignment, x


def _pick_innovators(spec: dict, g: Graph, rng: np.random.Generator) -> list[int]:
    chosen = spec.get("innovators", 1)
    if isinstance(chosen, list):
        return [int(v) for v in chosen]
    share = spec.get("innovator_fraction")
    k = max(1, int(round(share * g.node_count))) if share else int(chosen)
    picks = rng.choice(g.node_count, size=k, replace=False)
    return [g.nodes[i] for i in sorted(picks)]


@dataclass
class RunOutput:
    """One replication: the trace plus the ground truth it was generated from."""

    graph: Graph
    trace: CascadeTrace
    truth: dict[int, float]
    covariates: dict[int, float] | None = None
    seeds: frozenset = frozenset()
    kind: str = "threshold"


def run_once(cfg: dict, rep_seed: int) -> RunOutput:
    contagion = cfg.get("contagion", {})
    model = contagion.get("model", "threshold")
    g = build_graph(cfg["graph"], derive_subseed(rep_seed, GRAPH_SEED))
    rng = np.random.default_rng(derive_subseed(rep_seed, THRESHOLD_SEED))
    dyn_seed = derive_subseed(rep_seed, DYNAMICS_SEED)
    if model == "threshold":
        assignment, x = draw_thresholds(contagion.get("thresholds", {}), g, rng)
        trace = run_threshold_cascade(g, assignment, dyn_seed)
        cov = dict(zip(g.nodes, x.tolist())) if x is not None else None
        return RunOutput(g, trace, dict(assignment.values), cov, assignment.seed_nodes, model)
    if model in ("si-pull", "si-push"):
        si = SIConfig(contagion.get("p", 0.2), model.split("-")[1])
        innovators = _pick_innovators(contagion, g, rng)
        runner = run_si_pull if si.dynamics == "pull" else run_si_push
        trace, critical = runner(g, si, innovators, dyn_seed)
        return RunOutput(g, trace, {k: float(v) for k, v in critical.items()}, None,
                         frozenset(innovators), model)
    raise ConfigError(f"unknown contagion model {model!r}")


def soundness_violations(out: RunOutput, tol: float = 1e-9) -> list[str]:
    """Interval containment failures against the known critical values.

    Every activated non-seed node with a lower bound must satisfy
    ``lower < h <= upper``; innovators only ``h <= upper``. In integer mode a
    precise node must have ``upper == h`` exactly. Push runs get only the
    upper check: their critical value counts attempts received, and active
    neighbors that have not pushed yet still add to exposure.
    """
    problems = []
    integer = out.kind == "threshold" and not out.trace.fractional and all(
        float(h).is_integer() for h in out.truth.values()
    )
    for v, iv in build_intervals(out.trace).items():
        if iv.status is Status.NEVER_ACTIVATED or v in out.seeds or v not in out.truth:
            continue
        h = out.truth[v]
        if h > iv.upper + tol:
            problems.append(f"node {v}: h={h} above upper={iv.upper}")
        if iv.status is Status.INNOVATOR or out.kind == "si-push":
            continue
        if iv.lower is not None and not iv.lower < h - tol:
            problems.append(f"node {v}: h={h} not above lower={iv.lower}")
        if integer and iv.status is Status.PRECISE and iv.upper != h:
            problems.append(f"node {v}: precise but upper={iv.upper} != h={h}")
    return problems


@dataclass
class SimulationJob:
    """Picklable per-replication callable returning summary rows (and the run if kept)."""

    cfg: dict
    keep_runs: bool = False

    def __call__(self, rep_seed: int) -> dict:
        out = run_once(self.cfg, rep_seed)
        summary = measurement_summary([out.trace])
        over, over_imprecise = _overestimates(out)
        row: dict[str, Any] = {
            "activations": summary.activations,
            "innovators": summary.innovators,
            "precise": summary.precise,
            "imprecise": summary.imprecise,
            "by_level": summary.by_level,
            "eaa_above_truth": over,
            "overestimated_imprecise": over_imprecise,
            "violations": len(soundness_violations(out)),
        }
        if self.keep_runs:
            row["run"] = out
        return row


def _overestimates(out: RunOutput) -> tuple[int, int]:
    """Non-seed nodes whose EAA exceeds the truth, and how many of those are imprecise."""
    over = over_imprecise = 0
    intervals = build_intervals(out.trace)
    for ev in out.trace.events:
        if ev.activated_now and ev.node in out.truth and ev.node not in out.seeds:
            if ev.exposure > out.truth[ev.node] + 1e-9:
                over += 1
                over_imprecise += intervals[ev.node].status is Status.IMPRECISE
    return over, over_imprecise


@dataclass
class EstimationJob:
    """Per-replication threshold estimation for every strategy."""

    cfg: dict
    score_on: str = "activated"

    def __call__(self, rep_seed: int) -> dict:
        out = run_once(self.cfg, rep_seed)
        if out.covariates is None:
            raise ConfigError("estimation needs linear thresholds with a covariate")
        intervals = build_intervals(out.trace)
        activated = [v for v, iv in intervals.items() if iv.status is not Status.NEVER_ACTIVATED]
        if self.score_on == "imprecise":
            scored = [v for v in activated if intervals[v].status is Status.IMPRECISE]
        else:
            scored = activated
        truth = {v: out.truth[v] for v in scored}
        row: dict[str, Any] = {
            "activations": len(activated),
            "precise": sum(intervals[v].status is Status.PRECISE for v in activated),
            "innovators": sum(intervals[v].status is Status.INNOVATOR for v in activated),
            "n_scored": len(scored),
            "violations": len(soundness_violations(out)),
            "rmse": {},
            "n_fit": {},
        }
        for strategy in STRATEGIES:
            try:
                pred, n_fit = estimate_thresholds(strategy, intervals, out.covariates)
                row["rmse"][strategy] = rmse(pred, truth) if truth else math.nan
            except ValueError:
                row["rmse"][strategy], n_fit = math.nan, 0
            row["n_fit"][strategy] = n_fit
        return row


@dataclass
class Figure4Job:
    """True critical values vs EAA for one distribution panel."""

    cfg: dict
    panel: str = ""

    def __call__(self, rep_seed: int) -> dict:
        out = run_once(self.cfg, rep_seed)
        true_vals, eaa_vals = [], []
        for ev in out.trace.events:
            if not ev.activated_now or ev.node in out.seeds or ev.node not in out.truth:
                continue
            true_vals.append(out.truth[ev.node])
            eaa_vals.append(ev.exposure)
        return {"panel": self.panel, "true": true_vals, "eaa": eaa_vals,
                "violations": len(soundness_violations(out))}
