"""Command line for simulating cascades and measuring threshold intervals.

Exit codes: 0 success, 1 configuration or invariant failure, 2 IO or parse
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
from collections import Counter, defaultdict
from pathlib import Path

import yaml

from opacity import experiments as ex
from opacity.atlas import plot_points, survey, survey_summary, write_survey_csv
from opacity.cascade import replicate, write_trace_csv
from opacity.estimation import STRATEGIES
from opacity.eventlog import (
    LogParseError,
    analyze_behavior,
    correlations,
    ingest_log,
    summary_json,
    trace_to_log,
    write_curves_csv,
    write_log,
)
from opacity.graph import derive_subseed, write_edgelist
from opacity.measurement import build_intervals, write_intervals_csv

log = logging.getLogger("opacity")

EXIT_OK, EXIT_INVARIANT, EXIT_IO = 0, 1, 2

_ACCEPTS = {
    "simulate": ("simulate", "table1", "figure4"),
    "atlas": ("atlas",),
    "estimate": ("estimate",),
    "analyze-log": ("analyze-log",),
}


class InvariantFailure(RuntimeError):
    pass


# output helpers -------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: NaN becomes null, tuples become lists."""
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "_"


def _mean(xs) -> float:
    xs = [x for x in xs if not (isinstance(x, float) and math.isnan(x))]
    return sum(xs) / len(xs) if xs else math.nan


# config ---------------------------------------------------------------------


def resolve_config(args) -> dict:
    cfg: dict = {}
    if args.preset:
        cfg = ex.load_preset(args.preset)
    if args.config:
        cfg = ex.merge(cfg, ex.load_config(args.config))
    overrides = {"seed": args.seed, "replications": args.replications}
    if getattr(args, "log_dir", None):
        overrides["log_dir"] = args.log_dir
    cfg = ex.merge(cfg, overrides)
    cfg.setdefault("kind", args.command)
    if cfg["kind"] not in _ACCEPTS[args.command]:
        raise ex.ConfigError(f"`{args.command}` cannot run a {cfg['kind']!r} configuration")
    return ex.validate(cfg)


def _check_files(cfg: dict) -> None:
    path = cfg.get("graph", {}).get("path")
    if cfg.get("graph", {}).get("kind") == "edgelist" and not Path(path or "").is_file():
        raise FileNotFoundError(f"edge list not found: {path}")


def _raise_if_unsound(violations: int) -> None:
    # outputs are already written so the offending runs can be inspected
    if violations:
        raise InvariantFailure(f"{violations} interval soundness violations")


# simulate ----------------------------------------------------------------------


def _pool_levels(rows) -> dict:
    pooled: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    for row in rows:
        for level, (p, t) in row["by_level"].items():
            pooled[level][0] += p
            pooled[level][1] += t
    return {
        str(k): {"precise": p, "total": t, "rate": p / t}
        for k, (p, t) in sorted(pooled.items())
    }


def _aggregate(rows) -> dict:
    n = len(rows)
    imprecise = [r["imprecise"] for r in rows]
    return {
        "replications": n,
        "mean_activations": sum(r["activations"] for r in rows) / n,
        "mean_innovators": sum(r["innovators"] for r in rows) / n,
        "mean_precise": sum(r["precise"] for r in rows) / n,
        "mean_imprecise": sum(imprecise) / n,
        "min_imprecise": min(imprecise),
        "max_imprecise": max(imprecise),
        "runs_with_eaa_above_truth": sum(r["eaa_above_truth"] > 0 for r in rows),
        "min_overestimated_imprecise": min(r["overestimated_imprecise"] for r in rows),
        "max_overestimated_imprecise": max(r["overestimated_imprecise"] for r in rows),
        "soundness_violations": sum(r["violations"] for r in rows),
        "by_level": _pool_levels(rows),
    }


def cmd_simulate(cfg: dict, out: Path, jobs: int, figures: bool) -> dict:
    keep = bool(cfg.get("write_traces") or cfg.get("export_log"))
    reps = cfg.get("replications", 1)
    rows = replicate(ex.SimulationJob(cfg, keep_runs=keep), reps, cfg["seed"], jobs)
    write_rows(
        out / "replications.csv",
        ("replication", "activations", "innovators", "precise", "imprecise",
         "eaa_above_truth", "overestimated_imprecise", "violations"),
        [(i, r["activations"], r["innovators"], r["precise"], r["imprecise"],
          r["eaa_above_truth"], r["overestimated_imprecise"], r["violations"])
         for i, r in enumerate(rows)],
    )
    for i, row in enumerate(rows if keep else ()):
        run = row["run"]
        tag = f"rep_{i:04d}"
        if cfg.get("write_traces"):
            for sub in ("traces", "intervals", "graphs"):
                (out / sub).mkdir(exist_ok=True)
            write_trace_csv(run.trace, out / "traces" / f"{tag}.csv")
            write_edgelist(run.graph, out / "graphs" / f"{tag}.tsv")
            write_intervals_csv(build_intervals(run.trace).values(), out / "intervals" / f"{tag}.csv")
            write_json({
                "replication": i,
                "seed": derive_subseed(cfg["seed"], i),
                "graph_file": f"graphs/{tag}.tsv",
                "trace_file": f"traces/{tag}.csv",
                "intervals_file": f"intervals/{tag}.csv",
                "graph": cfg.get("graph"),
                "contagion": cfg.get("contagion"),
            }, out / "traces" / f"{tag}.json")
        if cfg.get("export_log"):
            adoption_log = trace_to_log(run.trace, run.graph, "g", int(cfg.get("time_scale", 1)))
            write_log(adoption_log, out / "logs" / tag)
    summary = {"kind": "simulate", "seed": cfg["seed"], **_aggregate(rows)}
    write_json(summary, out / "summary.json")
    if figures:
        from opacity import figures as fig

        fig.precision_by_level(summary["by_level"], out / "precision_by_level.png")
    _raise_if_unsound(summary["soundness_violations"])
    return summary


def _degree_configs(cfg: dict):
    for m in cfg.get("m_values", [cfg["graph"].get("m")]):
        sub = ex.merge(cfg, {"graph": {"m": m}})
        yield 2 * m, sub


def cmd_table1(cfg: dict, out: Path, jobs: int, figures: bool) -> dict:
    table = []
    for mean_degree, sub in _degree_configs(cfg):
        log.info("table1: mean degree %s", mean_degree)
        rows = replicate(ex.SimulationJob(sub), sub.get("replications", 1), sub["seed"], jobs)
        table.append({"mean_degree": mean_degree, **_aggregate(rows)})
    write_rows(
        out / "table1.csv",
        ("mean_degree", "replications", "mean_activations", "mean_precise", "mean_innovators", "mean_imprecise"),
        [(r["mean_degree"], r["replications"], r["mean_activations"], r["mean_precise"],
          r["mean_innovators"], r["mean_imprecise"]) for r in table],
    )
    summary = {"kind": "table1", "seed": cfg["seed"], "rows": table}
    write_json(summary, out / "summary.json")
    if figures:
        from opacity import figures as fig

        fig.table1(table, out / "table1.png")
    _raise_if_unsound(sum(r["soundness_violations"] for r in table))
    return summary


def _panel_stats(true: list[float], eaa: list[float]) -> dict:
    n = len(eaa)
    return {
        "n": n,
        "distinct_true": len({round(v, 9) for v in true}),
        "distinct_eaa": len({round(v, 9) for v in eaa}),
        "mean_true": _mean(true),
        "mean_eaa": _mean(eaa),
        "share_eaa_above_true": sum(e > t + 1e-9 for t, e in zip(true, eaa)) / n if n else math.nan,
        "share_eaa_at_one": sum(abs(e - 1.0) < 1e-9 for e in eaa) / n if n else math.nan,
    }


def cmd_figure4(cfg: dict, out: Path, jobs: int, figures: bool) -> dict:
    panels = {}
    rows = []
    for name, contagion in sorted(cfg.get("panels", {}).items()):
        sub = {k: v for k, v in cfg.items() if k != "panels"}
        sub["contagion"] = contagion
        res = replicate(ex.Figure4Job(sub, name), sub.get("replications", 1), cfg["seed"], jobs)
        true = [v for r in res for v in r["true"]]
        eaa = [v for r in res for v in r["eaa"]]
        panels[name] = {"true": true, "eaa": eaa, "violations": sum(r["violations"] for r in res)}
        rows.extend((name, t, e) for t, e in zip(true, eaa))
    write_rows(out / "figure4.csv", ("panel", "true", "eaa"), rows)
    summary = {
        "kind": "figure4",
        "seed": cfg["seed"],
        "panels": {
            k: {**_panel_stats(v["true"], v["eaa"]), "soundness_violations": v["violations"]}
            for k, v in panels.items()
        },
    }
    write_json(summary, out / "summary.json")
    if figures:
        from opacity import figures as fig

        fig.figure4(panels, out / "figure4.png")
    _raise_if_unsound(sum(v["violations"] for v in panels.values()))
    return summary


# atlas ---------------------------------------------------------------------------


def cmd_atlas(cfg: dict, out: Path, jobs: int, figures: bool) -> dict:
    records = survey(
        cfg.get("min_order", 2),
        cfg.get("max_order", 4),
        cfg.get("runs_per_combo", 100),
        cfg["seed"],
        cfg.get("innovators_precise", True),
    )
    write_survey_csv(records, out / "survey.csv")
    points = plot_points(records)
    write_rows(
        out / "figure3_points.csv",
        ("graph_index", "graph_id", "thresholds", "mean_uncertain", "mean_precise_fraction", "always_uncertain"),
        [(p["graph_index"], p["graph_id"], p["thresholds"], p["mean_uncertain"],
          p["mean_precise_fraction"], p["always_uncertain"]) for p in points],
    )
    summary = {"kind": "atlas", "seed": cfg["seed"], **survey_summary(records)}
    write_json(summary, out / "summary.json")
    if figures:
        from opacity import figures as fig

        fig.atlas_scatter(points, out / "figure3.png")
    return summary


# estimate ------------------------------------------------------------------------


def cmd_estimate(cfg: dict, out: Path, jobs: int, figures: bool) -> dict:
    score_on = cfg.get("score_on", "activated")
    if score_on not in ("activated", "imprecise"):
        raise ex.ConfigError("score_on must be 'activated' or 'imprecise'")
    noise_sd = cfg.get("contagion", {}).get("thresholds", {}).get("noise_sd", 1.0)
    report, detail = [], []
    violations = 0
    for mean_degree, sub in _degree_configs(cfg):
        log.info("estimate: mean degree %s", mean_degree)
        res = replicate(ex.EstimationJob(sub, score_on), sub.get("replications", 1), sub["seed"], jobs)
        violations += sum(r["violations"] for r in res)
        for i, r in enumerate(res):
            for s in STRATEGIES:
                detail.append((mean_degree, i, s, r["rmse"][s], r["n_fit"][s], r["n_scored"]))
        for s in STRATEGIES:
            report.append({
                "mean_degree": mean_degree,
                "strategy": s,
                "rmse": _mean([r["rmse"][s] for r in res]),
                "n_fit": _mean([r["n_fit"][s] for r in res]),
                "n_scored": _mean([r["n_scored"] for r in res]),
            })
    header = ("mean_degree", "strategy", "rmse", "n_fit", "n_scored")
    write_rows(out / "rmse_report.csv", header, [tuple(r[h] for h in header) for r in report])
    write_rows(out / "rmse_detail.csv", ("mean_degree", "replication") + header[1:], detail)
    summary = {
        "kind": "estimate",
        "seed": cfg["seed"],
        "score_on": score_on,
        "baseline": noise_sd,
        "soundness_violations": violations,
        "rows": report,
        "relative": {
            f"{r['mean_degree']}:{r['strategy']}": (r["rmse"] / noise_sd if noise_sd else None)
            for r in report
        },
    }
    write_json(summary, out / "summary.json")
    if figures:
        from opacity import figures as fig

        fig.rmse_by_degree(report, out / "figure5.png")
    _raise_if_unsound(violations)
    return summary


# analyze-log -----------------------------------------------------------------------


def cmd_analyze_log(cfg: dict, out: Path, jobs: int, figures: bool) -> dict:
    if not cfg.get("log_dir"):
        raise ex.ConfigError("analyze-log needs --log DIR or log_dir in the config")
    adoption_log = ingest_log(cfg["log_dir"])
    behaviors = cfg.get("behaviors") or adoption_log.behaviors
    unknown = [b for b in behaviors if b not in adoption_log.adoptions]
    if unknown:
        raise ex.ConfigError(f"behaviors not in log: {', '.join(unknown)}")
    results = [
        analyze_behavior(
            adoption_log, b,
            max_k=cfg.get("max_k", 5),
            lower_offset=cfg.get("lower_offset", 0),
            day_seconds=cfg.get("day_seconds", 86400),
        )
        for b in behaviors
    ]
    curves = []
    (out / "intervals").mkdir(exist_ok=True)
    for r in results:
        curves += [(r["behavior"], r["upper"]), (r["behavior"], r["lower"])]
        ivs = sorted(r["intervals"].intervals.values(), key=lambda iv: iv.node)
        write_intervals_csv(ivs, out / "intervals" / f"{_safe(r['behavior'])}.csv")
    write_curves_csv(curves, out / "curves.csv")
    summary = {
        "kind": "analyze-log",
        "behaviors": {r["behavior"]: summary_json(r) for r in results},
        "classification_counts": dict(sorted(Counter(r["classification"] for r in results).items())),
        "correlations": correlations(results) if len(results) >= 3 else None,
    }
    write_json(summary, out / "summary.json")
    if figures:
        from opacity import figures as fig

        for r in results:
            fig.pk_pair(r["behavior"], r["upper"], r["lower"], out / f"pk_{_safe(r['behavior'])}.png")
    return summary


_DISPATCH = {
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "figure4": cmd_figure4,
    "atlas": cmd_atlas,
    "estimate": cmd_estimate,
    "analyze-log": cmd_analyze_log,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opacity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    subs = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run cascades (presets: triad, table1, figure4, divergence)",
        "atlas": "survey all small graphs and threshold assignments (preset: figure3)",
        "estimate": "compare threshold estimators (presets: figure5, noiseless)",
        "analyze-log": "threshold intervals and p(k) curves from an adoption log",
    }
    for name, text in helps.items():
        sp = subs.add_parser(name, help=text)
        sp.add_argument("--config", type=Path, help="YAML configuration file")
        sp.add_argument("--preset", choices=ex.PRESETS, help="bundled configuration")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--replications", type=int, help="override the replication count")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--figures", action="store_true", help="also render PNG figures")
        if name == "analyze-log":
            sp.add_argument("--log", dest="log_dir", type=Path, help="directory with the three log CSVs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
        if cfg.get("log_dir") is not None:
            cfg["log_dir"] = str(cfg["log_dir"])
        _check_files(cfg)
        if args.jobs < 1:
            raise ex.ConfigError("--jobs must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        summary = _DISPATCH[cfg["kind"]](cfg, args.out, args.jobs, args.figures)
    except (LogParseError, OSError, yaml.YAMLError) as exc:
        print(f"opacity: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvariantFailure, ValueError, KeyError) as exc:
        print(f"opacity: error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    log.info("wrote %s", args.out)
    print(json.dumps(_clean(_headline(summary)), sort_keys=True))
    return EXIT_OK


def _headline(summary: dict) -> dict:
    """Compact stdout line; full results live in the output directory."""
    keep = {k: v for k, v in summary.items() if not isinstance(v, (dict, list))}
    return keep


if __name__ == "__main__":
    sys.exit(main())
