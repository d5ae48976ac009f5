"""Optional PNG renderings of the plot-data files (``--figures``)."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def precision_by_level(by_level: dict, path, title: str = "") -> Path:
    """Bar chart of the precise share per EAA level (``as_dict`` layout)."""
    levels = sorted(int(k) for k in by_level)
    rates = [by_level[str(k)]["rate"] for k in levels]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(levels, rates, color="0.4")
    ax.set_xlabel("exposure at activation")
    ax.set_ylabel("share precisely measured")
    ax.set_ylim(0, 1)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def table1(rows: list[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    x = [r["mean_degree"] for r in rows]
    ax.plot(x, [r["mean_activations"] for r in rows], "o-", label="activations")
    ax.plot(x, [r["mean_precise"] for r in rows], "s-", label="precisely measured")
    ax.set_xlabel("mean degree")
    ax.set_ylabel("nodes per cascade")
    ax.legend()
    return _save(fig, path)


def atlas_scatter(points: list[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    for always, colour in ((0, "tab:blue"), (1, "tab:red")):
        sel = [p for p in points if p["always_uncertain"] == always]
        ax.scatter(
            [p["graph_index"] for p in sel],
            [p["mean_precise_fraction"] for p in sel],
            s=14, c=colour, alpha=0.7,
            label="always uncertain" if always else "can be fully precise",
        )
    ax.set_xlabel("graph")
    ax.set_ylabel("mean share precise")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=8)
    return _save(fig, path)


def figure4(panels: dict[str, dict], path) -> Path:
    """Histogram grid: true critical values against EAA per panel."""
    names = sorted(panels)
    cols = 3
    rows = max(1, math.ceil(len(names) / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3 * rows), squeeze=False)
    for ax in axes.flat[len(names):]:
        ax.axis("off")
    for ax, name in zip(axes.flat, names):
        true, eaa = panels[name]["true"], panels[name]["eaa"]
        lo = min(true + eaa, default=0.0)
        hi = max(true + eaa, default=1.0)
        bins = 30 if hi - lo > 0 else 1
        ax.hist(true, bins=bins, range=(lo, hi or 1), alpha=0.6, label="true")
        ax.hist(eaa, bins=bins, range=(lo, hi or 1), alpha=0.6, label="EAA")
        ax.set_title(name)
    axes.flat[0].legend(fontsize=8)
    return _save(fig, path)


def rmse_by_degree(rows: list[dict], path) -> Path:
    series = defaultdict(list)
    for r in rows:
        series[r["strategy"]].append((r["mean_degree"], r["rmse"]))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, pts in series.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=name)
    ax.set_xlabel("mean degree")
    ax.set_ylabel("RMSE")
    ax.legend(fontsize=8)
    return _save(fig, path)


def pk_pair(behavior: str, upper, lower, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for curve, style in ((upper, "o-"), (lower, "s--")):
        ks = sorted(curve.points)
        ax.plot(ks, [curve.points[k][2] for k in ks], style, label=f"p_{curve.variant[0].upper()}(k)")
    ax.set_xlabel("k (adopting neighbors)")
    ax.set_ylabel("p(k)")
    ax.set_title(behavior)
    ax.legend()
    return _save(fig, path)
