"""Threshold regression on precisely measured nodes.

Thresholds are generated from a single node covariate as
``h = alpha + beta * x + eps`` (clamped at 0). Three ways of recovering them
from a cascade are compared:

* ``eaa``: the exposure at activation itself;
* ``all-active-model``: OLS of EAA on ``x`` over every activated node;
* ``precise-subset-model``: OLS of the (exact) EAA on ``x`` over precisely
  measured non-innovators only, then predicted for every activated node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from opacity.measurement import Status, ThresholdInterval

STRATEGIES = ("eaa", "all-active-model", "precise-subset-model")


class InsufficientDataError(ValueError):
    pass


class DegenerateDesignError(ValueError):
    pass


@dataclass(frozen=True)
class NodeCovariates:
    x: np.ndarray
    noise: np.ndarray
    thresholds: np.ndarray


@dataclass(frozen=True)
class ThresholdModelFit:
    alpha: float
    beta: float
    n_used: int
    residual_rmse: float

    def predict(self, x):
        return self.alpha + self.beta * np.asarray(x, dtype=float)


def draw_covariates(
    n: int,
    rng: np.random.Generator,
    alpha: float = 5.0,
    beta: float = 3.0,
    noise_sd: float = 1.0,
    covariate: str = "normal",
) -> NodeCovariates:
    """Covariates and thresholds ``max(0, alpha + beta * x + eps)``.

    ``covariate="integer"`` draws ``x`` uniformly from {0, 1, 2, 3}, which with
    integer coefficients and ``noise_sd=0`` yields whole-number thresholds.
    """
    if covariate == "normal":
        x = rng.standard_normal(n)
    elif covariate == "integer":
        x = rng.integers(0, 4, size=n).astype(float)
    else:
        raise ValueError(f"unknown covariate distribution {covariate!r}")
    noise = rng.standard_normal(n) * noise_sd if noise_sd > 0 else np.zeros(n)
    h = np.maximum(alpha + beta * x + noise, 0.0)
    return NodeCovariates(x=x, noise=noise, thresholds=h)


def fit_ols(pairs: Sequence[tuple[float, float]]) -> ThresholdModelFit:
    """Closed-form simple linear regression of y on x."""
    if len(pairs) < 3:
        raise InsufficientDataError(f"need at least 3 points, got {len(pairs)}")
    xy = np.asarray(pairs, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx <= 1e-12 * max(1.0, float(x @ x)):
        raise DegenerateDesignError("x is constant; slope is not identified")
    beta = float(dx @ (y - y.mean())) / sxx
    alpha = float(y.mean() - beta * x.mean())
    resid = y - (alpha + beta * x)
    return ThresholdModelFit(alpha, beta, len(x), float(math.sqrt(np.mean(resid**2))))


def estimate_thresholds(
    strategy: str,
    intervals: Mapping[int, ThresholdInterval],
    covariates: Mapping[int, float],
) -> tuple[dict[int, float], int]:
    """Predicted threshold per activated node, and the number of fit observations.

    ``covariates`` maps node -> x. The EAA strategy fits nothing and reports
    the number of activated nodes.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    activated = [
        iv for iv in intervals.values() if iv.status is not Status.NEVER_ACTIVATED
    ]
    if strategy == "eaa":
        return {iv.node: iv.upper for iv in activated}, len(activated)
    if strategy == "all-active-model":
        used = activated
    else:
        used = [iv for iv in activated if iv.status is Status.PRECISE]
    fit = fit_ols([(covariates[iv.node], iv.upper) for iv in used])
    return {iv.node: float(fit.predict(covariates[iv.node])) for iv in activated}, fit.n_used


def rmse(predictions: Mapping[int, float], truths: Mapping[int, float]) -> float:
    """Root mean squared error over the nodes present in both mappings."""
    common = predictions.keys() & truths.keys()
    if not common:
        raise ValueError("no nodes in common between predictions and truths")
    sq = [(predictions[v] - truths[v]) ** 2 for v in common]
    return math.sqrt(sum(sq) / len(sq))


def rmse_report(
    predictions: Mapping[str, Mapping[int, float]],
    truths: Mapping[int, float],
    baseline: float = 1.0,
) -> dict[str, float]:
    """RMSE of each strategy as a multiple of ``baseline`` (the noise sd)."""
    return {name: rmse(pred, truths) / baseline for name, pred in predictions.items()}
