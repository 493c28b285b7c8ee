"""Critical market confidence, per-neighbour thresholds and driving nodes."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import partial
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .contagion import check_params, failed_fraction, run_all_single_shocks
from .network import BipartiteNetwork
from .parallel import pmap

log = logging.getLogger(__name__)

OK = "ok"
CANNOT_FAIL = "cannot-fail"
UNAVOIDABLE = "unavoidable"
INDETERMINATE = "indeterminate"
ALWAYS = "always-collapses"
NEVER = "never-collapses"


class DomainError(ValueError):
    """Threshold undefined for the given stock pair."""


@dataclass(frozen=True)
class NeighborThreshold:
    """Confidence needed to keep ``target`` alive one step after ``shock``."""

    value: float
    flag: str = OK


@dataclass(frozen=True)
class CriticalAlpha:
    """Bisection outcome. Sentinels carry the boundary value they pin to."""

    value: float
    status: str = OK

    @property
    def is_sentinel(self) -> bool:
        return self.status != OK


def _pair(net: BipartiteNetwork, shock: str, target: str) -> tuple[int, int]:
    if shock == target:
        raise DomainError("target must differ from the shocked stock")
    j = net.stock_index[shock]
    i = net.stock_index[target]
    return j, i


def _split(net: BipartiteNetwork, j: int, i: int):
    """Target's weights split by whether the holder also holds the shock."""
    L = net.holding_mask[j]
    inside: list[tuple[int, float]] = []
    outside = 0.0
    for m, w in zip(net.stock_holders[i], net.stock_holder_weights[i]):
        if L[m]:
            inside.append((int(m), float(w)))
        else:
            outside += float(w)
    if not inside:
        raise DomainError(f"{net.stocks[i]} shares no investor with {net.stocks[j]}")
    return inside, outside


def _threshold(c: float, total: float, outside: float, denom: float) -> NeighborThreshold:
    if denom <= 0:
        return NeighborThreshold(math.nan, INDETERMINATE)
    # written as (1-c)*(S/D) - O/D so a fully nested target gives exactly 1-c
    value = float((1 - c) * (total / denom) - outside / denom)
    if value < 0:
        return NeighborThreshold(0.0, CANNOT_FAIL)
    if value > 1:
        return NeighborThreshold(value, UNAVOIDABLE)
    return NeighborThreshold(value, OK)


def neighbor_alpha_c(net: BipartiteNetwork, shock: str, target: str, c: float) -> NeighborThreshold:
    """Exact one-step threshold, including the shock's share of each portfolio."""
    j, i = _pair(net, shock, target)
    inside, outside = _split(net, j, i)
    W0, A0 = net.weight_matrix, net.investor_value
    held = 0.0
    denom = 0.0
    for m, w in inside:
        held += w
        denom += (1 - W0[j, m] / A0[m]) * w
    return _threshold(c, held + outside, outside, denom)


def neighbor_alpha_c_simplified(net: BipartiteNetwork, shock: str, target: str, c: float) -> NeighborThreshold:
    """Threshold with the shock's portfolio share taken as negligible."""
    j, i = _pair(net, shock, target)
    inside, outside = _split(net, j, i)
    held = 0.0
    for _, w in inside:
        held += w
    return _threshold(c, held + outside, outside, held)


def neighbor_thresholds(net: BipartiteNetwork, j: int, c: float, simplified: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised thresholds for every neighbour of stock index ``j``.

    Returns ``(neighbour_indices, values)``; values are unclamped.
    """
    W0 = net.weight_matrix
    L = net.holding_mask[j].astype(float)
    held = W0 @ L
    outside = W0 @ (1.0 - L)
    total = held + outside
    if simplified:
        denom = held
    else:
        r = 1.0 - np.divide(W0[j], net.investor_value, out=np.zeros(net.n_investors), where=L > 0)
        denom = W0 @ (L * r)
    nbr = np.flatnonzero(held > 0)
    nbr = nbr[nbr != j]
    d = denom[nbr]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (1 - c) * (total[nbr] / d) - outside[nbr] / d
    return nbr, vals


# bisection ---------------------------------------------------------------


def _collapsed(net, j, alpha, c, threshold, max_steps) -> bool:
    shock = np.array([j])
    return failed_fraction(net, shock, alpha, c, max_steps, stop_fraction=threshold) >= threshold


def _find(net: BipartiteNetwork, j: int, c: float, threshold: float, tol: float, max_steps: int | None) -> CriticalAlpha:
    if _collapsed(net, j, 1.0, c, threshold, max_steps):
        return CriticalAlpha(1.0, ALWAYS)
    if not _collapsed(net, j, 0.0, c, threshold, max_steps):
        return CriticalAlpha(0.0, NEVER)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _collapsed(net, j, mid, c, threshold, max_steps):
            lo = mid
        else:
            hi = mid
    return CriticalAlpha(0.5 * (lo + hi))


def find_alpha_c(
    net: BipartiteNetwork,
    shock: str,
    c: float,
    collapse_threshold: float = 0.5,
    tol: float = 1e-3,
    max_steps: int | None = None,
) -> CriticalAlpha:
    """Locate the confidence at which a single-stock shock stops collapsing the market.

    Collapse means the final failed fraction reaches ``collapse_threshold``.
    The search bisects on [0, 1] assuming collapse is non-increasing in alpha.
    """
    check_params(1.0, c)
    if not 0 < collapse_threshold <= 1:
        raise ValueError("collapse_threshold must lie in (0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _find(net, net.stock_index[shock], c, collapse_threshold, tol, max_steps)


@dataclass
class SweepResult:
    grid: dict[tuple[float, float, str], tuple[float, bool]] = field(default_factory=dict)
    alpha_c_per_shock: dict[tuple[float, str], CriticalAlpha] = field(default_factory=dict)

    def aggregate(self) -> dict[float, dict[str, float]]:
        """Mean and max alpha_c per c; sentinels count at their boundary value."""
        by_c: dict[float, list[CriticalAlpha]] = defaultdict(list)
        for (c, _), a in self.alpha_c_per_shock.items():
            by_c[c].append(a)
        out = {}
        for c in sorted(by_c):
            vals = np.array([a.value for a in by_c[c]])
            out[c] = {
                "mean": float(vals.mean()),
                "max": float(vals.max()),
                "n_shocks": len(vals),
                "n_always": sum(a.status == ALWAYS for a in by_c[c]),
                "n_never": sum(a.status == NEVER for a in by_c[c]),
            }
        return out


def _bisect_task(task, net, threshold, tol, max_steps):
    j, c = task
    return _find(net, j, c, threshold, tol, max_steps)


def _grid_task(task, net, threshold, max_steps):
    j, c, alpha = task
    return failed_fraction(net, np.array([j]), alpha, c, max_steps)


def sweep(
    net: BipartiteNetwork,
    c_grid: Sequence[float],
    alpha_grid: Sequence[float] | None = None,
    shocks: Iterable[str] | None = None,
    collapse_threshold: float = 0.5,
    tol: float = 1e-3,
    max_steps: int | None = None,
    workers: int = 1,
) -> SweepResult:
    """Phase-boundary sweep over single-stock shocks.

    Always bisects for alpha_c per (c, shock); when ``alpha_grid`` is given the
    full (c, alpha, shock) grid of failed fractions is evaluated as well.
    """
    for c in c_grid:
        check_params(1.0, c)
    names = list(net.stocks) if shocks is None else sorted(set(shocks))
    idx = [net.stock_index[s] for s in names]
    res = SweepResult()
    tasks = [(j, c) for c in c_grid for j in idx]
    found = pmap(partial(_bisect_task, net=net, threshold=collapse_threshold, tol=tol, max_steps=max_steps), tasks, workers)
    for (j, c), a in zip(tasks, found):
        res.alpha_c_per_shock[(c, net.stocks[j])] = a
    if alpha_grid is not None:
        gtasks = [(j, c, a) for c in c_grid for a in alpha_grid for j in idx]
        fr = pmap(partial(_grid_task, net=net, threshold=collapse_threshold, max_steps=max_steps), gtasks, workers)
        for (j, c, a), f in zip(gtasks, fr):
            res.grid[(c, a, net.stocks[j])] = (f, f >= collapse_threshold)
    return res


# driving nodes -----------------------------------------------------------


def driving_node_probability(net: BipartiteNetwork, c: float, equality_tol: float = 0.0) -> dict[str, float]:
    """Fraction of single-stock shocks for which each stock sits at the 1-c threshold."""
    check_params(1.0, c)
    if equality_tol < 0:
        raise ValueError("equality_tol must be non-negative")
    counts = np.zeros(net.n_stocks, dtype=np.int64)
    target = 1 - c
    for j in range(net.n_stocks):
        nbr, vals = neighbor_thresholds(net, j, c, simplified=True)
        counts[nbr[np.abs(vals - target) <= equality_tol]] += 1
    return {s: float(counts[k] / net.n_stocks) for k, s in enumerate(net.stocks)}


@dataclass
class MaxThresholdHistogram:
    edges: np.ndarray
    fractions: np.ndarray
    max_per_shock: dict[str, float]
    fraction_at_boundary: float
    n_without_neighbors: int


def default_bins(n_bins: int = 9) -> np.ndarray:
    """Bin edges centred on 0.1, 0.2, ... so each 1-c value sits mid-bin."""
    step = 1.0 / (n_bins + 1)
    inner = [step * (k + 1.5) for k in range(n_bins - 1)]
    return np.array([-np.inf, *inner, np.inf])


def max_alpha_ci_histogram(
    net: BipartiteNetwork, c: float, bins: np.ndarray | None = None, equality_tol: float = 1e-9
) -> MaxThresholdHistogram:
    """Per shock, the largest simplified neighbour threshold, binned."""
    check_params(1.0, c)
    edges = default_bins() if bins is None else np.asarray(bins, dtype=float)
    maxima: dict[str, float] = {}
    lonely = 0
    for j in range(net.n_stocks):
        _, vals = neighbor_thresholds(net, j, c, simplified=True)
        if len(vals) == 0:
            lonely += 1
            continue
        maxima[net.stocks[j]] = float(np.max(vals))
    m = np.array(list(maxima.values()))
    slot = np.searchsorted(edges[1:-1], m, side="right")
    counts = np.bincount(slot, minlength=len(edges) - 1)
    frac = counts / max(len(m), 1)
    at = float(np.mean(np.abs(m - (1 - c)) <= equality_tol)) if len(m) else 0.0
    return MaxThresholdHistogram(edges, frac, maxima, at, lonely)


@dataclass
class CascadeSteps:
    mean_step: dict[str, float]
    n_never_failed: int
    correlation: float
    p_value: float


def average_cascade_steps(
    net: BipartiteNetwork,
    c: float,
    alpha: float,
    p_d: dict[str, float] | None = None,
    max_steps: int | None = None,
    workers: int = 1,
) -> CascadeSteps:
    """Mean failure step of each stock over the shocks that bring it down.

    A stock's own shock is not counted. Stocks that never fail are left out.
    Also returns the Pearson correlation of the mean step with P_D.
    """
    results = run_all_single_shocks(net, alpha, c, max_steps, workers)
    steps: dict[str, list[int]] = defaultdict(list)
    for shock, res in results.items():
        for tau, group in res.failure_timeline:
            if tau == 0:
                continue
            for s in group:
                steps[s].append(tau)
    mean_step = {s: float(np.mean(steps[s])) for s in net.stocks if steps[s]}
    never = net.n_stocks - len(mean_step)
    if p_d is None:
        p_d = driving_node_probability(net, c)
    xs = [mean_step[s] for s in mean_step]
    ys = [p_d[s] for s in mean_step]
    r, p = pearson(xs, ys)
    return CascadeSteps(mean_step, never, r, p)


def pearson(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan, math.nan
    res = stats.pearsonr(x, y)
    return float(res.statistic), float(res.pvalue)
