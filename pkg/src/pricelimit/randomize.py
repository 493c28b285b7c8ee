"""Partial edge randomisation and the alpha_c-versus-c slope it produces."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Sequence

import numpy as np
from scipy import stats

from .critical import NEVER, CriticalAlpha, _find
from .network import BipartiteNetwork
from .parallel import pmap

log = logging.getLogger(__name__)

FIT_FLOOR = 0.02


class RewireError(ValueError):
    pass


@dataclass(frozen=True)
class RewirePlan:
    p: float
    trials: int = 600
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise RewireError(f"p must lie in [0, 1], got {self.p}")
        if self.trials < 1:
            raise RewireError("trials must be positive")


def partial_rewire(net: BipartiteNetwork, p: float, seed: int | np.random.SeedSequence, weight: float = 1.0) -> BipartiteNetwork:
    """Replace ``floor(p * E)`` uniformly chosen edges by uniformly random new ones.

    New edges avoid pairs held by a kept edge or an earlier new edge. All
    output weights equal ``weight``. Node sets are unchanged, so stocks may
    end up isolated.
    """
    if not 0.0 <= p <= 1.0:
        raise RewireError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    E = net.n_edges
    M = net.n_investors
    k = int(math.floor(p * E))
    flat = net.edge_stock * M + net.edge_investor
    drop = rng.choice(E, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
    kept = np.delete(flat, drop)
    free = np.setdiff1d(np.arange(net.n_stocks * M), kept, assume_unique=False)
    if len(free) < k:
        raise RewireError(f"cannot place {k} new edges: only {len(free)} free pairs")
    new = rng.choice(free, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
    edges = np.sort(np.concatenate([kept, new]))
    s, m = np.divmod(edges, M)
    return BipartiteNetwork(net.stocks, net.investors, s, m, np.full(len(edges), float(weight)))


def trial_seed(seed: int, p: float, trial: int) -> np.random.SeedSequence:
    """Generator seed for one trial; independent of scheduling."""
    return np.random.SeedSequence([seed, int(round(p * 1_000_000)), trial])


def _trial(task, net, c_grid, threshold, tol, max_steps):
    p, t, seed = task
    rng = np.random.default_rng(trial_seed(seed, p, t))
    g = partial_rewire(net, p, rng)
    candidates = np.flatnonzero(g.stock_degree > 0)
    j = int(rng.choice(candidates))
    return [_find(g, j, c, threshold, tol, max_steps) for c in c_grid]


@dataclass
class LineFit:
    slope: float
    intercept: float
    r2: float
    n_points: int


@dataclass
class RandomizationResult:
    c_grid: list[float]
    mean_alpha_c: dict[float, list[float]]
    n_excluded: dict[float, list[int]]
    fits: dict[float, LineFit]


def fit_line(c_grid: Sequence[float], alpha_c: Sequence[float], floor: float = FIT_FLOOR) -> LineFit:
    """Least-squares line through points whose alpha_c is at least ``floor``."""
    x = np.asarray(c_grid, dtype=float)
    y = np.asarray(alpha_c, dtype=float)
    keep = y >= floor
    if keep.sum() < 2:
        return LineFit(math.nan, math.nan, math.nan, int(keep.sum()))
    res = stats.linregress(x[keep], y[keep])
    return LineFit(float(res.slope), float(res.intercept), float(res.rvalue**2), int(keep.sum()))


def randomization_experiment(
    net: BipartiteNetwork,
    p_list: Sequence[float],
    trials: int,
    c_grid: Sequence[float],
    collapse_threshold: float = 0.5,
    tol: float = 1e-3,
    seed: int = 0,
    max_steps: int | None = None,
    workers: int = 1,
) -> RandomizationResult:
    """Rewire, shock one random stock, and bisect alpha_c on each c; per p, fit a line.

    Trials where bisection returns a sentinel enter the mean at their boundary
    value (0 or 1) and are counted in ``n_excluded``.
    """
    for p in p_list:
        RewirePlan(p, trials, seed)
    tasks = [(p, t, seed) for p in p_list for t in range(trials)]
    out = pmap(
        partial(_trial, net=net, c_grid=list(c_grid), threshold=collapse_threshold, tol=tol, max_steps=max_steps),
        tasks,
        workers,
    )
    means: dict[float, list[float]] = {}
    excluded: dict[float, list[int]] = {}
    fits: dict[float, LineFit] = {}
    for p in p_list:
        rows: list[list[CriticalAlpha]] = [r for (pp, _, _), r in zip(tasks, out) if pp == p]
        means[p] = [float(np.mean([row[k].value for row in rows])) for k in range(len(c_grid))]
        excluded[p] = [sum(row[k].is_sentinel for row in rows) for k in range(len(c_grid))]
        fits[p] = fit_line(c_grid, means[p])
        log.info("p=%g slope=%.3f intercept=%.3f", p, fits[p].slope, fits[p].intercept)
    return RandomizationResult(list(c_grid), means, excluded, fits)


def never_collapse_share(results: list[CriticalAlpha]) -> float:
    return sum(r.status == NEVER for r in results) / max(len(results), 1)
