"""Price-limit cascade on the stock-investor network.

One run starts from a set of shocked stocks that are failed at step 0.
At every later step each investor holding a stock that failed in the
previous step loses that holding (it is illiquid) and devalues the rest of
its portfolio by ``alpha * A_after / A_before``. A live stock fails once its
value has fallen by at least the limit ``c`` relative to its initial value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Iterable

import numpy as np

from .network import BipartiteNetwork
from .parallel import pmap


class CascadeError(ValueError):
    """Invalid cascade arguments."""


def check_params(alpha: float, c: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise CascadeError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0.0 < c < 1.0:
        raise CascadeError(f"c must lie in (0, 1), got {c}")


def shock_indices(net: BipartiteNetwork, shock: str | Iterable[str]) -> np.ndarray:
    if isinstance(shock, str):
        shock = [shock]
    ids = sorted(set(shock))
    if not ids:
        raise CascadeError("initial shock is empty")
    missing = [s for s in ids if s not in net.stock_index]
    if missing:
        raise CascadeError(f"shocked stocks not in network: {missing[:5]}")
    return np.array(sorted(net.stock_index[s] for s in ids), dtype=np.int64)


@dataclass
class CascadeState:
    """Mutable state of one cascade. Indices refer to the network arrays."""

    net: BipartiteNetwork
    tau: int
    live_weights: np.ndarray
    failed_this_step: np.ndarray
    infected_investors: np.ndarray
    failed_cumulative: np.ndarray

    @classmethod
    def start(cls, net: BipartiteNetwork, shock: np.ndarray) -> "CascadeState":
        failed = np.zeros(net.n_stocks, dtype=bool)
        failed[shock] = True
        return cls(
            net=net,
            tau=0,
            live_weights=np.array(net.weight_matrix),
            failed_this_step=np.asarray(shock, dtype=np.int64),
            infected_investors=net.holding_mask[shock].any(axis=0),
            failed_cumulative=failed,
        )

    @property
    def stock_value_now(self) -> np.ndarray:
        return self.live_weights.sum(axis=1)

    @property
    def investor_value_now(self) -> np.ndarray:
        return self.live_weights.sum(axis=0)

    def advance(self, alpha: float, c: float) -> np.ndarray:
        """Propagate the current frontier one step; return newly failed stocks."""
        W = self.live_weights
        L = self.infected_investors
        F = self.failed_this_step
        if L.any():
            sub = W[:, L]
            before = sub.sum(axis=0)
            sub[F, :] = 0.0
            after = sub.sum(axis=0)
            ratio = np.divide(after, before, out=np.zeros_like(after), where=before > 0)
            sub *= alpha * ratio
            W[:, L] = sub
        W[F, :] = 0.0
        self.tau += 1

        S0 = self.net.stock_value
        S = W.sum(axis=1)
        live = ~self.failed_cumulative & (S0 > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            hit = (S - S0) / S0 <= -c
        new = np.flatnonzero(live & hit)
        self.failed_cumulative[new] = True
        self.failed_this_step = new
        self.infected_investors = self.net.holding_mask[new].any(axis=0)
        return new


@dataclass
class CascadeResult:
    """Outcome of one cascade run."""

    shock: tuple[str, ...]
    alpha: float
    c: float
    failure_timeline: list[tuple[int, tuple[str, ...]]]
    final_failed_fraction: float
    steps: int
    surviving_market_value: float
    truncated: bool = False
    market_value: list[float] = field(default_factory=list)

    @property
    def failed(self) -> frozenset[str]:
        return frozenset(s for _, group in self.failure_timeline for s in group)

    def failure_step(self) -> dict[str, int]:
        return {s: tau for tau, group in self.failure_timeline for s in group}


def _run(
    net: BipartiteNetwork,
    shock: np.ndarray,
    alpha: float,
    c: float,
    max_steps: int,
    stop_fraction: float | None = None,
) -> tuple[CascadeState, list[tuple[int, np.ndarray]], list[float], bool]:
    state = CascadeState.start(net, shock)
    timeline = [(0, state.failed_this_step)]
    values = [float(state.stock_value_now[~state.failed_cumulative].sum())]
    n = net.n_stocks
    truncated = False
    while len(state.failed_this_step):
        if stop_fraction is not None and state.failed_cumulative.sum() >= stop_fraction * n:
            break
        if state.tau >= max_steps:
            truncated = True
            break
        new = state.advance(alpha, c)
        values.append(float(state.live_weights[~state.failed_cumulative].sum()))
        if len(new):
            timeline.append((state.tau, new))
    return state, timeline, values, truncated


def run_cascade(
    net: BipartiteNetwork,
    initial_shock: str | Iterable[str],
    alpha: float,
    c: float,
    max_steps: int | None = None,
) -> CascadeResult:
    """Run one cascade to completion.

    ``max_steps`` defaults to the number of stocks, which bounds any cascade
    since every step either fails a stock or ends the run.
    """
    check_params(alpha, c)
    shock = shock_indices(net, initial_shock)
    if max_steps is None:
        max_steps = net.n_stocks
    if max_steps < 1:
        raise CascadeError("max_steps must be positive")
    state, timeline, values, truncated = _run(net, shock, alpha, c, max_steps)
    names = net.stocks
    n_failed = int(state.failed_cumulative.sum())
    return CascadeResult(
        shock=tuple(names[i] for i in shock),
        alpha=alpha,
        c=c,
        failure_timeline=[(tau, tuple(names[i] for i in idx)) for tau, idx in timeline],
        final_failed_fraction=n_failed / net.n_stocks,
        steps=state.tau,
        surviving_market_value=values[-1],
        truncated=truncated,
        market_value=values,
    )


def failed_fraction(
    net: BipartiteNetwork,
    shock: np.ndarray,
    alpha: float,
    c: float,
    max_steps: int | None = None,
    stop_fraction: float | None = None,
) -> float:
    """Final failed fraction only; may stop once ``stop_fraction`` is reached.

    Index-level fast path used by the bisection and sweeps.
    """
    state, *_ = _run(net, shock, alpha, c, max_steps or net.n_stocks, stop_fraction)
    return int(state.failed_cumulative.sum()) / net.n_stocks


def _single(stock: str, net: BipartiteNetwork, alpha: float, c: float, max_steps: int | None) -> CascadeResult:
    return run_cascade(net, stock, alpha, c, max_steps)


def run_all_single_shocks(
    net: BipartiteNetwork,
    alpha: float,
    c: float,
    max_steps: int | None = None,
    workers: int = 1,
) -> dict[str, CascadeResult]:
    """Shock every stock in turn, each from a pristine state."""
    check_params(alpha, c)
    results = pmap(partial(_single, net=net, alpha=alpha, c=c, max_steps=max_steps), net.stocks, workers)
    return dict(zip(net.stocks, results))
