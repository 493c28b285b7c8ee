"""Slow, obviously-correct reference implementations used only by the tests."""

from __future__ import annotations

from collections import defaultdict


def naive_cascade(records, shock, alpha, c, max_steps=None):
    """Recompute every quantity from plain dicts at each step.

    Returns ``(timeline, failed, steps, truncated)`` with the timeline as a
    list of ``(tau, sorted stock ids)``.
    """
    w = defaultdict(float)
    for inv, stock, value in records:
        w[(stock, inv)] += value
    stocks = sorted({s for s, _ in w})
    S0 = {s: sum(v for (t, _), v in w.items() if t == s) for s in stocks}
    if max_steps is None:
        max_steps = len(stocks)
    frontier = set([shock] if isinstance(shock, str) else shock)
    failed = set(frontier)
    timeline = [(0, sorted(frontier))]
    tau = 0
    truncated = False
    while frontier:
        if tau >= max_steps:
            truncated = True
            break
        infected = {m for (s, m) in w if s in frontier}
        factor = {}
        for m in infected:
            before = sum(v for (s, mm), v in w.items() if mm == m)
            after = sum(v for (s, mm), v in w.items() if mm == m and s not in frontier)
            factor[m] = alpha * (after / before if before > 0 else 0.0)
        nxt = {}
        for (s, m), v in w.items():
            if s in frontier:
                continue
            nxt[(s, m)] = v * factor[m] if m in infected else v
        w = defaultdict(float, nxt)
        tau += 1
        new = set()
        for s in stocks:
            if s in failed:
                continue
            now = sum(v for (t, _), v in w.items() if t == s)
            if (now - S0[s]) / S0[s] <= -c:
                new.add(s)
        failed |= new
        if new:
            timeline.append((tau, sorted(new)))
        frontier = new
    return timeline, failed, tau, truncated


def peel_core_numbers(nodes, edges):
    """k-core index by repeatedly deleting every node of degree < k."""
    adj = {v: set() for v in nodes}
    for a, b in edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    core = {v: 0 for v in nodes}
    alive = set(nodes)
    k = 0
    while alive:
        k += 1
        changed = True
        while changed:
            changed = False
            for v in sorted(alive):
                if len(adj[v] & alive) < k:
                    alive.discard(v)
                    changed = True
        for v in alive:
            core[v] = k
    return core


def structural_p_d(records):
    """P_D by set inclusion: shocks whose holders contain all of i's investors."""
    holders = defaultdict(set)
    for inv, stock, _ in records:
        holders[stock].add(inv)
    n = len(holders)
    out = {}
    for i, hi in holders.items():
        out[i] = sum(1 for j, hj in holders.items() if j != i and hi <= hj) / n
    return out
