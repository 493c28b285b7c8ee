"""Small hand-checkable fixtures and seeded synthetic markets."""

from __future__ import annotations

import numpy as np

from .network import BipartiteNetwork, from_edges, load_holdings


def toy_t1() -> BipartiteNetwork:
    """C1 holds S2, S3; C2 holds S1, S2; unit weights."""
    return load_holdings([("C1", "S2", 1.0), ("C1", "S3", 1.0), ("C2", "S1", 1.0), ("C2", "S2", 1.0)])


def toy_t2() -> BipartiteNetwork:
    """One investor holding two unit positions."""
    return load_holdings([("C", "S1", 1.0), ("C", "S2", 1.0)])


def star(n_stocks: int, weight: float = 1.0) -> BipartiteNetwork:
    """A single investor holding every stock."""
    return load_holdings([("C0", f"S{i:03d}", weight) for i in range(n_stocks)])


def _names(prefix: str, n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def random_bipartite(n_stocks: int, n_investors: int, n_edges: int, seed: int, weight: float = 1.0) -> BipartiteNetwork:
    """Uniform random bipartite graph with exactly ``n_edges`` equal-weight edges."""
    rng = np.random.default_rng(seed)
    flat = rng.choice(n_stocks * n_investors, size=n_edges, replace=False)
    s, m = np.divmod(flat, n_investors)
    return from_edges(_names("S", n_stocks), _names("C", n_investors), zip(s, m, np.full(n_edges, weight)))


def nested_market(
    n_stocks: int = 200,
    n_investors: int = 20,
    seed: int = 0,
    largest_share: float = 0.4,
    smallest_share: float = 0.15,
    noise: float = 0.1,
    weight_sigma: float = 0.5,
    n_bridges: int = 2,
    bridge_weight: float = 0.01,
) -> BipartiteNetwork:
    """Market with strongly nested portfolios.

    One investor holds every stock. The others hold a popularity-ranked
    prefix of the stocks, from ``largest_share`` down to ``smallest_share``
    of the market, so a stock's holders are nested in those of every more
    popular stock. ``noise`` moves that fraction of each small portfolio to
    uniformly random stocks inside the popular block; the unpopular tail stays
    held by the largest investor alone apart from ``n_bridges`` token
    positions of size ``bridge_weight`` per small investor. Other weights are
    lognormal.
    """
    rng = np.random.default_rng(seed)
    held = np.zeros((n_stocks, n_investors), dtype=bool)
    held[:, 0] = True
    shares = np.linspace(largest_share, smallest_share, n_investors - 1)
    popular = int(round(largest_share * n_stocks))
    for k, f in enumerate(shares, start=1):
        size = max(1, int(round(f * n_stocks)))
        picks = np.arange(size)
        pool = np.setdiff1d(np.arange(popular), picks)
        n_move = min(int(round(noise * size)), len(pool))
        if n_move:
            drop = rng.choice(size, n_move, replace=False)
            picks = np.concatenate([np.delete(picks, drop), rng.choice(pool, n_move, replace=False)])
        held[picks, k] = True
    s, m = np.nonzero(held)
    w = rng.lognormal(0.0, weight_sigma, size=len(s))
    if n_bridges and popular < n_stocks:
        bs, bm = [], []
        for k in range(1, n_investors):
            tail = rng.choice(np.arange(popular, n_stocks), min(n_bridges, n_stocks - popular), replace=False)
            bs.extend(tail)
            bm.extend([k] * len(tail))
        s = np.concatenate([s, bs])
        m = np.concatenate([m, bm])
        w = np.concatenate([w, np.full(len(bs), bridge_weight)])
    return from_edges(_names("S", n_stocks), _names("C", n_investors), zip(s, m, w))


def branching_ladder(portfolio_sizes: list[int], n_shared: int = 5, seed: int = 0) -> BipartiteNetwork:
    """Investors of varying portfolio size, each with private stocks.

    Investor k holds ``portfolio_sizes[k] - n_shared`` private stocks plus
    ``n_shared`` stocks common to all investors. Private stocks have average
    nestedness 1 and branching equal to their investor's portfolio size.
    """
    rng = np.random.default_rng(seed)
    recs = []
    for k, size in enumerate(portfolio_sizes):
        if size <= n_shared:
            raise ValueError("portfolio must exceed the shared block")
        for q in range(size - n_shared):
            recs.append((f"C{k:02d}", f"P{k:02d}_{q:03d}", float(rng.lognormal())))
        for q in range(n_shared):
            recs.append((f"C{k:02d}", f"X{q:02d}", float(rng.lognormal())))
    return load_holdings(recs)


def core_periphery(
    n_core_investors: int = 6,
    n_core_stocks: int = 30,
    n_periphery: int = 12,
    seed: int = 0,
) -> BipartiteNetwork:
    """Densely overlapping core with peripheral chains hanging off it.

    Core investors all hold every core stock. Each peripheral investor holds
    a few private stocks and one large core position, so a shock at a
    private stock spreads through its investor into the core.
    """
    rng = np.random.default_rng(seed)
    recs = []
    for k in range(n_core_investors):
        for q in range(n_core_stocks):
            recs.append((f"K{k:02d}", f"CORE{q:03d}", float(rng.uniform(0.5, 1.5))))
    for p in range(n_periphery):
        inv = f"P{p:02d}"
        for q in range(3):
            recs.append((inv, f"EDGE{p:02d}_{q}", 1.0))
        core_stock = f"CORE{rng.integers(n_core_stocks):03d}"
        recs.append((inv, core_stock, float(n_core_investors * 1.5)))
    return load_holdings(recs)
