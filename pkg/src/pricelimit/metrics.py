"""Structural stock metrics: nestedness, branching, k-core, degree correlations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .network import BipartiteNetwork, StockGraph, stock_projection


def nestedness(net: BipartiteNetwork, i: str, j: str) -> float:
    """Share of ``i``'s investors that also hold ``j``. Not symmetric."""
    a = net.holders(i)
    if not a:
        raise ValueError(f"{i} has no investors")
    if i == j:
        return 1.0
    return len(a & net.holders(j)) / len(a)


def branching(net: BipartiteNetwork, i: str) -> float:
    """Largest portfolio size among ``i``'s investors over ``i``'s own degree."""
    k = net.stock_index[i]
    holders = net.stock_holders[k]
    if len(holders) == 0:
        raise ValueError(f"{i} has no investors")
    return int(net.investor_degree[holders].max()) / len(holders)


def _common_counts(net: BipartiteNetwork):
    B = net.adjacency
    return (B @ B.T).tocsr()


def average_nestedness(net: BipartiteNetwork, i: str) -> float:
    """Mean nestedness of ``i`` on the stocks it shares an investor with.

    NaN when ``i`` has no such neighbour.
    """
    return all_average_nestedness(net)[net.stock_index[i]]


def all_average_nestedness(net: BipartiteNetwork) -> np.ndarray:
    C = _common_counts(net)
    deg = net.stock_degree.astype(float)
    row_sum = np.asarray(C.sum(axis=1)).ravel() - deg  # drop the diagonal
    n_nbrs = np.diff(C.indptr) - (C.diagonal() > 0)
    out = np.full(net.n_stocks, np.nan)
    ok = (n_nbrs > 0) & (deg > 0)
    out[ok] = row_sum[ok] / deg[ok] / n_nbrs[ok]
    return out


def all_branching(net: BipartiteNetwork) -> np.ndarray:
    out = np.full(net.n_stocks, np.nan)
    for k, holders in enumerate(net.stock_holders):
        if len(holders):
            out[k] = net.investor_degree[holders].max() / len(holders)
    return out


def k_core_index(graph: StockGraph) -> dict[str, int]:
    """Core number of every stock in the projection."""
    return {k: int(v) for k, v in nx.core_number(graph.to_networkx()).items()}


def bipartite_k_core_index(net: BipartiteNetwork) -> dict[str, int]:
    """Core number of stocks computed on the stock-investor graph itself."""
    g = nx.Graph()
    g.add_nodes_from(("s", s) for s in net.stocks)
    g.add_nodes_from(("m", m) for m in net.investors)
    g.add_edges_from(
        (("s", net.stocks[s]), ("m", net.investors[m])) for s, m in zip(net.edge_stock, net.edge_investor)
    )
    core = nx.core_number(g)
    return {s: int(core[("s", s)]) for s in net.stocks}


def knn_degree(net: BipartiteNetwork) -> tuple[dict[int, float], dict[int, float]]:
    """Average nearest-neighbour degree per degree class, for stocks and investors.

    For each node the mean degree of its cross-side neighbours is taken, then
    averaged over nodes of equal degree.
    """
    ds, dm = net.stock_degree, net.investor_degree
    B = net.adjacency
    stock_knn = np.asarray(B @ dm).ravel() / np.maximum(ds, 1)
    inv_knn = np.asarray(B.T @ ds).ravel() / np.maximum(dm, 1)

    def by_class(deg, knn):
        out = {}
        for k in np.unique(deg[deg > 0]):
            out[int(k)] = float(knn[deg == k].mean())
        return out

    return by_class(ds, stock_knn), by_class(dm, inv_knn)


@dataclass
class StockMetrics:
    stock_id: str
    degree: int
    branching: float
    average_nestedness: float
    k_core: int
    p_d: float
    nestedness_on: dict[str, float] = field(default_factory=dict, repr=False)


def stock_metrics(
    net: BipartiteNetwork,
    p_d: dict[str, float],
    kcore_graph: str = "projection",
    with_profiles: bool = False,
) -> list[StockMetrics]:
    if kcore_graph == "projection":
        core = k_core_index(stock_projection(net))
    elif kcore_graph == "bipartite":
        core = bipartite_k_core_index(net)
    else:
        raise ValueError(f"unknown k-core graph {kcore_graph!r}")
    avg = all_average_nestedness(net)
    br = all_branching(net)
    C = _common_counts(net) if with_profiles else None
    rows = []
    for k, s in enumerate(net.stocks):
        prof = {}
        if C is not None:
            deg = net.stock_degree[k]
            for j, n in zip(C.indices[C.indptr[k] : C.indptr[k + 1]], C.data[C.indptr[k] : C.indptr[k + 1]]):
                if j != k:
                    prof[net.stocks[j]] = n / deg
        rows.append(
            StockMetrics(
                stock_id=s,
                degree=int(net.stock_degree[k]),
                branching=float(br[k]),
                average_nestedness=float(avg[k]),
                k_core=core[s],
                p_d=p_d.get(s, math.nan),
                nestedness_on=prof,
            )
        )
    return rows
