"""Weighted bipartite investor-stock network and its stock projection."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

Record = tuple[str, str, float]


class HoldingsError(ValueError):
    """Fatal problem with holdings input."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class BipartiteNetwork:
    """Immutable stock-investor holdings graph.

    Edges are stored as parallel arrays sorted by (stock, investor) index.
    Stock and investor identifiers are opaque strings; their position in
    ``stocks``/``investors`` is the dense index used by the array views.
    """

    stocks: tuple[str, ...]
    investors: tuple[str, ...]
    edge_stock: np.ndarray
    edge_investor: np.ndarray
    edge_weight: np.ndarray

    def __post_init__(self) -> None:
        if len(set(self.stocks)) != len(self.stocks):
            raise HoldingsError("duplicate stock identifiers")
        if len(set(self.investors)) != len(self.investors):
            raise HoldingsError("duplicate investor identifiers")
        si = np.asarray(self.edge_stock, dtype=np.int64)
        mi = np.asarray(self.edge_investor, dtype=np.int64)
        w = np.asarray(self.edge_weight, dtype=np.float64)
        if not (len(si) == len(mi) == len(w)):
            raise HoldingsError("edge arrays differ in length")
        if not np.all(np.isfinite(w)) or not np.all(w > 0):
            raise HoldingsError("edge weights must be finite and strictly positive")
        if len(si) and (si.min() < 0 or si.max() >= len(self.stocks) or mi.min() < 0 or mi.max() >= len(self.investors)):
            raise HoldingsError("edge endpoint out of range")
        order = np.lexsort((mi, si))
        si, mi, w = si[order], mi[order], w[order]
        if len(si) > 1:
            dup = (np.diff(si) == 0) & (np.diff(mi) == 0)
            if dup.any():
                raise HoldingsError("duplicate (stock, investor) edge")
        object.__setattr__(self, "edge_stock", _frozen(si))
        object.__setattr__(self, "edge_investor", _frozen(mi))
        object.__setattr__(self, "edge_weight", _frozen(w))

    # sizes -------------------------------------------------------------
    @property
    def n_stocks(self) -> int:
        return len(self.stocks)

    @property
    def n_investors(self) -> int:
        return len(self.investors)

    @property
    def n_edges(self) -> int:
        return len(self.edge_weight)

    # index lookups -----------------------------------------------------
    @cached_property
    def stock_index(self) -> dict[str, int]:
        return {s: k for k, s in enumerate(self.stocks)}

    @cached_property
    def investor_index(self) -> dict[str, int]:
        return {m: k for k, m in enumerate(self.investors)}

    # cached matrix views -----------------------------------------------
    @cached_property
    def weight_matrix(self) -> np.ndarray:
        """Dense (stocks x investors) matrix of initial weights."""
        W = np.zeros((self.n_stocks, self.n_investors))
        W[self.edge_stock, self.edge_investor] = self.edge_weight
        return _frozen(W)

    @cached_property
    def holding_mask(self) -> np.ndarray:
        """Dense boolean (stocks x investors) incidence."""
        B = np.zeros((self.n_stocks, self.n_investors), dtype=bool)
        B[self.edge_stock, self.edge_investor] = True
        return _frozen(B)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Sparse 0/1 incidence matrix, stocks x investors."""
        A = sp.csr_matrix(
            (np.ones(self.n_edges), (self.edge_stock, self.edge_investor)),
            shape=(self.n_stocks, self.n_investors),
        )
        return A

    @cached_property
    def stock_value(self) -> np.ndarray:
        """Initial market value of each stock (row sums)."""
        out = np.zeros(self.n_stocks)
        for s, ws in zip(*self._groups(self.edge_stock)):
            out[s] = math.fsum(ws)
        return _frozen(out)

    @cached_property
    def investor_value(self) -> np.ndarray:
        """Initial portfolio value of each investor (column sums)."""
        out = np.zeros(self.n_investors)
        order = np.argsort(self.edge_investor, kind="stable")
        mi = self.edge_investor[order]
        w = self.edge_weight[order]
        bounds = np.flatnonzero(np.diff(mi)) + 1
        for chunk_m, chunk_w in zip(np.split(mi, bounds), np.split(w, bounds)):
            if len(chunk_m):
                out[chunk_m[0]] = math.fsum(chunk_w)
        return _frozen(out)

    def _groups(self, keys: np.ndarray):
        bounds = np.flatnonzero(np.diff(keys)) + 1
        ks = [c[0] for c in np.split(keys, bounds) if len(c)]
        ws = [c for c in np.split(self.edge_weight, bounds) if len(c)]
        return ks, ws

    @cached_property
    def stock_degree(self) -> np.ndarray:
        return _frozen(np.bincount(self.edge_stock, minlength=self.n_stocks))

    @cached_property
    def investor_degree(self) -> np.ndarray:
        return _frozen(np.bincount(self.edge_investor, minlength=self.n_investors))

    @cached_property
    def stock_holders(self) -> tuple[np.ndarray, ...]:
        """Investor indices holding each stock, ascending."""
        ptr = np.concatenate([[0], np.cumsum(self.stock_degree)])
        return tuple(self.edge_investor[ptr[s] : ptr[s + 1]] for s in range(self.n_stocks))

    @cached_property
    def stock_holder_weights(self) -> tuple[np.ndarray, ...]:
        ptr = np.concatenate([[0], np.cumsum(self.stock_degree)])
        return tuple(self.edge_weight[ptr[s] : ptr[s + 1]] for s in range(self.n_stocks))

    @cached_property
    def investor_holdings(self) -> tuple[np.ndarray, ...]:
        """Stock indices held by each investor, ascending."""
        order = np.lexsort((self.edge_stock, self.edge_investor))
        ptr = np.concatenate([[0], np.cumsum(self.investor_degree)])
        si = self.edge_stock[order]
        return tuple(si[ptr[m] : ptr[m + 1]] for m in range(self.n_investors))

    # id-level accessors ------------------------------------------------
    @property
    def weights(self) -> dict[tuple[str, str], float]:
        return {
            (self.stocks[s], self.investors[m]): float(w)
            for s, m, w in zip(self.edge_stock, self.edge_investor, self.edge_weight)
        }

    def holders(self, stock: str) -> frozenset[str]:
        return frozenset(self.investors[m] for m in self.stock_holders[self.stock_index[stock]])

    def holdings(self, investor: str) -> frozenset[str]:
        return frozenset(self.stocks[s] for s in self.investor_holdings[self.investor_index[investor]])

    def weight(self, stock: str, investor: str) -> float:
        return float(self.weight_matrix[self.stock_index[stock], self.investor_index[investor]])

    def records(self) -> list[Record]:
        """Edges as (investor_id, stock_id, market_value) in canonical order."""
        return [(m, s, w) for (s, m), w in self.weights.items()]

    def __repr__(self) -> str:
        return (
            f"BipartiteNetwork(stocks={self.n_stocks}, investors={self.n_investors}, "
            f"edges={self.n_edges})"
        )


def from_edges(
    stocks: Sequence[str],
    investors: Sequence[str],
    edges: Iterable[tuple[int, int, float]],
) -> BipartiteNetwork:
    """Build a network from index-level edges; isolated nodes are kept."""
    e = list(edges)
    si = np.array([x[0] for x in e], dtype=np.int64)
    mi = np.array([x[1] for x in e], dtype=np.int64)
    w = np.array([x[2] for x in e], dtype=np.float64)
    return BipartiteNetwork(tuple(stocks), tuple(investors), si, mi, w)


def _parse_value(raw) -> float:
    v = float(raw)
    if not math.isfinite(v) or v <= 0:
        raise ValueError(f"market value must be finite and positive, got {raw!r}")
    return v


def load_holdings(records: Iterable[Sequence], *, first_line: int = 1, strict: bool = False) -> BipartiteNetwork:
    """Build a network from ``(investor_id, stock_id, market_value)`` records.

    Duplicate (investor, stock) pairs are summed with an exactly rounded sum,
    so the result does not depend on record order. Records with a missing,
    non-finite or non-positive value are rejected and logged with their line
    number (``first_line`` is the line of the first record); ``strict=True``
    turns the first rejection into an error.
    """
    parts: dict[tuple[str, str], list[float]] = defaultdict(list)
    rejected = 0
    for lineno, rec in enumerate(records, start=first_line):
        try:
            inv, stock, raw = rec
            value = _parse_value(raw)
        except (TypeError, ValueError) as exc:
            if strict:
                raise HoldingsError(f"line {lineno}: {exc}") from exc
            log.warning("line %d: rejected record %r (%s)", lineno, rec, exc)
            rejected += 1
            continue
        parts[(str(stock), str(inv))].append(value)
    if not parts:
        raise HoldingsError("no valid holdings records")

    stocks = sorted({s for s, _ in parts})
    investors = sorted({m for _, m in parts})
    s_ix = {s: k for k, s in enumerate(stocks)}
    m_ix = {m: k for k, m in enumerate(investors)}
    edges = [(s_ix[s], m_ix[m], math.fsum(v)) for (s, m), v in parts.items()]
    net = from_edges(stocks, investors, edges)
    log.info(
        "loaded %d stocks, %d investors, %d edges (%d records rejected)",
        net.n_stocks, net.n_investors, net.n_edges, rejected,
    )
    return net


def drop_isolated(net: BipartiteNetwork) -> BipartiteNetwork:
    """Remove stocks and investors without edges."""
    keep_s = np.flatnonzero(net.stock_degree > 0)
    keep_m = np.flatnonzero(net.investor_degree > 0)
    if len(keep_s) == net.n_stocks and len(keep_m) == net.n_investors:
        return net
    log.info("dropping %d isolated stocks", net.n_stocks - len(keep_s))
    s_new = np.full(net.n_stocks, -1)
    s_new[keep_s] = np.arange(len(keep_s))
    m_new = np.full(net.n_investors, -1)
    m_new[keep_m] = np.arange(len(keep_m))
    return BipartiteNetwork(
        tuple(net.stocks[s] for s in keep_s),
        tuple(net.investors[m] for m in keep_m),
        s_new[net.edge_stock],
        m_new[net.edge_investor],
        net.edge_weight.copy(),
    )


def group_by_mapping(
    records: Iterable[Sequence], mapping: Mapping[str, str]
) -> tuple[list[Record], list[str]]:
    """Aggregate fund-level holdings to management companies.

    Funds missing from ``mapping`` pass through under their own id. Returns
    the aggregated records and the sorted list of unmapped fund ids.
    Invalid values are left for :func:`load_holdings` to reject.
    """
    parts: dict[tuple[str, str], list[float]] = defaultdict(list)
    passthrough: list[Sequence] = []
    unmapped: set[str] = set()
    for rec in records:
        fund, stock, raw = rec
        try:
            value = _parse_value(raw)
        except (TypeError, ValueError):
            passthrough.append(rec)
            continue
        company = mapping.get(fund)
        if company is None:
            unmapped.add(fund)
            company = fund
        parts[(company, stock)].append(value)
    if unmapped:
        log.warning("%d funds missing from mapping kept under their own id", len(unmapped))
    out: list[Record] = [(c, s, math.fsum(v)) for (c, s), v in sorted(parts.items())]
    return out + [tuple(r) for r in passthrough], sorted(unmapped)


# CSV -------------------------------------------------------------------

HOLDINGS_HEADER = ["investor_id", "stock_id", "market_value"]
MAPPING_HEADER = ["fund_id", "company_id"]


def read_holdings_csv(path: str | Path) -> list[tuple[str, str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HOLDINGS_HEADER:
            raise HoldingsError(f"{path}: expected header {','.join(HOLDINGS_HEADER)}")
        return [tuple(row) if len(row) == 3 else (row,) for row in reader if row]


def read_mapping_csv(path: str | Path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MAPPING_HEADER:
            raise HoldingsError(f"{path}: expected header {','.join(MAPPING_HEADER)}")
        return {row[0]: row[1] for row in reader if row}


def write_holdings_csv(net: BipartiteNetwork, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOLDINGS_HEADER)
        for inv, stock, value in net.records():
            w.writerow([inv, stock, repr(value)])


# projection ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StockGraph:
    """Unweighted stock-stock graph: an edge joins stocks sharing an investor."""

    nodes: tuple[str, ...]
    neighbor_index: tuple[tuple[int, ...], ...]

    @cached_property
    def index(self) -> dict[str, int]:
        return {s: k for k, s in enumerate(self.nodes)}

    def neighbors(self, stock: str) -> tuple[str, ...]:
        return tuple(self.nodes[j] for j in self.neighbor_index[self.index[stock]])

    def degree(self, stock: str) -> int:
        return len(self.neighbor_index[self.index[stock]])

    def edges(self) -> list[tuple[str, str]]:
        return [
            (self.nodes[i], self.nodes[j])
            for i, nbrs in enumerate(self.neighbor_index)
            for j in nbrs
            if i < j
        ]

    def has_edge(self, a: str, b: str) -> bool:
        return self.index[b] in self.neighbor_index[self.index[a]]

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges())
        return g


def stock_projection(net: BipartiteNetwork) -> StockGraph:
    B = net.adjacency
    P = (B @ B.T).tocsr()
    P.setdiag(0)
    P.eliminate_zeros()
    P.sort_indices()
    nbrs = tuple(
        tuple(int(j) for j in P.indices[P.indptr[i] : P.indptr[i + 1]]) for i in range(net.n_stocks)
    )
    return StockGraph(net.stocks, nbrs)
