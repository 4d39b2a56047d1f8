"""Sales flow multigraph and its undirected weighted projection.

The directed multigraph keeps one edge per transaction (time and amount
attached). Random walks operate on a projection that collapses all parallel
and antiparallel edges of a dealer pair into a single undirected edge whose
weight is the total monetary flow between the pair, optionally compressed
with log1p so that rupee magnitudes spanning several orders do not dominate
walk biases.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import DealerRegistry, Transaction

SCALES = ("linear", "log1p")


@dataclass(frozen=True)
class SalesFlowGraph:
    """Directed multigraph: node per dealer, edge per transaction.

    Edge i is exactly transaction i; ``out_adjacency[u]`` / ``in_adjacency[v]``
    hold indices into ``edges``.
    """

    n: int
    edges: list[Transaction]
    out_adjacency: list[list[int]]
    in_adjacency: list[list[int]]


class WeightedGraph:
    """Undirected graph with positive edge weights and no self-loops.

    Neighbor lists are sorted by node id; there is at most one edge per
    unordered pair and the adjacency is symmetric by construction.
    """

    def __init__(self, n: int, pair_weights: dict[tuple[int, int], float]):
        adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for (u, v), w in pair_weights.items():
            if not (0 <= u < n and 0 <= v < n):
                raise IndexError(f"edge ({u}, {v}) out of range for {n} nodes")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if w <= 0:
                raise ValueError(f"non-positive weight {w} on edge ({u}, {v})")
            adjacency[u].append((v, w))
            adjacency[v].append((u, w))
        self.n = n
        self._neighbors: list[np.ndarray] = []
        self._weights: list[np.ndarray] = []
        for entries in adjacency:
            entries.sort()
            self._neighbors.append(
                np.array([v for v, _ in entries], dtype=np.int64)
            )
            self._weights.append(
                np.array([w for _, w in entries], dtype=np.float64)
            )

    def neighbors(self, u: int) -> np.ndarray:
        return self._neighbors[u]

    def edge_weights(self, u: int) -> np.ndarray:
        """Weights aligned with ``neighbors(u)``."""
        return self._weights[u]

    def degree(self, u: int) -> int:
        return len(self._neighbors[u])

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self._neighbors[u]
        i = np.searchsorted(nbrs, v)
        return i < len(nbrs) and nbrs[i] == v

    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self._neighbors) // 2

    def total_weight(self) -> float:
        return sum(float(w.sum()) for w in self._weights) / 2.0

    def pair_weights(self) -> dict[tuple[int, int], float]:
        """All edges as ``{(u, v): w}`` with u < v."""
        pairs = {}
        for u in range(self.n):
            for v, w in zip(self._neighbors[u], self._weights[u]):
                if u < v:
                    pairs[(u, int(v))] = float(w)
        return pairs


@dataclass(frozen=True)
class GraphStats:
    nodes: int
    edges: int
    min_degree: int
    mean_degree: float
    max_degree: int
    total_weight: float


def build_sales_flow_graph(
    registry: DealerRegistry, transactions: list[Transaction]
) -> SalesFlowGraph:
    """Assemble the directed multigraph; edge order follows transaction order."""
    n = len(registry)
    out_adjacency: list[list[int]] = [[] for _ in range(n)]
    in_adjacency: list[list[int]] = [[] for _ in range(n)]
    for i, tx in enumerate(transactions):
        if not (0 <= tx.seller < n) or not (0 <= tx.buyer < n):
            raise IndexError(
                f"transaction {i} references dealer outside registry of size {n}"
            )
        out_adjacency[tx.seller].append(i)
        in_adjacency[tx.buyer].append(i)
    return SalesFlowGraph(
        n=n,
        edges=list(transactions),
        out_adjacency=out_adjacency,
        in_adjacency=in_adjacency,
    )


def project_to_weighted(g: SalesFlowGraph, scale: str = "log1p") -> WeightedGraph:
    """Collapse the multigraph to the undirected walk graph.

    The weight of pair {u, v} is f(sum of amounts over all u->v and v->u
    edges), with f = identity for ``linear`` and f(x) = ln(1 + x) for
    ``log1p``. Pairs with no transactions get no edge; isolated nodes are
    kept.
    """
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}, expected one of {SCALES}")
    totals: dict[tuple[int, int], int] = {}
    for tx in g.edges:
        pair = (tx.seller, tx.buyer) if tx.seller < tx.buyer else (tx.buyer, tx.seller)
        totals[pair] = totals.get(pair, 0) + tx.amount
    if scale == "linear":
        weights = {pair: float(total) for pair, total in totals.items()}
    else:
        weights = {pair: math.log1p(total) for pair, total in totals.items()}
    return WeightedGraph(g.n, weights)


def degree_stats(g: WeightedGraph) -> GraphStats:
    if g.n == 0:
        return GraphStats(0, 0, 0, 0.0, 0, 0.0)
    degrees = [g.degree(u) for u in range(g.n)]
    return GraphStats(
        nodes=g.n,
        edges=g.num_edges(),
        min_degree=min(degrees),
        mean_degree=sum(degrees) / g.n,
        max_degree=max(degrees),
        total_weight=g.total_weight(),
    )


def serialize_edgelist(g: WeightedGraph) -> str:
    """Edge-list text dump, one ``u v weight`` line per pair with u < v."""
    out = io.StringIO()
    for (u, v), w in sorted(g.pair_weights().items()):
        out.write(f"{u} {v} {w!r}\n")
    return out.getvalue()


def write_edgelist(path: str | Path, g: WeightedGraph) -> None:
    Path(path).write_text(serialize_edgelist(g), encoding="utf-8")
