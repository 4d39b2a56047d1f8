"""Second-order biased random walks over the weighted graph.

Each step from ``curr`` with previous node ``prev`` samples neighbor ``x``
proportionally to ``edge_weight(curr, x) * alpha`` where alpha is 1/p when
x == prev, 1 when x is also a neighbor of prev, and 1/q otherwise. p tunes
the tendency to backtrack, q the tendency to move away; q < 1 pushes walks
outward (depth-first-like exploration). Sampling uses alias tables for O(1)
draws; transition tables are precomputed per directed (prev, curr) pair
when the memory budget allows, or built on the fly otherwise. Both paths
draw the same random numbers, so the generated corpus is identical.

Every walk owns an RNG stream derived from (seed, start node, walk index),
which makes generation order-independent and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import WeightedGraph


@dataclass(frozen=True)
class WalkConfig:
    """Knobs for walk generation.

    Defaults: p = 1 and q = 1/2 (moderate backtracking, outward bias),
    10 walks of 80 nodes per start node.
    """

    p: float = 1.0
    q: float = 0.5
    walk_length: int = 80
    walks_per_node: int = 10
    seed: int = 0
    # Max total alias-table entries for second-order precomputation;
    # costs sum(deg(u) * deg(v)) over edges, so big graphs fall back to
    # per-step computation.
    precompute_budget: int = 10_000_000

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.walk_length < 2:
            raise ValueError("walk_length must be at least 2")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be at least 1")


class AliasTable:
    """Vose alias table: O(k) setup, O(1) sampling of a discrete distribution.

    The sampling distribution equals the normalized input weights up to
    floating round-off.
    """

    def __init__(self, weights: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("weights must be positive and finite")
        k = weights.size
        scaled = weights * (k / weights.sum())
        prob = np.ones(k, dtype=np.float64)
        alias = np.arange(k, dtype=np.int64)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            lo = small.pop()
            hi = large.pop()
            prob[lo] = scaled[lo]
            alias[lo] = hi
            scaled[hi] -= 1.0 - scaled[lo]
            if scaled[hi] < 1.0:
                small.append(hi)
            else:
                large.append(hi)
        # Leftovers are 1.0 up to round-off.
        self.prob = prob
        self.alias = alias

    def __len__(self) -> int:
        return len(self.prob)

    def sample(self, rng: np.random.Generator) -> int:
        k = len(self.prob)
        i = min(int(rng.random() * k), k - 1)
        if rng.random() < self.prob[i]:
            return i
        return int(self.alias[i])

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k = len(self.prob)
        idx = np.minimum((rng.random(size) * k).astype(np.int64), k - 1)
        accept = rng.random(size) < self.prob[idx]
        return np.where(accept, idx, self.alias[idx])


@dataclass
class WalkCorpus:
    """Node-id sequences; every consecutive pair is an edge of the graph."""

    walks: list[list[int]]

    def __len__(self) -> int:
        return len(self.walks)

    def num_tokens(self) -> int:
        return sum(len(w) for w in self.walks)


def transition_weights(
    g: WeightedGraph, prev: int, curr: int, cfg: WalkConfig
) -> np.ndarray:
    """Unnormalized second-order weights over ``neighbors(curr)``.

    Requires ``prev`` to be a neighbor of ``curr`` (the walk arrived along
    that edge).
    """
    nbrs = g.neighbors(curr)
    if nbrs.size == 0:
        raise ValueError(f"node {curr} has no neighbors")
    if not g.has_edge(curr, prev):
        raise ValueError(f"{prev} is not a neighbor of {curr}")
    alpha = np.where(
        nbrs == prev,
        1.0 / cfg.p,
        np.where(
            np.isin(nbrs, g.neighbors(prev), assume_unique=True),
            1.0,
            1.0 / cfg.q,
        ),
    )
    return g.edge_weights(curr) * alpha


def _first_order_tables(g: WeightedGraph) -> list[AliasTable | None]:
    return [
        AliasTable(g.edge_weights(u)) if g.degree(u) > 0 else None
        for u in range(g.n)
    ]


def _second_order_tables(
    g: WeightedGraph, cfg: WalkConfig
) -> dict[tuple[int, int], AliasTable] | None:
    cost = sum(int(g.degree(v)) for u in range(g.n) for v in g.neighbors(u))
    if cost > cfg.precompute_budget:
        return None
    tables = {}
    for u in range(g.n):
        for v in g.neighbors(u):
            v = int(v)
            tables[(u, v)] = AliasTable(transition_weights(g, u, v, cfg))
    return tables


def walk_rng(seed: int, start_node: int, walk_index: int) -> np.random.Generator:
    """Independent, reproducible RNG stream for one walk."""
    ss = np.random.SeedSequence(seed, spawn_key=(start_node, walk_index))
    return np.random.Generator(np.random.PCG64(ss))


def generate_walks(g: WeightedGraph, cfg: WalkConfig) -> WalkCorpus:
    """Produce ``walks_per_node`` walks from every non-isolated node.

    The first step is sampled first-order (by edge weight); later steps are
    second-order biased. A walk ends early only at a node with no neighbors.
    """
    first_order = _first_order_tables(g)
    second_order = _second_order_tables(g, cfg)
    walks: list[list[int]] = []
    for start in range(g.n):
        if g.degree(start) == 0:
            continue
        for wi in range(cfg.walks_per_node):
            rng = walk_rng(cfg.seed, start, wi)
            walk = [start]
            nbrs = g.neighbors(start)
            walk.append(int(nbrs[first_order[start].sample(rng)]))
            while len(walk) < cfg.walk_length:
                prev, curr = walk[-2], walk[-1]
                nbrs = g.neighbors(curr)
                if nbrs.size == 0:
                    break
                if second_order is not None:
                    table = second_order[(prev, curr)]
                else:
                    table = AliasTable(transition_weights(g, prev, curr, cfg))
                walk.append(int(nbrs[table.sample(rng)]))
            walks.append(walk)
    return WalkCorpus(walks)


def serialize_walks(corpus: WalkCorpus) -> str:
    """One walk per line, space-separated node ids."""
    return "".join(" ".join(map(str, walk)) + "\n" for walk in corpus.walks)


def write_walks(path: str | Path, corpus: WalkCorpus) -> None:
    Path(path).write_text(serialize_walks(corpus), encoding="utf-8")


def read_walks(path: str | Path) -> WalkCorpus:
    walks = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            walks.append([int(tok) for tok in line.split()])
    return WalkCorpus(walks)
