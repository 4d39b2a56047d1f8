"""Post-clustering analysis: community subgraphs, zero-value-add cycles,
and scoring against planted ground truth.

A circular-trading fingerprint is a short directed cycle of transactions,
all inside one community and one time window, whose hop amounts are nearly
equal (no value added, hence no net tax liability). Cycles are enumerated
at the transaction level: each hop is one concrete transaction, node
sequences are simple, and every cycle is reported once with its smallest
node id first.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import ClusterAssignment
from .graph import SalesFlowGraph
from .ingest import Transaction

DEFAULT_MAX_CYCLE_LEN = 6
DEFAULT_CYCLE_WINDOW_MINUTES = 30 * 24 * 60
DEFAULT_TOLERANCE = 0.02


@dataclass(frozen=True)
class Community:
    """One non-noise cluster with the transactions internal to it."""

    cluster_id: int
    members: frozenset[int]
    internal_txs: list[Transaction]


@dataclass(frozen=True)
class CycleHit:
    """One simple directed cycle; ``nodes[i] -> nodes[i+1]`` (wrapping) is
    the hop carried by ``amounts[i]``."""

    nodes: tuple[int, ...]
    amounts: tuple[int, ...]
    tx_indices: tuple[int, ...]
    net_value_add: int
    time_span: int
    spread: float
    flagged: bool


@dataclass(frozen=True)
class CycleReport:
    community_id: int
    cycles: list[CycleHit]

    def flagged_cycles(self) -> list[CycleHit]:
        return [c for c in self.cycles if c.flagged]


@dataclass(frozen=True)
class EvalScores:
    ari: float
    nmi: float
    ring_precision: float
    ring_recall: float


def extract_communities(
    assignment: ClusterAssignment, g: SalesFlowGraph
) -> list[Community]:
    """One community per cluster id, in id order; noise dealers excluded."""
    labels = assignment.labels
    if len(labels) != g.n:
        raise ValueError(
            f"label array has {len(labels)} entries for a graph of {g.n} nodes"
        )
    member_sets: list[set[int]] = [set() for _ in range(assignment.n_clusters)]
    for node, label in enumerate(labels):
        if label >= 0:
            member_sets[label].add(node)
    internal: list[list[Transaction]] = [[] for _ in range(assignment.n_clusters)]
    for tx in g.edges:
        ls, lb = labels[tx.seller], labels[tx.buyer]
        if ls >= 0 and ls == lb:
            internal[ls].append(tx)
    return [
        Community(cluster_id=cid, members=frozenset(member_sets[cid]),
                  internal_txs=internal[cid])
        for cid in range(assignment.n_clusters)
    ]


def detect_cycles(
    community: Community,
    max_len: int = DEFAULT_MAX_CYCLE_LEN,
    window: int = DEFAULT_CYCLE_WINDOW_MINUTES,
    tolerance: float = DEFAULT_TOLERANCE,
) -> CycleReport:
    """Enumerate simple directed transaction cycles of length <= max_len.

    Every hop is one transaction; all transactions of a cycle must fit in a
    ``window``-minute interval. A cycle is flagged when its relative amount
    spread (max - min) / max is at most ``tolerance``. Cycles over the same
    nodes but different transactions are distinct hits.
    """
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    if window <= 0:
        raise ValueError("window must be positive")
    if not 0.0 <= tolerance < 1.0:
        raise ValueError("tolerance must be in [0, 1)")

    txs = community.internal_txs
    out_txs: dict[int, list[int]] = {}
    for idx, tx in enumerate(txs):
        out_txs.setdefault(tx.seller, []).append(idx)

    hits: list[CycleHit] = []

    def close_cycle(path_nodes: list[int], path_txs: list[int]) -> None:
        amounts = tuple(txs[i].amount for i in path_txs)
        times = [txs[i].timestamp for i in path_txs]
        lo, hi = min(amounts), max(amounts)
        spread = (hi - lo) / hi
        hits.append(
            CycleHit(
                nodes=tuple(path_nodes),
                amounts=amounts,
                tx_indices=tuple(path_txs),
                net_value_add=hi - lo,
                time_span=max(times) - min(times),
                spread=spread,
                flagged=spread <= tolerance,
            )
        )

    def extend(
        start: int,
        path_nodes: list[int],
        path_txs: list[int],
        ts_lo: int,
        ts_hi: int,
    ) -> None:
        curr = path_nodes[-1]
        for idx in out_txs.get(curr, ()):
            tx = txs[idx]
            lo = min(ts_lo, tx.timestamp)
            hi = max(ts_hi, tx.timestamp)
            if hi - lo > window:
                continue
            if tx.buyer == start and len(path_nodes) >= 2:
                close_cycle(path_nodes, path_txs + [idx])
            elif (
                tx.buyer > start
                and tx.buyer not in path_nodes
                and len(path_nodes) < max_len
            ):
                path_nodes.append(tx.buyer)
                extend(start, path_nodes, path_txs + [idx], lo, hi)
                path_nodes.pop()

    for start in sorted(community.members):
        for idx in out_txs.get(start, ()):
            tx = txs[idx]
            if tx.buyer <= start:
                continue  # canonical form starts at the smallest node id
            extend(start, [start, tx.buyer], [idx], tx.timestamp, tx.timestamp)
    return CycleReport(community_id=community.cluster_id, cycles=hits)


def _comb2(x: np.ndarray) -> int:
    x = x.astype(np.int64)
    return int((x * (x - 1) // 2).sum())


def _noise_as_singletons(labels: np.ndarray) -> np.ndarray:
    """Give every -1 entry its own fresh cluster id."""
    labels = np.asarray(labels, dtype=np.int64).copy()
    noise = np.flatnonzero(labels == -1)
    if noise.size:
        base = labels.max() + 1 if labels.size else 0
        labels[noise] = base + np.arange(noise.size)
    return labels


def _contingency(a: np.ndarray, b: np.ndarray):
    """Joint cell counts (nonzero cells only, with row/col index per cell)
    and the two marginal count vectors."""
    _, inv_a = np.unique(a, return_inverse=True)
    _, inv_b = np.unique(b, return_inverse=True)
    k_b = int(inv_b.max()) + 1 if inv_b.size else 1
    pair_ids = inv_a.astype(np.int64) * k_b + inv_b
    uniq, counts = np.unique(pair_ids, return_counts=True)
    return counts, uniq // k_b, uniq % k_b, np.bincount(inv_a), np.bincount(inv_b)


def adjusted_rand_index(pred, truth) -> float:
    """Chance-corrected pair-counting agreement of two labelings.

    Label -1 marks noise and is expanded into singleton clusters before
    comparison, so declaring everything noise scores poorly.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("labelings must have the same length")
    n = pred.size
    if n == 0:
        return 1.0
    a = _noise_as_singletons(pred)
    b = _noise_as_singletons(truth)
    nij, _, _, sum_a, sum_b = _contingency(a, b)
    index = _comb2(nij)
    pairs_a = _comb2(sum_a)
    pairs_b = _comb2(sum_b)
    total = n * (n - 1) // 2
    expected = pairs_a * pairs_b / total if total else 0.0
    max_index = (pairs_a + pairs_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def normalized_mutual_information(pred, truth) -> float:
    """Mutual information normalized by the mean of the two label entropies.

    Noise (-1) expands to singletons as in :func:`adjusted_rand_index`.
    When both labelings are single-cluster (0/0) the score is 1 by
    convention.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("labelings must have the same length")
    n = pred.size
    if n == 0:
        return 1.0
    a = _noise_as_singletons(pred)
    b = _noise_as_singletons(truth)
    nij, rows, cols, sum_a, sum_b = _contingency(a, b)
    # Marginals are all positive because they come from observed labels.
    h_a = float(-np.sum(sum_a / n * np.log(sum_a / n)))
    h_b = float(-np.sum(sum_b / n * np.log(sum_b / n)))
    mean_h = (h_a + h_b) / 2.0
    if mean_h == 0.0:
        return 1.0
    mi = float(
        np.sum(
            (nij / n)
            * np.log(nij.astype(np.float64) * n / (sum_a[rows] * sum_b[cols]))
        )
    )
    return float(np.clip(mi / mean_h, 0.0, 1.0))


def jaccard(a: set[int] | frozenset[int], b: set[int] | frozenset[int]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 1.0


def ring_recovery(
    pred_communities: Sequence[set[int] | frozenset[int]],
    planted_rings: Sequence[set[int] | frozenset[int]],
    min_overlap: float = 0.5,
) -> tuple[float, float]:
    """(precision, recall) of detected communities against planted rings.

    A ring counts as recovered when some community overlaps it with Jaccard
    >= ``min_overlap``; a community counts as matching when it overlaps some
    ring that way. With zero predicted communities precision is 1.0 by the
    empty-set convention; with zero planted rings recall is 1.0 likewise.
    """
    matched_rings = sum(
        1
        for ring in planted_rings
        if any(jaccard(comm, ring) >= min_overlap for comm in pred_communities)
    )
    matching_comms = sum(
        1
        for comm in pred_communities
        if any(jaccard(comm, ring) >= min_overlap for ring in planted_rings)
    )
    precision = matching_comms / len(pred_communities) if pred_communities else 1.0
    recall = matched_rings / len(planted_rings) if planted_rings else 1.0
    return precision, recall


def project_2d(points) -> np.ndarray:
    """Project rows onto the top-2 principal components.

    Deterministic sign convention: each component's largest-magnitude
    loading is positive. Requires at least 2 input dimensions.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, d = points.shape
    if d < 2:
        raise ValueError("projection needs at least 2 input dimensions")
    if n == 0:
        return np.zeros((0, 2))
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[: min(2, vt.shape[0])].copy()
    for row in components:
        peak = np.argmax(np.abs(row))
        if row[peak] < 0:
            row *= -1.0
    coords = centered @ components.T
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((n, 2 - coords.shape[1]))])
    return coords


def serialize_cycles_jsonl(reports: Sequence[CycleReport]) -> str:
    out = io.StringIO()
    for report in reports:
        for hit in report.cycles:
            out.write(
                json.dumps(
                    {
                        "community": report.community_id,
                        "nodes": list(hit.nodes),
                        "amounts": list(hit.amounts),
                        "spread": hit.spread,
                        "window_minutes": hit.time_span,
                        "flagged": hit.flagged,
                    }
                )
                + "\n"
            )
    return out.getvalue()


def write_cycles_jsonl(path: str | Path, reports: Sequence[CycleReport]) -> None:
    Path(path).write_text(serialize_cycles_jsonl(reports), encoding="utf-8")


def serialize_projection(coords: np.ndarray, labels: np.ndarray) -> str:
    lines = ["dealer_id,x,y,cluster_label"]
    for i in range(coords.shape[0]):
        lines.append(
            f"{i},{float(coords[i, 0])!r},{float(coords[i, 1])!r},{int(labels[i])}"
        )
    return "\n".join(lines) + "\n"


def write_projection(
    path: str | Path, coords: np.ndarray, labels: np.ndarray
) -> None:
    Path(path).write_text(serialize_projection(coords, labels), encoding="utf-8")
