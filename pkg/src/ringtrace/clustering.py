"""Density-based clustering of embedding vectors under cosine distance.

Classic DBSCAN semantics: a core point has at least ``min_pts`` neighbors
(itself included) within cosine distance ``eps``; clusters are maximal
density-connected sets of points; non-core points adjacent to a cluster are
border points and attach to the first cluster that reaches them in scan
order; everything else is noise (label -1). Cluster ids count up from 0 in
order of each cluster's first core point. Neighborhood queries are exact
(full pairwise), which keeps the implementation directly comparable with a
brute-force reference.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_UNLABELED = -2
NOISE = -1


class ZeroVectorError(ValueError):
    """An all-zero embedding row; cosine distance is undefined for it."""


@dataclass(frozen=True)
class DbscanConfig:
    eps: float = 0.15
    min_pts: int = 5

    def __post_init__(self):
        if not 0.0 <= self.eps <= 2.0:
            raise ValueError("eps must be within [0, 2]")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-dealer labels: cluster ids 0..k-1, or -1 for noise."""

    labels: np.ndarray
    n_clusters: int

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), in [0, 2]. Zero vectors are rejected."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors must have the same dimension")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine distance undefined for a zero vector")
    return float(np.clip(1.0 - (a @ b) / (na * nb), 0.0, 2.0))


def _unit_rows(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(points, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroVectorError(
            f"zero embedding vector at row {int(zero[0])}; "
            "this indicates an upstream training bug"
        )
    return points / norms[:, None]


def _neighbor_row(unit: np.ndarray, i: int, eps: float) -> np.ndarray:
    dist = np.clip(1.0 - unit @ unit[i], 0.0, 2.0)
    dist[i] = 0.0
    return np.flatnonzero(dist <= eps)


def region_query(points, i: int, eps: float) -> np.ndarray:
    """Sorted indices of all points within cosine distance eps of point i
    (i itself always included)."""
    unit = _unit_rows(np.atleast_2d(points))
    return _neighbor_row(unit, i, eps)


def dbscan(points, cfg: DbscanConfig) -> ClusterAssignment:
    """Cluster embedding rows; deterministic for a fixed input order."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[0]
    if n == 0 or points.size == 0:
        return ClusterAssignment(np.empty(0, dtype=np.int64), 0)
    unit = _unit_rows(points)

    labels = np.full(n, _UNLABELED, dtype=np.int64)
    cluster_id = 0
    for p in range(n):
        if labels[p] != _UNLABELED:
            continue
        neighbors = _neighbor_row(unit, p, cfg.eps)
        if neighbors.size < cfg.min_pts:
            labels[p] = NOISE
            continue
        labels[p] = cluster_id
        seeds = deque(int(q) for q in neighbors if q != p)
        while seeds:
            q = seeds.popleft()
            if labels[q] == NOISE:
                labels[q] = cluster_id  # border point, reached first by us
            if labels[q] != _UNLABELED:
                continue
            labels[q] = cluster_id
            q_neighbors = _neighbor_row(unit, q, cfg.eps)
            if q_neighbors.size >= cfg.min_pts:
                seeds.extend(
                    int(r) for r in q_neighbors if labels[r] in (_UNLABELED, NOISE)
                )
        cluster_id += 1
    return ClusterAssignment(labels, cluster_id)


def core_points(points, cfg: DbscanConfig) -> np.ndarray:
    """Indices of all core points; independent of scan order."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    unit = _unit_rows(points)
    return np.array(
        [
            i
            for i in range(points.shape[0])
            if _neighbor_row(unit, i, cfg.eps).size >= cfg.min_pts
        ],
        dtype=np.int64,
    )


def serialize_clusters(assignment: ClusterAssignment) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("dealer_id", "cluster_label"))
    for i, label in enumerate(assignment.labels):
        writer.writerow((i, int(label)))
    return out.getvalue()


def write_clusters(path: str | Path, assignment: ClusterAssignment) -> None:
    Path(path).write_text(serialize_clusters(assignment), encoding="utf-8")


def read_clusters(path: str | Path) -> ClusterAssignment:
    labels = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["dealer_id", "cluster_label"]:
            raise ValueError("clusters CSV must have dealer_id,cluster_label header")
        for row in reader:
            if not row:
                continue
            if int(row[0]) != len(labels):
                raise ValueError("dealer ids must be dense and in order")
            labels.append(int(row[1]))
    arr = np.array(labels, dtype=np.int64)
    n_clusters = int(arr.max()) + 1 if arr.size and arr.max() >= 0 else 0
    return ClusterAssignment(arr, n_clusters)
