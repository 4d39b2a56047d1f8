"""Independent reference implementations used as test oracles.

These deliberately share nothing with the library's algorithms beyond the
public neighborhood/distance primitives, so agreement is meaningful: the
DBSCAN oracle clusters via connected components of the core-point graph
instead of seed-set expansion, and cycle enumeration goes through networkx
plus brute-force transaction combinations instead of bounded DFS.
"""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np

from ringtrace.clustering import ClusterAssignment, DbscanConfig, region_query
from ringtrace.detect import Community


def brute_force_dbscan(points: np.ndarray, cfg: DbscanConfig) -> ClusterAssignment:
    """Declarative DBSCAN: cores by neighbor count, clusters as connected
    components of the core-core graph ordered by smallest core index,
    borders attached to the lowest-id adjacent cluster."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    neighbors = [region_query(points, i, cfg.eps) for i in range(n)]
    core = np.array([len(nb) >= cfg.min_pts for nb in neighbors])

    # Union-find over core points that are within eps of each other.
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        if not core[i]:
            continue
        for j in neighbors[i]:
            if core[j]:
                ri, rj = find(i), int(find(int(j)))
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    # Component ids in order of each component's smallest core point.
    root_to_id: dict[int, int] = {}
    labels = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if core[i]:
            root = find(i)
            if root not in root_to_id:
                root_to_id[root] = len(root_to_id)
            labels[i] = root_to_id[root]
    for i in range(n):
        if core[i] or not len(neighbors[i]):
            continue
        adjacent = [int(labels[j]) for j in neighbors[i] if core[j]]
        if adjacent:
            labels[i] = min(adjacent)
    return ClusterAssignment(labels, len(root_to_id))


def _rotate_min_first(nodes: tuple[int, ...], hops: tuple[int, ...]):
    k = nodes.index(min(nodes))
    return nodes[k:] + nodes[:k], hops[k:] + hops[:k]


def enumerate_cycles_reference(
    community: Community, max_len: int, window: int
) -> set[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All transaction-level simple cycles as (node sequence, transaction
    indices), rotated so the smallest node id comes first."""
    txs = community.internal_txs
    graph = nx.DiGraph()
    graph.add_nodes_from(community.members)
    hop_txs: dict[tuple[int, int], list[int]] = {}
    for idx, tx in enumerate(txs):
        hop_txs.setdefault((tx.seller, tx.buyer), []).append(idx)
        graph.add_edge(tx.seller, tx.buyer)

    found = set()
    for node_cycle in nx.simple_cycles(graph, length_bound=max_len):
        nodes = tuple(node_cycle)
        hops = [
            (nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))
        ]
        for combo in itertools.product(*(hop_txs[h] for h in hops)):
            stamps = [txs[i].timestamp for i in combo]
            if max(stamps) - min(stamps) <= window:
                found.add(_rotate_min_first(nodes, tuple(combo)))
    return found
