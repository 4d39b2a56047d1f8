from __future__ import annotations

import numpy as np
import pytest

from ringtrace.graph import WeightedGraph

# The four sample invoice rows used throughout the docs and tests.
SAMPLE_CSV = """sno,seller,buyer,timestamp,amount
1,Dealer A,Dealer B,2021/03/03/10:10,14000
2,Dealer C,Dealer D,2021/03/03/10:40,17000
3,Dealer A,Dealer D,2021/03/10/09:30,12000
4,Dealer B,Dealer C,2021/03/11/00:30,15000
"""


@pytest.fixture
def sample_csv() -> str:
    return SAMPLE_CSV


def weighted(n: int, pairs: dict[tuple[int, int], float]) -> WeightedGraph:
    return WeightedGraph(n, pairs)


def barbell_graph() -> WeightedGraph:
    """Two 5-cliques (nodes 0-4 and 5-9) joined by the bridge 4-5."""
    pairs: dict[tuple[int, int], float] = {}
    for base in (0, 5):
        for i in range(base, base + 5):
            for j in range(i + 1, base + 5):
                pairs[(i, j)] = 1.0
    pairs[(4, 5)] = 1.0
    return WeightedGraph(10, pairs)
