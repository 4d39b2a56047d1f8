"""Synthetic transaction scenarios with planted circular-trading rings.

The legitimate background mimics a layered supply chain: dealers are
assigned to 3-5 tiers (raw material, manufacturing, distribution, retail)
and most transactions flow from one tier to the next, with a few random
cross-links. Fraud rings are vertex-disjoint groups of dealers that
additionally exchange bursts of high-valued fake transactions forming
short directed cycles: hop amounts agree within a small jitter (so no
value is added) and all hops of a cycle fall inside a seven-day window.

Ring members behave like shell firms: they never sell into the legitimate
background and only occasionally buy from it, so every ring's fake volume
exceeds its genuine volume (which generation also enforces with a hard
cap).

Generation is pure given the seed, and dealer ids are assigned in first-
appearance order of the emitted rows, so parsing the serialized CSV
reproduces exactly the ids used in the ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .ingest import DealerRegistry, Transaction, parse_timestamp

FAKE_CYCLE_WINDOW_MINUTES = 7 * 24 * 60
_BASE_TIMESTAMP = parse_timestamp("2021/01/01/00:00")
_MIN_CYCLE_LEN = 3
_MAX_CYCLE_LEN = 6
_CROSS_LINK_FRACTION = 0.1
# Shell firms keep thin genuine books: only this fraction of background
# purchases that would land on a ring member is kept.
_RING_BUYER_THINNING = 0.15
# Fake cycles are high-valued relative to the legitimate amount range.
_FAKE_AMOUNT_MULTIPLIER = 3
_MAX_DRAW_ATTEMPTS = 1000


class ConfigInfeasibleError(ValueError):
    """The scenario configuration cannot be realized."""


@dataclass(frozen=True)
class ScenarioConfig:
    n_dealers: int = 500
    n_background_txs: int = 3000
    n_rings: int = 5
    ring_size_range: tuple[int, int] = (8, 15)
    fake_txs_per_ring: int = 40
    amount_range: tuple[int, int] = (1000, 50000)
    fake_amount_jitter: float = 0.02
    tax_rate: float = 0.10
    time_horizon_days: int = 180
    seed: int = 0

    def __post_init__(self):
        if self.n_dealers < 2 or self.n_background_txs < 1:
            raise ValueError("need at least 2 dealers and 1 background transaction")
        if self.n_rings < 0:
            raise ValueError("n_rings must be non-negative")
        lo, hi = self.ring_size_range
        if lo < 3 or hi < lo:
            raise ValueError("ring sizes must be at least 3 and min <= max")
        if self.n_rings > 0 and self.fake_txs_per_ring < _MIN_CYCLE_LEN:
            raise ValueError("fake_txs_per_ring must allow at least one cycle")
        alo, ahi = self.amount_range
        if alo < 1 or ahi < alo:
            raise ValueError("amount_range must be positive and min <= max")
        if not 0.0 <= self.fake_amount_jitter < 1.0:
            raise ValueError("fake_amount_jitter must be in [0, 1)")
        if self.tax_rate < 0:
            raise ValueError("tax_rate must be non-negative")
        if self.time_horizon_days < 1:
            raise ValueError("time_horizon_days must be positive")


@dataclass(frozen=True)
class PlantedCycle:
    ring: int
    nodes: tuple[int, ...]
    amounts: tuple[int, ...]
    timestamps: tuple[int, ...]


@dataclass
class GroundTruth:
    """Per-dealer ring membership (None = honest) and the planted cycles."""

    ring_membership: list[int | None]
    planted_cycles: list[PlantedCycle]

    def ring_members(self, n_rings: int) -> list[set[int]]:
        rings: list[set[int]] = [set() for _ in range(n_rings)]
        for dealer, ring in enumerate(self.ring_membership):
            if ring is not None:
                rings[ring].add(dealer)
        return rings

    def n_rings(self) -> int:
        present = [r for r in self.ring_membership if r is not None]
        return max(present) + 1 if present else 0


def _feasible_remainders(total: int, max_len: int) -> np.ndarray:
    """Which remainders can still be split into cycle lengths in
    [3, max_len]; index r is True when r is expressible (0 included)."""
    ok = np.zeros(total + 1, dtype=bool)
    ok[0] = True
    for r in range(_MIN_CYCLE_LEN, total + 1):
        for length in range(_MIN_CYCLE_LEN, min(max_len, r) + 1):
            if ok[r - length]:
                ok[r] = True
                break
    return ok


def _split_cycle_lengths(
    total: int, max_len: int, rng: np.random.Generator
) -> list[int]:
    """Random split of ``total`` into cycle lengths within [3, max_len]."""
    ok = _feasible_remainders(total, max_len)
    if not ok[total]:
        raise ConfigInfeasibleError(
            f"cannot split {total} fake transactions into cycles of length "
            f"3..{max_len}"
        )
    lengths = []
    remaining = total
    while remaining:
        options = [
            length
            for length in range(_MIN_CYCLE_LEN, min(max_len, remaining) + 1)
            if ok[remaining - length]
        ]
        length = int(rng.choice(options))
        lengths.append(length)
        remaining -= length
    return lengths


def _draw_background_pair(
    rng: np.random.Generator, layers: list[np.ndarray], n: int
) -> tuple[int, int]:
    if len(layers) > 1 and rng.random() >= _CROSS_LINK_FRACTION:
        tier = int(rng.integers(len(layers) - 1))
        return int(rng.choice(layers[tier])), int(rng.choice(layers[tier + 1]))
    seller = int(rng.integers(n))
    buyer = int(rng.integers(n))
    while buyer == seller:
        buyer = int(rng.integers(n))
    return seller, buyer


def generate_scenario(
    cfg: ScenarioConfig,
) -> tuple[DealerRegistry, list[Transaction], GroundTruth]:
    """Build (registry, transactions, ground truth) for one scenario.

    Raises :class:`ConfigInfeasibleError` when the rings cannot be hosted
    disjointly or the fake-transaction budget cannot form valid cycles.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    n = cfg.n_dealers
    horizon_minutes = cfg.time_horizon_days * 24 * 60
    fake_window = min(FAKE_CYCLE_WINDOW_MINUTES, horizon_minutes)

    # Disjoint ring membership.
    sizes = [
        int(rng.integers(cfg.ring_size_range[0], cfg.ring_size_range[1] + 1))
        for _ in range(cfg.n_rings)
    ]
    if sum(sizes) > n:
        raise ConfigInfeasibleError(
            f"{cfg.n_rings} rings of total size {sum(sizes)} cannot fit "
            f"disjointly among {n} dealers"
        )
    shuffled = rng.permutation(n)
    rings: list[np.ndarray] = []
    cursor = 0
    for size in sizes:
        rings.append(np.sort(shuffled[cursor : cursor + size]))
        cursor += size
    ring_of = np.full(n, -1, dtype=np.int64)
    for ring_id, members in enumerate(rings):
        ring_of[members] = ring_id

    # Supply-chain tiers for the legitimate background.
    n_layers = min(int(rng.integers(3, 6)), n) if n >= 2 else 1
    layers = [np.sort(part) for part in np.array_split(rng.permutation(n), n_layers)]

    def draw_amount() -> int:
        return int(rng.integers(cfg.amount_range[0], cfg.amount_range[1] + 1))

    def draw_timestamp() -> int:
        return _BASE_TIMESTAMP + int(rng.integers(horizon_minutes))

    genuine_incident = [0] * cfg.n_rings

    def accept_pair(seller: int, buyer: int) -> bool:
        """Shell-firm rules: ring members never sell into the background,
        mostly skip buying from it, and each ring's genuine traffic stays
        strictly below its fake-transaction budget."""
        if ring_of[seller] >= 0:
            return False
        r = int(ring_of[buyer])
        if r >= 0:
            if rng.random() > _RING_BUYER_THINNING:
                return False
            if genuine_incident[r] + 1 >= cfg.fake_txs_per_ring:
                return False
            genuine_incident[r] += 1
        return True

    transactions: list[Transaction] = []

    def add_background(seller: int, buyer: int) -> None:
        transactions.append(
            Transaction(
                seller=seller,
                buyer=buyer,
                timestamp=draw_timestamp(),
                amount=draw_amount(),
            )
        )

    for _ in range(cfg.n_background_txs):
        for _attempt in range(_MAX_DRAW_ATTEMPTS):
            seller, buyer = _draw_background_pair(rng, layers, n)
            if accept_pair(seller, buyer):
                add_background(seller, buyer)
                break
        else:
            raise ConfigInfeasibleError(
                "could not draw a background transaction respecting ring budgets"
            )

    # Planted fake cycles, valued above the legitimate range.
    fake_lo, fake_hi = (
        cfg.amount_range[1],
        _FAKE_AMOUNT_MULTIPLIER * cfg.amount_range[1],
    )
    planted: list[PlantedCycle] = []
    for ring_id, members in enumerate(rings):
        max_len = min(_MAX_CYCLE_LEN, len(members))
        for length in _split_cycle_lengths(cfg.fake_txs_per_ring, max_len, rng):
            nodes = rng.choice(members, size=length, replace=False)
            base = int(rng.integers(fake_lo, fake_hi + 1))
            max_offset = int(base * cfg.fake_amount_jitter * 0.9)
            amounts = base + rng.integers(0, max_offset + 1, size=length)
            start = _BASE_TIMESTAMP + int(
                rng.integers(max(1, horizon_minutes - fake_window))
            )
            stamps = np.sort(rng.integers(start, start + fake_window, size=length))
            for hop in range(length):
                transactions.append(
                    Transaction(
                        seller=int(nodes[hop]),
                        buyer=int(nodes[(hop + 1) % length]),
                        timestamp=int(stamps[hop]),
                        amount=int(amounts[hop]),
                    )
                )
            planted.append(
                PlantedCycle(
                    ring=ring_id,
                    nodes=tuple(int(x) for x in nodes),
                    amounts=tuple(int(x) for x in amounts),
                    timestamps=tuple(int(x) for x in stamps),
                )
            )

    # Give dealers untouched by the draws one background transaction each,
    # so every registered dealer appears in the file.
    seen = np.zeros(n, dtype=bool)
    for tx in transactions:
        seen[tx.seller] = True
        seen[tx.buyer] = True
    layer_of = np.empty(n, dtype=np.int64)
    for tier, nodes in enumerate(layers):
        layer_of[nodes] = tier
    for dealer in np.flatnonzero(~seen):
        dealer = int(dealer)
        tier = int(layer_of[dealer])
        can_sell = ring_of[dealer] < 0 and tier < n_layers - 1
        for _attempt in range(_MAX_DRAW_ATTEMPTS):
            if can_sell:
                seller, buyer = dealer, int(rng.choice(layers[tier + 1]))
            else:
                seller = int(rng.integers(n))
                if seller == dealer:
                    continue
                buyer = dealer
            if accept_pair(seller, buyer):
                add_background(seller, buyer)
                break
        else:
            raise ConfigInfeasibleError(
                f"could not attach dealer {dealer} to the background"
            )

    # Time-order the rows, then relabel ids by first appearance so that
    # re-parsing the serialized file reproduces the same id space.
    transactions.sort(key=lambda tx: (tx.timestamp, tx.seller, tx.buyer, tx.amount))
    remap: dict[int, int] = {}
    for tx in transactions:
        for node in (tx.seller, tx.buyer):
            if node not in remap:
                remap[node] = len(remap)
    transactions = [
        Transaction(
            seller=remap[tx.seller],
            buyer=remap[tx.buyer],
            timestamp=tx.timestamp,
            amount=tx.amount,
        )
        for tx in transactions
    ]

    width = max(4, len(str(n)))
    registry = DealerRegistry()
    names = [""] * n
    for old_id, new_id in remap.items():
        names[new_id] = f"Dealer {old_id + 1:0{width}d}"
    for name in names:
        registry.add(name)

    membership: list[int | None] = [None] * n
    for old_id in range(n):
        if ring_of[old_id] >= 0:
            membership[remap[old_id]] = int(ring_of[old_id])
    truth = GroundTruth(
        ring_membership=membership,
        planted_cycles=[
            PlantedCycle(
                ring=pc.ring,
                nodes=tuple(remap[v] for v in pc.nodes),
                amounts=pc.amounts,
                timestamps=pc.timestamps,
            )
            for pc in planted
        ],
    )
    return registry, transactions, truth


def expected_tax_liability(
    dealer: int, transactions: list[Transaction], tax_rate: float
) -> float:
    """Net tax owed by a dealer: rate times (sales minus purchases).

    The rate is snapped to an exact fraction so whole-rupee examples come
    out exact instead of accumulating float error.
    """
    net = 0
    for tx in transactions:
        if tx.seller == dealer:
            net += tx.amount
        if tx.buyer == dealer:
            net -= tx.amount
    rate = Fraction(tax_rate).limit_denominator(10**9)
    return float(rate * net)


def serialize_ground_truth(truth: GroundTruth) -> str:
    return json.dumps(
        {
            "ring_membership": truth.ring_membership,
            "planted_cycles": [
                {
                    "ring": pc.ring,
                    "nodes": list(pc.nodes),
                    "amounts": list(pc.amounts),
                    "timestamps": list(pc.timestamps),
                }
                for pc in truth.planted_cycles
            ],
        },
        indent=2,
    )


def write_ground_truth(path: str | Path, truth: GroundTruth) -> None:
    Path(path).write_text(serialize_ground_truth(truth), encoding="utf-8")


def read_ground_truth(path: str | Path) -> GroundTruth:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return GroundTruth(
        ring_membership=data["ring_membership"],
        planted_cycles=[
            PlantedCycle(
                ring=pc["ring"],
                nodes=tuple(pc["nodes"]),
                amounts=tuple(pc["amounts"]),
                timestamps=tuple(pc["timestamps"]),
            )
            for pc in data["planted_cycles"]
        ],
    )
