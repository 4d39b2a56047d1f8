"""Parsing and normalization of sales-transaction CSV files.

Input format: UTF-8 CSV with columns ``sno,seller,buyer,timestamp,amount``,
one row per invoice. Timestamps use the ``YYYY/MM/DD/HH:MM`` layout and are
stored as integer minutes since the Unix epoch. Amounts are whole rupees.
Dealers are keyed by their display name in the file and assigned dense
integer ids in order of first appearance.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

CSV_HEADER = ("sno", "seller", "buyer", "timestamp", "amount")

_EPOCH = datetime(1970, 1, 1)
_TS_PATTERN = re.compile(r"^(\d{4})/(\d{2})/(\d{2})/(\d{2}):(\d{2})$")


class ParseError(ValueError):
    """A malformed row or field, with the 1-based file line it came from."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SelfLoopError(ParseError):
    """A transaction whose seller and buyer are the same dealer."""


@dataclass(frozen=True, slots=True)
class Transaction:
    """One sales invoice: ``seller`` sold goods worth ``amount`` to ``buyer``.

    ``seller`` and ``buyer`` are dealer ids, ``timestamp`` is minutes since
    the Unix epoch, ``amount`` is whole rupees (strictly positive).
    """

    seller: int
    buyer: int
    timestamp: int
    amount: int


@dataclass
class DealerRegistry:
    """Bijective name <-> dense-id mapping for all registered dealers."""

    names: list[str] = field(default_factory=list)
    _ids: dict[str, int] = field(default_factory=dict, repr=False)

    def add(self, name: str) -> int:
        """Return the id for ``name``, registering it if unseen."""
        existing = self._ids.get(name)
        if existing is not None:
            return existing
        new_id = len(self.names)
        self.names.append(name)
        self._ids[name] = new_id
        return new_id

    def id_of(self, name: str) -> int:
        return self._ids[name]

    def name_of(self, dealer_id: int) -> str:
        return self.names[dealer_id]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids


def parse_timestamp(text: str) -> int:
    """Parse a ``YYYY/MM/DD/HH:MM`` timestamp to minutes since the epoch.

    Any deviation from the exact layout (wrong delimiters, missing zero
    padding, out-of-range calendar fields) raises :class:`ParseError`.
    """
    m = _TS_PATTERN.match(text)
    if m is None:
        raise ParseError(f"bad timestamp {text!r}, expected YYYY/MM/DD/HH:MM")
    year, month, day, hour, minute = (int(g) for g in m.groups())
    try:
        dt = datetime(year, month, day, hour, minute)
    except ValueError as exc:
        raise ParseError(f"bad timestamp {text!r}: {exc}") from None
    return (dt - _EPOCH) // timedelta(minutes=1)


def format_timestamp(minutes: int) -> str:
    """Inverse of :func:`parse_timestamp`."""
    return (_EPOCH + timedelta(minutes=minutes)).strftime("%Y/%m/%d/%H:%M")


def _parse_row(
    row: list[str], line: int, registry: DealerRegistry
) -> Transaction:
    fields = [f.strip() for f in row]
    if len(fields) != 5:
        raise ParseError(f"expected 5 fields, got {len(fields)}", line)
    sno, seller_name, buyer_name, ts_text, amount_text = fields
    if not sno or not sno.isdigit():
        raise ParseError(f"bad serial field {sno!r}", line)
    if not seller_name or not buyer_name:
        raise ParseError("missing seller or buyer name", line)
    try:
        timestamp = parse_timestamp(ts_text)
    except ParseError as exc:
        raise ParseError(str(exc), line) from None
    try:
        amount = int(amount_text)
    except ValueError:
        raise ParseError(f"bad amount {amount_text!r}", line) from None
    if amount <= 0:
        raise ParseError(f"non-positive amount {amount}", line)
    if seller_name == buyer_name:
        raise SelfLoopError(f"self-sale by {seller_name!r}", line)
    return Transaction(
        seller=registry.add(seller_name),
        buyer=registry.add(buyer_name),
        timestamp=timestamp,
        amount=amount,
    )


def _parse_stream(stream) -> tuple[DealerRegistry, list[Transaction]]:
    registry = DealerRegistry()
    transactions: list[Transaction] = []
    first_data_row_seen = False
    for line, row in enumerate(csv.reader(stream), start=1):
        if not row or all(not f.strip() for f in row):
            continue
        if not first_data_row_seen:
            first_data_row_seen = True
            # Header detection: a non-numeric serial field marks a header.
            if not row[0].strip().isdigit():
                continue
        transactions.append(_parse_row(row, line, registry))
    return registry, transactions


def parse_transactions(path: str | Path) -> tuple[DealerRegistry, list[Transaction]]:
    """Read a transaction CSV file, preserving row order.

    Raises ``OSError`` for unreadable files, :class:`ParseError` (with a
    line number) for malformed rows, and :class:`SelfLoopError` when the
    seller and buyer coincide.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        return _parse_stream(fh)


def parse_transactions_text(text: str) -> tuple[DealerRegistry, list[Transaction]]:
    """Parse CSV content held in a string; same contract as from a file."""
    return _parse_stream(io.StringIO(text))


def serialize_transactions(
    registry: DealerRegistry, transactions: list[Transaction]
) -> str:
    """Render transactions to the canonical CSV format (with header).

    Serial numbers are reassigned 1..N in row order; re-parsing the output
    yields identical records.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for sno, tx in enumerate(transactions, start=1):
        writer.writerow(
            (
                sno,
                registry.name_of(tx.seller),
                registry.name_of(tx.buyer),
                format_timestamp(tx.timestamp),
                tx.amount,
            )
        )
    return out.getvalue()


def write_transactions(
    path: str | Path, registry: DealerRegistry, transactions: list[Transaction]
) -> None:
    Path(path).write_text(
        serialize_transactions(registry, transactions), encoding="utf-8"
    )
