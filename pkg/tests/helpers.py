"""Shared fixtures for the test suites: canned addresses, a registry and
price table over two authentic tokens, lookalike construction with exact
prefix/suffix match counts, and a small ordered-stream builder."""

from __future__ import annotations

from datetime import date, timedelta
from decimal import Decimal

from poisonscan.core import (
    PriceTable,
    RegistryEntry,
    TokenRef,
    TokenRegistry,
    TransferEvent,
)

GENESIS = 1_704_067_200
STABLE = "0x" + "5" * 40
AUTH = "0x" + "6" * 40
FAKE = "0x" + "7" * 40

V1 = "0x" + "01" * 20
V2 = "0x" + "02" * 20
R1 = "0x1a2b3c4d5e6f70819293a4b5c6d7e8f901234567"
R2 = "0x9f8e7d6c5b4a39281716253449586a7b8c9d0e1f"


def lookalike(intended: str, a: int, b: int) -> str:
    """Address agreeing with ``intended`` on exactly the first a and last b
    hex digits (the filler digit breaks both adjacent positions)."""
    digits = intended[2:]
    filler = next(
        c for c in "0123456789abcdef" if c != digits[a] and c != digits[39 - b]
    )
    return "0x" + digits[:a] + filler * (40 - a - b) + digits[40 - b :]


def make_registry() -> TokenRegistry:
    return TokenRegistry(
        [
            RegistryEntry(TokenRef(1, STABLE, "USDS", 6), authentic=True, stablecoin=True),
            RegistryEntry(TokenRef(1, AUTH, "WIDE", 18), authentic=True, stablecoin=False),
        ]
    )


def make_prices(days: int = 30) -> PriceTable:
    start = date(2024, 1, 1)
    table = {}
    for i in range(days):
        day = start + timedelta(days=i)
        table[(STABLE, day)] = Decimal("1")
        table[(AUTH, day)] = Decimal("5")
    return PriceTable(table)


class StreamBuilder:
    """Accumulates rows and assigns per-block log indexes and tx hashes."""

    def __init__(self, chain_id: int = 1):
        self.chain_id = chain_id
        self.rows: list[tuple] = []

    def add(self, block, frm, to, token, value, tx_hash=None, tx=None):
        self.rows.append((block, len(self.rows), frm, to, token, value, tx_hash, tx))

    def events(self) -> list[TransferEvent]:
        out = []
        per_block: dict[int, int] = {}
        for block, seq, frm, to, token, value, tx_hash, tx in sorted(
            self.rows, key=lambda r: (r[0], r[1])
        ):
            li = per_block.get(block, 0)
            per_block[block] = li + 1
            out.append(
                TransferEvent(
                    chain_id=self.chain_id,
                    block_number=block,
                    timestamp=GENESIS + block * 12,
                    tx_hash=tx_hash or f"0x{seq:064x}",
                    log_index=li,
                    token=token,
                    from_addr=frm,
                    to_addr=to,
                    value=value,
                    tx=tx,
                )
            )
        return out
