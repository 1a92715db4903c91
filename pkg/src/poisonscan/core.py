"""Core data model for address-poisoning forensics.

Addresses, tokens, transfer events, price data, and per-chain configuration.
Types are immutable after construction; pipeline stages return new values
instead of mutating shared state. Money amounts are Decimal and every USD
figure is quantized to six fractional digits with banker's rounding, so sums
and differences stay exact.

Addresses are canonicalized to lowercase 0x-prefixed hex. Checksummed input
is accepted but the checksum itself is not validated; all comparisons happen
on the canonical form.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields, replace
from datetime import date, datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from pathlib import Path
from typing import Iterable, Iterator, Mapping

__all__ = [
    "Address",
    "AddressError",
    "AnalyticsError",
    "ChainConfig",
    "ClusteringError",
    "ConfigError",
    "Label",
    "MissingPriceError",
    "OrderingError",
    "ParseError",
    "PoisonscanError",
    "PriceTable",
    "RegistryEntry",
    "RegistryError",
    "RpcError",
    "ScenarioError",
    "TokenRef",
    "TokenRegistry",
    "TransactionRecord",
    "TransferEvent",
    "TRANSFER_TOPIC",
    "USD_QUANTUM",
    "default_config",
    "event_date",
    "hex_digits",
    "parse_address",
    "to_usd",
    "usd_amount",
]

# Canonical ERC-20 Transfer(address,address,uint256) topic hash.
TRANSFER_TOPIC = "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"

USD_QUANTUM = Decimal("0.000001")

MAX_VALUE = 2**256 - 1

Address = str


class PoisonscanError(Exception):
    """Base class for every error raised by this package."""


class AddressError(PoisonscanError):
    pass


class ParseError(PoisonscanError):
    """Malformed input data. Carries the file path and line when known."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if path is not None:
            where = f" ({self.path}" + (f":{line}" if line is not None else "") + ")"
        super().__init__(message + where)


class RegistryError(PoisonscanError):
    pass


class MissingPriceError(PoisonscanError):
    """No USD price known for an asset on a given day."""

    def __init__(self, asset: str, day: date):
        self.asset = asset
        self.day = day
        super().__init__(f"no USD price for {asset} on {day.isoformat()}")


class ConfigError(PoisonscanError):
    pass


class OrderingError(PoisonscanError):
    pass


class RpcError(PoisonscanError):
    def __init__(self, message: str, from_block: int | None = None, to_block: int | None = None):
        self.from_block = from_block
        self.to_block = to_block
        if from_block is not None:
            message = f"{message} [blocks {from_block}..{to_block}]"
        super().__init__(message)


class ScenarioError(PoisonscanError):
    pass


class AnalyticsError(PoisonscanError):
    pass


class ClusteringError(PoisonscanError):
    pass


# ---------------------------------------------------------------------------
# transfer labels


class Label:
    """Canonical label strings attached to classified transfer events."""

    INTENDED = "intended"
    TINY = "tiny_poison"
    ZERO = "zero_value_poison"
    COUNTERFEIT = "counterfeit_poison"
    PAYOFF_CONFIRMED = "payoff_confirmed"
    PAYOFF_UNCONFIRMED = "payoff_unconfirmed"
    ACCIDENTAL = "accidental"
    BENIGN = "benign"

    POISONS = frozenset({TINY, ZERO, COUNTERFEIT})
    PAYOFFS = frozenset({PAYOFF_CONFIRMED, PAYOFF_UNCONFIRMED, ACCIDENTAL})
    ALL = frozenset(
        {INTENDED, TINY, ZERO, COUNTERFEIT, PAYOFF_CONFIRMED, PAYOFF_UNCONFIRMED, ACCIDENTAL, BENIGN}
    )


# ---------------------------------------------------------------------------
# addresses


def parse_address(text: str) -> Address:
    """Canonicalize an EVM address to lowercase 0x-prefixed form.

    Accepts checksummed, lowercase, and bare 40-digit input. The checksum is
    not validated; canonical lowercase is the comparison form everywhere.
    """
    if not isinstance(text, str):
        raise AddressError(f"address must be a string, got {type(text).__name__}")
    s = text.strip()
    if s[:2] in ("0x", "0X"):
        s = s[2:]
    if len(s) != 40:
        raise AddressError(f"address must be 40 hex digits, got {len(s)} in {text!r}")
    s = s.lower()
    try:
        int(s, 16)
    except ValueError:
        raise AddressError(f"address contains non-hex digits: {text!r}") from None
    return "0x" + s


def hex_digits(address: Address) -> str:
    """The 40 hex digits of a canonical address, prefix stripped."""
    return address[2:]


# ---------------------------------------------------------------------------
# tokens


@dataclass(frozen=True, slots=True)
class TokenRef:
    chain_id: int
    address: Address
    symbol: str
    decimals: int


@dataclass(frozen=True, slots=True)
class RegistryEntry:
    token: TokenRef
    authentic: bool
    stablecoin: bool


class TokenRegistry:
    """Registry of known token contracts per chain.

    A token absent from the registry, or present with authentic=False, is
    counterfeit. Stablecoin entries must be authentic.
    """

    def __init__(self, entries: Iterable[RegistryEntry]):
        table: dict[tuple[int, Address], RegistryEntry] = {}
        for entry in entries:
            token = entry.token
            if not 0 <= token.decimals <= 255:
                raise RegistryError(
                    f"decimals out of range for {token.symbol} on chain {token.chain_id}: "
                    f"{token.decimals}"
                )
            if entry.stablecoin and not entry.authentic:
                raise RegistryError(
                    f"stablecoin flag requires authentic=true: {token.address} "
                    f"on chain {token.chain_id}"
                )
            key = (token.chain_id, token.address)
            if key in table:
                raise RegistryError(
                    f"duplicate registry entry for {token.address} on chain {token.chain_id}"
                )
            table[key] = entry
        self._table = table
        self._stable: dict[int, frozenset[Address]] = {}
        self._authentic: dict[int, frozenset[Address]] = {}

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "TokenRegistry":
        entries = []
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"bad JSON: {exc}", path=path, line=lineno) from None
                try:
                    token = TokenRef(
                        chain_id=int(row["chain_id"]),
                        address=parse_address(row["address"]),
                        symbol=str(row["symbol"]),
                        decimals=int(row["decimals"]),
                    )
                    entries.append(
                        RegistryEntry(
                            token=token,
                            authentic=bool(row["authentic"]),
                            stablecoin=bool(row["stablecoin"]),
                        )
                    )
                except KeyError as exc:
                    raise ParseError(f"missing field {exc}", path=path, line=lineno) from None
                except (ValueError, AddressError) as exc:
                    raise ParseError(str(exc), path=path, line=lineno) from None
        return cls(entries)

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for entry in self:
                token = entry.token
                handle.write(
                    json.dumps(
                        {
                            "chain_id": token.chain_id,
                            "address": token.address,
                            "symbol": token.symbol,
                            "decimals": token.decimals,
                            "authentic": entry.authentic,
                            "stablecoin": entry.stablecoin,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    def get(self, chain_id: int, address: Address) -> RegistryEntry | None:
        return self._table.get((chain_id, address))

    def token(self, chain_id: int, address: Address) -> TokenRef | None:
        entry = self._table.get((chain_id, address))
        return entry.token if entry is not None else None

    def is_authentic(self, chain_id: int, address: Address) -> bool:
        entry = self._table.get((chain_id, address))
        return entry is not None and entry.authentic

    def is_stablecoin(self, chain_id: int, address: Address) -> bool:
        entry = self._table.get((chain_id, address))
        return entry is not None and entry.stablecoin

    def stablecoins(self, chain_id: int) -> frozenset[Address]:
        cached = self._stable.get(chain_id)
        if cached is None:
            cached = frozenset(
                addr for (cid, addr), e in self._table.items() if cid == chain_id and e.stablecoin
            )
            self._stable[chain_id] = cached
        return cached

    def authentic_tokens(self, chain_id: int) -> frozenset[Address]:
        cached = self._authentic.get(chain_id)
        if cached is None:
            cached = frozenset(
                addr for (cid, addr), e in self._table.items() if cid == chain_id and e.authentic
            )
            self._authentic[chain_id] = cached
        return cached

    def chains(self) -> tuple[int, ...]:
        return tuple(sorted({cid for cid, _ in self._table}))

    def __len__(self) -> int:
        return len(self._table)

    def __iter__(self) -> Iterator[RegistryEntry]:
        for key in sorted(self._table):
            yield self._table[key]


# ---------------------------------------------------------------------------
# transfers


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    """Envelope of the transaction a transfer event was emitted in."""

    initiator: Address
    target: Address | None = None
    gas_used: int | None = None
    gas_price: int | None = None


@dataclass(frozen=True, slots=True)
class TransferEvent:
    """One ERC-20 style Transfer log entry.

    value is the raw token amount (base units). Within a chain the pair
    (block_number, log_index) is the total order used by every timing rule.
    """

    chain_id: int
    block_number: int
    timestamp: int
    tx_hash: str
    log_index: int
    token: Address
    from_addr: Address
    to_addr: Address
    value: int
    tx: TransactionRecord | None = None

    @property
    def key(self) -> str:
        return f"{self.tx_hash}:{self.log_index}"

    @property
    def order(self) -> tuple[int, int]:
        return (self.block_number, self.log_index)


def event_date(timestamp: int) -> date:
    """UTC calendar day of a unix timestamp. Price lookups key on this."""
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).date()


# ---------------------------------------------------------------------------
# prices


class PriceTable:
    """Daily USD close prices keyed by (asset, day).

    Asset ids are token contract addresses in canonical form, or a bare
    symbol for chain-native fee assets. parity_assets lists assets that fall
    back to 1.00 USD when no row exists; that fallback is opt-in and meant
    for designated stablecoins only.
    """

    def __init__(
        self,
        prices: Mapping[tuple[str, date], Decimal],
        parity_assets: frozenset[str] | Iterable[str] = frozenset(),
    ):
        self._prices = dict(prices)
        self._parity = frozenset(parity_assets)
        self._one = Decimal("1")

    @classmethod
    def from_csv(
        cls, path: str | Path, parity_assets: Iterable[str] = frozenset()
    ) -> "PriceTable":
        prices: dict[tuple[str, date], Decimal] = {}
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            required = {"asset", "date", "usd_price"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ParseError(
                    f"price CSV needs columns {sorted(required)}, got {reader.fieldnames}",
                    path=path,
                )
            for lineno, row in enumerate(reader, start=2):
                try:
                    asset = row["asset"].strip()
                    day = date.fromisoformat(row["date"].strip())
                    price = Decimal(row["usd_price"].strip())
                except Exception as exc:
                    raise ParseError(f"bad price row: {exc}", path=path, line=lineno) from None
                if not asset:
                    raise ParseError("empty asset id", path=path, line=lineno)
                if price <= 0:
                    raise ParseError(f"price must be positive, got {price}", path=path, line=lineno)
                key = (asset, day)
                if key in prices:
                    raise ParseError(
                        f"duplicate price row for {asset} on {day}", path=path, line=lineno
                    )
                prices[key] = price
        return cls(prices, parity_assets=frozenset(parity_assets))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["asset", "date", "usd_price"])
            for (asset, day), price in sorted(self._prices.items(), key=lambda kv: (kv[0][0], kv[0][1])):
                writer.writerow([asset, day.isoformat(), str(price)])

    def get(self, asset: str, day: date) -> Decimal:
        price = self._prices.get((asset, day))
        if price is None:
            if asset in self._parity:
                return self._one
            raise MissingPriceError(asset, day)
        return price

    def get_or_none(self, asset: str, day: date) -> Decimal | None:
        price = self._prices.get((asset, day))
        if price is None and asset in self._parity:
            return self._one
        return price

    def assets(self) -> frozenset[str]:
        return frozenset(asset for asset, _ in self._prices)

    def __len__(self) -> int:
        return len(self._prices)


def usd_amount(value: int, decimals: int, price: Decimal) -> Decimal:
    """Exact token-amount times price, quantized half-even to 6 digits.

    Runs at high precision so 256-bit raw values never round before the
    final quantize step.
    """
    if value < 0:
        raise ValueError(f"negative transfer value: {value}")
    with localcontext() as ctx:
        ctx.prec = 120
        amount = Decimal(value).scaleb(-decimals) * price
        return amount.quantize(USD_QUANTUM, rounding=ROUND_HALF_EVEN)


def to_usd(value: int, token: TokenRef, day: date, prices: PriceTable) -> Decimal:
    """USD value of a raw token amount at the transfer-day close price."""
    return usd_amount(value, token.decimals, prices.get(token.address, day))


# ---------------------------------------------------------------------------
# chain configuration


@dataclass(frozen=True)
class ChainConfig:
    """Per-chain detection parameters.

    window_blocks is the candidate window length m: after a trigger at block
    n, candidate transfers are collected in blocks n+1 through n+m+1. The
    defaults mirror a 20 minute window (100 twelve-second blocks; use 400 on
    three-second chains).
    """

    chain_id: int
    window_blocks: int = 100
    tiny_threshold_usd: Decimal = Decimal("10")
    a_min: int = 3
    b_min: int = 4
    birthday_alpha: float = 0.999
    typo_match_bound: int = 20
    block_time_seconds: int = 12
    native_asset: str = "ETH"
    stablecoins: tuple[Address, ...] | None = None
    stablecoin_parity: bool = False

    def __post_init__(self):
        if self.window_blocks < 1:
            raise ConfigError(f"window_blocks must be >= 1, got {self.window_blocks}")
        if not isinstance(self.tiny_threshold_usd, Decimal):
            object.__setattr__(self, "tiny_threshold_usd", Decimal(str(self.tiny_threshold_usd)))
        if self.tiny_threshold_usd <= 0:
            raise ConfigError(f"tiny_threshold_usd must be > 0, got {self.tiny_threshold_usd}")
        if not 0 < self.birthday_alpha < 1:
            raise ConfigError(f"birthday_alpha must be in (0, 1), got {self.birthday_alpha}")
        if not 0 <= self.a_min <= 40:
            raise ConfigError(f"a_min must be in [0, 40], got {self.a_min}")
        if not 0 <= self.b_min <= 40:
            raise ConfigError(f"b_min must be in [0, 40], got {self.b_min}")
        if not 0 <= self.typo_match_bound <= 40:
            raise ConfigError(f"typo_match_bound must be in [0, 40], got {self.typo_match_bound}")
        if self.block_time_seconds < 1:
            raise ConfigError(f"block_time_seconds must be >= 1, got {self.block_time_seconds}")
        if self.stablecoins is not None:
            try:
                canon = tuple(parse_address(a) for a in self.stablecoins)
            except AddressError as exc:
                raise ConfigError(f"bad stablecoin address: {exc}") from None
            object.__setattr__(self, "stablecoins", canon)

    def with_overrides(self, **kwargs) -> "ChainConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Decimal):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ChainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "tiny_threshold_usd" in kwargs:
            kwargs["tiny_threshold_usd"] = Decimal(str(kwargs["tiny_threshold_usd"]))
        if kwargs.get("stablecoins") is not None:
            kwargs["stablecoins"] = tuple(kwargs["stablecoins"])
        if "chain_id" not in kwargs:
            raise ConfigError("config requires chain_id")
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ChainConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad config JSON in {path}: {exc}") from None
        return cls.from_dict(raw)


_PRESETS: dict[int, dict] = {
    1: {"window_blocks": 100, "block_time_seconds": 12, "native_asset": "ETH"},
    56: {"window_blocks": 400, "block_time_seconds": 3, "native_asset": "BNB"},
}


def default_config(chain_id: int) -> ChainConfig:
    """Detection defaults for a chain: 20 minute window, $10 tiny bound,
    (3, 4) similarity thresholds."""
    preset = _PRESETS.get(chain_id, {})
    return ChainConfig(chain_id=chain_id, **preset)
