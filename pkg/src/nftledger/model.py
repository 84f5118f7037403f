"""Canonical data model plus ingestion and validation of the three input files.

Inputs are already-decoded exports: a manifest (flat JSON), a transactions
CSV and a long-format traits CSV. Rejected transaction rows never abort a
parse; they are collected in a :class:`ValidationReport` instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum
from types import MappingProxyType
from typing import IO, Iterable, Mapping, Sequence, Union

from nftledger.errors import ManifestError, SchemaError, TraitConflictError

ByteSource = Union[bytes, IO[bytes]]

TRANSACTION_HEADER = (
    "collection",
    "token_id",
    "tx_hash",
    "timestamp",
    "price_native",
    "price_usd",
    "currency",
    "from_wallet",
    "to_wallet",
    "marketplace",
)
TRAIT_HEADER = ("token_id", "trait_type", "trait_value")
MANIFEST_FIELDS = ("slug", "name", "chain", "native_currency", "launch_date", "token_count")

NONE_TRAIT = "None"


class Chain(str, Enum):
    ETHEREUM = "Ethereum"
    SOLANA = "Solana"


class Currency(str, Enum):
    ETH = "ETH"
    SOL = "SOL"


NATIVE_CURRENCY = {Chain.ETHEREUM: Currency.ETH, Chain.SOLANA: Currency.SOL}


@dataclass(frozen=True)
class CollectionManifest:
    slug: str
    name: str
    chain: Chain
    native_currency: Currency
    launch_date: date
    token_count: int

    def to_dict(self) -> dict:
        return {
            "slug": self.slug,
            "name": self.name,
            "chain": self.chain.value,
            "native_currency": self.native_currency.value,
            "launch_date": self.launch_date.isoformat(),
            "token_count": self.token_count,
        }


@dataclass(frozen=True)
class TransactionRecord:
    collection: str
    token_id: str
    tx_hash: str
    timestamp: datetime
    price_native: float
    price_usd: float
    from_wallet: str
    to_wallet: str
    marketplace: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.tx_hash, self.token_id)

    def price(self, price_field: str) -> float:
        if price_field == "native":
            return self.price_native
        if price_field == "usd":
            return self.price_usd
        raise ValueError(f"unknown price field {price_field!r}")


@dataclass(frozen=True)
class TokenTraitSet:
    token_id: str
    traits: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "traits", MappingProxyType(dict(self.traits)))


@dataclass
class ValidationReport:
    record_count: int = 0
    error_entries: list[tuple[int, str]] = field(default_factory=list)
    warning_entries: list[tuple[int, str]] = field(default_factory=list)
    duplicate_count: int = 0

    @property
    def accepted(self) -> bool:
        return not self.error_entries

    def to_dict(self) -> dict:
        return {
            "record_count": self.record_count,
            "accepted": self.accepted,
            "errors": [{"line": n, "reason": r} for n, r in self.error_entries],
            "warnings": [{"line": n, "reason": r} for n, r in self.warning_entries],
        }


def _read_text(source: ByteSource) -> str:
    try:
        raw = source if isinstance(source, (bytes, bytearray)) else source.read()
        return bytes(raw).decode("utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise SchemaError(f"unreadable stream: {exc}") from exc


def _parse_launch_date(value) -> date:
    text = str(value).strip()
    for fmt in ("%Y-%m-%d", "%Y-%m", "%B %Y", "%b %Y"):
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ManifestError(f"unparseable launch_date {value!r}")


def _parse_chain(value) -> Chain:
    for chain in Chain:
        if str(value).strip().lower() == chain.value.lower():
            return chain
    raise ManifestError(f"unknown chain {value!r}")


def parse_manifest(source: ByteSource) -> CollectionManifest:
    try:
        doc = json.loads(_read_text(source))
    except (json.JSONDecodeError, SchemaError) as exc:
        raise ManifestError(f"malformed manifest: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("malformed manifest: expected a JSON object")
    missing = [k for k in ("slug", "chain", "launch_date", "token_count") if k not in doc]
    if missing:
        raise ManifestError(f"malformed manifest: missing {', '.join(missing)}")

    chain = _parse_chain(doc["chain"])
    currency = NATIVE_CURRENCY[chain]
    if doc.get("native_currency") not in (None, ""):
        declared = str(doc["native_currency"]).strip().upper()
        if declared != currency.value:
            raise ManifestError(f"currency {declared} does not match chain {chain.value}")

    token_count = doc["token_count"]
    if isinstance(token_count, bool) or not isinstance(token_count, (int, str)):
        raise ManifestError(f"invalid token_count {token_count!r}")
    try:
        token_count = int(str(token_count).replace(",", ""))
    except ValueError as exc:
        raise ManifestError(f"invalid token_count {token_count!r}") from exc
    if token_count <= 0:
        raise ManifestError("non-positive token count")

    slug = str(doc["slug"]).strip()
    if not slug:
        raise ManifestError("empty slug")
    return CollectionManifest(
        slug=slug,
        name=str(doc.get("name") or slug),
        chain=chain,
        native_currency=currency,
        launch_date=_parse_launch_date(doc["launch_date"]),
        token_count=token_count,
    )


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def _parse_price(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"unparseable {name} {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite {name}")
    if value < 0:
        raise ValueError(f"negative {name}")
    return value


def _row_to_record(row: dict, manifest: CollectionManifest) -> TransactionRecord:
    if row["collection"] != manifest.slug:
        raise ValueError(f"collection {row['collection']!r} does not match manifest {manifest.slug!r}")
    for name in ("token_id", "tx_hash", "from_wallet", "to_wallet"):
        if not row[name]:
            raise ValueError(f"empty {name}")
    if row["currency"] and row["currency"].upper() != manifest.native_currency.value:
        raise ValueError(f"currency {row['currency']!r} is not {manifest.native_currency.value}")
    try:
        ts = parse_timestamp(row["timestamp"])
    except ValueError:
        raise ValueError(f"unparseable timestamp {row['timestamp']!r}") from None
    if ts.date() < manifest.launch_date:
        raise ValueError("timestamp precedes collection launch")
    return TransactionRecord(
        collection=row["collection"],
        token_id=row["token_id"],
        tx_hash=row["tx_hash"],
        timestamp=ts,
        price_native=_parse_price(row["price_native"], "price_native"),
        price_usd=_parse_price(row["price_usd"], "price_usd"),
        from_wallet=row["from_wallet"],
        to_wallet=row["to_wallet"],
        marketplace=row["marketplace"] or "other",
    )


def parse_transactions(
    source: ByteSource, manifest: CollectionManifest
) -> tuple[list[TransactionRecord], ValidationReport]:
    """Parse a transactions CSV into validated records sorted by time.

    Rows that break a record invariant are dropped and listed as errors.
    Rows repeating an earlier ``(tx_hash, token_id)`` are collapsed into the
    first occurrence with a warning.
    """
    reader = csv.reader(io.StringIO(_read_text(source), newline=""))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != TRANSACTION_HEADER:
        raise SchemaError(f"header mismatch: expected {','.join(TRANSACTION_HEADER)}")

    report = ValidationReport()
    seen: dict[tuple[str, str], TransactionRecord] = {}
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(TRANSACTION_HEADER):
            report.error_entries.append((line, f"expected {len(TRANSACTION_HEADER)} fields, got {len(row)}"))
            continue
        fields = {k: v.strip() for k, v in zip(TRANSACTION_HEADER, row)}
        try:
            record = _row_to_record(fields, manifest)
        except ValueError as exc:
            report.error_entries.append((line, str(exc)))
            continue
        first = seen.get(record.key)
        if first is not None:
            detail = "identical" if first == record else "conflicting"
            report.warning_entries.append(
                (line, f"duplicate ({detail}) tx_hash={record.tx_hash} token_id={record.token_id} collapsed")
            )
            report.duplicate_count += 1
            continue
        seen[record.key] = record

    records = sorted(seen.values(), key=lambda r: (r.timestamp, r.tx_hash, r.token_id))
    report.record_count = len(records)
    return records, report


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def dump_transactions(records: Iterable[TransactionRecord], manifest: CollectionManifest) -> bytes:
    """Serialize records in the same CSV format :func:`parse_transactions` reads."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRANSACTION_HEADER)
    for r in records:
        writer.writerow(
            [
                r.collection,
                r.token_id,
                r.tx_hash,
                format_timestamp(r.timestamp),
                repr(r.price_native),
                repr(r.price_usd),
                manifest.native_currency.value,
                r.from_wallet,
                r.to_wallet,
                r.marketplace,
            ]
        )
    return buf.getvalue().encode("utf-8")


def parse_traits(source: ByteSource, manifest: CollectionManifest | None = None) -> dict[str, TokenTraitSet]:
    """Parse long-format trait rows and complete every token against the
    union of trait types, filling gaps with the explicit value ``"None"``.
    """
    reader = csv.reader(io.StringIO(_read_text(source), newline=""))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != TRAIT_HEADER:
        raise SchemaError(f"header mismatch: expected {','.join(TRAIT_HEADER)}")

    raw: dict[str, dict[str, str]] = {}
    trait_types: set[str] = set()
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise SchemaError(f"line {reader.line_num}: expected 3 fields, got {len(row)}")
        token_id, trait_type, value = (v.strip() for v in row)
        if not token_id or not trait_type:
            raise SchemaError(f"line {reader.line_num}: empty token_id or trait_type")
        value = value or NONE_TRAIT
        traits = raw.setdefault(token_id, {})
        if traits.get(trait_type, value) != value:
            raise TraitConflictError(
                f"token {token_id} has conflicting values for {trait_type}: {traits[trait_type]!r} vs {value!r}"
            )
        traits[trait_type] = value
        trait_types.add(trait_type)

    return {
        token_id: TokenTraitSet(token_id, {t: traits.get(t, NONE_TRAIT) for t in sorted(trait_types)})
        for token_id, traits in raw.items()
    }


def dump_traits(trait_sets: Mapping[str, TokenTraitSet]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAIT_HEADER)
    for token_id in sorted(trait_sets):
        for trait_type, value in sorted(trait_sets[token_id].traits.items()):
            writer.writerow([token_id, trait_type, value])
    return buf.getvalue().encode("utf-8")


def group_by_token(records: Sequence[TransactionRecord]) -> dict[str, list[TransactionRecord]]:
    groups: dict[str, list[TransactionRecord]] = {}
    for r in records:
        groups.setdefault(r.token_id, []).append(r)
    return groups
