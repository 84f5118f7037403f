"""Lateral-swap screening.

Tokens moved between wallets through a swap contract show up at the
contract's execution fee instead of a fair sale price. Those rows are
flagged here and can be dropped before any valuation work.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Collection, Iterable, Sequence

from nftledger.errors import FlagMismatchError
from nftledger.model import Chain, TransactionRecord

FLAG_HEADER = ("tx_hash", "token_id", "flag", "reason")


class Flag(str, Enum):
    LATERAL_SWAP = "LateralSwapSuspect"
    WASH = "WashSuspect"
    CLEAN = "Clean"


@dataclass(frozen=True)
class SwapFilterConfig:
    swap_price_native: float = 0.005
    relative_tolerance: float = 1e-9
    applicable_chains: frozenset = field(default_factory=lambda: frozenset({Chain.ETHEREUM}))

    def __post_init__(self) -> None:
        if not self.swap_price_native > 0:
            raise ValueError("swap_price_native must be positive")
        if not 0 <= self.relative_tolerance <= 1e-3:
            raise ValueError("relative_tolerance must lie in [0, 1e-3]")
        object.__setattr__(self, "applicable_chains", frozenset(self.applicable_chains))


@dataclass(frozen=True)
class TransactionFlag:
    tx_hash: str
    token_id: str
    flag: Flag
    reason: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.tx_hash, self.token_id)


def is_swap_price(price_native: float, config: SwapFilterConfig) -> bool:
    return abs(price_native - config.swap_price_native) <= config.relative_tolerance * config.swap_price_native


def flag_lateral_swaps(
    records: Sequence[TransactionRecord], config: SwapFilterConfig, chain: Chain
) -> list[TransactionFlag]:
    """Classify each record as ``LateralSwapSuspect`` or ``Clean``.

    ``chain`` is the collection's chain (from its manifest); collections on
    chains outside ``config.applicable_chains`` are never flagged.
    """
    applicable = chain in config.applicable_chains
    flags = []
    for r in records:
        if applicable and is_swap_price(r.price_native, config):
            reason = f"price_native {r.price_native!r} matches swap execution price {config.swap_price_native!r}"
            flags.append(TransactionFlag(r.tx_hash, r.token_id, Flag.LATERAL_SWAP, reason))
        else:
            flags.append(TransactionFlag(r.tx_hash, r.token_id, Flag.CLEAN, ""))
    return flags


def apply_filter(
    records: Sequence[TransactionRecord],
    flags: Iterable[TransactionFlag],
    drop: Collection[Flag],
) -> list[TransactionRecord]:
    by_key = {f.key: f.flag for f in flags}
    kept = []
    for r in records:
        try:
            flag = by_key[r.key]
        except KeyError:
            raise FlagMismatchError(f"no flag for tx_hash={r.tx_hash} token_id={r.token_id}") from None
        if flag not in drop:
            kept.append(r)
    return kept


def drop_lateral_swaps(
    records: Sequence[TransactionRecord], chain: Chain, config: SwapFilterConfig | None = None
) -> list[TransactionRecord]:
    flags = flag_lateral_swaps(records, config or SwapFilterConfig(), chain)
    return apply_filter(records, flags, {Flag.LATERAL_SWAP})


def dump_flags(flags: Iterable[TransactionFlag]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FLAG_HEADER)
    for f in flags:
        writer.writerow([f.tx_hash, f.token_id, f.flag.value, f.reason])
    return buf.getvalue().encode("utf-8")


def parse_flags(data: bytes) -> list[TransactionFlag]:
    reader = csv.reader(io.StringIO(data.decode("utf-8"), newline=""))
    header = next(reader, None)
    if header is None or tuple(header) != FLAG_HEADER:
        raise ValueError("flag CSV header mismatch")
    return [TransactionFlag(h, t, Flag(f), reason) for h, t, f, reason in reader]
