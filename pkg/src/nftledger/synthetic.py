"""Deterministic synthetic collections for tests, demos and the report fixture."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from nftledger.model import (
    Chain,
    CollectionManifest,
    NATIVE_CURRENCY,
    TokenTraitSet,
    TransactionRecord,
    dump_traits,
    dump_transactions,
)

EPOCH = datetime(2021, 8, 1, tzinfo=timezone.utc)


@dataclass
class SyntheticCollection:
    manifest: CollectionManifest
    records: list[TransactionRecord]
    traits: dict[str, TokenTraitSet]
    wash_tokens: set[str]

    def write(self, directory: Path) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "manifest": directory / "manifest.json",
            "transactions": directory / "transactions.csv",
            "traits": directory / "traits.csv",
        }
        paths["manifest"].write_text(json.dumps(self.manifest.to_dict(), indent=2) + "\n")
        paths["transactions"].write_bytes(dump_transactions(self.records, self.manifest))
        paths["traits"].write_bytes(dump_traits(self.traits))
        return paths


class _Wallets:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.issued: set[str] = set()

    def new(self) -> str:
        while True:
            addr = "0x" + "".join(self.rng.choice("0123456789abcdef") for _ in range(40))
            if addr not in self.issued:
                self.issued.add(addr)
                return addr


def _manifest(slug: str, chain: Chain, token_count: int) -> CollectionManifest:
    return CollectionManifest(
        slug=slug,
        name=slug.replace("-", " ").title(),
        chain=chain,
        native_currency=NATIVE_CURRENCY[chain],
        launch_date=EPOCH.date(),
        token_count=token_count,
    )


def _record(slug, token_id, n, ts, price, src, dst, marketplace="opensea", usd_rate=3000.0) -> TransactionRecord:
    return TransactionRecord(
        collection=slug,
        token_id=token_id,
        tx_hash=f"0x{token_id}-{n:04d}",
        timestamp=ts,
        price_native=price,
        price_usd=round(price * usd_rate, 2),
        from_wallet=src,
        to_wallet=dst,
        marketplace=marketplace,
    )


def chain_history(slug, token_id, n_trades, wallets: _Wallets, rng: random.Random, start: datetime, days: int):
    """Token passes through ``n_trades + 1`` distinct wallets."""
    holders = [wallets.new() for _ in range(n_trades + 1)]
    offsets = sorted(rng.randrange(days * 86400) for _ in range(n_trades))
    return [
        _record(slug, token_id, i, start + timedelta(seconds=off), round(rng.lognormvariate(1.0, 0.6), 4), a, b)
        for i, (off, a, b) in enumerate(zip(offsets, holders, holders[1:]))
    ]


def ping_pong_history(slug, token_id, n_trades, wallets: _Wallets, rng: random.Random, start: datetime):
    x, y = wallets.new(), wallets.new()
    day = start + timedelta(days=rng.randrange(60))
    return [
        _record(slug, token_id, i, day + timedelta(minutes=7 * i), round(rng.uniform(20, 60), 4),
                x if i % 2 == 0 else y, y if i % 2 == 0 else x, marketplace="looksrare")
        for i in range(n_trades)
    ]


def circular_history(slug, token_id, n_wallets, wallets: _Wallets, rng: random.Random, start: datetime):
    ring = [wallets.new() for _ in range(n_wallets)]
    day = start + timedelta(days=rng.randrange(60))
    return [
        _record(slug, token_id, i, day + timedelta(hours=i), round(rng.uniform(5, 15), 4), ring[i], ring[(i + 1) % n_wallets])
        for i in range(n_wallets)
    ]


def wash_injection_collection(
    n_clean: int = 1000, n_ping_pong: int = 20, n_circular: int = 10, seed: int = 7
) -> SyntheticCollection:
    """Chain-style tokens plus injected 2-wallet ping-pong and 3-wallet ring tokens."""
    rng = random.Random(seed)
    wallets = _Wallets(rng)
    slug = "wash-injection"
    total = n_clean + n_ping_pong + n_circular
    manifest = _manifest(slug, Chain.ETHEREUM, total)
    records: list[TransactionRecord] = []
    wash: set[str] = set()
    ids = [str(i) for i in range(total)]
    rng.shuffle(ids)
    for i, token_id in enumerate(ids):
        if i < n_ping_pong:
            records += ping_pong_history(slug, token_id, rng.randint(8, 32), wallets, rng, EPOCH)
            wash.add(token_id)
        elif i < n_ping_pong + n_circular:
            records += circular_history(slug, token_id, 3, wallets, rng, EPOCH)
            wash.add(token_id)
        else:
            records += chain_history(slug, token_id, rng.randint(1, 6), wallets, rng, EPOCH, 240)
    records.sort(key=lambda r: (r.timestamp, r.tx_hash, r.token_id))
    return SyntheticCollection(manifest, records, {}, wash)


def gbm_daily_means(n_days: int, daily_sigma: float, seed: int, start_price: float = 10.0) -> list[float]:
    rng = random.Random(seed)
    prices = [start_price]
    for _ in range(n_days - 1):
        prices.append(prices[-1] * math.exp(rng.gauss(-0.5 * daily_sigma**2, daily_sigma)))
    return prices


def fixture_collection(seed: int = 2022, n_tokens: int = 300) -> SyntheticCollection:
    """Small but complete dataset exercising every report path.

    Mixes chain-style trading, a handful of ping-pong and ring wash tokens,
    lateral swaps at 0.005 ETH and a trait table whose rarer values trade
    at a premium.
    """
    rng = random.Random(seed)
    wallets = _Wallets(rng)
    slug = "fixture-apes"
    manifest = _manifest(slug, Chain.ETHEREUM, n_tokens)

    trait_space = {
        "Background": [("Blue", 40), ("Orange", 30), ("Gray", 25), ("Gold", 5)],
        "Eyes": [("Bored", 50), ("Sleepy", 35), ("Laser", 10), ("Blue Beam", 5)],
        "Clothes": [("None", 45), ("Striped Tee", 40), ("Tuxedo", 15)],
    }
    weights = {t: {v: w for v, w in vals} for t, vals in trait_space.items()}
    traits = {}
    premium = {}
    for i in range(n_tokens):
        chosen = {t: rng.choices([v for v, _ in vals], [w for _, w in vals])[0] for t, vals in trait_space.items()}
        traits[str(i)] = TokenTraitSet(str(i), chosen)
        premium[str(i)] = sum(1.0 / weights[t][v] for t, v in chosen.items())

    records: list[TransactionRecord] = []
    wash: set[str] = set()
    means = gbm_daily_means(200, 0.08, seed)
    for i in range(n_tokens):
        token_id = str(i)
        kind = rng.random()
        if kind < 0.03:
            records += ping_pong_history(slug, token_id, rng.randint(4, 12), wallets, rng, EPOCH)
            wash.add(token_id)
            continue
        if kind < 0.05:
            records += circular_history(slug, token_id, rng.randint(3, 4), wallets, rng, EPOCH)
            wash.add(token_id)
            continue
        holders = [wallets.new() for _ in range(rng.randint(2, 6))]
        for n, (a, b) in enumerate(zip(holders, holders[1:])):
            day = rng.randrange(200)
            ts = EPOCH + timedelta(days=day, seconds=rng.randrange(86400))
            if rng.random() < 0.08:
                price = 0.005
            else:
                price = round(means[day] * (1 + 4 * premium[token_id]) * rng.lognormvariate(0, 0.25), 6)
            records.append(_record(slug, token_id, n, ts, price, a, b))
    records.sort(key=lambda r: (r.timestamp, r.tx_hash, r.token_id))
    return SyntheticCollection(manifest, records, traits, wash)

