"""Trait frequencies, average-rarity scores and the price-vs-rarity fit.

A trait value's rarity is the share of the collection carrying it; a token's
score is the mean of those shares over its trait types, so lower is rarer.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from nftledger.errors import InsufficientDataError, NoSalesError, UndefinedSlopeError, UnknownTokenError
from nftledger.model import CollectionManifest, TokenTraitSet, TransactionRecord

RARITY_HEADER = ("token_id", "score", "avg_price_usd", "n_sales")


@dataclass(frozen=True)
class TraitFrequency:
    count: int
    fraction: float


@dataclass
class TraitFrequencyTable:
    token_count: int
    entries: dict[tuple[str, str], TraitFrequency]
    warnings: list[str] = field(default_factory=list)

    def fraction(self, trait_type: str, value: str) -> float:
        return self.entries[(trait_type, value)].fraction

    def count(self, trait_type: str, value: str) -> int:
        return self.entries[(trait_type, value)].count

    def trait_types(self) -> list[str]:
        return sorted({t for t, _ in self.entries})

    def values(self, trait_type: str) -> dict[str, TraitFrequency]:
        return {v: f for (t, v), f in self.entries.items() if t == trait_type}


@dataclass(frozen=True)
class RarityScore:
    token_id: str
    score: float


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    n: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared, "n": self.n}


def trait_frequencies(trait_sets: Mapping[str, TokenTraitSet], manifest: CollectionManifest) -> TraitFrequencyTable:
    counts: dict[tuple[str, str], int] = {}
    for ts in trait_sets.values():
        for trait_type, value in ts.traits.items():
            counts[(trait_type, value)] = counts.get((trait_type, value), 0) + 1

    n = manifest.token_count
    warnings = []
    if len(trait_sets) > n:
        warnings.append(f"{len(trait_sets)} tokens carry traits but token_count is {n}")
    elif len(trait_sets) < n:
        warnings.append(f"only {len(trait_sets)} of {n} tokens carry traits; fractions will not sum to 1")
    entries = {key: TraitFrequency(c, c / n) for key, c in sorted(counts.items())}
    return TraitFrequencyTable(n, entries, warnings)


def rarity_score(token_id: str, trait_sets: Mapping[str, TokenTraitSet], table: TraitFrequencyTable) -> RarityScore:
    try:
        traits = trait_sets[token_id].traits
    except KeyError:
        raise UnknownTokenError(f"unknown token {token_id}") from None
    if not traits:
        raise UnknownTokenError(f"token {token_id} has no traits")
    # mean of count/N over k traits == sum(counts) / (k*N); integer division rounds once
    total = sum(table.count(t, v) for t, v in traits.items())
    return RarityScore(token_id, total / (len(traits) * table.token_count))


def average_token_price(records: Iterable[TransactionRecord], token_id: str, price_field: str = "usd") -> float:
    prices = [r.price(price_field) for r in records if r.token_id == token_id]
    if not prices:
        raise NoSalesError(f"token {token_id}: no sales")
    return math.fsum(prices) / len(prices)


def price_rarity_regression(pairs: Sequence[tuple[float, float]]) -> RegressionResult:
    """Ordinary least squares of average price on rarity score."""
    n = len(pairs)
    if n < 3:
        raise InsufficientDataError(f"regression needs at least 3 points, got {n}")
    xs = [float(x) for x, _ in pairs]
    ys = [float(y) for _, y in pairs]
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise UndefinedSlopeError("undefined slope: rarity scores have zero variance")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    sst = math.fsum((y - my) ** 2 for y in ys)
    if sst == 0:
        r_squared = 0.0
    else:
        sse = math.fsum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
        r_squared = min(1.0, max(0.0, 1.0 - sse / sst))
    return RegressionResult(slope, intercept, r_squared, n)


@dataclass(frozen=True)
class RarityRow:
    token_id: str
    score: float
    avg_price_usd: float | None
    n_sales: int


def rarity_report(
    trait_sets: Mapping[str, TokenTraitSet],
    manifest: CollectionManifest,
    records: Sequence[TransactionRecord],
    price_field: str = "usd",
) -> tuple[list[RarityRow], RegressionResult | None, TraitFrequencyTable]:
    """Score every token and regress average sale price on score.

    ``records`` should already have lateral swaps removed. Tokens that never
    sold are reported with an empty price and kept out of the regression.
    The regression is ``None`` when it is undefined for the data at hand.
    """
    table = trait_frequencies(trait_sets, manifest)
    sales: dict[str, list[float]] = {}
    for r in records:
        sales.setdefault(r.token_id, []).append(r.price(price_field))

    rows = []
    pairs = []
    for token_id in sorted(trait_sets, key=_token_sort_key):
        score = rarity_score(token_id, trait_sets, table).score
        prices = sales.get(token_id, [])
        avg = math.fsum(prices) / len(prices) if prices else None
        rows.append(RarityRow(token_id, score, avg, len(prices)))
        if avg is not None:
            pairs.append((score, avg))
    try:
        regression = price_rarity_regression(pairs)
    except (InsufficientDataError, UndefinedSlopeError):
        regression = None
    return rows, regression, table


def _token_sort_key(token_id: str):
    return (0, int(token_id), "") if token_id.isdigit() else (1, 0, token_id)


def dump_rarity_rows(rows: Iterable[RarityRow], fmt=lambda v: f"{v:.6f}") -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RARITY_HEADER)
    for row in rows:
        avg = "" if row.avg_price_usd is None else fmt(row.avg_price_usd)
        writer.writerow([row.token_id, fmt(row.score), avg, row.n_sales])
    return buf.getvalue().encode("utf-8")


def parse_rarity_rows(data: bytes) -> list[RarityRow]:
    reader = csv.reader(io.StringIO(data.decode("utf-8"), newline=""))
    if tuple(next(reader, ())) != RARITY_HEADER:
        raise ValueError("rarity CSV header mismatch")
    return [
        RarityRow(t, float(s), float(a) if a else None, int(n)) for t, s, a, n in reader
    ]


def regression_from_json(data: bytes) -> RegressionResult:
    doc = json.loads(data)
    return RegressionResult(float(doc["slope"]), float(doc["intercept"]), float(doc["r_squared"]), int(doc["n"]))
