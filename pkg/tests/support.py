"""Record builders and brute-force oracles shared by the test modules.

The oracles deliberately avoid the package's own code paths.
"""

from __future__ import annotations

import itertools
from datetime import datetime, timedelta, timezone
from fractions import Fraction

from nftledger.model import Chain, CollectionManifest, Currency, TransactionRecord
from nftledger.tradegraph import build_graph

T0 = datetime(2022, 1, 17, tzinfo=timezone.utc)

MANIFEST = CollectionManifest(
    slug="test-apes",
    name="Test Apes",
    chain=Chain.ETHEREUM,
    native_currency=Currency.ETH,
    launch_date=datetime(2021, 4, 1).date(),
    token_count=10_000,
)


def rec(src, dst, token="1", n=0, price=1.0, usd=None, ts=None, tx=None) -> TransactionRecord:
    return TransactionRecord(
        collection=MANIFEST.slug,
        token_id=str(token),
        tx_hash=tx or f"0x{token}-{n}",
        timestamp=ts or T0 + timedelta(minutes=n),
        price_native=price,
        price_usd=price * 3000 if usd is None else usd,
        from_wallet=src,
        to_wallet=dst,
        marketplace="opensea",
    )


def history(pairs, token="1", prices=None):
    """Records for consecutive (src, dst) hops of one token."""
    return [
        rec(a, b, token=token, n=i, price=(prices[i] if prices else 1.0))
        for i, (a, b) in enumerate(pairs)
    ]


def graph_from_edges(edges):
    return build_graph([rec(a, b, token="g", n=i) for i, (a, b) in enumerate(edges)])


def brute_force_cycles(edges, max_length=None) -> set[tuple]:
    """Every simple cycle via plain DFS over simple paths, canonicalised to
    start at the smallest node. Self-loops are ignored."""
    succ: dict = {}
    for a, b in edges:
        if a != b:
            succ.setdefault(a, set()).add(b)
    found = set()

    def walk(start, path, seen):
        for w in succ.get(path[-1], ()):
            if w == start:
                if max_length is None or len(path) <= max_length:
                    found.add(tuple(path) + (start,))
            elif w > start and w not in seen:
                walk(start, path + [w], seen | {w})

    for s in succ:
        walk(s, [s], {s})
    return found


def permutation_cycles(nodes, edges) -> set[tuple]:
    """Slowest possible oracle: test every ordered node subset."""
    edge_set = {(a, b) for a, b in edges if a != b}
    found = set()
    for k in range(2, len(nodes) + 1):
        for combo in itertools.permutations(sorted(nodes), k):
            if combo[0] != min(combo):
                continue
            hops = list(zip(combo, combo[1:] + combo[:1]))
            if all(h in edge_set for h in hops):
                found.add(combo + (combo[0],))
    return found


def exact_ols(xs, ys):
    """Closed-form two-pass OLS in exact rational arithmetic."""
    fx = [Fraction(x) for x in xs]
    fy = [Fraction(y) for y in ys]
    n = len(fx)
    mx, my = sum(fx) / n, sum(fy) / n
    sxx = sum((x - mx) ** 2 for x in fx)
    sxy = sum((x - mx) * (y - my) for x, y in zip(fx, fy))
    slope = sxy / sxx
    intercept = my - slope * mx
    sst = sum((y - my) ** 2 for y in fy)
    sse = sum((y - intercept - slope * x) ** 2 for x, y in zip(fx, fy))
    r2 = Fraction(0) if sst == 0 else 1 - sse / sst
    return float(slope), float(intercept), float(r2)


def brute_rarity(trait_rows: dict[str, dict[str, str]], token_count: int, token_id: str) -> float:
    """Rarity score by rescanning the whole collection for each trait."""
    fractions = []
    for trait_type, value in trait_rows[token_id].items():
        matches = 0
        for other in trait_rows.values():
            if other[trait_type] == value:
                matches += 1
        fractions.append(Fraction(matches, token_count))
    return float(sum(fractions) / len(fractions))
