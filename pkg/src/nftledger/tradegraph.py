"""Wallet trade graphs and wash-trading indicators.

Four indicators are computed from a token's trade history:

* wallet-pair repetition: how often the token moved between the same two
  wallets (direction ignored);
* unique-wallet ratio: distinct wallets over transaction count, low values
  meaning a few wallets trade the token back and forth;
* elementary circuits in the wallet graph (the token returns to a wallet);
* a Benford first-digit chi-square statistic over prices.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

from nftledger.errors import CircuitBudgetExceeded, InvalidPriceError, NoSalesError
from nftledger.model import TransactionRecord, group_by_token
from nftledger.preprocess import Flag, TransactionFlag

WASH_HEADER = ("token_id", "max_pair_repetition", "unique_wallet_ratio", "circuits_found", "suspect")
DEFAULT_CIRCUIT_BUDGET = 100_000
BENFORD_EXPECTED = tuple(math.log10(1 + 1 / d) for d in range(1, 10))
BENFORD_CRITICAL_95 = 15.507


class Scope(str, Enum):
    PER_TOKEN = "per_token"
    PER_COLLECTION = "per_collection"


@dataclass(frozen=True)
class Edge:
    from_wallet: str
    to_wallet: str
    token_id: str
    timestamp: datetime
    price_native: float
    tx_hash: str


@dataclass(frozen=True)
class TradeGraph:
    nodes: frozenset
    edges: tuple
    adjacency: Mapping[str, tuple]
    scope: Scope = Scope.PER_COLLECTION

    def successors(self, node: str, include_self: bool = False) -> list[str]:
        out = {e.to_wallet for e in self.adjacency.get(node, ())}
        if not include_self:
            out.discard(node)
        return sorted(out)

    def edges_between(self, a: str, b: str) -> tuple:
        return tuple(e for e in self.adjacency.get(a, ()) if e.to_wallet == b)


@dataclass(frozen=True)
class Circuit:
    nodes: tuple
    hops: tuple = ()

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    def pairs(self) -> list[tuple]:
        return list(zip(self.nodes, self.nodes[1:]))


@dataclass(frozen=True)
class WashConfig:
    pair_repetition_threshold: int = 3
    enable_circuit_rule: bool = True
    max_circuit_length: int | None = 8
    scope: Scope = Scope.PER_TOKEN
    circuit_budget: int | None = DEFAULT_CIRCUIT_BUDGET

    def __post_init__(self) -> None:
        if self.pair_repetition_threshold < 2:
            raise ValueError("pair_repetition_threshold must be >= 2")
        if self.max_circuit_length is not None and self.max_circuit_length < 2:
            raise ValueError("max_circuit_length must be >= 2 or None")
        if self.circuit_budget is not None and self.circuit_budget <= 0:
            raise ValueError("circuit_budget must be positive")
        object.__setattr__(self, "scope", Scope(self.scope))


@dataclass(frozen=True)
class TokenWashStats:
    token_id: str
    max_pair_repetition: int
    unique_wallet_ratio: float
    circuits_found: int
    suspect: bool
    reasons: tuple = ()


@dataclass
class WashFlagReport:
    tokens: list[TokenWashStats]
    flags: list[TransactionFlag]
    circuits: dict[str, list[Circuit]] = field(default_factory=dict)
    collection_unique_wallet_ratio: float | None = None

    def suspects(self) -> set[str]:
        return {t.token_id for t in self.tokens if t.suspect}


@dataclass(frozen=True)
class BenfordResult:
    observed: tuple
    expected: tuple
    chi_square: float
    n: int


def build_graph(records: Iterable[TransactionRecord], scope: Scope = Scope.PER_COLLECTION) -> TradeGraph:
    """One directed edge per record; parallel edges and self-loops are kept."""
    nodes = set()
    edges = []
    adjacency: dict[str, list[Edge]] = defaultdict(list)
    for r in records:
        edge = Edge(r.from_wallet, r.to_wallet, r.token_id, r.timestamp, r.price_native, r.tx_hash)
        nodes.update((r.from_wallet, r.to_wallet))
        edges.append(edge)
        adjacency[r.from_wallet].append(edge)
    scope = Scope(scope)
    if scope is Scope.PER_TOKEN and len({e.token_id for e in edges}) > 1:
        raise ValueError("per_token graph built from records of several tokens")
    return TradeGraph(frozenset(nodes), tuple(edges), {k: tuple(v) for k, v in adjacency.items()}, scope)


def _token_records(records: Iterable[TransactionRecord], token_id: str) -> list[TransactionRecord]:
    rows = [r for r in records if r.token_id == token_id]
    if not rows:
        raise NoSalesError(f"token {token_id}: no sales")
    return rows


def _pair_counts(records: Iterable[TransactionRecord]) -> Counter:
    return Counter(frozenset((r.from_wallet, r.to_wallet)) for r in records)


def wallet_pair_repetition(records: Iterable[TransactionRecord], token_id: str) -> int:
    return max(_pair_counts(_token_records(records, token_id)).values())


def unique_wallet_ratio(records: Iterable[TransactionRecord], token_id: str) -> float:
    rows = _token_records(records, token_id)
    wallets = {w for r in rows for w in (r.from_wallet, r.to_wallet)}
    return len(wallets) / len(rows)


def _strongly_connected(nodes: Iterable[Hashable], succ: Mapping) -> list[list]:
    """Tarjan's algorithm, iterative; components come back with sorted members."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    components = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                components.append(sorted(comp))
    return components


def _circuits_through(start, succ: Mapping, max_length: int | None) -> Iterator[tuple]:
    """Johnson's circuit search rooted at ``start`` inside one strong component.

    With a length bound, any branch cut short by the bound counts as
    "closed": its nodes are unblocked rather than left blocked, because a
    cut branch proves nothing about reachability of ``start``.
    """
    blocked = {start}
    blocked_by: dict = defaultdict(set)
    path = [start]
    frames = [(start, iter(succ[start]))]
    closed = [False]

    def unblock(node) -> None:
        pending = [node]
        while pending:
            u = pending.pop()
            if u in blocked:
                blocked.discard(u)
                pending.extend(blocked_by.pop(u, ()))

    while frames:
        v, it = frames[-1]
        pushed = False
        for w in it:
            if w == start:
                yield tuple(path) + (start,)
                closed[-1] = True
            elif w not in blocked:
                if max_length is not None and len(path) >= max_length:
                    closed[-1] = True
                    continue
                path.append(w)
                blocked.add(w)
                frames.append((w, iter(succ[w])))
                closed.append(False)
                pushed = True
                break
        if pushed:
            continue
        frames.pop()
        found = closed.pop()
        if found:
            unblock(v)
        else:
            for w in succ[v]:
                blocked_by[w].add(v)
        path.pop()
        if found and closed:
            closed[-1] = True


def find_elementary_circuits(
    graph: TradeGraph, max_length: int | None = None, budget: int | None = DEFAULT_CIRCUIT_BUDGET
) -> list[Circuit]:
    """Enumerate every elementary circuit of at most ``max_length`` nodes.

    Each circuit is returned once, as a node sequence that starts and ends at
    its lexicographically smallest wallet. Parallel edges collapse into one
    circuit whose ``hops`` list every supporting edge; self-loops are ignored.
    Raises :class:`CircuitBudgetExceeded` once more than ``budget`` circuits
    have been found.
    """
    if max_length is not None and max_length < 2:
        raise ValueError("max_length must be >= 2 or None")
    succ = {n: graph.successors(n) for n in sorted(graph.nodes)}
    circuits = []
    pending = _strongly_connected(succ, succ)
    while pending:
        comp = pending.pop()
        if len(comp) < 2:
            continue
        members = set(comp)
        local = {n: [w for w in succ[n] if w in members] for n in comp}
        start = comp[0]
        for nodes in _circuits_through(start, local, max_length):
            hops = tuple(graph.edges_between(a, b) for a, b in zip(nodes, nodes[1:]))
            circuits.append(Circuit(nodes, hops))
            if budget is not None and len(circuits) > budget:
                raise CircuitBudgetExceeded(budget)
        rest = comp[1:]
        rest_succ = {n: [w for w in local[n] if w != start] for n in rest}
        pending.extend(_strongly_connected(rest, rest_succ))
    circuits.sort(key=lambda c: c.nodes)
    return circuits


def _analyse_token(token_id: str, rows: Sequence[TransactionRecord], config: WashConfig, circuits: list[Circuit] | None):
    pairs = _pair_counts(rows)
    max_rep = max(pairs.values())
    wallets = {w for r in rows for w in (r.from_wallet, r.to_wallet)}
    ratio = len(wallets) / len(rows)

    if circuits is None:
        circuits = []
        if config.enable_circuit_rule:
            graph = build_graph(rows, Scope.PER_TOKEN)
            circuits = find_elementary_circuits(graph, config.max_circuit_length, config.circuit_budget)

    firing_pairs = {p for p, c in pairs.items() if c >= config.pair_repetition_threshold}
    circuit_hops: dict[tuple, str] = {}
    for c in circuits:
        label = ">".join(c.nodes)
        for hop in c.pairs():
            circuit_hops.setdefault(hop, label)

    token_reasons = []
    flags = []
    for r in rows:
        reasons = []
        if r.from_wallet == r.to_wallet:
            reasons.append("self-transfer")
        pair = frozenset((r.from_wallet, r.to_wallet))
        if pair in firing_pairs:
            reasons.append(f"wallet pair repeated {pairs[pair]} times")
        hop = (r.from_wallet, r.to_wallet)
        if config.enable_circuit_rule and hop in circuit_hops:
            reasons.append(f"on circuit {circuit_hops[hop]}")
        if reasons:
            flags.append(TransactionFlag(r.tx_hash, r.token_id, Flag.WASH, "; ".join(reasons)))
        else:
            flags.append(TransactionFlag(r.tx_hash, r.token_id, Flag.CLEAN, ""))

    if any(r.from_wallet == r.to_wallet for r in rows):
        token_reasons.append("self-transfer")
    if firing_pairs:
        token_reasons.append(f"pair repetition {max_rep} >= {config.pair_repetition_threshold}")
    if config.enable_circuit_rule and circuits:
        token_reasons.append(f"{len(circuits)} circuit(s)")
    stats = TokenWashStats(
        token_id,
        max_pair_repetition=max_rep,
        unique_wallet_ratio=ratio,
        circuits_found=len(circuits),
        suspect=bool(token_reasons),
        reasons=tuple(token_reasons),
    )
    return stats, flags, circuits


def flag_wash_suspects(
    records: Sequence[TransactionRecord], config: WashConfig | None = None, workers: int = 1
) -> WashFlagReport:
    """Screen every token for wash trading.

    A token is suspect when a wallet pair repeats at least
    ``pair_repetition_threshold`` times, when its trade graph has an
    elementary circuit (if the circuit rule is on), or when it was ever sent
    from a wallet to itself. Every transaction gets exactly one flag.
    """
    config = config or WashConfig()
    groups = group_by_token(records)
    token_ids = sorted(groups)

    collection_circuits: dict[str, list[Circuit]] | None = None
    all_circuits: list[Circuit] = []
    if config.scope is Scope.PER_COLLECTION:
        collection_circuits = {t: [] for t in token_ids}
        if config.enable_circuit_rule:
            graph = build_graph(records, Scope.PER_COLLECTION)
            all_circuits = find_elementary_circuits(graph, config.max_circuit_length, config.circuit_budget)
            for c in all_circuits:
                involved = {e.token_id for hop in c.hops for e in hop}
                for t in involved:
                    collection_circuits[t].append(c)

    def run(token_id: str):
        given = None if collection_circuits is None else collection_circuits[token_id]
        return _analyse_token(token_id, groups[token_id], config, given)

    if workers > 1 and len(token_ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, token_ids))
    else:
        results = [run(t) for t in token_ids]

    flag_by_key = {}
    tokens = []
    circuits = {}
    for token_id, (stats, flags, token_circuits) in zip(token_ids, results):
        tokens.append(stats)
        for f in flags:
            flag_by_key[f.key] = f
        if token_circuits:
            circuits[token_id] = token_circuits
    wallets = {w for r in records for w in (r.from_wallet, r.to_wallet)}
    return WashFlagReport(
        tokens=tokens,
        flags=[flag_by_key[r.key] for r in records],
        circuits=circuits,
        collection_unique_wallet_ratio=len(wallets) / len(records) if records else None,
    )


def first_digit(value: float) -> int:
    if not value > 0 or not math.isfinite(value):
        raise InvalidPriceError(f"Benford test needs positive prices, got {value!r}")
    # rounding to 12 significant digits absorbs float noise like 2.9999999999999996
    return int(f"{value:.11e}"[0])


def benford_chi_square(observed: Sequence[float]) -> float:
    n = math.fsum(observed)
    return math.fsum((o - n * p) ** 2 / (n * p) for o, p in zip(observed, BENFORD_EXPECTED))


def benford_test(prices: Iterable[float]) -> BenfordResult:
    counts = [0] * 9
    for price in prices:
        counts[first_digit(price) - 1] += 1
    n = sum(counts)
    if n == 0:
        raise InvalidPriceError("Benford test needs at least one price")
    return BenfordResult(tuple(counts), BENFORD_EXPECTED, benford_chi_square(counts), n)


def benford_to_dict(result: BenfordResult) -> dict:
    return {
        "n": result.n,
        "chi_square": result.chi_square,
        "observed": {str(d): c for d, c in enumerate(result.observed, 1)},
        "expected_fraction": {str(d): p for d, p in enumerate(result.expected, 1)},
        "critical_value_95": BENFORD_CRITICAL_95,
    }


def dump_wash_report(report: WashFlagReport, fmt=lambda v: f"{v:.6f}") -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(WASH_HEADER)
    for t in report.tokens:
        writer.writerow(
            [t.token_id, t.max_pair_repetition, fmt(t.unique_wallet_ratio), t.circuits_found, str(t.suspect).lower()]
        )
    return buf.getvalue().encode("utf-8")


def parse_wash_report(data: bytes) -> list[TokenWashStats]:
    reader = csv.reader(io.StringIO(data.decode("utf-8"), newline=""))
    if tuple(next(reader, ())) != WASH_HEADER:
        raise ValueError("wash report header mismatch")
    return [
        TokenWashStats(t, int(rep), float(ratio), int(nc), suspect == "true")
        for t, rep, ratio, nc, suspect in reader
    ]


def dump_circuits(report: WashFlagReport) -> bytes:
    seqs, seen = [], set()
    for token_id in sorted(report.circuits):
        for c in report.circuits[token_id]:
            if c.nodes not in seen:
                seen.add(c.nodes)
                seqs.append(list(c.nodes))
    return (json.dumps(seqs, indent=2) + "\n").encode("utf-8")
