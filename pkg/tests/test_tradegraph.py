import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nftledger.errors import CircuitBudgetExceeded, InvalidPriceError, NoSalesError
from nftledger.preprocess import Flag
from nftledger.tradegraph import (
    BENFORD_EXPECTED,
    Scope,
    WashConfig,
    benford_chi_square,
    benford_test,
    build_graph,
    dump_circuits,
    dump_wash_report,
    find_elementary_circuits,
    first_digit,
    flag_wash_suspects,
    parse_wash_report,
    unique_wallet_ratio,
    wallet_pair_repetition,
)
from support import brute_force_cycles, graph_from_edges, history, permutation_cycles, rec


def ping_pong(n, token="1", a="X", b="Y"):
    return history([(a, b) if i % 2 == 0 else (b, a) for i in range(n)], token=token)


def chain(n, token="1"):
    return history([(f"w{i}", f"w{i + 1}") for i in range(n)], token=token)


class TestBuildGraph:
    def test_two_hops(self):
        g = build_graph(history([("A", "B"), ("B", "C")]))
        assert g.nodes == {"A", "B", "C"} and len(g.edges) == 2

    def test_empty(self):
        g = build_graph([], Scope.PER_COLLECTION)
        assert not g.nodes and not g.edges

    def test_multigraph_ping_pong(self):
        g = build_graph(ping_pong(32), Scope.PER_TOKEN)
        assert len(g.nodes) == 2 and len(g.edges) == 32
        assert all(e.from_wallet in g.nodes and e.to_wallet in g.nodes for e in g.edges)

    def test_per_token_rejects_mixed_tokens(self):
        with pytest.raises(ValueError):
            build_graph(chain(2, "1") + chain(2, "2"), Scope.PER_TOKEN)


class TestPairRepetition:
    def test_meebit_like(self):
        records = ping_pong(32) + [rec("Y", "Z", n=99)]
        assert wallet_pair_repetition(records, "1") == 32

    def test_chain(self):
        assert wallet_pair_repetition(chain(5), "1") == 1

    def test_unordered(self):
        assert wallet_pair_repetition(history([("A", "B"), ("B", "A"), ("A", "B")]), "1") == 3

    def test_unknown_token(self):
        with pytest.raises(NoSalesError):
            wallet_pair_repetition(chain(2), "nope")


class TestUniqueWalletRatio:
    def test_chain(self):
        assert unique_wallet_ratio(chain(4), "1") == 1.25

    def test_ping_pong(self):
        assert unique_wallet_ratio(ping_pong(32), "1") == 0.0625

    def test_single(self):
        assert unique_wallet_ratio(chain(1), "1") == 2.0

    def test_unknown(self):
        with pytest.raises(NoSalesError):
            unique_wallet_ratio([], "1")


class TestCircuits:
    def test_triangle(self):
        (c,) = find_elementary_circuits(graph_from_edges([("B", "C"), ("A", "B"), ("C", "A")]))
        assert c.nodes == ("A", "B", "C", "A")
        assert [len(h) for h in c.hops] == [1, 1, 1]

    def test_complete_digraph_3(self):
        edges = [(a, b) for a in "ABC" for b in "ABC" if a != b]
        found = {c.nodes for c in find_elementary_circuits(graph_from_edges(edges))}
        assert found == brute_force_cycles(edges) == permutation_cycles("ABC", edges)
        assert len(found) == 5

    def test_dag(self):
        edges = [("A", "B"), ("A", "C"), ("B", "C"), ("C", "D"), ("B", "D")]
        assert find_elementary_circuits(graph_from_edges(edges)) == []

    def test_multi_edges_collapse(self):
        circuits = find_elementary_circuits(build_graph(ping_pong(6)))
        assert len(circuits) == 1
        assert circuits[0].nodes == ("X", "Y", "X")
        assert [len(h) for h in circuits[0].hops] == [3, 3]

    def test_self_loops_ignored(self):
        assert find_elementary_circuits(graph_from_edges([("A", "A"), ("A", "B")])) == []

    def test_length_bound(self):
        ring = [(f"n{i}", f"n{(i + 1) % 5}") for i in range(5)]
        edges = ring + [("n0", "n1"), ("n1", "n0")]
        g = graph_from_edges(edges)
        assert len(find_elementary_circuits(g, max_length=4)) == 1
        assert len(find_elementary_circuits(g, max_length=5)) == 2

    def test_budget(self):
        edges = [(a, b) for a in "ABCDE" for b in "ABCDE" if a != b]
        with pytest.raises(CircuitBudgetExceeded, match="circuit budget exceeded"):
            find_elementary_circuits(graph_from_edges(edges), budget=10)

    def test_complete_digraph_counts(self):
        # circuits in K_n: sum over k of C(n,k)*(k-1)!
        for n in range(2, 7):
            nodes = [str(i) for i in range(n)]
            edges = [(a, b) for a in nodes for b in nodes if a != b]
            expected = sum(math.comb(n, k) * math.factorial(k - 1) for k in range(2, n + 1))
            assert len(find_elementary_circuits(graph_from_edges(edges))) == expected

    def test_large_ring_no_recursion_limit(self):
        ring = [(f"{i:05d}", f"{(i + 1) % 5000:05d}") for i in range(5000)]
        (c,) = find_elementary_circuits(graph_from_edges(ring))
        assert c.length == 5000


digraphs = st.integers(1, 7).flatmap(
    lambda n: st.lists(
        st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).map(lambda e: (f"v{e[0]}", f"v{e[1]}")),
        max_size=n * n,
    )
)


@settings(max_examples=200, deadline=None)
@given(digraphs, st.one_of(st.none(), st.integers(2, 7)))
def test_circuits_match_brute_force(edges, bound):
    found = find_elementary_circuits(graph_from_edges(edges), max_length=bound)
    seqs = [c.nodes for c in found]
    assert len(seqs) == len(set(seqs))
    assert set(seqs) == brute_force_cycles(edges, bound)
    edge_set = set(edges)
    for c in found:
        inner = c.nodes[:-1]
        assert len(set(inner)) == len(inner)
        assert c.nodes[0] == min(inner) == c.nodes[-1]
        assert all(hop in edge_set for hop in c.pairs())


class TestWashFlags:
    def test_ping_pong_suspect(self):
        report = flag_wash_suspects(ping_pong(32))
        (t,) = report.tokens
        assert t.suspect and t.max_pair_repetition == 32
        assert sum(f.flag is Flag.WASH for f in report.flags) == 32

    def test_chain_not_suspect(self):
        report = flag_wash_suspects(chain(5))
        (t,) = report.tokens
        assert not t.suspect and t.circuits_found == 0
        assert all(f.flag is Flag.CLEAN for f in report.flags)

    def test_triangle_suspect_via_circuit(self):
        report = flag_wash_suspects(history([("A", "B"), ("B", "C"), ("C", "A")]))
        (t,) = report.tokens
        assert t.max_pair_repetition == 1 and t.circuits_found == 1 and t.suspect
        assert all(f.flag is Flag.WASH for f in report.flags)

    def test_circuit_rule_off(self):
        records = history([("A", "B"), ("B", "C"), ("C", "A")])
        report = flag_wash_suspects(records, WashConfig(enable_circuit_rule=False))
        assert not report.tokens[0].suspect

    def test_self_transfer_always_flagged(self):
        records = history([("A", "A"), ("A", "B")])
        report = flag_wash_suspects(records, WashConfig(enable_circuit_rule=False, pair_repetition_threshold=10))
        assert report.tokens[0].suspect
        assert [f.flag for f in report.flags] == [Flag.WASH, Flag.CLEAN]
        assert "self-transfer" in report.flags[0].reason

    def test_only_offending_transactions_flagged(self):
        records = ping_pong(4) + [rec("Y", "Z", n=50), rec("Z", "Q", n=51)]
        report = flag_wash_suspects(records, WashConfig(enable_circuit_rule=False))
        flags = {f.tx_hash: f.flag for f in report.flags}
        assert flags["0x1-50"] is Flag.CLEAN and flags["0x1-0"] is Flag.WASH

    def test_per_collection_scope(self):
        # a circuit only visible when tokens are pooled
        records = [rec("A", "B", token="1", n=0), rec("B", "A", token="2", n=1), rec("C", "D", token="3", n=2)]
        per_token = flag_wash_suspects(records)
        assert not per_token.suspects()
        pooled = flag_wash_suspects(records, WashConfig(scope=Scope.PER_COLLECTION))
        assert pooled.suspects() == {"1", "2"}

    def test_one_flag_per_transaction(self):
        records = ping_pong(5) + chain(3, token="2") + history([("A", "B"), ("B", "A")], token="3")
        report = flag_wash_suspects(records)
        assert [f.key for f in report.flags] == [r.key for r in records]

    def test_parallel_matches_serial(self):
        records = []
        for t in range(40):
            records += ping_pong(5, token=str(t)) if t % 7 == 0 else chain(3, token=str(t))
        serial = flag_wash_suspects(records, workers=1)
        parallel = flag_wash_suspects(records, workers=8)
        assert dump_wash_report(serial) == dump_wash_report(parallel)
        assert serial.flags == parallel.flags

    def test_report_csv_and_circuits_json(self):
        records = ping_pong(4) + chain(2, token="2")
        report = flag_wash_suspects(records)
        data = dump_wash_report(report)
        assert data.splitlines()[0] == b"token_id,max_pair_repetition,unique_wallet_ratio,circuits_found,suspect"
        parsed = parse_wash_report(data)
        assert [(t.token_id, t.suspect) for t in parsed] == [("1", True), ("2", False)]
        assert json.loads(dump_circuits(report)) == [["X", "Y", "X"]]

    def test_collection_ratio(self):
        report = flag_wash_suspects(ping_pong(4) + chain(2, token="2"))
        assert report.collection_unique_wallet_ratio == 5 / 6


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ABCDE"), st.sampled_from("ABCDE"), st.sampled_from("123")), max_size=25))
def test_pair_repetition_direction_invariant(hops):
    records = [rec(a, b, token=t, n=i) for i, (a, b, t) in enumerate(hops)]
    flipped = [rec(b, a, token=t, n=i) for i, (a, b, t) in enumerate(hops)]
    for token in {t for _, _, t in hops}:
        assert wallet_pair_repetition(records, token) == wallet_pair_repetition(flipped, token)
        assert 0 < unique_wallet_ratio(records, token) <= 2


class TestBenford:
    def test_expected_first_digit(self):
        assert BENFORD_EXPECTED[0] == pytest.approx(0.30103, abs=1e-6)
        assert math.fsum(BENFORD_EXPECTED) == pytest.approx(1.0, abs=1e-15)

    def test_exact_proportions(self):
        counts = [1000 * p for p in BENFORD_EXPECTED]
        assert benford_chi_square(counts) == pytest.approx(0.0, abs=1e-12)

    def test_all_nines(self):
        result = benford_test([9.5] * 100)
        assert result.observed == (0,) * 8 + (100,)
        # frozen from direct evaluation of sum((O - n p)^2 / (n p))
        assert result.chi_square == pytest.approx(2085.4345326782827, rel=1e-12)

    @pytest.mark.parametrize("value, digit", [(0.005, 5), (1.0, 1), (9.99, 9), (123456.0, 1), (3e-7, 3), (0.30000000000000004, 3)])
    def test_first_digit(self, value, digit):
        assert first_digit(value) == digit

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("inf")])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(InvalidPriceError):
            benford_test([1.0, bad])

    def test_empty(self):
        with pytest.raises(InvalidPriceError):
            benford_test([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(1e-4, 1e6), min_size=1, max_size=40), st.integers(-4, 4))
    def test_power_of_ten_scale_invariance(self, prices, k):
        base = benford_test(prices)
        scaled = benford_test([p * 10.0**k for p in prices])
        assert scaled.observed == base.observed
        assert scaled.chi_square == pytest.approx(base.chi_square)


def test_threshold_monotone_on_random_collections():
    rnd = random.Random(5)
    records = []
    for t in range(60):
        wallets = [f"w{rnd.randrange(6)}" for _ in range(rnd.randint(2, 8))]
        records += history(list(zip(wallets, wallets[1:])) or [("a", "b")], token=str(t))
    previous = None
    for threshold in range(2, 9):
        suspects = flag_wash_suspects(records, WashConfig(pair_repetition_threshold=threshold)).suspects()
        if previous is not None:
            assert suspects <= previous
        previous = suspects
