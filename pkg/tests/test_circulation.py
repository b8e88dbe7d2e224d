import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coinflow.chain import build_spend_index, store_from_records
from coinflow.circulation import (
    NotACoinbase,
    UnknownTxid,
    build_circulation_network,
    load_network,
    load_node_distances,
    restrict_to_distance,
    write_edge_list,
    write_node_attributes,
)
from oracles import naive_network, random_store

WEEK = 7 * 86_400


class TestBuild:
    def test_unspent_coinbase(self, make_tx):
        store = store_from_records([make_tx("cb", 0, 0, [], [("s", 50)], coinbase=True)])
        net = build_circulation_network(store, build_spend_index(store), "cb")
        assert net.nodes == {"s"}
        assert net.edges == set()
        assert net.tx_count == 1
        assert net.distance == {"s": 0}

    def test_reference_fixture(self, reference_store, reference_index):
        net = build_circulation_network(reference_store, reference_index, "cb0", WEEK)
        assert net.nodes == {"s", "a", "s2", "d", "e"}
        assert net.edges == {("s", "a"), ("s", "s2"), ("a", "d"), ("a", "e")}
        assert net.distance == {"s": 0, "a": 1, "s2": 1, "d": 2, "e": 2}
        assert net.tx_count == 3
        assert net.source_addresses == frozenset({"s"})
        # b and c never reference the traced coinbase, w belongs to the
        # sibling coinbase.
        assert not {"b", "c", "w"} & net.nodes

    def test_horizon_cuts_branch(self, reference_store, reference_index):
        # tx2 is 1200s after cb0; a 700s horizon keeps tx1 but drops tx2.
        net = build_circulation_network(reference_store, reference_index, "cb0", 700)
        assert net.nodes == {"s", "a", "s2"}
        assert net.tx_count == 2

    def test_not_a_coinbase(self, reference_store, reference_index):
        with pytest.raises(NotACoinbase):
            build_circulation_network(reference_store, reference_index, "tx1")

    def test_unknown_txid(self, reference_store, reference_index):
        with pytest.raises(UnknownTxid):
            build_circulation_network(reference_store, reference_index, "nope")

    def test_bad_horizon(self, reference_store, reference_index):
        with pytest.raises(ValueError):
            build_circulation_network(reference_store, reference_index, "cb0", 0)

    def test_multi_output_coinbase_sources(self, make_tx):
        store = store_from_records(
            [make_tx("cb", 0, 0, [], [("m1", 10), ("m2", 10), ("m3", 10)], coinbase=True)]
        )
        net = build_circulation_network(store, build_spend_index(store), "cb")
        assert net.source_addresses == frozenset({"m1", "m2", "m3"})
        assert all(net.distance[a] == 0 for a in net.source_addresses)

    def test_self_edge_kept(self, make_tx):
        store = store_from_records([
            make_tx("cb", 0, 0, [], [("s", 50)], coinbase=True),
            make_tx("t1", 0, 600, [("cb", 0)], [("s", 40), ("a", 10)]),
        ])
        net = build_circulation_network(store, build_spend_index(store), "cb")
        assert ("s", "s") in net.edges
        assert net.distance["s"] == 0

    def test_edge_multiplicity(self, make_tx):
        # Two outputs of the same traced tx paying the same address, both
        # spent by one transaction: the deduplicated edge keeps a count.
        store = store_from_records([
            make_tx("cb", 0, 0, [], [("s", 50)], coinbase=True),
            make_tx("t1", 0, 600, [("cb", 0)], [("a", 25), ("a", 25)]),
            make_tx("t2", 0, 700, [("t1", 0), ("t1", 1)], [("b", 50)]),
        ])
        net = build_circulation_network(store, build_spend_index(store), "cb")
        assert net.edge_multiplicity[("a", "b")] == 2
        assert ("a", "b") in net.edges


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(12))
    def test_matches_naive_closure(self, seed):
        store = random_store(seed)
        index = build_spend_index(store)
        horizon = [3600, 86_400, WEEK][seed % 3]
        for height in store.heights():
            txid = store.coinbases[height]
            net = build_circulation_network(store, index, txid, horizon)
            nodes, edges, distances = naive_network(store, txid, horizon)
            assert net.nodes == nodes
            assert net.edges == edges
            assert net.distance == distances

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=5000),
           h1=st.integers(min_value=1, max_value=WEEK),
           h2=st.integers(min_value=1, max_value=WEEK))
    def test_horizon_monotonicity(self, seed, h1, h2):
        if h1 > h2:
            h1, h2 = h2, h1
        store = random_store(seed, max_tx=80)
        index = build_spend_index(store)
        txid = store.coinbases[store.heights()[0]]
        small = build_circulation_network(store, index, txid, h1)
        large = build_circulation_network(store, index, txid, h2)
        assert small.nodes <= large.nodes
        assert small.edges <= large.edges

    def test_determinism_across_input_order(self):
        store = random_store(23)
        index = build_spend_index(store)
        txid = store.coinbases[store.heights()[0]]
        first = build_circulation_network(store, index, txid)
        # Rebuild the store from records in reverse order.
        reordered = store_from_records(
            [store.transactions[t] for t in reversed(list(store.transactions))]
        )
        second = build_circulation_network(reordered, build_spend_index(reordered), txid)
        assert first.nodes == second.nodes
        assert first.edges == second.edges
        assert first.distance == second.distance


class TestRestrict:
    def test_zero_keeps_sources(self, reference_store, reference_index):
        net = build_circulation_network(reference_store, reference_index, "cb0")
        only_sources = restrict_to_distance(net, 0)
        assert only_sources.nodes == {"s"}
        assert only_sources.edges == set()

    def test_beyond_max_is_identity(self, reference_store, reference_index):
        net = build_circulation_network(reference_store, reference_index, "cb0")
        same = restrict_to_distance(net, net.max_distance() + 5)
        assert same.nodes == net.nodes
        assert same.edges == net.edges

    def test_negative_rejected(self, reference_store, reference_index):
        net = build_circulation_network(reference_store, reference_index, "cb0")
        with pytest.raises(ValueError):
            restrict_to_distance(net, -1)

    @pytest.mark.parametrize("seed", [5, 17, 29])
    def test_matches_bruteforce_filter(self, seed):
        store = random_store(seed)
        index = build_spend_index(store)
        txid = store.coinbases[store.heights()[0]]
        net = build_circulation_network(store, index, txid)
        for k in range(net.max_distance() + 1):
            expected_nodes = {a for a in net.nodes if net.distance[a] <= k}
            expected_edges = {
                (u, v) for (u, v) in net.edges
                if u in expected_nodes and v in expected_nodes
            }
            sub = restrict_to_distance(net, k)
            assert sub.nodes == expected_nodes
            assert sub.edges == expected_edges
            assert all(sub.distance[a] == net.distance[a] for a in sub.nodes)


class TestExport:
    def test_files_roundtrip(self, tmp_path, reference_store, reference_index):
        net = build_circulation_network(reference_store, reference_index, "cb0")
        edges_path = tmp_path / "net.edges.tsv"
        nodes_path = tmp_path / "net.nodes.tsv"
        write_edge_list(net, edges_path)
        write_node_attributes(net, nodes_path)

        assert load_node_distances(nodes_path) == net.distance
        loaded = load_network(edges_path, nodes_path)
        assert loaded.nodes == net.nodes
        assert loaded.edges == net.edges
        assert loaded.distance == net.distance
        assert loaded.source_addresses == net.source_addresses

    def test_sorted_output(self, reference_store, reference_index):
        net = build_circulation_network(reference_store, reference_index, "cb0")
        buffer = io.StringIO()
        write_node_attributes(net, buffer)
        lines = buffer.getvalue().splitlines()
        assert lines == sorted(lines)
