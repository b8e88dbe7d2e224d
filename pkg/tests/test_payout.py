import pytest

from coinflow.chain import build_spend_index, store_from_records
from coinflow.circulation import NotACoinbase
from coinflow.payout import (
    LABEL_DIRECT,
    LABEL_IMMEDIATE,
    LABEL_INDIRECT,
    LABEL_UNKNOWN,
    InsufficientCoinbases,
    TrendPeriod,
    classify_pattern,
    miner_trend,
)

WEEK = 7 * 86_400


def immediate_store(make_tx, n_miners=20):
    outs = [(f"m{i}", 5) for i in range(n_miners)]
    return store_from_records([make_tx("cb", 0, 0, [], outs, coinbase=True)])


def direct_store(make_tx, n_miners=20):
    outs = [(f"m{i}", 5) for i in range(n_miners)]
    return store_from_records([
        make_tx("cb", 0, 0, [], [("s", 100)], coinbase=True),
        make_tx("pay", 0, 600, [("cb", 0)], outs),
    ])


def indirect_store(make_tx, n_miners=20):
    outs = [(f"m{i}", 5) for i in range(n_miners)]
    return store_from_records([
        make_tx("cb", 0, 0, [], [("s", 100)], coinbase=True),
        make_tx("move", 0, 600, [("cb", 0)], [("mid", 100)]),
        make_tx("pay", 0, 1200, [("move", 0)], outs),
    ])


class TestClassifyPattern:
    def test_immediate(self, make_tx):
        store = immediate_store(make_tx)
        pattern = classify_pattern(store, build_spend_index(store), "cb")
        assert pattern.label == LABEL_IMMEDIATE
        assert pattern.fanout_hop == 0
        assert pattern.fanout_size == 20

    def test_direct(self, make_tx):
        store = direct_store(make_tx)
        pattern = classify_pattern(store, build_spend_index(store), "cb")
        assert (pattern.label, pattern.fanout_hop) == (LABEL_DIRECT, 1)

    def test_indirect(self, make_tx):
        store = indirect_store(make_tx)
        pattern = classify_pattern(store, build_spend_index(store), "cb")
        assert (pattern.label, pattern.fanout_hop) == (LABEL_INDIRECT, 2)

    def test_unknown_when_no_fanout(self, make_tx):
        store = store_from_records([
            make_tx("cb", 0, 0, [], [("s", 100)], coinbase=True),
            make_tx("t1", 0, 600, [("cb", 0)], [("a", 100)]),
        ])
        pattern = classify_pattern(store, build_spend_index(store), "cb")
        assert pattern.label == LABEL_UNKNOWN
        assert pattern.fanout_hop is None
        assert pattern.fanout_size == 0

    def test_unknown_when_fanout_past_horizon(self, make_tx):
        store = direct_store(make_tx)
        index = build_spend_index(store)
        pattern = classify_pattern(store, index, "cb", horizon_seconds=60)
        assert pattern.label == LABEL_UNKNOWN

    def test_requires_coinbase(self, make_tx):
        store = direct_store(make_tx)
        with pytest.raises(NotACoinbase):
            classify_pattern(store, build_spend_index(store), "pay")

    def test_threshold_validation(self, make_tx):
        store = direct_store(make_tx)
        with pytest.raises(ValueError):
            classify_pattern(store, build_spend_index(store), "cb", fanout_threshold=1)

    def test_walk_follows_largest_value(self, make_tx):
        # Change output (small) leads to a fanout, but the big output leads
        # to a dead end: the walk must follow the big one.
        outs = [(f"m{i}", 1) for i in range(15)]
        store = store_from_records([
            make_tx("cb", 0, 0, [], [("s", 100)], coinbase=True),
            make_tx("split", 0, 600, [("cb", 0)], [("big", 90), ("small", 10)]),
            make_tx("sink", 0, 1200, [("split", 0)], [("hoard", 90)]),
            make_tx("fan", 0, 1200, [("split", 1)], outs),
        ])
        index = build_spend_index(store)
        single = classify_pattern(store, index, "cb")
        assert single.label == LABEL_UNKNOWN
        # Following every branch finds the fanout at hop 2.
        multi = classify_pattern(store, index, "cb", follow_all_branches=True)
        assert (multi.label, multi.fanout_hop) == (LABEL_INDIRECT, 2)

    def test_noise_injection_does_not_change_label(self, make_tx):
        base = [
            make_tx("cb", 0, 0, [], [("s", 100)], coinbase=True),
            make_tx("pay", 0, 600, [("cb", 0)], [(f"m{i}", 5) for i in range(20)]),
        ]
        noise = [
            make_tx("cbx", 1, 600, [], [("z", 100)], coinbase=True),
            make_tx("nz1", 1, 1200, [("cbx", 0)], [("q1", 50), ("q2", 50)]),
            make_tx("nz2", 1, 1300, [("nz1", 0)], [(f"r{i}", 2) for i in range(25)]),
        ]
        plain = store_from_records(base)
        noisy = store_from_records(base + noise)
        a = classify_pattern(plain, build_spend_index(plain), "cb")
        b = classify_pattern(noisy, build_spend_index(noisy), "cb")
        assert (a.label, a.fanout_hop, a.fanout_size) == (b.label, b.fanout_hop, b.fanout_size)


class TestMinerTrend:
    def test_empty_miner_sets_count_zero(self, make_tx):
        # Two identical-looking coinbase trails: exclusive sets are empty.
        records = [
            make_tx("cb0", 0, 0, [], [("s", 50)], coinbase=True),
            make_tx("cb1", 1, 600, [], [("s", 50)], coinbase=True),
            make_tx("cb2", 2, 1200, [], [("s", 50)], coinbase=True),
        ]
        store = store_from_records(records)
        index = build_spend_index(store)
        periods = [TrendPeriod("p0", "pool", ["cb0", "cb1"], ["cb2"])]
        points = miner_trend(store, index, periods)
        assert points[0].miner_count == 0
        assert points[0].blocks == 2

    def test_requires_two_coinbases(self, make_tx):
        store = store_from_records(
            [make_tx("cb0", 0, 0, [], [("s", 50)], coinbase=True)]
        )
        index = build_spend_index(store)
        with pytest.raises(InsufficientCoinbases):
            miner_trend(store, index, [TrendPeriod("p0", "pool", ["cb0"], ["cb0"])])
        with pytest.raises(InsufficientCoinbases):
            miner_trend(store, index, [TrendPeriod("p0", "pool", ["cb0", "cb0"], [])])

    def test_union_is_pair_order_invariant(self, make_tx):
        # Two blocks of the same pool paying disjoint miner sets, compared
        # against a reference trail: the union must not depend on pair order.
        records = [
            make_tx("cbA1", 0, 0, [], [("sA", 100)], coinbase=True),
            make_tx("payA1", 0, 0, [("cbA1", 0)], [("m1", 50), ("m2", 50)]),
            make_tx("cbA2", 1, 600, [], [("sA", 100)], coinbase=True),
            make_tx("payA2", 1, 600, [("cbA2", 0)], [("m3", 50), ("m4", 50)]),
            make_tx("cbB", 2, 1200, [], [("sB", 100)], coinbase=True),
            make_tx("payB", 2, 1200, [("cbB", 0)], [("n1", 50), ("n2", 50)]),
        ]
        store = store_from_records(records)
        index = build_spend_index(store)
        forward = miner_trend(
            store, index,
            [TrendPeriod("p", "A", ["cbA1", "cbA2"], ["cbB"])], cutoff=2,
        )
        backward = miner_trend(
            store, index,
            [TrendPeriod("p", "A", ["cbA2", "cbA1"], ["cbB"])], cutoff=2,
        )
        assert forward[0].miner_count == backward[0].miner_count == 5  # 4 miners + sA
