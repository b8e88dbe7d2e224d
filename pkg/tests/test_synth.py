import io

import pytest

from coinflow.chain import build_spend_index, parse_transactions
from coinflow.payout import classify_pattern
from coinflow.synth import (
    PATTERN_DIRECT,
    PATTERN_IMMEDIATE,
    PATTERN_INDIRECT,
    GroundTruth,
    InvalidConfig,
    PoolSpec,
    SimConfig,
    default_config,
    export_dump,
    generate_chain,
)


def tiny_config(**overrides):
    base = dict(
        seed=1,
        blocks=1,
        pools=[PoolSpec("solo", 1, PATTERN_IMMEDIATE, 1.0, payout_delay=0)],
        noise_tx_per_block=0,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestConfigValidation:
    def test_minimal_valid(self):
        tiny_config().validate()

    @pytest.mark.parametrize(
        "overrides",
        [
            {"blocks": 0},
            {"pools": []},
            {"pools": [PoolSpec("a", 1, 1, 0.5)]},  # shares must sum to 1
            {"pools": [PoolSpec("a", 0, 1, 1.0)]},
            {"pools": [PoolSpec("a", 1, 9, 1.0)]},
            {"pools": [PoolSpec("a", 1, 1, 1.0, payout_delay=-1)]},
            {"pools": [PoolSpec("a", 1, 1, 0.5), PoolSpec("a", 1, 1, 0.5)]},
            {"miner_churn_rate": 1.5},
            {"noise_fanout_mean": 0.5},
            {"economy_addresses": 0},
        ],
    )
    def test_rejected(self, overrides):
        with pytest.raises(InvalidConfig):
            generate_chain(tiny_config(**overrides))


class TestMinimalWorlds:
    def test_one_block_immediate_is_single_tx(self):
        store, truth = generate_chain(tiny_config())
        assert len(store) == 1
        cb = store.transactions[store.coinbases[0]]
        assert cb.is_coinbase
        assert [o.address for o in cb.outputs] == list(truth.blocks[0].miners)

    def test_one_block_direct_flushes_payout(self):
        config = tiny_config(
            pools=[PoolSpec("solo", 3, PATTERN_DIRECT, 1.0, payout_delay=5)]
        )
        store, truth = generate_chain(config)
        # Coinbase plus the flushed distribution, all at height 0.
        assert len(store) == 2
        assert set(store.by_height) == {0}
        pattern = classify_pattern(
            store, build_spend_index(store), store.coinbases[0], fanout_threshold=3
        )
        assert pattern.fanout_hop == 1

    def test_one_block_indirect_flushes_both_legs(self):
        config = tiny_config(
            pools=[PoolSpec("solo", 3, PATTERN_INDIRECT, 1.0, payout_delay=2)]
        )
        store, truth = generate_chain(config)
        assert len(store) == 3
        pattern = classify_pattern(
            store, build_spend_index(store), store.coinbases[0], fanout_threshold=3
        )
        assert pattern.fanout_hop == 2


class TestDeterminism:
    def test_identical_dumps_for_same_seed(self):
        config = default_config(seed=7, blocks=40)
        first = io.StringIO()
        export_dump(generate_chain(config)[0], first)
        second = io.StringIO()
        export_dump(generate_chain(default_config(seed=7, blocks=40))[0], second)
        assert first.getvalue() == second.getvalue()

    def test_different_seeds_differ(self):
        a = io.StringIO()
        export_dump(generate_chain(default_config(seed=1, blocks=10))[0], a)
        b = io.StringIO()
        export_dump(generate_chain(default_config(seed=2, blocks=10))[0], b)
        assert a.getvalue() != b.getvalue()


class TestConservation:
    def test_no_double_spends_or_danglers(self):
        store, _ = generate_chain(default_config(seed=13, blocks=60))
        index = build_spend_index(store, on_dangling="error")
        assert index.dangling_count == 0

    def test_value_conserved_per_tx(self):
        store, _ = generate_chain(default_config(seed=13, blocks=60))
        for tx in store.transactions.values():
            if tx.is_coinbase:
                continue
            spent = 0
            for op in tx.inputs:
                spent += store.transactions[op.txid].outputs[op.vout].value
            assert spent == sum(o.value for o in tx.outputs)


class TestRoundTrip:
    def test_dump_reparses_identically(self, tmp_path):
        store, _ = generate_chain(default_config(seed=3, blocks=50))
        path = tmp_path / "chain.jsonl"
        export_dump(store, path)
        reparsed = parse_transactions(path)
        assert reparsed.transactions.keys() == store.transactions.keys()
        assert reparsed.coinbases == store.coinbases

    def test_empty_writer_for_empty_store(self, tmp_path):
        from coinflow.chain import store_from_records

        path = tmp_path / "empty.jsonl"
        export_dump(store_from_records([]), path)
        assert path.read_text() == ""


class TestPatternFidelity:
    def test_noiseless_plants_classify_exactly(self):
        config = default_config(seed=5, blocks=60)
        config.noise_tx_per_block = 0
        store, truth = generate_chain(config)
        index = build_spend_index(store)
        hop_for = {PATTERN_INDIRECT: 2, PATTERN_DIRECT: 1, PATTERN_IMMEDIATE: 0}
        for height in store.heights():
            pattern = classify_pattern(store, index, store.coinbases[height])
            assert pattern.fanout_hop == hop_for[truth.blocks[height].pattern], height


class TestGroundTruth:
    def test_segments_cover_all_blocks(self):
        config = default_config(seed=21, blocks=50)
        config.miner_churn_rate = 0.02
        store, truth = generate_chain(config)
        for pool in ("alpha", "beta", "gamma"):
            for height in range(50):
                assert len(truth.miners_for(pool, height)) == 200
        assert truth.churn_events

    def test_miner_schedule_resizes(self):
        config = SimConfig(
            seed=2,
            blocks=30,
            pools=[
                PoolSpec("grow", 5, PATTERN_DIRECT, 0.5, payout_delay=1,
                         miner_schedule=((10, 12), (20, 3))),
                PoolSpec("ref", 5, PATTERN_DIRECT, 0.5, payout_delay=1),
            ],
            noise_tx_per_block=0,
        )
        _, truth = generate_chain(config)
        assert len(truth.miners_for("grow", 0)) == 5
        assert len(truth.miners_for("grow", 10)) == 12
        assert len(truth.miners_for("grow", 29)) == 3

    def test_cross_pool_miner_flag(self):
        config = SimConfig(
            seed=3,
            blocks=5,
            pools=[
                PoolSpec("first", 50, PATTERN_DIRECT, 0.5, payout_delay=1),
                PoolSpec("second", 50, PATTERN_DIRECT, 0.5, payout_delay=1),
            ],
            noise_tx_per_block=0,
            cross_pool_miner_rate=0.5,
        )
        _, truth = generate_chain(config)
        first = set(truth.miners_for("first", 0))
        second = set(truth.miners_for("second", 0))
        assert first & second  # exclusivity assumption deliberately violated

    def test_json_roundtrip(self, tmp_path):
        _, truth = generate_chain(default_config(seed=8, blocks=20))
        path = tmp_path / "truth.json"
        truth.write(path)
        loaded = GroundTruth.read(path)
        assert loaded.blocks == truth.blocks
        assert loaded.pool_segments == truth.pool_segments

    def test_every_miner_appears_in_a_payout(self):
        store, truth = generate_chain(default_config(seed=4, blocks=40))
        paid = set()
        for block in truth.blocks.values():
            for txid in block.payout_txids:
                for out in store.transactions[txid].outputs:
                    paid.add(out.address)
        planted = set()
        for segment in truth.pool_segments:
            planted |= set(segment.miners)
        assert planted <= paid
