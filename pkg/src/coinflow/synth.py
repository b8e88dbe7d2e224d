"""Deterministic synthetic chains with planted pools, payouts, and noise.

Each block is won by one pool according to its hashrate share. The winner's
coinbase is paid out per the pool's pattern: pattern 3 pays every miner
inside the coinbase itself; pattern 2 holds the reward at the pool address
for ``payout_delay`` blocks and then batch-pays the miners; pattern 1 first
moves the reward to a fresh intermediate address and distributes from there
one block later. Payouts that would land past the last block are flushed
into the final block so every reward trail completes inside the chain.

Noise transactions form a background economy: each spends one to three
spendable outputs, preferring recent ones, and pays a configurable mix of
shared economy addresses and fresh addresses. An exchange-style hot wallet
runs through the whole chain: once per block it sweeps a wide batch of
recent outputs together with its own previous change output and pays the
proceeds back out to economy addresses. Every coinbase's trail is folded
into that chain within a block or two of its payout, so any two circulation
networks share their downstream economy almost entirely. Miner payout
outputs join the spendable set at ``miner_spend_rate``, stitching the pools
into the economy while the miner addresses themselves stay exclusive to
their own pool's networks.

Output is a pure function of the config, including the seed.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .chain import (
    ChainStore,
    CoinflowError,
    Outpoint,
    TransactionRecord,
    TxOutput,
    store_from_records,
    write_dump,
)

COIN = 100_000_000
BLOCK_REWARD = 25 * COIN
GENESIS_TIMESTAMP = 1_400_000_000

PATTERN_INDIRECT = 1
PATTERN_DIRECT = 2
PATTERN_IMMEDIATE = 3


class InvalidConfig(CoinflowError):
    pass


@dataclass
class PoolSpec:
    name: str
    miner_count: int
    pattern: int  # 1 indirect, 2 direct, 3 immediate
    hashrate_share: float
    payout_delay: int = 1
    # Optional resizing of the miner set: (from_block, miner_count) entries.
    miner_schedule: tuple[tuple[int, int], ...] = ()


@dataclass
class SimConfig:
    seed: int
    blocks: int
    pools: list[PoolSpec]
    block_interval: int = 600
    miner_churn_rate: float = 0.0
    noise_tx_per_block: int = 50
    noise_fanout_mean: float = 2.0
    # Background-economy address model: noise outputs reuse a fixed pool of
    # shared addresses at this rate, otherwise mint a fresh address.
    economy_addresses: int = 300
    address_reuse_rate: float = 1.0
    miner_spend_rate: float = 0.6
    # Input selection bias toward recently created outputs; this is what
    # makes every coinbase's trail merge into the ambient flow quickly.
    noise_recent_bias: float = 0.8
    noise_recent_window: int = 800
    # Exchange-style hot wallet: sweeps this many recent outputs per block
    # (chained through its own change output) and redistributes the proceeds
    # to economy addresses, merging all active lineages.
    sweep_tx_per_block: int = 1
    sweep_inputs: int = 25
    # Extra sweep+noise rounds in the final block so payouts flushed there
    # get the same downstream mixing as mid-chain payouts.
    final_mix_rounds: int = 3
    cross_pool_miner_rate: float = 0.0

    def validate(self) -> None:
        problems = []
        if self.blocks < 1:
            problems.append("blocks must be at least 1")
        if self.block_interval <= 0:
            problems.append("block_interval must be positive")
        if not self.pools:
            problems.append("at least one pool is required")
        share_total = sum(p.hashrate_share for p in self.pools)
        if abs(share_total - 1.0) > 1e-9:
            problems.append(f"hashrate shares sum to {share_total!r}, expected 1")
        names = [p.name for p in self.pools]
        if len(set(names)) != len(names):
            problems.append("pool names must be unique")
        for pool in self.pools:
            if pool.miner_count < 1:
                problems.append(f"pool {pool.name}: miner_count must be at least 1")
            if pool.pattern not in (PATTERN_INDIRECT, PATTERN_DIRECT, PATTERN_IMMEDIATE):
                problems.append(f"pool {pool.name}: pattern must be 1, 2, or 3")
            if pool.payout_delay < 0:
                problems.append(f"pool {pool.name}: payout_delay must be non-negative")
            if pool.hashrate_share < 0:
                problems.append(f"pool {pool.name}: hashrate_share must be non-negative")
            for from_block, count in pool.miner_schedule:
                if from_block < 0 or count < 1:
                    problems.append(f"pool {pool.name}: bad miner_schedule entry")
        for name, value in [
            ("miner_churn_rate", self.miner_churn_rate),
            ("address_reuse_rate", self.address_reuse_rate),
            ("miner_spend_rate", self.miner_spend_rate),
            ("noise_recent_bias", self.noise_recent_bias),
            ("cross_pool_miner_rate", self.cross_pool_miner_rate),
        ]:
            if not 0.0 <= value <= 1.0:
                problems.append(f"{name} must be in [0, 1]")
        if self.noise_tx_per_block < 0:
            problems.append("noise_tx_per_block must be non-negative")
        if self.noise_fanout_mean < 1.0:
            problems.append("noise_fanout_mean must be at least 1")
        if self.economy_addresses < 1:
            problems.append("economy_addresses must be at least 1")
        if self.noise_recent_window < 1:
            problems.append("noise_recent_window must be at least 1")
        if self.sweep_tx_per_block < 0:
            problems.append("sweep_tx_per_block must be non-negative")
        if self.sweep_inputs < 2:
            problems.append("sweep_inputs must be at least 2")
        if self.final_mix_rounds < 0:
            problems.append("final_mix_rounds must be non-negative")
        if problems:
            raise InvalidConfig("; ".join(problems))


def default_config(seed: int = 42, blocks: int = 500) -> SimConfig:
    """Three pools covering all payout patterns, equal hashrate."""
    return SimConfig(
        seed=seed,
        blocks=blocks,
        pools=[
            PoolSpec("alpha", 200, PATTERN_INDIRECT, 1 / 3, payout_delay=2),
            PoolSpec("beta", 200, PATTERN_DIRECT, 1 / 3, payout_delay=1),
            PoolSpec("gamma", 200, PATTERN_IMMEDIATE, 1 / 3, payout_delay=0),
        ],
    )


@dataclass
class BlockTruth:
    pool: str
    pattern: int
    miners: tuple[str, ...]  # payout recipients snapshotted at the win
    payout_txids: tuple[str, ...] = ()


@dataclass
class PoolSegment:
    pool: str
    from_block: int
    to_block: int
    miners: tuple[str, ...]


@dataclass
class GroundTruth:
    blocks: dict[int, BlockTruth]
    pool_segments: list[PoolSegment]
    churn_events: list[dict] = field(default_factory=list)

    def miners_for(self, pool: str, height: int) -> tuple[str, ...]:
        for segment in self.pool_segments:
            if segment.pool == pool and segment.from_block <= height <= segment.to_block:
                return segment.miners
        raise KeyError(f"no miner segment for pool {pool!r} at height {height}")

    def to_obj(self) -> dict:
        return {
            "blocks": {
                str(h): {
                    "pool": bt.pool,
                    "pattern": bt.pattern,
                    "miners": list(bt.miners),
                    "payout_txids": list(bt.payout_txids),
                }
                for h, bt in sorted(self.blocks.items())
            },
            "pool_segments": [
                {
                    "pool": s.pool,
                    "from_block": s.from_block,
                    "to_block": s.to_block,
                    "miners": list(s.miners),
                }
                for s in self.pool_segments
            ],
            "churn_events": self.churn_events,
        }

    def write(self, dest: str | Path | IO[str]) -> None:
        if isinstance(dest, (str, Path)):
            with open(dest, "w", encoding="utf-8") as fh:
                self.write(fh)
            return
        json.dump(self.to_obj(), dest, indent=2, sort_keys=True)
        dest.write("\n")

    @classmethod
    def from_obj(cls, obj: dict) -> "GroundTruth":
        return cls(
            blocks={
                int(h): BlockTruth(
                    pool=bt["pool"],
                    pattern=bt["pattern"],
                    miners=tuple(bt["miners"]),
                    payout_txids=tuple(bt["payout_txids"]),
                )
                for h, bt in obj["blocks"].items()
            },
            pool_segments=[
                PoolSegment(
                    pool=s["pool"],
                    from_block=s["from_block"],
                    to_block=s["to_block"],
                    miners=tuple(s["miners"]),
                )
                for s in obj["pool_segments"]
            ],
            churn_events=list(obj.get("churn_events", [])),
        )

    @classmethod
    def read(cls, source: str | Path) -> "GroundTruth":
        with open(source, "r", encoding="utf-8") as fh:
            return cls.from_obj(json.load(fh))


class _SpendablePool:
    """Append-ordered set of unspent outputs supporting biased draws.

    Entries are tombstoned on spend and compacted lazily, preserving
    creation order so a draw from the tail is a draw among recent outputs.
    """

    def __init__(self) -> None:
        self._items: list[Outpoint | None] = []
        self._live = 0

    def __len__(self) -> int:
        return self._live

    def add(self, outpoint: Outpoint) -> None:
        self._items.append(outpoint)
        self._live += 1

    def _compact(self) -> None:
        if len(self._items) > 64 and self._live * 2 < len(self._items):
            self._items = [op for op in self._items if op is not None]

    def draw(self, rng: random.Random, recent_bias: float, recent_window: int) -> Outpoint:
        if self._live == 0:
            raise LookupError("no spendable outputs")
        items = self._items
        while True:
            if rng.random() < recent_bias:
                lo = max(0, len(items) - recent_window)
            else:
                lo = 0
            i = rng.randrange(lo, len(items))
            op = items[i]
            if op is not None:
                items[i] = None
                self._live -= 1
                self._compact()
                return op


@dataclass
class _PayoutEvent:
    kind: str  # "transfer" or "distribute"
    source: Outpoint
    pool: str
    miners: tuple[str, ...]
    value: int
    origin_height: int


def _split_value(total: int, parts: int) -> list[int]:
    share = total // parts
    values = [share] * parts
    values[0] += total - share * parts
    return values


def generate_chain(config: SimConfig) -> tuple[ChainStore, GroundTruth]:
    """Generate a chain and its planted ground truth."""
    config.validate()
    rng = random.Random(config.seed)

    tx_counter = 0

    def next_txid() -> str:
        nonlocal tx_counter
        tx_counter += 1
        return hashlib.sha256(f"{config.seed}:{tx_counter}".encode()).hexdigest()

    fresh_counter = 0

    def fresh_address() -> str:
        nonlocal fresh_counter
        fresh_counter += 1
        return f"addr:{fresh_counter:06d}"

    economy = [f"econ:{i:04d}" for i in range(config.economy_addresses)]
    pool_address = {p.name: f"pool:{p.name}" for p in config.pools}

    miner_counter: dict[str, int] = {p.name: 0 for p in config.pools}

    def new_miner(pool_name: str) -> str:
        miner_counter[pool_name] += 1
        return f"miner:{pool_name}:{miner_counter[pool_name]:05d}"

    miners: dict[str, list[str]] = {}
    for pool in config.pools:
        roster = []
        for _ in range(pool.miner_count):
            if config.cross_pool_miner_rate > 0 and miners and rng.random() < config.cross_pool_miner_rate:
                donor = rng.choice(sorted(miners))
                roster.append(rng.choice(miners[donor]))
            else:
                roster.append(new_miner(pool.name))
        miners[pool.name] = roster

    records: list[TransactionRecord] = []
    by_txid: dict[str, TransactionRecord] = {}
    spendable = _SpendablePool()
    hot_wallet_address = "xch:hot"
    hot_wallet_change: Outpoint | None = None
    pending: dict[int, list[_PayoutEvent]] = {}
    truth_blocks: dict[int, BlockTruth] = {}
    churn_events: list[dict] = []
    segments: list[PoolSegment] = []
    segment_start = {p.name: 0 for p in config.pools}

    def emit(
        height: int,
        timestamp: int,
        inputs: list[Outpoint],
        outputs: list[TxOutput],
        is_coinbase: bool = False,
    ) -> TransactionRecord:
        tx = TransactionRecord(
            txid=next_txid(),
            block_height=height,
            timestamp=timestamp,
            inputs=inputs,
            outputs=outputs,
            is_coinbase=is_coinbase,
        )
        records.append(tx)
        by_txid[tx.txid] = tx
        return tx

    def close_segment(pool_name: str, height: int) -> None:
        # The set changes at `height`, so the previous roster covered
        # [segment_start, height - 1].
        if height > segment_start[pool_name]:
            segments.append(
                PoolSegment(
                    pool=pool_name,
                    from_block=segment_start[pool_name],
                    to_block=height - 1,
                    miners=tuple(miners[pool_name]),
                )
            )
            segment_start[pool_name] = height

    def add_payout_outputs(tx: TransactionRecord) -> None:
        for position in range(len(tx.outputs)):
            if rng.random() < config.miner_spend_rate:
                spendable.add(Outpoint(tx.txid, position))

    def run_event(event: _PayoutEvent, height: int, timestamp: int) -> None:
        if event.kind == "transfer":
            intermediate = f"mid:{event.pool}:{event.origin_height:05d}"
            tx = emit(height, timestamp, [event.source],
                      [TxOutput(intermediate, event.value)])
            truth = truth_blocks[event.origin_height]
            truth_blocks[event.origin_height] = BlockTruth(
                truth.pool, truth.pattern, truth.miners,
                truth.payout_txids + (tx.txid,),
            )
            schedule(
                _PayoutEvent("distribute", Outpoint(tx.txid, 0), event.pool,
                             event.miners, event.value, event.origin_height),
                height + 1,
            )
        else:
            values = _split_value(event.value, len(event.miners))
            outputs = [TxOutput(m, v) for m, v in zip(event.miners, values)]
            tx = emit(height, timestamp, [event.source], outputs)
            add_payout_outputs(tx)
            truth = truth_blocks[event.origin_height]
            truth_blocks[event.origin_height] = BlockTruth(
                truth.pool, truth.pattern, truth.miners,
                truth.payout_txids + (tx.txid,),
            )

    def schedule(event: _PayoutEvent, height: int) -> None:
        pending.setdefault(height, []).append(event)

    def fanout_size() -> int:
        # Geometric on {1, 2, ...} with the configured mean, capped to keep
        # noise transactions transaction-sized.
        p = 1.0 / config.noise_fanout_mean
        k = 1
        while rng.random() >= p and k < 30:
            k += 1
        return k

    def economy_payees(count: int) -> list[str]:
        payees = []
        for _ in range(count):
            if rng.random() < config.address_reuse_rate:
                payees.append(economy[rng.randrange(len(economy))])
            else:
                payees.append(fresh_address())
        return payees

    def value_of(op: Outpoint) -> int:
        return by_txid[op.txid].outputs[op.vout].value

    def run_sweep(height: int, timestamp: int) -> None:
        nonlocal hot_wallet_change
        n_drawn = min(config.sweep_inputs - 1, len(spendable))
        inputs = [
            spendable.draw(rng, config.noise_recent_bias, config.noise_recent_window)
            for _ in range(n_drawn)
        ]
        if hot_wallet_change is not None:
            inputs.append(hot_wallet_change)
        total = sum(value_of(op) for op in inputs)
        # Change output first, kept for the next sweep; the rest pays back
        # out to the economy.
        payees = economy_payees(max(2, n_drawn) - 1)
        values = _split_value(total, len(payees) + 1)
        tx = emit(height, timestamp, inputs,
                  [TxOutput(hot_wallet_address, values[0])]
                  + [TxOutput(a, v) for a, v in zip(payees, values[1:])])
        hot_wallet_change = Outpoint(tx.txid, 0)
        for position in range(1, len(payees) + 1):
            spendable.add(Outpoint(tx.txid, position))

    def run_noise_tx(height: int, timestamp: int) -> None:
        n_inputs = min(rng.randint(1, 3), len(spendable))
        inputs = [
            spendable.draw(rng, config.noise_recent_bias, config.noise_recent_window)
            for _ in range(n_inputs)
        ]
        total = sum(value_of(op) for op in inputs)
        payees = economy_payees(fanout_size())
        values = _split_value(total, len(payees))
        tx = emit(height, timestamp, inputs,
                  [TxOutput(a, v) for a, v in zip(payees, values)])
        for position in range(len(payees)):
            spendable.add(Outpoint(tx.txid, position))

    for height in range(config.blocks):
        timestamp = GENESIS_TIMESTAMP + height * config.block_interval

        # Roster churn happens before the block is won.
        if config.miner_churn_rate > 0:
            for pool in config.pools:
                replaced = []
                roster = miners[pool.name]
                for i in range(len(roster)):
                    if rng.random() < config.miner_churn_rate:
                        replaced.append((roster[i], i))
                if replaced:
                    close_segment(pool.name, height)
                    for old, i in replaced:
                        fresh = new_miner(pool.name)
                        miners[pool.name][i] = fresh
                        churn_events.append(
                            {"block": height, "pool": pool.name,
                             "removed": old, "added": fresh}
                        )
        for pool in config.pools:
            for from_block, count in pool.miner_schedule:
                if from_block != height:
                    continue
                close_segment(pool.name, height)
                roster = miners[pool.name]
                while len(roster) > count:
                    roster.pop()
                while len(roster) < count:
                    roster.append(new_miner(pool.name))

        draw = rng.random()
        cumulative = 0.0
        winner = config.pools[-1]
        for pool in config.pools:
            cumulative += pool.hashrate_share
            if draw < cumulative:
                winner = pool
                break

        snapshot = tuple(miners[winner.name])
        if winner.pattern == PATTERN_IMMEDIATE:
            values = _split_value(BLOCK_REWARD, len(snapshot))
            coinbase = emit(
                height, timestamp,
                [], [TxOutput(m, v) for m, v in zip(snapshot, values)],
                is_coinbase=True,
            )
            add_payout_outputs(coinbase)
            truth_blocks[height] = BlockTruth(
                winner.name, winner.pattern, snapshot, (coinbase.txid,)
            )
        else:
            coinbase = emit(
                height, timestamp,
                [], [TxOutput(pool_address[winner.name], BLOCK_REWARD)],
                is_coinbase=True,
            )
            truth_blocks[height] = BlockTruth(winner.name, winner.pattern, snapshot, ())
            kind = "transfer" if winner.pattern == PATTERN_INDIRECT else "distribute"
            schedule(
                _PayoutEvent(kind, Outpoint(coinbase.txid, 0), winner.name,
                             snapshot, BLOCK_REWARD, height),
                height + winner.payout_delay,
            )

        for event in pending.pop(height, []):
            run_event(event, height, timestamp)
        if height == config.blocks - 1:
            # Flush everything scheduled past the end of the chain so every
            # reward trail completes in-chain.
            while pending:
                due = min(pending)
                for event in pending.pop(due):
                    run_event(event, height, timestamp)

        rounds = 1
        if height == config.blocks - 1 and config.noise_tx_per_block > 0:
            rounds += config.final_mix_rounds
        for _ in range(rounds):
            if config.noise_tx_per_block > 0:
                for _ in range(config.sweep_tx_per_block):
                    if len(spendable) >= 2:
                        run_sweep(height, timestamp)
            for _ in range(config.noise_tx_per_block):
                if len(spendable) > 0:
                    run_noise_tx(height, timestamp)

    for pool in config.pools:
        close_segment(pool.name, config.blocks)

    store = store_from_records(records)
    truth = GroundTruth(
        blocks=truth_blocks, pool_segments=segments, churn_events=churn_events
    )
    return store, truth


def export_dump(store: ChainStore, dest: str | Path | IO[str]) -> None:
    """Write the chain in the line-delimited dump format."""
    write_dump(store, dest)
