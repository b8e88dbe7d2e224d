"""Payout-pattern classification and miner-count trends.

Pools hand out block rewards in one of three topological shapes: the
coinbase itself pays the miners (immediate), the pool address pays a batch
transaction directly (direct), or the reward passes through one or more
intermediate addresses first (indirect). The classifier walks forward from
the coinbase along the spend index and reports the hop at which it meets
the first transaction with enough outputs to be a batch payout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .chain import ChainStore, CoinflowError, SpendIndex, TransactionRecord
from .circulation import (
    DEFAULT_HORIZON_SECONDS,
    NotACoinbase,
    build_circulation_network,
)
from .minerid import (
    DEFAULT_SAME_POOL_THRESHOLD,
    identify_miners,
)

LABEL_IMMEDIATE = "immediate"
LABEL_DIRECT = "direct"
LABEL_INDIRECT = "indirect"
LABEL_UNKNOWN = "unknown"

DEFAULT_FANOUT_THRESHOLD = 10
SENSITIVITY_THRESHOLDS = (5, 10, 50)


class InsufficientCoinbases(CoinflowError):
    def __init__(self, label: str, count: int):
        super().__init__(f"period {label!r} supplies {count} coinbase(s); need at least 2")
        self.label = label


@dataclass
class PayoutPattern:
    label: str
    fanout_hop: int | None  # None when no fan-out was found within the horizon
    fanout_size: int


@dataclass
class TrendPeriod:
    label: str
    pool: str
    coinbase_txids: list[str]
    reference_txids: list[str]


@dataclass
class TrendPoint:
    period: str
    pool: str
    miner_count: int
    blocks: int


def _label_for_hop(hop: int) -> str:
    if hop == 0:
        return LABEL_IMMEDIATE
    if hop == 1:
        return LABEL_DIRECT
    return LABEL_INDIRECT


def _traced_spenders(
    tx: TransactionRecord,
    store: ChainStore,
    index: SpendIndex,
    deadline: float,
) -> list[tuple[int, int, str]]:
    """(value, position, spender_txid) for outputs spent within the horizon."""
    found = []
    for position, out in enumerate(tx.outputs):
        spender_txid = index.spends.get((tx.txid, position))
        if spender_txid is None:
            continue
        if store.transactions[spender_txid].timestamp > deadline:
            continue
        found.append((out.value, position, spender_txid))
    return found


def classify_pattern(
    store: ChainStore,
    index: SpendIndex,
    coinbase_txid: str,
    fanout_threshold: int = DEFAULT_FANOUT_THRESHOLD,
    horizon_seconds: float = DEFAULT_HORIZON_SECONDS,
    follow_all_branches: bool = False,
) -> PayoutPattern:
    """Classify how a block reward was distributed.

    The default walk follows, at each hop, the spender of the largest-value
    traced output (pool change conventions make that the payout trail); with
    ``follow_all_branches`` every traced output is followed breadth-first
    and the minimum fan-out hop wins. A coinbase that itself has at least
    ``fanout_threshold`` outputs is an immediate distribution.
    """
    if fanout_threshold < 2:
        raise ValueError("fanout threshold must be at least 2")
    root = store.transactions.get(coinbase_txid)
    if root is None or not root.is_coinbase:
        raise NotACoinbase(coinbase_txid)
    deadline = root.timestamp + horizon_seconds

    if follow_all_branches:
        return _classify_all_branches(store, index, root, fanout_threshold, deadline)

    current = root
    hop = 0
    visited = {root.txid}
    while True:
        if len(current.outputs) >= fanout_threshold:
            return PayoutPattern(
                label=_label_for_hop(hop), fanout_hop=hop, fanout_size=len(current.outputs)
            )
        candidates = _traced_spenders(current, store, index, deadline)
        if not candidates:
            return PayoutPattern(label=LABEL_UNKNOWN, fanout_hop=None, fanout_size=0)
        # Largest value wins; ties break toward the earliest output position.
        _, _, next_txid = max(candidates, key=lambda c: (c[0], -c[1]))
        if next_txid in visited:
            return PayoutPattern(label=LABEL_UNKNOWN, fanout_hop=None, fanout_size=0)
        visited.add(next_txid)
        current = store.transactions[next_txid]
        hop += 1


def _classify_all_branches(
    store: ChainStore,
    index: SpendIndex,
    root: TransactionRecord,
    fanout_threshold: int,
    deadline: float,
) -> PayoutPattern:
    frontier = [root]
    visited = {root.txid}
    hop = 0
    while frontier:
        hits = [tx for tx in frontier if len(tx.outputs) >= fanout_threshold]
        if hits:
            best = max(hits, key=lambda tx: (len(tx.outputs), tx.txid))
            return PayoutPattern(
                label=_label_for_hop(hop), fanout_hop=hop, fanout_size=len(best.outputs)
            )
        next_frontier = []
        for tx in frontier:
            for _, _, spender_txid in _traced_spenders(tx, store, index, deadline):
                if spender_txid not in visited:
                    visited.add(spender_txid)
                    next_frontier.append(store.transactions[spender_txid])
        frontier = next_frontier
        hop += 1
    return PayoutPattern(label=LABEL_UNKNOWN, fanout_hop=None, fanout_size=0)


def miner_trend(
    store: ChainStore,
    index: SpendIndex,
    periods: list[TrendPeriod],
    cutoff: int | str = "auto",
    threshold: float = DEFAULT_SAME_POOL_THRESHOLD,
    horizon_seconds: float = DEFAULT_HORIZON_SECONDS,
    max_pairs: int = 20,
) -> list[TrendPoint]:
    """Per-period miner-group size for one pool.

    Each period pairs the pool's coinbases with reference coinbases from
    other pools; the period's count is the size of the union of the
    pool-side miner sets over those pairs. Pairs whose networks look
    same-pool contribute whatever (near-empty) exclusive sets they have
    rather than aborting the period.
    """
    points = []
    network_cache: dict[str, Mapping[str, int]] = {}

    def distances_for(txid: str) -> Mapping[str, int]:
        net = network_cache.get(txid)
        if net is None:
            net = build_circulation_network(store, index, txid, horizon_seconds).distance
            network_cache[txid] = net
        return net

    for period in periods:
        if len(period.coinbase_txids) < 2:
            raise InsufficientCoinbases(period.label, len(period.coinbase_txids))
        if not period.reference_txids:
            raise InsufficientCoinbases(period.label, 0)
        pairs = []
        for i, pool_txid in enumerate(period.coinbase_txids[:max_pairs]):
            ref_txid = period.reference_txids[i % len(period.reference_txids)]
            pairs.append((pool_txid, ref_txid))
        recovered: set[str] = set()
        for pool_txid, ref_txid in pairs:
            pool_side, _ = identify_miners(
                distances_for(pool_txid),
                distances_for(ref_txid),
                cutoff=cutoff,
                threshold=threshold,
                allow_same_pool=True,
            )
            recovered |= pool_side.addresses
        points.append(
            TrendPoint(
                period=period.label,
                pool=period.pool,
                miner_count=len(recovered),
                blocks=len(pairs),
            )
        )
    return points
