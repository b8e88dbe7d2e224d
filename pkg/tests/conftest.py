import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coinflow.chain import (
    Outpoint,
    TransactionRecord,
    TxOutput,
    build_spend_index,
    store_from_records,
)

HOUR = 3600


def _tx(txid, height, timestamp, inputs, outputs, coinbase=False):
    return TransactionRecord(
        txid=txid,
        block_height=height,
        timestamp=timestamp,
        inputs=[Outpoint(t, v) for t, v in inputs],
        outputs=[TxOutput(a, val) for a, val in outputs],
        is_coinbase=coinbase,
    )


@pytest.fixture
def reference_store():
    """Five transactions: a coinbase chain plus a sibling branch whose
    addresses never trace back to the first coinbase.

    cb0 -> tx1 -> tx2, and txn -> tx2, where txn is funded by a second
    block's coinbase. Tracing from cb0 must keep {s, a, s2, d, e} and leave
    {w, b, c} out.
    """
    records = [
        _tx("cb0", 0, 1000, [], [("s", 50)], coinbase=True),
        _tx("cb1", 1, 1600, [], [("w", 50)], coinbase=True),
        _tx("tx1", 1, 1600, [("cb0", 0)], [("a", 30), ("s2", 20)]),
        _tx("txn", 1, 1700, [("cb1", 0)], [("b", 25), ("c", 25)]),
        _tx("tx2", 1, 2200, [("tx1", 0), ("txn", 1)], [("d", 35), ("e", 20)]),
    ]
    return store_from_records(records)


@pytest.fixture
def reference_index(reference_store):
    return build_spend_index(reference_store)


@pytest.fixture
def paired_sources_store():
    """Two coinbases whose trails share downstream addresses but differ in
    the hop-1 payout addresses; each trail eventually pays the other's
    source address, so only {a, b} and {c, d} stay exclusive.
    """
    records = [
        _tx("cbA", 0, 0, [], [("s1", 50)], coinbase=True),
        _tx("cbB", 1, 600, [], [("s2", 50)], coinbase=True),
        _tx("txA", 1, 1200, [("cbA", 0)], [("a", 20), ("b", 20), ("x", 10)]),
        _tx("txB", 1, 1200, [("cbB", 0)], [("c", 20), ("d", 20), ("x", 10)]),
        _tx("txC", 1, 1800, [("txA", 2)], [("y", 5), ("s2", 5)]),
        _tx("txD", 1, 1800, [("txB", 2)], [("y", 5), ("s1", 5)]),
    ]
    return store_from_records(records)


@pytest.fixture
def make_tx():
    return _tx
