"""Transaction dump parsing, validation, and outpoint-spend indexing.

The dump format is UTF-8 line-delimited JSON, one transaction per line:

    {"txid": "beef...", "height": 12, "time": 1400007200, "coinbase": false,
     "vin": [{"txid": "feed...", "vout": 0}],
     "vout": [{"addr": "1Pool", "value": 2500000000}]}

``vin`` is empty exactly for coinbase transactions; every block contributes
exactly one coinbase. Addresses are opaque non-empty strings, values are
non-negative integers in base units, and ``time`` is epoch seconds. Files
ending in ``.gz`` are read and written through gzip transparently.

A parsed :class:`ChainStore` and the :class:`SpendIndex` derived from it are
immutable by convention once built and safe to share across analysis threads.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

log = logging.getLogger(__name__)


class CoinflowError(Exception):
    """Base class for every error raised by this package."""


class MalformedLine(CoinflowError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateTxid(CoinflowError):
    def __init__(self, txid: str):
        super().__init__(f"duplicate txid {txid}")
        self.txid = txid


class CoinbaseWithInputs(CoinflowError):
    def __init__(self, txid: str):
        super().__init__(f"coinbase {txid} declares inputs")
        self.txid = txid


class MissingCoinbase(CoinflowError):
    def __init__(self, height: int):
        super().__init__(f"height {height} has transactions but no coinbase")
        self.height = height


class DuplicateCoinbase(CoinflowError):
    def __init__(self, height: int, txid_a: str, txid_b: str):
        super().__init__(f"height {height} has two coinbases: {txid_a}, {txid_b}")
        self.height = height


class DoubleSpend(CoinflowError):
    def __init__(self, outpoint: "Outpoint", txid_a: str, txid_b: str):
        super().__init__(f"outpoint {outpoint} spent by both {txid_a} and {txid_b}")
        self.outpoint = outpoint
        self.txid_a = txid_a
        self.txid_b = txid_b


class DanglingReference(CoinflowError):
    def __init__(self, outpoint: "Outpoint", spender: str):
        super().__init__(f"{spender} references {outpoint} which is not in the store")
        self.outpoint = outpoint
        self.spender = spender


class InvalidOutpoint(CoinflowError):
    def __init__(self, outpoint: "Outpoint", spender: str, n_outputs: int):
        super().__init__(
            f"{spender} references output {outpoint.vout} of {outpoint.txid}, "
            f"which has only {n_outputs} outputs"
        )
        self.outpoint = outpoint
        self.spender = spender


class UnknownHeight(CoinflowError):
    def __init__(self, height: int):
        super().__init__(f"height {height} not present in store")
        self.height = height


class Outpoint(NamedTuple):
    """Reference to one output of a prior transaction."""

    txid: str
    vout: int


@dataclass(slots=True)
class TxOutput:
    address: str
    value: int


@dataclass(slots=True)
class TransactionRecord:
    txid: str
    block_height: int
    timestamp: int
    inputs: list[Outpoint]
    outputs: list[TxOutput]
    is_coinbase: bool


@dataclass
class ChainStore:
    """Validated, immutable snapshot of a transaction dump.

    ``by_height`` preserves the in-file ordering of each block's
    transactions; ``coinbases`` maps every stored height to its unique
    coinbase txid.
    """

    transactions: dict[str, TransactionRecord]
    by_height: dict[int, list[str]]
    coinbases: dict[int, str]

    def heights(self) -> list[int]:
        return sorted(self.by_height)

    def __len__(self) -> int:
        return len(self.transactions)


@dataclass
class SpendIndex:
    """Maps each spent outpoint to the txid of the transaction spending it."""

    spends: dict[Outpoint, str]
    dangling: list[Outpoint] = field(default_factory=list)

    @property
    def dangling_count(self) -> int:
        return len(self.dangling)


def _require(cond: bool, line_no: int, reason: str) -> None:
    if not cond:
        raise MalformedLine(line_no, reason)


def record_from_obj(obj: object, line_no: int = 0) -> TransactionRecord:
    """Validate one decoded JSON object and build its record."""
    _require(isinstance(obj, dict), line_no, "record is not a JSON object")
    assert isinstance(obj, dict)
    txid = obj.get("txid")
    _require(isinstance(txid, str) and txid != "", line_no, "missing or empty txid")
    height = obj.get("height")
    _require(isinstance(height, int) and not isinstance(height, bool) and height >= 0,
             line_no, "height must be a non-negative integer")
    timestamp = obj.get("time")
    _require(isinstance(timestamp, int) and not isinstance(timestamp, bool) and timestamp >= 0,
             line_no, "time must be a non-negative integer")
    coinbase = obj.get("coinbase")
    _require(isinstance(coinbase, bool), line_no, "coinbase must be a boolean")

    vin = obj.get("vin")
    _require(isinstance(vin, list), line_no, "vin must be an array")
    inputs: list[Outpoint] = []
    for entry in vin:  # type: ignore[union-attr]
        _require(isinstance(entry, dict), line_no, "vin entry is not an object")
        ptxid = entry.get("txid")
        pvout = entry.get("vout")
        _require(isinstance(ptxid, str) and ptxid != "", line_no, "vin entry missing txid")
        _require(isinstance(pvout, int) and not isinstance(pvout, bool) and pvout >= 0,
                 line_no, "vin entry vout must be a non-negative integer")
        inputs.append(Outpoint(ptxid, pvout))

    vout = obj.get("vout")
    _require(isinstance(vout, list) and len(vout) > 0, line_no, "vout must be a non-empty array")
    outputs: list[TxOutput] = []
    for entry in vout:  # type: ignore[union-attr]
        _require(isinstance(entry, dict), line_no, "vout entry is not an object")
        addr = entry.get("addr")
        value = entry.get("value")
        _require(isinstance(addr, str) and addr != "", line_no, "vout entry missing addr")
        _require(isinstance(value, int) and not isinstance(value, bool) and value >= 0,
                 line_no, "vout entry value must be a non-negative integer")
        outputs.append(TxOutput(addr, value))

    if coinbase and inputs:
        raise CoinbaseWithInputs(txid)
    _require(coinbase or bool(inputs), line_no, f"non-coinbase {txid} has no inputs")

    return TransactionRecord(
        txid=txid,
        block_height=height,
        timestamp=timestamp,
        inputs=inputs,
        outputs=outputs,
        is_coinbase=coinbase,
    )


def record_to_obj(tx: TransactionRecord) -> dict:
    return {
        "txid": tx.txid,
        "height": tx.block_height,
        "time": tx.timestamp,
        "coinbase": tx.is_coinbase,
        "vin": [{"txid": op.txid, "vout": op.vout} for op in tx.inputs],
        "vout": [{"addr": o.address, "value": o.value} for o in tx.outputs],
    }


def record_to_line(tx: TransactionRecord) -> str:
    return json.dumps(record_to_obj(tx), separators=(",", ":"))


def store_from_records(records: Iterable[TransactionRecord]) -> ChainStore:
    """Assemble and validate a store from already-parsed records."""
    transactions: dict[str, TransactionRecord] = {}
    by_height: dict[int, list[str]] = {}
    coinbases: dict[int, str] = {}
    for tx in records:
        if tx.txid in transactions:
            raise DuplicateTxid(tx.txid)
        transactions[tx.txid] = tx
        by_height.setdefault(tx.block_height, []).append(tx.txid)
        if tx.is_coinbase:
            prior = coinbases.get(tx.block_height)
            if prior is not None:
                raise DuplicateCoinbase(tx.block_height, prior, tx.txid)
            coinbases[tx.block_height] = tx.txid
    for height in by_height:
        if height not in coinbases:
            raise MissingCoinbase(height)
    _warn_nonmonotone_timestamps(transactions, coinbases)
    return ChainStore(transactions=transactions, by_height=by_height, coinbases=coinbases)


def _warn_nonmonotone_timestamps(
    transactions: dict[str, TransactionRecord], coinbases: dict[int, str]
) -> None:
    # Real chains permit small skew, so this is advisory only; horizon
    # filtering works off transaction timestamps, never heights.
    heights = sorted(coinbases)
    for prev, cur in zip(heights, heights[1:]):
        t_prev = transactions[coinbases[prev]].timestamp
        t_cur = transactions[coinbases[cur]].timestamp
        if t_cur < t_prev:
            log.warning(
                "coinbase timestamp decreases from height %d (%d) to %d (%d)",
                prev, t_prev, cur, t_cur,
            )


def _open_text(source: str | Path) -> IO[str]:
    path = Path(source)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def iter_dump_lines(source: str | Path | IO[str] | Iterable[str]) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with _open_text(source) as fh:
            yield from fh
    else:
        yield from source


def parse_transactions(source: str | Path | IO[str] | Iterable[str]) -> ChainStore:
    """Parse a line-delimited dump into a validated store.

    ``source`` may be a path (``.gz`` accepted), an open text handle, or any
    iterable of lines; input is consumed one line at a time.
    """

    def records() -> Iterator[TransactionRecord]:
        for line_no, line in enumerate(iter_dump_lines(source), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from exc
            yield record_from_obj(obj, line_no)

    return store_from_records(records())


def write_dump(store: ChainStore, dest: str | Path | IO[str]) -> None:
    """Write the store in height order, coinbase-first within each block."""
    if isinstance(dest, (str, Path)):
        path = Path(dest)
        if path.suffix == ".gz":
            with io.TextIOWrapper(gzip.open(path, "wb"), encoding="utf-8") as fh:
                write_dump(store, fh)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                write_dump(store, fh)
        return
    for height in store.heights():
        for txid in store.by_height[height]:
            dest.write(record_to_line(store.transactions[txid]))
            dest.write("\n")


def build_spend_index(store: ChainStore, on_dangling: str = "skip") -> SpendIndex:
    """Index every spent outpoint.

    ``on_dangling`` controls inputs whose referenced txid is absent from the
    store: ``"skip"`` records them in ``SpendIndex.dangling`` (dump slices
    are truncated at their lower boundary, so this is the default), while
    ``"error"`` raises :class:`DanglingReference`.
    """
    if on_dangling not in ("skip", "error"):
        raise ValueError(f"on_dangling must be 'skip' or 'error', got {on_dangling!r}")
    spends: dict[Outpoint, str] = {}
    dangling: list[Outpoint] = []
    for height in store.heights():
        for txid in store.by_height[height]:
            tx = store.transactions[txid]
            if tx.is_coinbase:
                continue
            for outpoint in tx.inputs:
                referenced = store.transactions.get(outpoint.txid)
                if referenced is None:
                    if on_dangling == "error":
                        raise DanglingReference(outpoint, txid)
                    dangling.append(outpoint)
                    continue
                if outpoint.vout >= len(referenced.outputs):
                    raise InvalidOutpoint(outpoint, txid, len(referenced.outputs))
                prior = spends.get(outpoint)
                if prior is not None:
                    raise DoubleSpend(outpoint, prior, txid)
                spends[outpoint] = txid
    return SpendIndex(spends=spends, dangling=dangling)


def coinbase_of(store: ChainStore, height: int) -> TransactionRecord:
    """Return the unique coinbase transaction at ``height``."""
    txid = store.coinbases.get(height)
    if txid is None:
        raise UnknownHeight(height)
    return store.transactions[txid]
