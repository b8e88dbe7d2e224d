"""Fresh coin circulation networks.

A circulation network is rooted at one coinbase transaction. Starting from
the coinbase's outputs, the trace follows every spend recorded in the spend
index, transitively, as long as the spending transaction's timestamp stays
within a horizon of the coinbase timestamp; a transaction past the horizon
terminates its branch. Nodes are the output addresses of traced
transactions. Each traced spend of an output contributes a directed edge
from that output's address to every output address of the spending
transaction, so addresses whose coins never trace back to the coinbase stay
out of the network entirely.

Node distance is the minimum number of edge hops from any source address
(the coinbase's own output addresses, which sit at distance 0).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .chain import ChainStore, CoinflowError, SpendIndex

DEFAULT_HORIZON_SECONDS = 7 * 86_400


class UnknownTxid(CoinflowError):
    def __init__(self, txid: str):
        super().__init__(f"txid {txid} not present in store")
        self.txid = txid


class NotACoinbase(CoinflowError):
    def __init__(self, txid: str):
        super().__init__(f"txid {txid} is not a coinbase transaction")
        self.txid = txid


@dataclass
class CirculationNetwork:
    """Directed address graph traced from one coinbase.

    ``edges`` is deduplicated; ``edge_multiplicity`` retains how many traced
    spends produced each edge. Self-edges (an address paying itself) are
    kept and do not affect distances. Instances are immutable by convention.
    """

    source_addresses: frozenset[str]
    nodes: set[str]
    edges: set[tuple[str, str]]
    distance: dict[str, int]
    tx_count: int
    horizon_seconds: float
    edge_multiplicity: dict[tuple[str, str], int]

    def max_distance(self) -> int:
        return max(self.distance.values(), default=0)


def build_circulation_network(
    store: ChainStore,
    index: SpendIndex,
    coinbase_txid: str,
    horizon_seconds: float = DEFAULT_HORIZON_SECONDS,
) -> CirculationNetwork:
    """Trace the circulation network rooted at ``coinbase_txid``.

    A spending transaction is included iff its timestamp is at most the
    coinbase timestamp plus ``horizon_seconds``. All coinbase output
    addresses are sources at distance 0, and coinbase outputs never spent
    within the horizon still contribute their addresses as nodes.
    """
    root = store.transactions.get(coinbase_txid)
    if root is None:
        raise UnknownTxid(coinbase_txid)
    if not root.is_coinbase:
        raise NotACoinbase(coinbase_txid)
    if horizon_seconds <= 0:
        raise ValueError("horizon must be positive")

    deadline = root.timestamp + horizon_seconds
    transactions = store.transactions
    spends = index.spends

    sources = frozenset(out.address for out in root.outputs)
    nodes: set[str] = set(sources)
    multiplicity: dict[tuple[str, str], int] = {}

    traced: set[str] = {coinbase_txid}
    queue: deque[str] = deque((coinbase_txid,))
    while queue:
        parent_txid = queue.popleft()
        parent = transactions[parent_txid]
        for position, out in enumerate(parent.outputs):
            spender_txid = spends.get((parent_txid, position))
            if spender_txid is None:
                continue
            spender = transactions[spender_txid]
            if spender.timestamp > deadline:
                continue
            src = out.address
            for spender_out in spender.outputs:
                key = (src, spender_out.address)
                multiplicity[key] = multiplicity.get(key, 0) + 1
            if spender_txid not in traced:
                traced.add(spender_txid)
                queue.append(spender_txid)
                for spender_out in spender.outputs:
                    nodes.add(spender_out.address)

    distance = _bfs_distances(sources, multiplicity)
    return CirculationNetwork(
        source_addresses=sources,
        nodes=nodes,
        edges=set(multiplicity),
        distance=distance,
        tx_count=len(traced),
        horizon_seconds=horizon_seconds,
        edge_multiplicity=multiplicity,
    )


def _bfs_distances(
    sources: Iterable[str], edges: Iterable[tuple[str, str]]
) -> dict[str, int]:
    adjacency: dict[str, list[str]] = {}
    for u, v in edges:
        adjacency.setdefault(u, []).append(v)
    distance = {s: 0 for s in sources}
    queue: deque[str] = deque(distance)
    while queue:
        u = queue.popleft()
        next_d = distance[u] + 1
        for v in adjacency.get(u, ()):
            if v not in distance:
                distance[v] = next_d
                queue.append(v)
    return distance


def restrict_to_distance(net: CirculationNetwork, k: int) -> CirculationNetwork:
    """Subgraph induced on nodes within ``k`` hops of the sources.

    Distances are preserved; ``tx_count`` and the horizon still describe the
    parent trace.
    """
    if k < 0:
        raise ValueError("distance cutoff must be non-negative")
    nodes = {a for a in net.nodes if net.distance[a] <= k}
    multiplicity = {
        (u, v): count
        for (u, v), count in net.edge_multiplicity.items()
        if u in nodes and v in nodes
    }
    return CirculationNetwork(
        source_addresses=net.source_addresses,
        nodes=nodes,
        edges=set(multiplicity),
        distance={a: d for a, d in net.distance.items() if a in nodes},
        tx_count=net.tx_count,
        horizon_seconds=net.horizon_seconds,
        edge_multiplicity=multiplicity,
    )


def write_edge_list(net: CirculationNetwork, dest: str | Path | IO[str]) -> None:
    """One ``from_addr<TAB>to_addr`` line per edge, sorted."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            write_edge_list(net, fh)
        return
    for u, v in sorted(net.edges):
        dest.write(f"{u}\t{v}\n")


def write_node_attributes(net: CirculationNetwork, dest: str | Path | IO[str]) -> None:
    """One ``addr<TAB>distance`` line per node, sorted."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            write_node_attributes(net, fh)
        return
    for addr in sorted(net.nodes):
        dest.write(f"{addr}\t{net.distance[addr]}\n")


def load_node_distances(source: str | Path) -> dict[str, int]:
    """Read a node-attribute file back into an address-to-distance map."""
    distance: dict[str, int] = {}
    with open(source, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            addr, _, dist = line.rpartition("\t")
            distance[addr] = int(dist)
    return distance


def load_network(edges_path: str | Path, nodes_path: str | Path) -> CirculationNetwork:
    """Rebuild a network from exported edge-list and node-attribute files.

    The trace context is gone, so ``tx_count`` is 0 and the horizon is
    unknown; sources are recovered as the distance-0 nodes.
    """
    distance = load_node_distances(nodes_path)
    multiplicity: dict[tuple[str, str], int] = {}
    with open(edges_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            u, _, v = line.partition("\t")
            multiplicity[(u, v)] = multiplicity.get((u, v), 0) + 1
    return CirculationNetwork(
        source_addresses=frozenset(a for a, d in distance.items() if d == 0),
        nodes=set(distance),
        edges=set(multiplicity),
        distance=distance,
        tx_count=0,
        horizon_seconds=0.0,
        edge_multiplicity=multiplicity,
    )
