"""Network statistics: density, degrees, clustering, distance histograms.

Density uses the directed formula E / (V * (V - 1)). Average degree and
clustering are computed on the undirected projection with self-loops
removed and parallel directions merged; clustering is the mean local
clustering coefficient over all nodes, with nodes of degree below 2
contributing 0. All functions are pure and safe for concurrent use.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .chain import CoinflowError
from .circulation import CirculationNetwork


class SubsetNotInNetwork(CoinflowError):
    def __init__(self, missing: list[str]):
        shown = ", ".join(sorted(missing)[:5])
        super().__init__(f"{len(missing)} subset address(es) not in network: {shown}")
        self.missing = missing


@dataclass
class DegreeHistogram:
    direction: str  # "in" or "out"
    counts: dict[int, int]  # degree value -> number of nodes

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class NetworkSummary:
    node_count: int
    edge_count: int
    density: float
    avg_degree_undirected: float
    clustering: float
    max_distance: int


def _undirected_adjacency(net: CirculationNetwork) -> dict[str, set[str]]:
    adjacency: dict[str, set[str]] = {v: set() for v in net.nodes}
    for u, v in net.edges:
        if u == v:
            continue
        adjacency[u].add(v)
        adjacency[v].add(u)
    return adjacency


def summarize(net: CirculationNetwork) -> NetworkSummary:
    n = len(net.nodes)
    e = len(net.edges)
    density = e / (n * (n - 1)) if n >= 2 else 0.0

    adjacency = _undirected_adjacency(net)
    undirected_edges = sum(len(nbrs) for nbrs in adjacency.values()) // 2
    avg_degree = 2 * undirected_edges / n if n else 0.0

    clustering_total = 0.0
    for v, nbrs in adjacency.items():
        k = len(nbrs)
        if k < 2:
            continue
        # Each neighbor pair that is itself connected is counted twice here.
        closed = sum(len(nbrs & adjacency[u]) for u in nbrs)
        clustering_total += closed / (k * (k - 1))
    clustering = clustering_total / n if n else 0.0

    return NetworkSummary(
        node_count=n,
        edge_count=e,
        density=density,
        avg_degree_undirected=avg_degree,
        clustering=clustering,
        max_distance=net.max_distance(),
    )


def degree_distribution(net: CirculationNetwork, direction: str) -> DegreeHistogram:
    """Histogram of directed degrees; zero-degree nodes are included."""
    if direction not in ("in", "out"):
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
    degree = {v: 0 for v in net.nodes}
    side = 0 if direction == "out" else 1
    for edge in net.edges:
        degree[edge[side]] += 1
    return DegreeHistogram(direction=direction, counts=dict(Counter(degree.values())))


def distance_distribution(
    net: CirculationNetwork, subset: Iterable[str] | None = None
) -> dict[int, int]:
    """Count nodes per source distance, optionally restricted to ``subset``."""
    if subset is None:
        members: Iterable[str] = net.nodes
    else:
        members = set(subset)
        missing = [a for a in members if a not in net.nodes]
        if missing:
            raise SubsetNotInNetwork(missing)
    histogram: Counter[int] = Counter(net.distance[a] for a in members)
    return dict(histogram)
