"""Pairwise network comparison and miner-group extraction.

Comparing the circulation networks of two coinbases, nodes are grouped by
their distance from the sources in their own network. For each distance the
profile records the node count, the count of nodes absent from the other
network, and their ratio. Networks mined by the same pool share almost all
nodes; networks from different pools disagree heavily near the sources,
and those near-source exclusive nodes are the miner-group candidates.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping

from .chain import CoinflowError
from .circulation import CirculationNetwork

SAME_POOL = "same-pool"
DIFFERENT_POOL = "different-pool"

DEFAULT_SAME_POOL_THRESHOLD = 0.95
DEFAULT_STABILIZATION_BAND = 0.05
SMOOTHING_WINDOW = 3


class SamePoolPair(CoinflowError):
    def __init__(self, overlap_ratio_min: float):
        super().__init__(
            "pair classified as same-pool "
            f"(min overlap ratio {overlap_ratio_min:.4f}); miner extraction "
            "is only meaningful for different-pool pairs"
        )
        self.overlap_ratio_min = overlap_ratio_min


@dataclass
class OverlapProfile:
    """Per-distance comparison of two networks.

    ``node_counts_x[i]`` is the number of x-side nodes at distance i,
    ``unique_counts_x[i]`` how many of those are absent from the other
    network, and ``unique_ratios_x[i]`` their quotient (0 where the bin is
    empty). Overlap ratios divide the shared node count by each network's
    size.
    """

    node_counts_a: list[int]
    unique_counts_a: list[int]
    unique_ratios_a: list[float]
    node_counts_b: list[int]
    unique_counts_b: list[int]
    unique_ratios_b: list[float]
    overlap_count: int
    overlap_ratio_a: float
    overlap_ratio_b: float


@dataclass
class PoolVerdict:
    verdict: str  # SAME_POOL or DIFFERENT_POOL
    overlap_ratio_min: float
    threshold: float


@dataclass
class MinerSet:
    addresses: set[str]
    network_label: str
    distance_cutoff: int


def _distance_map(net: CirculationNetwork | Mapping[str, int]) -> Mapping[str, int]:
    if isinstance(net, CirculationNetwork):
        return net.distance
    return net


def _per_distance(
    own: Mapping[str, int], other_nodes: set[str]
) -> tuple[list[int], list[int], list[float]]:
    size = max(own.values(), default=-1) + 1
    node_counts = [0] * size
    unique_counts = [0] * size
    for addr, dist in own.items():
        node_counts[dist] += 1
        if addr not in other_nodes:
            unique_counts[dist] += 1
    ratios = [u / n if n else 0.0 for u, n in zip(unique_counts, node_counts)]
    return node_counts, unique_counts, ratios


def overlap_profile(
    net_a: CirculationNetwork | Mapping[str, int],
    net_b: CirculationNetwork | Mapping[str, int],
) -> OverlapProfile:
    """Exact per-distance set arithmetic comparing two networks.

    Accepts full networks or bare address-to-distance mappings (as loaded
    from an exported node-attribute file); only node sets and distances
    matter here.
    """
    dist_a = _distance_map(net_a)
    dist_b = _distance_map(net_b)
    nodes_a = set(dist_a)
    nodes_b = set(dist_b)
    overlap = len(nodes_a & nodes_b)

    counts_a, unique_a, ratios_a = _per_distance(dist_a, nodes_b)
    counts_b, unique_b, ratios_b = _per_distance(dist_b, nodes_a)

    return OverlapProfile(
        node_counts_a=counts_a,
        unique_counts_a=unique_a,
        unique_ratios_a=ratios_a,
        node_counts_b=counts_b,
        unique_counts_b=unique_b,
        unique_ratios_b=ratios_b,
        overlap_count=overlap,
        overlap_ratio_a=overlap / len(nodes_a) if nodes_a else 0.0,
        overlap_ratio_b=overlap / len(nodes_b) if nodes_b else 0.0,
    )


def classify_pair(
    profile: OverlapProfile, threshold: float = DEFAULT_SAME_POOL_THRESHOLD
) -> PoolVerdict:
    """Same-pool iff both overlap ratios reach ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    ratio_min = min(profile.overlap_ratio_a, profile.overlap_ratio_b)
    verdict = SAME_POOL if ratio_min >= threshold else DIFFERENT_POOL
    return PoolVerdict(verdict=verdict, overlap_ratio_min=ratio_min, threshold=threshold)


def smooth_ratios(ratios: list[float], window: int = SMOOTHING_WINDOW) -> list[float]:
    """Centered moving average, truncated at the ends."""
    half = window // 2
    out = []
    for i in range(len(ratios)):
        lo = max(0, i - half)
        hi = min(len(ratios), i + half + 1)
        out.append(sum(ratios[lo:hi]) / (hi - lo))
    return out


def auto_distance_cutoff(
    ratios: list[float], band: float = DEFAULT_STABILIZATION_BAND
) -> int:
    """Distance where the exclusive-node ratio curve stabilizes.

    Returns the smallest index at which the smoothed curve first comes
    within ``band`` of the median of its tail (second half). Distance bins
    far from the source are sparse, hence the smoothing.
    """
    if not ratios:
        return 0
    smoothed = smooth_ratios(ratios)
    tail_median = statistics.median(smoothed[len(smoothed) // 2:])
    for i, value in enumerate(smoothed):
        if abs(value - tail_median) <= band:
            return i
    return len(smoothed) - 1


def identify_miners(
    net_a: CirculationNetwork | Mapping[str, int],
    net_b: CirculationNetwork | Mapping[str, int],
    cutoff: int | str = "auto",
    threshold: float = DEFAULT_SAME_POOL_THRESHOLD,
    band: float = DEFAULT_STABILIZATION_BAND,
    allow_same_pool: bool = False,
    labels: tuple[str, str] = ("a", "b"),
) -> tuple[MinerSet, MinerSet]:
    """Extract miner-address candidates from a different-pool pair.

    For each network this returns the nodes absent from the other network
    whose distance is at most the cutoff. ``cutoff="auto"`` picks the
    stabilization point of each side's ratio curve independently; an integer
    applies to both sides. Same-pool pairs raise :class:`SamePoolPair`
    unless ``allow_same_pool`` is set, in which case the sets are simply
    (near-)empty.
    """
    if isinstance(cutoff, str) and cutoff != "auto":
        raise ValueError(f"cutoff must be an integer or 'auto', got {cutoff!r}")
    if isinstance(cutoff, int) and cutoff < 0:
        raise ValueError("cutoff must be non-negative")

    profile = overlap_profile(net_a, net_b)
    verdict = classify_pair(profile, threshold)
    if verdict.verdict == SAME_POOL and not allow_same_pool:
        raise SamePoolPair(verdict.overlap_ratio_min)

    if cutoff == "auto":
        cutoff_a = auto_distance_cutoff(profile.unique_ratios_a, band)
        cutoff_b = auto_distance_cutoff(profile.unique_ratios_b, band)
    else:
        cutoff_a = cutoff_b = int(cutoff)

    dist_a = _distance_map(net_a)
    dist_b = _distance_map(net_b)
    nodes_a = set(dist_a)
    nodes_b = set(dist_b)
    miners_a = {a for a, d in dist_a.items() if d <= cutoff_a and a not in nodes_b}
    miners_b = {b for b, d in dist_b.items() if d <= cutoff_b and b not in nodes_a}
    return (
        MinerSet(addresses=miners_a, network_label=labels[0], distance_cutoff=cutoff_a),
        MinerSet(addresses=miners_b, network_label=labels[1], distance_cutoff=cutoff_b),
    )


def write_profile_csv(profile: OverlapProfile, dest: str | Path | IO[str]) -> None:
    """Per-distance table with both sides padded to a common length."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_profile_csv(profile, fh)
        return
    writer = csv.writer(dest)
    writer.writerow(
        ["distance", "total_a", "unique_a", "ratio_a", "total_b", "unique_b", "ratio_b"]
    )
    size = max(len(profile.node_counts_a), len(profile.node_counts_b))
    for i in range(size):
        in_a = i < len(profile.node_counts_a)
        in_b = i < len(profile.node_counts_b)
        writer.writerow(
            [
                i,
                profile.node_counts_a[i] if in_a else 0,
                profile.unique_counts_a[i] if in_a else 0,
                f"{profile.unique_ratios_a[i]:.6f}" if in_a else "0.000000",
                profile.node_counts_b[i] if in_b else 0,
                profile.unique_counts_b[i] if in_b else 0,
                f"{profile.unique_ratios_b[i]:.6f}" if in_b else "0.000000",
            ]
        )


def write_miner_set(miners: MinerSet, dest: str | Path | IO[str]) -> None:
    """One address per line, sorted."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            write_miner_set(miners, fh)
        return
    for addr in sorted(miners.addresses):
        dest.write(addr + "\n")
