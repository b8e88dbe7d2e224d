"""Coin-flow analytics: circulation networks, miner groups, payout patterns."""

__version__ = "0.1.0"

from .chain import (
    ChainStore,
    CoinflowError,
    Outpoint,
    SpendIndex,
    TransactionRecord,
    TxOutput,
    build_spend_index,
    coinbase_of,
    parse_transactions,
    write_dump,
)
from .circulation import (
    DEFAULT_HORIZON_SECONDS,
    CirculationNetwork,
    build_circulation_network,
    restrict_to_distance,
)
from .metrics import (
    DegreeHistogram,
    NetworkSummary,
    degree_distribution,
    distance_distribution,
    summarize,
)
from .minerid import (
    MinerSet,
    OverlapProfile,
    PoolVerdict,
    classify_pair,
    identify_miners,
    overlap_profile,
)
from .payout import (
    PayoutPattern,
    TrendPeriod,
    TrendPoint,
    classify_pattern,
    miner_trend,
)
from .synth import GroundTruth, PoolSpec, SimConfig, default_config, export_dump, generate_chain

__all__ = [
    "ChainStore",
    "CirculationNetwork",
    "CoinflowError",
    "DEFAULT_HORIZON_SECONDS",
    "DegreeHistogram",
    "GroundTruth",
    "MinerSet",
    "NetworkSummary",
    "Outpoint",
    "OverlapProfile",
    "PayoutPattern",
    "PoolSpec",
    "PoolVerdict",
    "SimConfig",
    "SpendIndex",
    "TransactionRecord",
    "TrendPeriod",
    "TrendPoint",
    "TxOutput",
    "build_circulation_network",
    "build_spend_index",
    "classify_pair",
    "classify_pattern",
    "coinbase_of",
    "default_config",
    "degree_distribution",
    "distance_distribution",
    "export_dump",
    "generate_chain",
    "identify_miners",
    "miner_trend",
    "overlap_profile",
    "parse_transactions",
    "restrict_to_distance",
    "summarize",
    "write_dump",
]
