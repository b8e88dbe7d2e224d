"""Command-line pipelines over transaction dumps.

Every subcommand writes its results into ``--output-dir`` together with a
``manifest.json`` recording the command, all parameters, and the SHA-256
digests of the input files, so a run can be reproduced exactly. Re-running
with identical inputs and flags produces byte-identical outputs (the
manifest timestamp aside).

Exit codes: 0 on success, 1 on input or usage errors, 2 on internal errors.
``COINFLOW_THREADS`` caps the parallelism of per-coinbase analyses.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .chain import (
    ChainStore,
    CoinflowError,
    SpendIndex,
    build_spend_index,
    coinbase_of,
    parse_transactions,
)
from .circulation import (
    DEFAULT_HORIZON_SECONDS,
    build_circulation_network,
    load_node_distances,
    write_edge_list,
    write_node_attributes,
)
from .metrics import degree_distribution, distance_distribution, summarize
from .minerid import (
    DEFAULT_SAME_POOL_THRESHOLD,
    DEFAULT_STABILIZATION_BAND,
    classify_pair,
    identify_miners,
    overlap_profile,
    write_miner_set,
    write_profile_csv,
)
from .payout import (
    DEFAULT_FANOUT_THRESHOLD,
    SENSITIVITY_THRESHOLDS,
    TrendPeriod,
    classify_pattern,
    miner_trend,
)
from .synth import SimConfig, PoolSpec, default_config, export_dump, generate_chain

_DURATION_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here is exit code 1 with
    # the offending flag named in the message.
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def parse_duration(text: str) -> float:
    """Accepts '7d', '36h', '90m', '600s', or a bare number of seconds."""
    text = text.strip().lower()
    unit = 1
    if text and text[-1] in _DURATION_UNITS:
        unit = _DURATION_UNITS[text[-1]]
        text = text[:-1]
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"cannot parse duration {text!r}; use forms like 7d, 36h, 600s")
    if value <= 0:
        raise UsageError("duration must be positive")
    return value * unit


def parse_cutoff(text: str) -> int | str:
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"--cutoff must be 'auto' or an integer, got {text!r}")
    if value < 0:
        raise UsageError("--cutoff must be non-negative")
    return value


def worker_count() -> int:
    cap = os.environ.get("COINFLOW_THREADS")
    available = os.cpu_count() or 1
    if cap is None:
        return available
    try:
        return max(1, min(available, int(cap)))
    except ValueError:
        raise UsageError(f"COINFLOW_THREADS must be an integer, got {cap!r}")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(
    out_dir: Path,
    command: str,
    parameters: dict,
    inputs: list[Path],
    outputs: list[str],
) -> None:
    manifest = {
        "command": command,
        "parameters": parameters,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": sorted(outputs),
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path: Path, obj: object) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_histogram_csv(path: Path, header: tuple[str, str], counts: dict[int, int]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for key in sorted(counts):
            writer.writerow([key, counts[key]])


def _load_store(args) -> tuple[ChainStore, SpendIndex]:
    store = parse_transactions(args.input)
    on_dangling = "error" if getattr(args, "strict_references", False) else "skip"
    index = build_spend_index(store, on_dangling=on_dangling)
    return store, index


def _resolve_coinbase(store: ChainStore, args) -> str:
    if getattr(args, "coinbase", None):
        return args.coinbase
    if getattr(args, "height", None) is not None:
        return coinbase_of(store, args.height).txid
    raise UsageError("one of --coinbase or --height is required")


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    store, index = _load_store(args)
    heights = store.heights()
    summary = {
        "transactions": len(store),
        "blocks": len(heights),
        "height_range": [heights[0], heights[-1]] if heights else None,
        "spent_outpoints": len(index.spends),
        "dangling_references": index.dangling_count,
    }
    _write_json(out / "ingest.json", summary)
    _write_manifest(
        out, "ingest",
        {"input": str(args.input), "strict_references": bool(args.strict_references)},
        [Path(args.input)], ["ingest.json"],
    )
    return 0


def _network_tag(args, txid: str) -> str:
    if getattr(args, "tag", None):
        return args.tag
    if getattr(args, "height", None) is not None:
        return f"h{args.height}"
    return txid[:12]


def cmd_build_net(args) -> int:
    out = _out_dir(args)
    store, index = _load_store(args)
    txid = _resolve_coinbase(store, args)
    net = build_circulation_network(store, index, txid, args.horizon)
    tag = _network_tag(args, txid)
    edges_name = f"net-{tag}.edges.tsv"
    nodes_name = f"net-{tag}.nodes.tsv"
    write_edge_list(net, out / edges_name)
    write_node_attributes(net, out / nodes_name)
    summary = {
        "coinbase_txid": txid,
        "sources": sorted(net.source_addresses),
        "nodes": len(net.nodes),
        "edges": len(net.edges),
        "traced_transactions": net.tx_count,
        "max_distance": net.max_distance(),
        "horizon_seconds": net.horizon_seconds,
    }
    summary_name = f"net-{tag}.summary.json"
    _write_json(out / summary_name, summary)
    _write_manifest(
        out, "build-net",
        {"input": str(args.input), "coinbase": txid, "horizon_seconds": args.horizon},
        [Path(args.input)], [edges_name, nodes_name, summary_name],
    )
    return 0


def cmd_stats(args) -> int:
    out = _out_dir(args)
    store, index = _load_store(args)
    txid = _resolve_coinbase(store, args)
    net = build_circulation_network(store, index, txid, args.horizon)
    tag = _network_tag(args, txid)
    summary = summarize(net)
    outputs = [f"stats-{tag}.summary.json"]
    _write_json(
        out / outputs[0],
        {
            "coinbase_txid": txid,
            "node_count": summary.node_count,
            "edge_count": summary.edge_count,
            "density": summary.density,
            "avg_degree_undirected": summary.avg_degree_undirected,
            "clustering": summary.clustering,
            "max_distance": summary.max_distance,
        },
    )
    distance_hist = distance_distribution(net)
    tables = {
        f"stats-{tag}.degree-in": degree_distribution(net, "in").counts,
        f"stats-{tag}.degree-out": degree_distribution(net, "out").counts,
        f"stats-{tag}.distance": distance_hist,
    }
    for stem, counts in tables.items():
        header = ("distance", "count") if stem.endswith("distance") else ("degree", "count")
        if args.format == "json":
            name = f"{stem}.json"
            _write_json(out / name, {str(k): counts[k] for k in sorted(counts)})
        else:
            name = f"{stem}.csv"
            _write_histogram_csv(out / name, header, counts)
        outputs.append(name)
    _write_manifest(
        out, "stats",
        {"input": str(args.input), "coinbase": txid,
         "horizon_seconds": args.horizon, "format": args.format},
        [Path(args.input)], outputs,
    )
    return 0


def cmd_compare(args) -> int:
    out = _out_dir(args)
    dist_a = load_node_distances(args.net_a)
    dist_b = load_node_distances(args.net_b)
    profile = overlap_profile(dist_a, dist_b)
    verdict = classify_pair(profile, args.threshold)
    write_profile_csv(profile, out / "compare.profile.csv")
    _write_json(
        out / "compare.verdict.json",
        {
            "verdict": verdict.verdict,
            "overlap_count": profile.overlap_count,
            "overlap_ratio_a": profile.overlap_ratio_a,
            "overlap_ratio_b": profile.overlap_ratio_b,
            "overlap_ratio_min": verdict.overlap_ratio_min,
            "threshold": verdict.threshold,
        },
    )
    _write_manifest(
        out, "compare",
        {"net_a": str(args.net_a), "net_b": str(args.net_b), "threshold": args.threshold},
        [Path(args.net_a), Path(args.net_b)],
        ["compare.profile.csv", "compare.verdict.json"],
    )
    return 0


def cmd_identify_miners(args) -> int:
    out = _out_dir(args)
    dist_a = load_node_distances(args.net_a)
    dist_b = load_node_distances(args.net_b)
    profile = overlap_profile(dist_a, dist_b)
    verdict = classify_pair(profile, args.threshold)
    miners_a, miners_b = identify_miners(
        dist_a, dist_b,
        cutoff=args.cutoff,
        threshold=args.threshold,
        band=args.band,
        allow_same_pool=args.force,
        labels=(str(args.net_a), str(args.net_b)),
    )
    write_miner_set(miners_a, out / "miners-a.txt")
    write_miner_set(miners_b, out / "miners-b.txt")
    write_profile_csv(profile, out / "miners.profile.csv")
    _write_json(
        out / "miners.verdict.json",
        {
            "verdict": verdict.verdict,
            "overlap_ratio_min": verdict.overlap_ratio_min,
            "threshold": verdict.threshold,
            "cutoff_a": miners_a.distance_cutoff,
            "cutoff_b": miners_b.distance_cutoff,
            "miner_count_a": len(miners_a.addresses),
            "miner_count_b": len(miners_b.addresses),
        },
    )
    _write_manifest(
        out, "identify-miners",
        {"net_a": str(args.net_a), "net_b": str(args.net_b),
         "cutoff": str(args.cutoff), "threshold": args.threshold,
         "band": args.band, "force": bool(args.force)},
        [Path(args.net_a), Path(args.net_b)],
        ["miners-a.txt", "miners-b.txt", "miners.profile.csv", "miners.verdict.json"],
    )
    return 0


def cmd_classify_pattern(args) -> int:
    out = _out_dir(args)
    store, index = _load_store(args)
    if args.coinbase or args.height is not None:
        txids = [_resolve_coinbase(store, args)]
    else:
        txids = [store.coinbases[h] for h in store.heights()]

    def classify(txid: str) -> dict:
        pattern = classify_pattern(
            store, index, txid, args.fanout_threshold, args.horizon
        )
        sensitivity = {
            str(t): classify_pattern(store, index, txid, t, args.horizon).label
            for t in SENSITIVITY_THRESHOLDS
        }
        return {
            "coinbase_txid": txid,
            "height": store.transactions[txid].block_height,
            "label": pattern.label,
            "fanout_hop": pattern.fanout_hop,
            "fanout_size": pattern.fanout_size,
            "sensitivity": sensitivity,
        }

    if len(txids) > 1 and worker_count() > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=worker_count()) as pool:
            results = list(pool.map(classify, txids))
    else:
        results = [classify(t) for t in txids]
    _write_json(out / "patterns.json", results)
    _write_manifest(
        out, "classify-pattern",
        {"input": str(args.input), "fanout_threshold": args.fanout_threshold,
         "horizon_seconds": args.horizon,
         "coinbase": args.coinbase, "height": args.height},
        [Path(args.input)], ["patterns.json"],
    )
    return 0


def cmd_miner_trend(args) -> int:
    out = _out_dir(args)
    store, index = _load_store(args)
    with open(args.periods, "r", encoding="utf-8") as fh:
        period_spec = json.load(fh)
    periods = [
        TrendPeriod(
            label=entry["label"],
            pool=entry["pool"],
            coinbase_txids=list(entry["coinbases"]),
            reference_txids=list(entry["references"]),
        )
        for entry in period_spec
    ]
    points = miner_trend(
        store, index, periods,
        cutoff=args.cutoff, threshold=args.threshold,
        horizon_seconds=args.horizon, max_pairs=args.max_pairs,
    )
    with open(out / "trend.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "pool", "miner_count", "blocks"])
        for point in points:
            writer.writerow([point.period, point.pool, point.miner_count, point.blocks])
    _write_manifest(
        out, "miner-trend",
        {"input": str(args.input), "periods": str(args.periods),
         "cutoff": str(args.cutoff), "threshold": args.threshold,
         "horizon_seconds": args.horizon, "max_pairs": args.max_pairs},
        [Path(args.input), Path(args.periods)], ["trend.csv"],
    )
    return 0


def _config_from_args(args) -> SimConfig:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        pools = [PoolSpec(
            name=p["name"],
            miner_count=p["miner_count"],
            pattern=p["pattern"],
            hashrate_share=p["hashrate_share"],
            payout_delay=p.get("payout_delay", 1),
            miner_schedule=tuple(tuple(e) for e in p.get("miner_schedule", [])),
        ) for p in obj.pop("pools")]
        config = SimConfig(pools=pools, **obj)
    else:
        config = default_config()
    if args.seed is not None:
        config.seed = args.seed
    if args.blocks is not None:
        config.blocks = args.blocks
    if args.noise_tx_per_block is not None:
        config.noise_tx_per_block = args.noise_tx_per_block
    return config


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    config = _config_from_args(args)
    store, truth = generate_chain(config)
    export_dump(store, out / "chain.jsonl")
    truth.write(out / "ground_truth.json")
    _write_json(
        out / "sim_config.json",
        {
            "seed": config.seed,
            "blocks": config.blocks,
            "block_interval": config.block_interval,
            "pools": [
                {
                    "name": p.name,
                    "miner_count": p.miner_count,
                    "pattern": p.pattern,
                    "hashrate_share": p.hashrate_share,
                    "payout_delay": p.payout_delay,
                    "miner_schedule": [list(e) for e in p.miner_schedule],
                }
                for p in config.pools
            ],
            "miner_churn_rate": config.miner_churn_rate,
            "noise_tx_per_block": config.noise_tx_per_block,
            "noise_fanout_mean": config.noise_fanout_mean,
            "economy_addresses": config.economy_addresses,
            "address_reuse_rate": config.address_reuse_rate,
            "miner_spend_rate": config.miner_spend_rate,
            "noise_recent_bias": config.noise_recent_bias,
            "noise_recent_window": config.noise_recent_window,
            "cross_pool_miner_rate": config.cross_pool_miner_rate,
        },
    )
    _write_manifest(
        out, "simulate",
        {"seed": config.seed, "blocks": config.blocks,
         "config": str(args.config) if args.config else None},
        [Path(args.config)] if args.config else [],
        ["chain.jsonl", "ground_truth.json", "sim_config.json"],
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coinflow", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--output-dir", required=True, help="directory for result files")
        return p

    p = add("ingest", cmd_ingest, "parse and validate a dump, build the spend index")
    p.add_argument("--input", required=True)
    p.add_argument("--strict-references", action="store_true",
                   help="fail on inputs referencing transactions outside the dump")

    network_help = {
        "build-net": "trace one coinbase's circulation network and export it",
        "stats": "summary statistics and histograms for one circulation network",
    }
    for name, func in [("build-net", cmd_build_net), ("stats", cmd_stats)]:
        p = add(name, func, network_help[name])
        p.add_argument("--input", required=True)
        p.add_argument("--coinbase", help="coinbase txid to trace from")
        p.add_argument("--height", type=int, help="block height (alternative to --coinbase)")
        p.add_argument("--horizon", type=parse_duration, default=float(DEFAULT_HORIZON_SECONDS),
                       help="trace horizon, e.g. 7d, 4d, 36h (default 7d)")
        p.add_argument("--tag", help="basename tag for output files")
        if name == "stats":
            p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = add("compare", cmd_compare, "overlap profile and same/different-pool verdict")
    p.add_argument("--net-a", required=True, help="node-attribute file of the first network")
    p.add_argument("--net-b", required=True, help="node-attribute file of the second network")
    p.add_argument("--threshold", type=float, default=DEFAULT_SAME_POOL_THRESHOLD)

    p = add("identify-miners", cmd_identify_miners, "extract miner candidates from a pair")
    p.add_argument("--net-a", required=True)
    p.add_argument("--net-b", required=True)
    p.add_argument("--cutoff", type=parse_cutoff, default="auto",
                   help="distance cutoff, integer or 'auto'")
    p.add_argument("--threshold", type=float, default=DEFAULT_SAME_POOL_THRESHOLD)
    p.add_argument("--band", type=float, default=DEFAULT_STABILIZATION_BAND,
                   help="stabilization band for the auto cutoff")
    p.add_argument("--force", action="store_true",
                   help="extract even when the pair looks same-pool")

    p = add("classify-pattern", cmd_classify_pattern, "payout pattern per coinbase")
    p.add_argument("--input", required=True)
    p.add_argument("--coinbase")
    p.add_argument("--height", type=int)
    p.add_argument("--fanout-threshold", type=int, default=DEFAULT_FANOUT_THRESHOLD)
    p.add_argument("--horizon", type=parse_duration, default=float(DEFAULT_HORIZON_SECONDS))

    p = add("miner-trend", cmd_miner_trend, "miner-group sizes over block periods")
    p.add_argument("--input", required=True)
    p.add_argument("--periods", required=True,
                   help="JSON file: [{label, pool, coinbases, references}, ...]")
    p.add_argument("--cutoff", type=parse_cutoff, default="auto")
    p.add_argument("--threshold", type=float, default=DEFAULT_SAME_POOL_THRESHOLD)
    p.add_argument("--horizon", type=parse_duration, default=float(DEFAULT_HORIZON_SECONDS))
    p.add_argument("--max-pairs", type=int, default=20)

    p = add("simulate", cmd_simulate, "generate a synthetic chain with ground truth")
    p.add_argument("--config", help="JSON SimConfig file (defaults to the standard world)")
    p.add_argument("--seed", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--noise-tx-per-block", type=int, dest="noise_tx_per_block")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CoinflowError, FileNotFoundError, IsADirectoryError, KeyError,
            TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return 0 if exc.code in (0, None) else 1
    except Exception as exc:  # noqa: BLE001 - report and exit 2
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
