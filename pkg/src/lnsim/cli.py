"""Command-line front end: run scenarios, inspect networks, print traces.

Exit status is 0 on success and 2 on any scenario or protocol error.
"""

from __future__ import annotations

import argparse
import sys

from .basechain import MSAT_PER_BTC, ChainParams, ChainRegistry
from .channel import cooperative_close, open_channel, update_balance
from .errors import LnSimError
from .simnet import Metrics, build_network, collect_metrics, load_scenario, run_scenario


def _load(path: str, seed: int | None):
    cfg = load_scenario(path)
    if seed is not None:
        cfg.seed = seed
    return cfg


def _emit(metrics: Metrics, fmt: str, out: str | None) -> None:
    text = metrics.to_csv() if fmt == "csv" else metrics.to_lines()
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _load(args.scenario, args.seed)
    world = build_network(cfg)
    metrics = run_scenario(world)
    _emit(metrics, args.format, args.out)
    return 0


def cmd_stats(args) -> int:
    cfg = _load(args.scenario, args.seed)
    world = build_network(cfg)
    metrics = collect_metrics(world)
    print(f"nodes={len(world.nodes)}")
    print(f"channels={len(world.channels)}")
    print(f"capacity_msat={metrics.ln_capacity_msat}")
    print(f"capacity_btc={metrics.ln_capacity_msat / MSAT_PER_BTC:.11f}")
    print(f"active_nodes={metrics.active_nodes}")
    return 0


def cmd_trace(args) -> int:
    cfg = _load(args.scenario, args.seed)
    world = build_network(cfg)
    run_scenario(world)
    for name, ch in sorted(world.channels.items()):
        if args.channel and name != args.channel:
            continue
        for line in ch.trace_lines():
            print(line)
    return 0


def cmd_demo(args) -> int:
    """Two-party walkthrough: fund, one off-chain payment, cooperative close."""
    registry = ChainRegistry()
    params = ChainParams("BTC", 7, 600)
    params.genesis_allocations = {
        "alice": 10 * MSAT_PER_BTC,
        "bob": 10 * MSAT_PER_BTC,
    }
    ledger = registry.register_chain(params)
    ch = open_channel(ledger, "alice", "bob", 10 * MSAT_PER_BTC,
                      10 * MSAT_PER_BTC, channel_id="demo")
    update_balance(ch, "alice", 2 * MSAT_PER_BTC)
    cooperative_close(ch)
    for line in ch.trace_lines():
        print(line)
    print(f"final alice={ch.balances['alice'] / MSAT_PER_BTC:g} BTC "
          f"bob={ch.balances['bob'] / MSAT_PER_BTC:g} BTC")
    print(f"onchain alice={ledger.balance_of('alice')} msat "
          f"bob={ledger.balance_of('bob')} msat")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lnsim",
        description="Deterministic payment-channel network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and print metrics")
    p_run.add_argument("scenario", help="path to a scenario file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="write metrics to this file")
    p_run.add_argument("--format", choices=("csv", "lines"), default="csv")
    p_run.set_defaults(func=cmd_run)

    p_stats = sub.add_parser("stats", help="build the network and print its size")
    p_stats.add_argument("scenario")
    p_stats.add_argument("--seed", type=int, default=None)
    p_stats.set_defaults(func=cmd_stats)

    p_trace = sub.add_parser("trace", help="run a scenario and print channel traces")
    p_trace.add_argument("scenario")
    p_trace.add_argument("--seed", type=int, default=None)
    p_trace.add_argument("--channel", default=None, help="limit to one channel id")
    p_trace.set_defaults(func=cmd_trace)

    p_demo = sub.add_parser("demo", help="two-party open/pay/close walkthrough")
    p_demo.set_defaults(func=cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LnSimError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
