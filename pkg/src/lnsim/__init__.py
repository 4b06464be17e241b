"""Deterministic simulator and protocol library for payment-channel networks.

Layers, bottom up: basechain (UTXO ledgers with TPS-capped blocks), channel
(revocable commitment pairs and penalty enforcement), htlc (hashed-timelock
contracts and cross-chain swaps), routing (pathfinding, onion packets,
multi-hop payments), simnet (scenario-driven network simulation), cli.
"""

from .basechain import (
    MSAT_PER_BTC,
    ChainParams,
    ChainRegistry,
    Ledger,
    Output,
    Transaction,
    TxInput,
    register_chain,
)
from .channel import (
    Channel,
    ChannelState,
    broadcast_commitment,
    cooperative_close,
    open_channel,
    punish,
    unilateral_close,
    update_balance,
)
from .errors import LnSimError
from .htlc import (
    Invoice,
    SwapCoordinator,
    SwapOutcome,
    add_htlc,
    atomic_swap,
    expire_htlc,
    fail_htlc,
    make_invoice,
    settle_htlc,
)
from .routing import (
    ChannelEdge,
    ChannelGraph,
    FeePolicy,
    PaymentResult,
    Route,
    build_onion,
    find_route,
    peel_onion,
    send_payment,
)
from .simnet import (
    Metrics,
    ScenarioConfig,
    World,
    apply_node_failures,
    build_network,
    collect_metrics,
    load_scenario,
    parse_scenario,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "MSAT_PER_BTC",
    "ChainParams",
    "ChainRegistry",
    "Ledger",
    "Output",
    "Transaction",
    "TxInput",
    "register_chain",
    "Channel",
    "ChannelState",
    "broadcast_commitment",
    "cooperative_close",
    "open_channel",
    "punish",
    "unilateral_close",
    "update_balance",
    "LnSimError",
    "Invoice",
    "SwapCoordinator",
    "SwapOutcome",
    "add_htlc",
    "atomic_swap",
    "expire_htlc",
    "fail_htlc",
    "make_invoice",
    "settle_htlc",
    "ChannelEdge",
    "ChannelGraph",
    "FeePolicy",
    "PaymentResult",
    "Route",
    "build_onion",
    "find_route",
    "peel_onion",
    "send_payment",
    "Metrics",
    "ScenarioConfig",
    "World",
    "apply_node_failures",
    "build_network",
    "collect_metrics",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
]
