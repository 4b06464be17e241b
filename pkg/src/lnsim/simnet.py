"""Deterministic discrete-event driver for channel-network scenarios.

A scenario file describes chains, nodes, topology, workload and failure
events; build_network() funds and opens every channel on simulated ledgers
and run_scenario() advances a global tick clock, dispatching payments,
mining blocks on each chain's cadence, resolving HTLC expiries and
auto-punishing observed revoked broadcasts.  Identical (config, seed)
pairs produce bit-identical metrics.

One tick is one simulated second; a Bitcoin-like chain with
block_interval_secs=600 mines every 600 ticks.
"""

from __future__ import annotations

import configparser
import math
import random
from dataclasses import dataclass, field

from . import channel as chan_mod
from .basechain import ChainParams, ChainRegistry, Ledger, Output, SingleKey, SingleSig, Transaction, TxInput
from . import crypto
from .channel import Channel, ChannelState, confirm_funding, open_channel
from .errors import ConfigInvalid, NoRoute, ResponderDeclined, UnknownNode
from .htlc import atomic_swap, expire_htlc, make_invoice
from .routing import ChannelEdge, ChannelGraph, FeePolicy, PaymentResult, send_payment

# Paper-epoch network statistics used by the paper_snapshot topology.
SNAPSHOT_NODES = 5_788
SNAPSHOT_CHANNELS = 23_021
SNAPSHOT_CAPACITY_MSAT = 61_851_000_000_000  # 618.51 BTC
SNAPSHOT_ACTIVE_NODES = 2_870

LIVENESS_TIMEOUT_TICKS = 6

# Opens above this count are batched: fan-out funding outputs first, then
# confirm every channel in bulk instead of one block per channel.
_BATCH_OPEN_THRESHOLD = 64


# --------------------------------------------------------------------------
# scenario configuration

@dataclass
class ChannelSpec:
    name: str
    a: str
    b: str
    asset: str
    fund_a: int
    fund_b: int


@dataclass
class PaymentSpec:
    tick: int
    src: str
    dst: str
    asset: str
    amount_msat: int


@dataclass
class SwapSpec:
    tick: int
    initiator: str
    responder: str
    asset_x: str
    amount_x: int
    asset_y: str
    amount_y: int


@dataclass
class RateSpec:
    payments_per_tick: int
    amount_min: int
    amount_max: int
    asset: str


@dataclass
class EventSpec:
    tick: int
    kind: str  # offline | online | close | force_broadcast_revoked | ddos
    args: list[str]


@dataclass
class TopologyConfig:
    kind: str = "explicit"  # explicit | random | paper_snapshot
    asset: str | None = None
    edge_count: int = 0
    capacity_min_msat: int = 1_000_000
    capacity_max_msat: int = 5_000_000_000


@dataclass
class ScenarioConfig:
    seed: int = 0
    duration_ticks: int = 0
    chains: list[ChainParams] = field(default_factory=list)
    node_names: list[str] = field(default_factory=list)
    online: list[str] | None = None
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    channels: list[ChannelSpec] = field(default_factory=list)
    payments: list[PaymentSpec] = field(default_factory=list)
    swaps: list[SwapSpec] = field(default_factory=list)
    rate: RateSpec | None = None
    events: list[EventSpec] = field(default_factory=list)
    fee_base_msat: int = 1_000
    fee_proportional_ppm: int = 1
    to_self_delay: int = 144

    def validate(self) -> None:
        if self.duration_ticks < 0:
            raise ConfigInvalid("duration_ticks", "must be >= 0")
        if not self.chains:
            raise ConfigInvalid("chains", "at least one chain required")
        seen = set()
        for c in self.chains:
            if c.asset_id in seen:
                raise ConfigInvalid("chain", f"duplicate asset {c.asset_id}")
            seen.add(c.asset_id)
        if self.topology.kind not in ("explicit", "random", "paper_snapshot"):
            raise ConfigInvalid("topology.kind", self.topology.kind)
        if self.topology.kind != "paper_snapshot" and len(self.node_names) < 2:
            raise ConfigInvalid("nodes", "a network needs at least 2 nodes")
        if self.topology.kind == "random":
            if self.topology.edge_count < 1:
                raise ConfigInvalid("topology.edge_count", "must be >= 1")
            if self.topology.capacity_min_msat < 2:
                raise ConfigInvalid("topology.capacity_min_msat", "must be >= 2")
            if self.topology.capacity_max_msat < self.topology.capacity_min_msat:
                raise ConfigInvalid("topology.capacity_max_msat", "below minimum")
        assets = {c.asset_id for c in self.chains}
        if self.topology.kind != "explicit":
            asset = self.topology.asset or self.chains[0].asset_id
            if asset not in assets:
                raise ConfigInvalid("topology.asset", f"unknown asset {asset}")
        names = set(self.node_names)
        for cs in self.channels:
            if cs.asset not in assets:
                raise ConfigInvalid(f"channel:{cs.name}", f"unknown asset {cs.asset}")
            if cs.a not in names or cs.b not in names:
                raise ConfigInvalid(f"channel:{cs.name}", "unknown endpoint")
            if cs.fund_a + cs.fund_b < 2:
                raise ConfigInvalid(f"channel:{cs.name}", "capacity must be >= 2 msat")
        for p in self.payments:
            if p.amount_msat < 1:
                raise ConfigInvalid("workload.payment", "amount must be >= 1 msat")
            if p.asset not in assets:
                raise ConfigInvalid("workload.payment", f"unknown asset {p.asset}")


def _split(value: str) -> list[str]:
    return value.replace(",", " ").split()


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse the key/value scenario format (see README for the layout)."""
    cp = configparser.ConfigParser(delimiters=("=",), interpolation=None)
    cp.optionxform = str  # node names are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigInvalid("file", str(exc)) from exc
    cfg = ScenarioConfig()
    genesis: dict[str, dict[str, int]] = {}

    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "scenario":
            cfg.seed = int(items.get("seed", "0"))
            cfg.duration_ticks = int(items.get("duration_ticks", "0"))
            cfg.to_self_delay = int(items.get("to_self_delay", "144"))
        elif section == "fees":
            cfg.fee_base_msat = int(items.get("base_msat", "1000"))
            cfg.fee_proportional_ppm = int(items.get("proportional_ppm", "1"))
        elif section.startswith("chain:"):
            asset = section.split(":", 1)[1]
            try:
                cfg.chains.append(ChainParams(
                    asset, int(items["tps_cap"]), int(items["block_interval_secs"])))
            except (KeyError, ValueError) as exc:
                raise ConfigInvalid(section, str(exc)) from exc
        elif section.startswith("genesis:"):
            asset = section.split(":", 1)[1]
            genesis[asset] = {k: int(v) for k, v in items.items()}
        elif section == "nodes":
            if "names" in items:
                cfg.node_names = _split(items["names"])
            elif "count" in items:
                cfg.node_names = [f"n{i:04d}" for i in range(int(items["count"]))]
            if "online" in items:
                cfg.online = _split(items["online"])
        elif section == "topology":
            t = cfg.topology
            t.kind = items.get("kind", "explicit")
            t.asset = items.get("asset")
            t.edge_count = int(items.get("edge_count", "0"))
            if "capacity_min_msat" in items:
                t.capacity_min_msat = int(items["capacity_min_msat"])
            if "capacity_max_msat" in items:
                t.capacity_max_msat = int(items["capacity_max_msat"])
        elif section.startswith("channel:"):
            name = section.split(":", 1)[1]
            try:
                cfg.channels.append(ChannelSpec(
                    name, items["a"], items["b"], items["asset"],
                    int(items["fund_a"]), int(items["fund_b"])))
            except (KeyError, ValueError) as exc:
                raise ConfigInvalid(section, str(exc)) from exc
        elif section == "workload":
            for key, value in items.items():
                parts = _split(value)
                try:
                    if key.startswith("payment:"):
                        cfg.payments.append(PaymentSpec(
                            int(parts[0]), parts[1], parts[2], parts[3], int(parts[4])))
                    elif key.startswith("repeat:"):
                        count, tick = int(parts[0]), int(parts[1])
                        for _ in range(count):
                            cfg.payments.append(PaymentSpec(
                                tick, parts[2], parts[3], parts[4], int(parts[5])))
                    elif key.startswith("swap:"):
                        cfg.swaps.append(SwapSpec(
                            int(parts[0]), parts[1], parts[2], parts[3],
                            int(parts[4]), parts[5], int(parts[6])))
                    elif key == "rate":
                        cfg.rate = RateSpec(int(parts[0]), int(parts[1]),
                                            int(parts[2]), parts[3])
                    else:
                        raise ConfigInvalid(f"workload.{key}", "unknown directive")
                except (IndexError, ValueError) as exc:
                    raise ConfigInvalid(f"workload.{key}", str(exc)) from exc
        elif section == "events":
            for key, value in items.items():
                try:
                    kind, tick = key.split(":", 1)
                    cfg.events.append(EventSpec(int(tick), kind, _split(value)))
                except ValueError as exc:
                    raise ConfigInvalid(f"events.{key}", str(exc)) from exc
        else:
            raise ConfigInvalid(section, "unknown section")

    for params in cfg.chains:
        params.genesis_allocations = genesis.get(params.asset_id, {})
    cfg.validate()
    return cfg


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# --------------------------------------------------------------------------
# metrics

@dataclass
class Metrics:
    payments_attempted: int = 0
    payments_succeeded: int = 0
    mean_hops: float = 0.0
    mean_latency_ticks: float = 0.0
    total_fees_msat: int = 0
    onchain_tx_count: int = 0
    offchain_update_count: int = 0
    netting_ratio: float = 0.0
    ln_capacity_msat: int = 0
    reachable_nodes: int = 0
    active_nodes: int = 0
    cheat_attempts: int = 0
    cheats_punished: int = 0

    CSV_HEADER = ("payments_attempted,payments_succeeded,mean_hops,"
                  "mean_latency_ticks,total_fees_msat,onchain_tx_count,"
                  "offchain_update_count,netting_ratio,ln_capacity_msat,"
                  "ln_capacity_btc,reachable_nodes,active_nodes,"
                  "cheat_attempts,cheats_punished")

    def csv_row(self) -> str:
        btc = self.ln_capacity_msat / 100_000_000_000
        return (f"{self.payments_attempted},{self.payments_succeeded},"
                f"{self.mean_hops:.6f},{self.mean_latency_ticks:.6f},"
                f"{self.total_fees_msat},{self.onchain_tx_count},"
                f"{self.offchain_update_count},{self.netting_ratio:.6f},"
                f"{self.ln_capacity_msat},{btc:.11f},{self.reachable_nodes},"
                f"{self.active_nodes},{self.cheat_attempts},{self.cheats_punished}")

    def to_csv(self) -> str:
        return f"{self.CSV_HEADER}\n{self.csv_row()}\n"

    def to_lines(self) -> str:
        out = []
        for name, value in zip(self.CSV_HEADER.split(","), self.csv_row().split(",")):
            out.append(f"{name}={value}")
        return "\n".join(out) + "\n"


@dataclass
class FailureReport:
    offline_nodes: list[str]
    closed_channels: list[str]
    frozen_channels: list[str]
    capacity_removed_msat: int


@dataclass
class EventClock:
    tick: int = 0
    next_block: dict[str, int] = field(default_factory=dict)


@dataclass
class NodeState:
    online: bool = True
    offline_since: int | None = None


class World:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.registry = ChainRegistry()
        self.nodes: dict[str, NodeState] = {}
        self.channels: dict[str, Channel] = {}
        self.graph = ChannelGraph()
        self.clock = EventClock()
        self.invoice_rng = random.Random(f"{cfg.seed}:invoices")
        self.rate_rng = random.Random(f"{cfg.seed}:rate")
        self.failure_order: list[str] = []
        self.payments_attempted = 0
        self.payments_succeeded = 0
        self.total_fees_msat = 0
        self.hops_total = 0
        self.latency_total = 0
        self.payment_log: list[tuple[int, str, str, int, PaymentResult]] = []
        self.cheat_attempts = 0
        self.cheats_punished = 0
        self.cheats_succeeded: set[str] = set()

    def ledger(self, asset: str) -> Ledger:
        return self.registry[asset]

    def node_online(self, node: str) -> bool:
        state = self.nodes.get(node)
        return state.online if state else False

    def check_conservation(self) -> bool:
        if not all(ledger.check_conservation() for ledger in self.registry):
            return False
        return all(ch.check_conservation() for ch in self.channels.values()
                   if ch.state in (ChannelState.OPEN, ChannelState.PENDING_UPDATE))


# --------------------------------------------------------------------------
# network construction

def _plan_channels(cfg: ScenarioConfig) -> tuple[list[str], list[ChannelSpec]]:
    topo = cfg.topology
    if topo.kind == "explicit":
        return list(cfg.node_names), list(cfg.channels)
    asset = topo.asset or cfg.chains[0].asset_id
    if topo.kind == "random":
        nodes = list(cfg.node_names)
        rng = random.Random(f"{cfg.seed}:topology")
        plan = []
        for i in range(topo.edge_count):
            a, b = rng.sample(nodes, 2)
            cap = rng.randint(topo.capacity_min_msat, topo.capacity_max_msat)
            plan.append(ChannelSpec(f"ch{i:05d}", a, b, asset, cap // 2, cap - cap // 2))
        return nodes, plan
    # paper_snapshot: preferential attachment, capacities normalized so the
    # aggregate is exactly the paper-epoch network capacity
    nodes = [f"n{i:04d}" for i in range(SNAPSHOT_NODES)]
    rng = random.Random(f"{cfg.seed}:topology")
    ball = list(range(SNAPSHOT_NODES))
    pairs = []
    for _ in range(SNAPSHOT_CHANNELS):
        u = ball[rng.randrange(len(ball))]
        v = ball[rng.randrange(len(ball))]
        while v == u:
            v = ball[rng.randrange(len(ball))]
        pairs.append((u, v))
        ball.append(u)
        ball.append(v)
    raw = [rng.randint(topo.capacity_min_msat, topo.capacity_max_msat)
           for _ in pairs]
    total_raw = sum(raw)
    caps = [r * SNAPSHOT_CAPACITY_MSAT // total_raw for r in raw]
    caps = [max(2, c) for c in caps]
    caps[-1] += SNAPSHOT_CAPACITY_MSAT - sum(caps)
    plan = [ChannelSpec(f"ch{i:05d}", nodes[u], nodes[v], asset,
                        cap // 2, cap - cap // 2)
            for i, ((u, v), cap) in enumerate(zip(pairs, caps))]
    return nodes, plan


def _fan_out(ledger: Ledger, deposits: dict[str, list[int]]) -> None:
    """Split each node's genesis output into one exact output per deposit."""
    for key, amounts in deposits.items():
        if len(amounts) <= 1:
            continue
        utxos = ledger.utxos_of(key)
        (outpoint, total), = utxos.items()
        assert total == sum(amounts)
        tx = Transaction([TxInput(outpoint)],
                         [Output(a, SingleKey(key)) for a in amounts])
        tx.inputs[0].witness = SingleSig(crypto.sign(key, tx.sighash()))
        ledger.submit_transaction(tx)
    ledger.mine_until_empty()


def build_network(cfg: ScenarioConfig) -> World:
    """Register ledgers, fund genesis, open all channels, publish the graph."""
    cfg.validate()
    world = World(cfg)
    nodes, plan = _plan_channels(cfg)
    if len(nodes) < 2:
        raise ConfigInvalid("nodes", "a network needs at least 2 nodes")

    # genesis allocations: explicit when given, else exactly the deposits
    deposits_by_chain: dict[str, dict[str, list[int]]] = {}
    for spec in plan:
        per_chain = deposits_by_chain.setdefault(spec.asset, {})
        if spec.fund_a:
            per_chain.setdefault(spec.a, []).append(spec.fund_a)
        if spec.fund_b:
            per_chain.setdefault(spec.b, []).append(spec.fund_b)
    for params in cfg.chains:
        if not params.genesis_allocations:
            per_chain = deposits_by_chain.get(params.asset_id, {})
            params.genesis_allocations = {k: sum(v) for k, v in per_chain.items()}
        world.registry.register_chain(params)

    # online flags
    if cfg.topology.kind == "paper_snapshot" and cfg.online is None:
        shuffled = list(nodes)
        random.Random(f"{cfg.seed}:active").shuffle(shuffled)
        online = set(shuffled[:SNAPSHOT_ACTIVE_NODES])
    elif cfg.online is not None:
        online = set(cfg.online)
    else:
        online = set(nodes)
    for node in nodes:
        world.nodes[node] = NodeState(online=node in online)
        world.graph.add_node(node, node in online)

    fee_policy = FeePolicy(cfg.fee_base_msat, cfg.fee_proportional_ppm)
    batch = len(plan) > _BATCH_OPEN_THRESHOLD
    if batch:
        for asset, per_chain in deposits_by_chain.items():
            _fan_out(world.registry[asset], per_chain)
    opened = []
    for spec in plan:
        ledger = world.registry[spec.asset]
        ch = open_channel(ledger, spec.a, spec.b, spec.fund_a, spec.fund_b,
                          channel_id=spec.name, to_self_delay=cfg.to_self_delay,
                          auto_mine=not batch)
        world.channels[ch.id] = ch
        opened.append(ch)
    if batch:
        for ledger in world.registry:
            ledger.mine_until_empty()
        for ch in opened:
            confirm_funding(ch)
    for ch in opened:
        world.graph.add_channel(ChannelEdge(
            ch.id, ch.parties[0], ch.parties[1], ch.chain,
            ch.capacity_msat, fee_policy, ch))

    for params in cfg.chains:
        world.clock.next_block[params.asset_id] = params.block_interval_secs
    order = list(nodes)
    random.Random(f"{cfg.seed}:failures").shuffle(order)
    world.failure_order = order
    return world


# --------------------------------------------------------------------------
# scenario execution

def _dispatch_payment(world: World, tick: int, src: str, dst: str,
                      asset: str, amount: int) -> None:
    world.payments_attempted += 1
    invoice, preimage = make_invoice(dst, asset, amount, world.invoice_rng)
    world.graph.register_invoice(invoice, preimage)
    try:
        result = send_payment(world.graph, src, invoice)
    except (NoRoute, UnknownNode) as exc:
        result = PaymentResult(False, error=type(exc).__name__)
    if result.success:
        world.payments_succeeded += 1
        world.total_fees_msat += result.fees_paid_msat
        world.hops_total += result.hops
        # transfers complete within their issue tick: latency 0
    world.payment_log.append((tick, src, dst, amount, result))


def _remove_from_graph(world: World, ch: Channel) -> None:
    world.graph.remove_channel(ch.id)


def _apply_event(world: World, ev: EventSpec) -> None:
    tick = world.clock.tick
    if ev.kind == "offline":
        for node in ev.args:
            world.nodes[node].online = False
            world.nodes[node].offline_since = tick
            world.graph.set_online(node, False)
    elif ev.kind == "online":
        for node in ev.args:
            world.nodes[node].online = True
            world.nodes[node].offline_since = None
            world.graph.set_online(node, True)
    elif ev.kind == "close":
        for name in ev.args:
            ch = world.channels[name]
            ch.tick = tick
            chan_mod.cooperative_close(ch, auto_mine=False)
            _remove_from_graph(world, ch)
    elif ev.kind == "force_broadcast_revoked":
        node, name, version = ev.args[0], ev.args[1], int(ev.args[2])
        ch = world.channels[name]
        ch.tick = tick
        if version < ch.version_n:
            world.cheat_attempts += 1
        chan_mod.broadcast_commitment(ch, node, version, auto_mine=False)
        _remove_from_graph(world, ch)
    elif ev.kind == "ddos":
        apply_node_failures(world, float(ev.args[0]))
    else:
        raise ConfigInvalid(f"events.{ev.kind}", "unknown event kind")


def _liveness_sweep(world: World) -> None:
    tick = world.clock.tick
    for ch in world.channels.values():
        if ch.state is not ChannelState.OPEN:
            continue
        a, b = ch.parties
        sa, sb = world.nodes[a], world.nodes[b]
        timed_out = [p for p, s in ((a, sa), (b, sb))
                     if not s.online and s.offline_since is not None
                     and tick - s.offline_since >= LIVENESS_TIMEOUT_TICKS]
        if not timed_out:
            continue
        if len(timed_out) == 2:
            ch.frozen = True
            _remove_from_graph(world, ch)
            continue
        offline = timed_out[0]
        if not world.node_online(ch.other(offline)):
            ch.frozen = True
            _remove_from_graph(world, ch)
            continue
        ch.frozen = False
        ch.tick = tick
        chan_mod.on_party_offline(ch, offline, auto_mine=False)
        _remove_from_graph(world, ch)


def _post_block(world: World, asset: str) -> None:
    """Per-block bookkeeping: broadcast heights, auto-punish, expiries."""
    ledger = world.registry[asset]
    height = ledger.height
    for ch in world.channels.values():
        if ch.chain != asset:
            continue
        if ch.state is ChannelState.UNILATERAL_CLOSING:
            txid = ch.broadcast_ctx.tx.txid
            if ch.broadcast_height is None and txid in ledger.confirmed_ids:
                ch.broadcast_height = ledger.confirm_heights[txid]
            if ch.broadcast_height is None:
                continue
            revoked = ch.broadcast_version < ch.version_n
            victim = ch.other(ch.closing_party)
            if revoked and world.node_online(victim):
                ch.tick = world.clock.tick
                chan_mod.punish(ch, ch.broadcast_ctx, auto_mine=False)
                world.cheats_punished += 1
            elif (revoked and height >= ch.broadcast_height + ch.to_self_delay
                  and ch.id not in world.cheats_succeeded):
                ch.tick = world.clock.tick
                chan_mod.sweep_delayed(ch, ch.closing_party, auto_mine=False)
                world.cheats_succeeded.add(ch.id)
                ch.log("cheat_succeeded", f"cheater={ch.closing_party}")
        elif ch.state is ChannelState.OPEN and ch.pending_htlcs:
            for h in list(ch.pending_htlcs):
                if height >= h.expiry_height:
                    ch.tick = world.clock.tick
                    expire_htlc(ch, h.htlc_id, height)


def run_scenario(world: World, cfg: ScenarioConfig | None = None) -> Metrics:
    """Advance the clock tick by tick and return the final metrics."""
    cfg = cfg or world.cfg
    events_by_tick: dict[int, list[EventSpec]] = {}
    for ev in cfg.events:
        events_by_tick.setdefault(ev.tick, []).append(ev)
    payments_by_tick: dict[int, list[PaymentSpec]] = {}
    for p in cfg.payments:
        payments_by_tick.setdefault(p.tick, []).append(p)
    swaps_by_tick: dict[int, list[SwapSpec]] = {}
    for s in cfg.swaps:
        swaps_by_tick.setdefault(s.tick, []).append(s)
    any_offline = False

    for tick in range(cfg.duration_ticks):
        world.clock.tick = tick
        for ev in events_by_tick.get(tick, ()):
            _apply_event(world, ev)
            if ev.kind in ("offline", "ddos"):
                any_offline = True
        if any_offline:
            _liveness_sweep(world)
        for p in payments_by_tick.get(tick, ()):
            _dispatch_payment(world, tick, p.src, p.dst, p.asset, p.amount_msat)
        if cfg.rate is not None:
            online = [n for n, s in world.nodes.items() if s.online]
            for _ in range(cfg.rate.payments_per_tick):
                if len(online) < 2:
                    break
                src, dst = world.rate_rng.sample(online, 2)
                amount = world.rate_rng.randint(cfg.rate.amount_min,
                                                cfg.rate.amount_max)
                _dispatch_payment(world, tick, src, dst, cfg.rate.asset, amount)
        for s in swaps_by_tick.get(tick, ()):
            _run_swap(world, s)
        for params in cfg.chains:
            asset = params.asset_id
            if tick + 1 == world.clock.next_block[asset]:
                world.registry[asset].mine_block()
                world.clock.next_block[asset] += params.block_interval_secs
                _post_block(world, asset)
    return collect_metrics(world)


def _find_channel(world: World, a: str, b: str, asset: str) -> Channel | None:
    for ch in world.channels.values():
        if (ch.chain == asset and ch.state is ChannelState.OPEN
                and set(ch.parties) == {a, b}):
            return ch
    return None


def _run_swap(world: World, s: SwapSpec) -> None:
    ch_x = _find_channel(world, s.initiator, s.responder, s.asset_x)
    ch_y = _find_channel(world, s.initiator, s.responder, s.asset_y)
    if ch_x is None or ch_y is None:
        return
    respond = world.node_online(s.responder)
    reveal = world.node_online(s.initiator)
    try:
        atomic_swap(ch_x, ch_y, s.initiator, s.responder, s.amount_x,
                    s.amount_y, respond=respond, reveal=reveal,
                    rng=world.invoice_rng)
    except ResponderDeclined:
        pass


def apply_node_failures(world: World, offline_fraction: float) -> FailureReport:
    """Take a seeded sample of nodes offline and settle their channels.

    The sample is a prefix of a fixed seeded permutation, so failure sets
    for increasing fractions are nested.  Channels with one surviving
    endpoint are force-closed; channels whose endpoints are both offline
    are frozen (no party can sign) but still counted as removed capacity.
    """
    if not 0.0 <= offline_fraction <= 1.0:
        raise ConfigInvalid("offline_fraction", "must be in [0, 1]")
    count = math.ceil(offline_fraction * len(world.nodes))
    offline = world.failure_order[:count]
    tick = world.clock.tick
    for node in offline:
        world.nodes[node].online = False
        world.nodes[node].offline_since = tick
        world.graph.set_online(node, False)
    closed, frozen = [], []
    capacity_removed = 0
    offline_set = set(offline)
    for ch in world.channels.values():
        if ch.state is not ChannelState.OPEN or ch.frozen:
            continue
        a, b = ch.parties
        a_off, b_off = a in offline_set, b in offline_set
        if not (a_off or b_off):
            continue
        capacity_removed += ch.capacity_msat
        _remove_from_graph(world, ch)
        if a_off and b_off:
            ch.frozen = True
            frozen.append(ch.id)
            continue
        gone = a if a_off else b
        ch.tick = tick
        if world.node_online(ch.other(gone)):
            chan_mod.on_party_offline(ch, gone, auto_mine=False)
            closed.append(ch.id)
        else:
            ch.frozen = True
            frozen.append(ch.id)
    for ledger in world.registry:
        if ledger.mempool:
            ledger.mine_until_empty()
            _post_block(world, ledger.params.asset_id)
    return FailureReport(list(offline), closed, frozen, capacity_removed)


def collect_metrics(world: World) -> Metrics:
    """Pure snapshot of the world's counters; no side effects."""
    m = Metrics()
    m.payments_attempted = world.payments_attempted
    m.payments_succeeded = world.payments_succeeded
    if world.payments_succeeded:
        m.mean_hops = world.hops_total / world.payments_succeeded
        m.mean_latency_ticks = world.latency_total / world.payments_succeeded
    m.total_fees_msat = world.total_fees_msat
    m.onchain_tx_count = sum(len(l.confirmed) for l in world.registry)
    m.offchain_update_count = sum(ch.version_n for ch in world.channels.values())
    settlements = sum(len(ch.settlement_txids) for ch in world.channels.values())
    if settlements:
        m.netting_ratio = m.offchain_update_count / settlements
    m.ln_capacity_msat = sum(
        ch.capacity_msat for ch in world.channels.values()
        if ch.state in (ChannelState.OPEN, ChannelState.PENDING_UPDATE)
        and not ch.frozen)
    m.reachable_nodes = len(world.nodes)
    m.active_nodes = sum(1 for s in world.nodes.values() if s.online)
    m.cheat_attempts = world.cheat_attempts
    m.cheats_punished = world.cheats_punished
    return m
