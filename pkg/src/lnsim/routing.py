"""Channel-graph pathfinding, onion packets, and multi-hop payment execution.

Routes are found backward from the destination so per-hop fees (charged by
each forwarder on its outgoing channel) accumulate correctly; cost is total
fees plus a one-msat-per-hop penalty that breaks fee ties toward shorter
paths.  Onion packets nest one sealed payload per hop: a node can open only
the layer addressed to it and learns nothing beyond its successor.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import crypto, wire
from .channel import Channel, ChannelState, update_balance
from .errors import (
    ChannelNotOpen,
    EmptyRoute,
    ExpiredBeforeAdd,
    InsufficientChannelBalance,
    NoRoute,
    NotAddressee,
    UnknownNode,
)
from .htlc import HtlcParams, Invoice, add_htlc, fail_htlc, settle_htlc

DEFAULT_BASE_FEE_MSAT = 1_000
DEFAULT_PROPORTIONAL_PPM = 1
HOP_PENALTY_MSAT = 1


@dataclass(frozen=True)
class FeePolicy:
    base_msat: int = DEFAULT_BASE_FEE_MSAT
    proportional_ppm: int = DEFAULT_PROPORTIONAL_PPM

    def fee(self, amount_msat: int) -> int:
        return self.base_msat + amount_msat * self.proportional_ppm // 1_000_000


@dataclass
class ChannelEdge:
    channel_id: str
    node_a: str
    node_b: str
    asset_id: str
    capacity_msat: int
    fee_policy: FeePolicy = field(default_factory=FeePolicy)
    channel: Channel | None = None

    def peer(self, node: str) -> str:
        return self.node_b if node == self.node_a else self.node_a


class ChannelGraph:
    """Routable view of the network: online nodes and open channels."""

    def __init__(self):
        self.nodes: dict[str, bool] = {}
        self.edges: dict[str, ChannelEdge] = {}
        self.invoices: dict[bytes, tuple[Invoice, bytes]] = {}
        self._adj: dict[str, list[ChannelEdge]] | None = None

    def add_node(self, node: str, online: bool = True) -> None:
        self.nodes[node] = online

    def set_online(self, node: str, online: bool) -> None:
        self.nodes[node] = online

    def add_channel(self, edge: ChannelEdge) -> None:
        self.edges[edge.channel_id] = edge
        self._adj = None

    def remove_channel(self, channel_id: str) -> None:
        if self.edges.pop(channel_id, None) is not None:
            self._adj = None

    def adjacency(self) -> dict[str, list[ChannelEdge]]:
        if self._adj is None:
            adj: dict[str, list[ChannelEdge]] = {n: [] for n in self.nodes}
            for edge in self.edges.values():
                adj.setdefault(edge.node_a, []).append(edge)
                adj.setdefault(edge.node_b, []).append(edge)
            self._adj = adj
        return self._adj

    def register_invoice(self, invoice: Invoice, preimage: bytes) -> None:
        self.invoices[invoice.payment_hash] = (invoice, preimage)

    def export_lines(self) -> list[str]:
        return [f"{e.channel_id} {e.node_a} {e.node_b} {e.asset_id} "
                f"{e.capacity_msat} {e.fee_policy.base_msat} "
                f"{e.fee_policy.proportional_ppm}"
                for e in self.edges.values()]


@dataclass(frozen=True)
class RouteHop:
    node: str                 # node the HTLC is offered to over channel_id
    channel_id: str
    amount_to_forward_msat: int
    expiry_height: int


@dataclass
class Route:
    hops: list[RouteHop]
    source: str
    destination: str
    total_cost_msat: int = 0

    @property
    def fees_msat(self) -> int:
        if not self.hops:
            return 0
        return self.hops[0].amount_to_forward_msat - self.hops[-1].amount_to_forward_msat


def _edge_usable(graph: ChannelGraph, edge: ChannelEdge, asset_id: str) -> bool:
    if edge.asset_id != asset_id:
        return False
    if edge.channel is not None:
        if edge.channel.state is not ChannelState.OPEN or edge.channel.frozen:
            return False
    return True


def find_route(graph: ChannelGraph, src: str, dst: str, amount_msat: int,
               asset_id: str, *, delta_blocks: int = 6,
               hop_penalty: int = HOP_PENALTY_MSAT) -> Route:
    """Minimum-cost capacity-feasible route from src to dst.

    Cost ties are broken by the lexicographic order of the hop sequence
    toward the destination, so the result is deterministic.
    """
    if src not in graph.nodes or dst not in graph.nodes:
        raise UnknownNode(src if src not in graph.nodes else dst)
    if src == dst:
        raise NoRoute("source equals destination")
    if not graph.nodes[src] or not graph.nodes[dst]:
        raise NoRoute("endpoint offline")
    adj = graph.adjacency()
    # backward search: label at a node is the amount it must receive
    heap = [(0, (dst,), amount_msat, ())]  # cost, path-to-dst, amount, channels
    settled: set[str] = set()
    while heap:
        cost, path, amount, channels = heapq.heappop(heap)
        v = path[0]
        if v in settled:
            continue
        settled.add(v)
        if v == src:
            return _materialize(graph, path, channels, amount_msat,
                                asset_id, delta_blocks, cost)
        for edge in adj.get(v, ()):
            if not _edge_usable(graph, edge, asset_id):
                continue
            u = edge.peer(v)
            if u in settled or not graph.nodes.get(u, False):
                continue
            if edge.capacity_msat < amount:
                continue
            if u == src:
                new_amount = amount  # the source pays no forwarding fee to itself
                new_cost = cost + hop_penalty
            else:
                fee = edge.fee_policy.fee(amount)
                new_amount = amount + fee
                new_cost = cost + fee + hop_penalty
            heapq.heappush(heap, (new_cost, (u,) + path, new_amount,
                                  (edge.channel_id,) + channels))
    raise NoRoute(f"{src} -> {dst} for {amount_msat} msat on {asset_id}")


def _materialize(graph: ChannelGraph, path: tuple, channels: tuple,
                 amount_msat: int, asset_id: str, delta_blocks: int,
                 cost: int) -> Route:
    # required amount arriving at each node, destination backward
    k = len(channels)
    required = [0] * (k + 1)
    required[k] = amount_msat
    for i in range(k - 1, 0, -1):
        edge = graph.edges[channels[i]]
        required[i] = required[i + 1] + edge.fee_policy.fee(required[i + 1])
    height = 0
    first_edge = graph.edges[channels[0]]
    if first_edge.channel is not None:
        height = first_edge.channel.ledger.height
    hops = []
    for i in range(k):
        hops.append(RouteHop(path[i + 1], channels[i], required[i + 1],
                             height + delta_blocks * (k - i)))
    return Route(hops, path[0], path[-1], cost)


# --------------------------------------------------------------------------
# onion packets

@dataclass(frozen=True)
class OnionPacket:
    blob: bytes  # mac || ciphertext, sealed to one node's key


@dataclass(frozen=True)
class HopInstruction:
    next_hop: str | None  # None marks the final hop
    amount_to_forward_msat: int
    outgoing_expiry: int
    payment_hash: bytes | None = None  # invoice linkage, final hop only

    def ser(self) -> bytes:
        tag = b"\x01" if self.next_hop is None else b"\x00"
        return (tag + wire.ser_str(self.next_hop or "")
                + wire.ser_int(self.amount_to_forward_msat)
                + wire.ser_int(self.outgoing_expiry)
                + wire.ser_bytes(self.payment_hash or b""))


def _keystream(secret: bytes, n: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < n:
        out += crypto.sha256(secret + b"stream" + counter.to_bytes(8, "big"))
        counter += 1
    return bytes(out[:n])


def _seal(node: str, plaintext: bytes) -> bytes:
    secret = crypto.key_secret(node)
    ct = bytes(a ^ b for a, b in zip(plaintext, _keystream(secret, len(plaintext))))
    return crypto.sha256(secret + b"mac" + ct) + ct


def _unseal(node: str, blob: bytes) -> bytes:
    secret = crypto.key_secret(node)
    mac, ct = blob[:32], blob[32:]
    if crypto.sha256(secret + b"mac" + ct) != mac:
        raise NotAddressee(node)
    return bytes(a ^ b for a, b in zip(ct, _keystream(secret, len(ct))))


def build_onion(route: Route, payment_hash: bytes | None = None) -> OnionPacket:
    """Seal one nested payload per hop; layer i names only hop i+1."""
    if not route.hops:
        raise EmptyRoute(f"{route.source} -> {route.destination}")
    final = route.hops[-1]
    instr = HopInstruction(None, final.amount_to_forward_msat,
                           final.expiry_height, payment_hash)
    blob = _seal(final.node, instr.ser() + wire.ser_bytes(b""))
    for i in range(len(route.hops) - 2, -1, -1):
        nxt = route.hops[i + 1]
        instr = HopInstruction(nxt.node, nxt.amount_to_forward_msat,
                               nxt.expiry_height)
        blob = _seal(route.hops[i].node, instr.ser() + wire.ser_bytes(blob))
    return OnionPacket(blob)


def peel_onion(packet: OnionPacket, node: str) -> tuple[HopInstruction, OnionPacket | None]:
    """Open the outer layer; only the addressee's key verifies."""
    plain = _unseal(node, packet.blob)
    reader = wire.Reader(plain)
    tag = reader.take(1)
    next_hop = reader.read_str() or None
    amount = reader.read_int()
    expiry = reader.read_int()
    ph = reader.read_bytes() or None
    inner = reader.read_bytes()
    if tag == b"\x01":
        return HopInstruction(None, amount, expiry, ph), None
    return HopInstruction(next_hop, amount, expiry), OnionPacket(inner)


# --------------------------------------------------------------------------
# payment execution

@dataclass
class PaymentResult:
    success: bool
    preimage: bytes | None = None
    fees_paid_msat: int = 0
    hops: int = 0
    error: str | None = None
    failed_hop: int | None = None


def _fail_back(locked: list[tuple[Channel, int]]) -> None:
    for chan, htlc_id in reversed(locked):
        fail_htlc(chan, htlc_id)


def send_payment(graph: ChannelGraph, src: str, invoice: Invoice, *,
                 delta_blocks: int = 6) -> PaymentResult:
    """Pay an invoice over the channel graph without touching any base chain.

    Direct peers settle with a plain balance update; longer routes lock
    HTLCs hop by hop behind the onion and settle backward once the
    destination reveals the preimage.  Mid-flight failures unwind every
    locked HTLC before returning.
    """
    route = find_route(graph, src, invoice.destination, invoice.amount_msat,
                       invoice.asset_id, delta_blocks=delta_blocks)
    registered = graph.invoices.get(invoice.payment_hash)

    if len(route.hops) == 1:
        chan = graph.edges[route.hops[0].channel_id].channel
        if registered is None or registered[0].amount_msat != invoice.amount_msat:
            return PaymentResult(False, error="PaymentTimeout", failed_hop=0)
        try:
            update_balance(chan, src, invoice.amount_msat)
        except (InsufficientChannelBalance, ChannelNotOpen):
            return PaymentResult(False, error="HtlcLockFailed", failed_hop=0)
        return PaymentResult(True, registered[1], 0, 1)

    packet = build_onion(route, invoice.payment_hash)
    locked: list[tuple[Channel, int]] = []
    forwarder = src
    for i, hop in enumerate(route.hops):
        edge = graph.edges[hop.channel_id]
        chan = edge.channel
        if not graph.nodes.get(hop.node, False):
            _fail_back(locked)
            return PaymentResult(False, error="HtlcLockFailed", failed_hop=i)
        params = HtlcParams(invoice.payment_hash, hop.amount_to_forward_msat,
                            hop.expiry_height, forwarder)
        try:
            add_htlc(chan, forwarder, params)
        except (InsufficientChannelBalance, ExpiredBeforeAdd, ChannelNotOpen):
            _fail_back(locked)
            return PaymentResult(False, error="HtlcLockFailed", failed_hop=i)
        locked.append((chan, params.htlc_id))
        instruction, packet = peel_onion(packet, hop.node)
        if instruction.next_hop is None:
            break
        forwarder = hop.node

    if registered is None or registered[0].amount_msat != invoice.amount_msat:
        _fail_back(locked)
        return PaymentResult(False, error="PaymentTimeout",
                             failed_hop=len(route.hops) - 1)
    preimage = registered[1]
    for chan, htlc_id in reversed(locked):
        settle_htlc(chan, htlc_id, preimage)
    fees = route.hops[0].amount_to_forward_msat - invoice.amount_msat
    return PaymentResult(True, preimage, fees, len(route.hops))
