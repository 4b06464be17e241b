"""Hashed-timelock contracts on channels, and the two-chain atomic swap.

An HTLC moves the offered amount out of the offerer's balance into the
channel's pending set; settlement (with the preimage, before expiry) pays
the counterparty, failure or expiry refunds the offerer.  Every transition
renegotiates the commitment pair exactly like a balance update.

A swap pairs two HTLCs on different chains under one payment hash with
ordered timeouts: the responder's leg expires at least delta blocks before
the initiator's, so a revealed preimage always leaves the responder time to
settle its own leg.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from . import crypto
from .channel import Channel, renegotiate
from .errors import (
    BadTimeoutOrdering,
    ExpiredBeforeAdd,
    InsufficientChannelBalance,
    LnSimError,
    NotYetExpired,
    PastExpiry,
    ResponderDeclined,
    UnknownHtlc,
    WrongPreimage,
)


@dataclass
class HtlcParams:
    payment_hash: bytes
    amount_msat: int
    expiry_height: int
    offerer: str
    htlc_id: int | None = None


@dataclass(frozen=True)
class Invoice:
    payment_hash: bytes
    amount_msat: int
    destination: str
    asset_id: str


def make_invoice(destination: str, asset_id: str, amount_msat: int,
                 rng: random.Random) -> tuple[Invoice, bytes]:
    """Issue an invoice; the returned preimage is known only to the issuer."""
    preimage = rng.randbytes(32)
    inv = Invoice(crypto.payment_hash(preimage), amount_msat, destination, asset_id)
    return inv, preimage


def encode_invoice(inv: Invoice) -> str:
    return (f"invoice {inv.asset_id} {inv.amount_msat} "
            f"{inv.payment_hash.hex()} {inv.destination}")


def parse_invoice(line: str) -> Invoice:
    parts = line.strip().split(" ")
    if len(parts) != 5 or parts[0] != "invoice":
        raise ValueError(f"malformed invoice line: {line!r}")
    return Invoice(bytes.fromhex(parts[3]), int(parts[2]), parts[4], parts[1])


# --------------------------------------------------------------------------
# channel-level HTLC operations

def _find(ch: Channel, htlc_id: int) -> HtlcParams:
    for h in ch.pending_htlcs:
        if h.htlc_id == htlc_id:
            return h
    raise UnknownHtlc(f"{ch.id} htlc {htlc_id}")


def add_htlc(ch: Channel, offerer: str, params: HtlcParams) -> Channel:
    """Lock params.amount_msat from offerer's balance behind the hash."""
    if params.amount_msat < 1:
        raise InsufficientChannelBalance("HTLC amount below 1 msat")
    if params.expiry_height <= ch.ledger.height:
        raise ExpiredBeforeAdd(
            f"expiry {params.expiry_height} <= height {ch.ledger.height}")
    if params.amount_msat > ch.balances[offerer]:
        raise InsufficientChannelBalance(
            f"{offerer} has {ch.balances[offerer]}, needs {params.amount_msat}")
    if params.htlc_id is None:
        params.htlc_id = ch.htlc_counter
    params.offerer = offerer
    ch.htlc_counter = max(ch.htlc_counter, params.htlc_id) + 1
    new_balances = dict(ch.balances)
    new_balances[offerer] -= params.amount_msat
    renegotiate(ch, offerer, new_balances, ch.pending_htlcs + [params],
                "htlc_add", f"id={params.htlc_id} amount={params.amount_msat} "
                f"hash={params.payment_hash.hex()[:16]}")
    return ch


def settle_htlc(ch: Channel, htlc_id: int, preimage: bytes) -> Channel:
    """Pay the HTLC to the non-offerer against the matching preimage."""
    h = _find(ch, htlc_id)
    if crypto.payment_hash(preimage) != h.payment_hash:
        raise WrongPreimage(f"{ch.id} htlc {htlc_id}")
    if ch.ledger.height >= h.expiry_height:
        raise PastExpiry(f"{ch.id} htlc {htlc_id} expired")
    payee = ch.other(h.offerer)
    new_balances = dict(ch.balances)
    new_balances[payee] += h.amount_msat
    remaining = [x for x in ch.pending_htlcs if x.htlc_id != htlc_id]
    renegotiate(ch, payee, new_balances, remaining, "htlc_settle",
                f"id={htlc_id} to={payee}")
    ch.preimages[h.payment_hash] = preimage
    return ch


def fail_htlc(ch: Channel, htlc_id: int) -> Channel:
    """Cooperatively remove a pending HTLC, refunding the offerer."""
    h = _find(ch, htlc_id)
    new_balances = dict(ch.balances)
    new_balances[h.offerer] += h.amount_msat
    remaining = [x for x in ch.pending_htlcs if x.htlc_id != htlc_id]
    renegotiate(ch, ch.other(h.offerer), new_balances, remaining, "htlc_fail",
                f"id={htlc_id}")
    return ch


def expire_htlc(ch: Channel, htlc_id: int, height: int | None = None) -> Channel:
    """Refund the offerer once the HTLC's expiry height is reached."""
    h = _find(ch, htlc_id)
    if height is None:
        height = ch.ledger.height
    if height < h.expiry_height:
        raise NotYetExpired(f"height {height} < expiry {h.expiry_height}")
    new_balances = dict(ch.balances)
    new_balances[h.offerer] += h.amount_msat
    remaining = [x for x in ch.pending_htlcs if x.htlc_id != htlc_id]
    renegotiate(ch, h.offerer, new_balances, remaining, "htlc_expire",
                f"id={htlc_id}")
    return ch


# --------------------------------------------------------------------------
# cross-chain atomic swap

DEFAULT_DELTA_BLOCKS = 6


class SwapOutcome(Enum):
    BOTH_SETTLED = "both_settled"
    BOTH_REFUNDED = "both_refunded"
    PENDING = "pending"
    MIXED = "mixed"


class SwapCoordinator:
    """Event-driven two-leg swap over real channels and ledgers.

    The initiator offers amount_x on chain X with the long expiry; the
    responder mirrors with amount_y on chain Y with the short expiry; the
    initiator settles Y (revealing the preimage) and the responder settles
    X with it.  Both ledgers advance one block per tick of the shared
    clock.  enabled_events()/apply() expose every transition so an
    adversarial scheduler can drive arbitrary interleavings; deadline
    actions (settles and refunds) follow honest timers, i.e. the tick is
    withheld while a party is due to act.
    """

    def __init__(self, ch_x: Channel, ch_y: Channel, initiator: str,
                 responder: str, amount_x: int, amount_y: int, *,
                 delta_blocks: int = DEFAULT_DELTA_BLOCKS,
                 lead_blocks: int | None = None,
                 expiry_x: int | None = None, expiry_y: int | None = None,
                 preimage: bytes | None = None,
                 rng: random.Random | None = None):
        if ch_x.chain == ch_y.chain:
            raise LnSimError("swap legs must live on distinct asset chains")
        for party, ch in ((initiator, ch_x), (responder, ch_x),
                          (initiator, ch_y), (responder, ch_y)):
            ch.other(party)  # membership check
        self.ch_x, self.ch_y = ch_x, ch_y
        self.initiator, self.responder = initiator, responder
        self.amount_x, self.amount_y = amount_x, amount_y
        self.delta_blocks = delta_blocks
        lead = delta_blocks if lead_blocks is None else lead_blocks
        self.expiry_y = ch_y.ledger.height + lead if expiry_y is None else expiry_y
        self.expiry_x = (ch_x.ledger.height + lead + delta_blocks
                         if expiry_x is None else expiry_x)
        # expiries compared on the shared tick clock (heights move in lockstep)
        gap = (self.expiry_x - ch_x.ledger.height) - (self.expiry_y - ch_y.ledger.height)
        if gap < delta_blocks:
            raise BadTimeoutOrdering(
                f"short leg must expire >= {delta_blocks} blocks first, gap {gap}")
        if preimage is None:
            preimage = (rng or random.Random(0)).randbytes(32)
        self.preimage = preimage
        self.payment_hash = crypto.payment_hash(preimage)
        self.x_state = "none"
        self.y_state = "none"
        self.htlc_x: int | None = None
        self.htlc_y: int | None = None
        self.responder_choice: str | None = None  # None | offered | declined
        self.revealed = False
        self.withheld = False

    # --- scheduler interface ---

    def enabled_events(self) -> list[str]:
        evs = []
        hx, hy = self.ch_x.ledger.height, self.ch_y.ledger.height
        if self.x_state == "none" and not self.withheld and hx < self.expiry_x:
            evs.append("offer_x")
        if (self.x_state == "pending" and self.responder_choice is None
                and hy < self.expiry_y):
            evs.append("offer_y")
            evs.append("decline")
        if (self.y_state == "pending" and not self.revealed
                and not self.withheld and hy < self.expiry_y):
            evs.append("reveal")
        if not self.revealed and not self.withheld:
            evs.append("withhold")
        settle_x_on = (self.revealed and self.x_state == "pending"
                       and hx < self.expiry_x)
        if settle_x_on:
            evs.append("settle_x")
        refund_x_on = self.x_state == "pending" and hx >= self.expiry_x
        refund_y_on = self.y_state == "pending" and hy >= self.expiry_y
        if refund_x_on:
            evs.append("refund_x")
        if refund_y_on:
            evs.append("refund_y")
        forced = (refund_x_on or refund_y_on
                  or (settle_x_on and hx + 1 >= self.expiry_x))
        progress = ("offer_x" in evs or self.x_state == "pending"
                    or self.y_state == "pending")
        if not forced and progress and hx < self.expiry_x:
            evs.append("tick")
        return evs

    def apply(self, event: str) -> None:
        if event == "offer_x":
            params = HtlcParams(self.payment_hash, self.amount_x,
                                self.expiry_x, self.initiator)
            add_htlc(self.ch_x, self.initiator, params)
            self.htlc_x = params.htlc_id
            self.x_state = "pending"
        elif event == "offer_y":
            params = HtlcParams(self.payment_hash, self.amount_y,
                                self.expiry_y, self.responder)
            add_htlc(self.ch_y, self.responder, params)
            self.htlc_y = params.htlc_id
            self.y_state = "pending"
            self.responder_choice = "offered"
        elif event == "decline":
            self.responder_choice = "declined"
        elif event == "reveal":
            settle_htlc(self.ch_y, self.htlc_y, self.preimage)
            self.y_state = "settled"
            self.revealed = True
        elif event == "withhold":
            self.withheld = True
        elif event == "settle_x":
            settle_htlc(self.ch_x, self.htlc_x, self.preimage)
            self.x_state = "settled"
        elif event == "refund_x":
            expire_htlc(self.ch_x, self.htlc_x)
            self.x_state = "refunded"
        elif event == "refund_y":
            expire_htlc(self.ch_y, self.htlc_y)
            self.y_state = "refunded"
        elif event == "tick":
            self.ch_x.ledger.mine_block()
            self.ch_y.ledger.mine_block()
        else:
            raise LnSimError(f"unknown swap event {event!r}")

    def outcome(self) -> SwapOutcome:
        if self.x_state == "pending" or self.y_state == "pending":
            return SwapOutcome.PENDING
        settled = {self.x_state == "settled", self.y_state == "settled"}
        if settled == {True}:
            return SwapOutcome.BOTH_SETTLED
        if settled == {False}:
            return SwapOutcome.BOTH_REFUNDED
        return SwapOutcome.MIXED

    def run_forced(self) -> None:
        """Fire deadline events (ticks and refunds/settles) until terminal."""
        while True:
            evs = self.enabled_events()
            for ev in ("settle_x", "refund_x", "refund_y", "tick"):
                if ev in evs:
                    self.apply(ev)
                    break
            else:
                return


def atomic_swap(ch_x: Channel, ch_y: Channel, initiator: str, responder: str,
                amount_x: int, amount_y: int, *,
                delta_blocks: int = DEFAULT_DELTA_BLOCKS,
                respond: bool = True, reveal: bool = True,
                rng: random.Random | None = None) -> SwapOutcome:
    """Run a two-leg swap to completion on the happy or timeout path."""
    co = SwapCoordinator(ch_x, ch_y, initiator, responder, amount_x, amount_y,
                         delta_blocks=delta_blocks, rng=rng)
    co.apply("offer_x")
    if not respond:
        co.apply("decline")
        fail_htlc(ch_x, co.htlc_x)  # cooperative refund, no need to wait out expiry
        co.x_state = "refunded"
        raise ResponderDeclined(f"{responder} declined swap")
    co.apply("offer_y")
    if reveal:
        co.apply("reveal")
        co.apply("settle_x")
    else:
        co.apply("withhold")
        co.run_forced()
    return co.outcome()
