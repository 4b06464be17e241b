"""Bidirectional payment channel state machine.

A channel is funded by one on-chain 2-of-2 multisig output.  Every balance
change renegotiates a pair of asymmetric commitment transactions through an
eight-step exchange: the new commitments are built, cross-signed and
retained first, and only then are the previous version's revocation secrets
disclosed.  Broadcasting a revoked commitment exposes its holder to a
penalty sweep by the counterparty.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from . import crypto
from .basechain import (
    DEFAULT_TO_SELF_DELAY,
    ONCHAIN_FEE_MSAT,
    CommitmentScript,
    Hashlock,
    HashlockClaim,
    HashlockRefund,
    Ledger,
    LocalAfterDelay,
    Multisig2of2,
    Output,
    Revocation,
    SingleKey,
    SingleSig,
    Sigs2of2,
    Transaction,
    TxInput,
)
from .errors import (
    BothOffline,
    ChannelNotOpen,
    ConcurrentUpdate,
    DelayElapsed,
    FundingUnconfirmed,
    InsufficientChannelBalance,
    InsufficientFunds,
    LnSimError,
    NoRevocationSecret,
    NoSignedCommitment,
    PartyOffline,
)


class ChannelState(Enum):
    OPENING = "opening"
    OPEN = "open"
    PENDING_UPDATE = "pending_update"
    COOPERATIVE_CLOSED = "cooperative_closed"
    UNILATERAL_CLOSING = "unilateral_closing"
    PUNISHED = "punished"


@dataclass
class TraceEvent:
    tick: int
    channel_id: str
    event: str
    version: int
    balance_a: int
    balance_b: int
    detail: str = ""

    def line(self) -> str:
        out = (f"{self.tick} {self.channel_id} {self.event} v{self.version} "
               f"{self.balance_a}/{self.balance_b}")
        if self.detail:
            out += f" {self.detail}"
        return out


@dataclass
class RevocationSecret:
    version_n: int
    secret: bytes
    owner: str


@dataclass
class CommitmentTx:
    version_n: int
    holder: str
    to_holder_msat: int
    to_counterparty_msat: int
    htlc_outputs: list[Output]
    tx: Transaction
    counterparty_signature: bytes | None = None


class Channel:
    """Single-owner channel; the two parties' exchange is driven in-process."""

    def __init__(self, channel_id: str, ledger: Ledger, a: str, b: str,
                 fund_a: int, fund_b: int, to_self_delay: int, rng: random.Random):
        self.id = channel_id
        self.ledger = ledger
        self.chain = ledger.params.asset_id
        self.parties = (a, b)
        self.capacity_msat = fund_a + fund_b
        self.balances = {a: fund_a, b: fund_b}
        self.version_n = 0
        self.to_self_delay = to_self_delay
        self.rng = rng
        self.state = ChannelState.OPENING
        self.latest_commitment: dict[str, CommitmentTx] = {}
        self.all_commitments: dict[tuple[str, int], CommitmentTx] = {}
        self.own_secrets: dict[str, dict[int, bytes]] = {a: {}, b: {}}
        self.received_revocations: dict[str, dict[int, RevocationSecret]] = {a: {}, b: {}}
        self.pending_htlcs: list = []
        self.htlc_counter = 0
        self.preimages: dict[bytes, bytes] = {}
        self.funding_txid: str | None = None
        self.funding_outpoint = None
        self.closing_party: str | None = None
        self.broadcast_version: int | None = None
        self.broadcast_height: int | None = None
        self.broadcast_ctx: CommitmentTx | None = None
        self.punished_victim: str | None = None
        self.frozen = False
        self.onchain_txids: list[str] = []
        self.settlement_txids: list[str] = []
        self.trace: list[TraceEvent] = []
        self.tick = 0

    # --- helpers ---

    def other(self, party: str) -> str:
        a, b = self.parties
        if party == a:
            return b
        if party == b:
            return a
        raise LnSimError(f"{party} is not a member of channel {self.id}")

    @property
    def balance_a(self) -> int:
        return self.balances[self.parties[0]]

    @property
    def balance_b(self) -> int:
        return self.balances[self.parties[1]]

    def log(self, event: str, detail: str = "") -> None:
        self.trace.append(TraceEvent(self.tick, self.id, event, self.version_n,
                                     self.balance_a, self.balance_b, detail))

    def trace_lines(self) -> list[str]:
        return [ev.line() for ev in self.trace]

    def secret_for(self, party: str, version: int) -> bytes:
        secrets = self.own_secrets[party]
        if version not in secrets:
            secrets[version] = self.rng.randbytes(32)
        return secrets[version]

    def pending_htlc_total(self) -> int:
        return sum(h.amount_msat for h in self.pending_htlcs)

    def check_conservation(self) -> bool:
        return (self.balance_a + self.balance_b + self.pending_htlc_total()
                == self.capacity_msat)


# --------------------------------------------------------------------------
# commitment construction

def _build_commitment(ch: Channel, holder: str, version: int,
                      balances: dict[str, int], htlcs: list) -> CommitmentTx:
    counterparty = ch.other(holder)
    secret = ch.secret_for(holder, version)
    rev_key = crypto.revocation_commitment(secret)
    reserve = min(ONCHAIN_FEE_MSAT, balances[holder])
    outputs = [
        Output(balances[holder] - reserve,
               CommitmentScript(holder, rev_key, ch.to_self_delay)),
        Output(balances[counterparty], SingleKey(counterparty)),
    ]
    htlc_outputs = []
    for h in htlcs:
        claimer = ch.other(h.offerer)
        out = Output(h.amount_msat,
                     Hashlock(h.payment_hash, claimer, h.offerer,
                              h.expiry_height, revocation_key=rev_key))
        htlc_outputs.append(out)
        outputs.append(out)
    tx = Transaction([TxInput(ch.funding_outpoint)], outputs)
    return CommitmentTx(version, holder, balances[holder] - reserve,
                        balances[counterparty], htlc_outputs, tx)


def renegotiate(ch: Channel, initiator: str, new_balances: dict[str, int],
                new_htlcs: list, label: str, detail: str = "") -> None:
    """Run the eight-step update exchange to the next commitment version.

    Revocation of the old version (steps 7-8) happens strictly after both
    new commitments are countersigned (steps 3 and 6).
    """
    if ch.state is ChannelState.PENDING_UPDATE:
        raise ConcurrentUpdate(ch.id)
    if ch.state is not ChannelState.OPEN:
        raise ChannelNotOpen(f"{ch.id} is {ch.state.value}")
    ch.state = ChannelState.PENDING_UPDATE
    n = ch.version_n
    v = n + 1
    peer = ch.other(initiator)

    # 1. initiator constructs the peer's new commitment
    c_peer = _build_commitment(ch, peer, v, new_balances, new_htlcs)
    ch.log(f"step1", f"{initiator} builds {peer}'s commitment v{v}")
    # 2. initiator signs it and transmits
    c_peer.counterparty_signature = crypto.sign(initiator, c_peer.tx.sighash())
    ch.log(f"step2", f"{initiator} signs and transmits {peer}'s commitment v{v}")
    # 3. peer countersigns and retains it
    ch.latest_commitment[peer] = c_peer
    ch.all_commitments[(peer, v)] = c_peer
    ch.log(f"step3", f"{peer} countersigns and retains commitment v{v}")
    # 4. peer constructs the initiator's new commitment
    c_init = _build_commitment(ch, initiator, v, new_balances, new_htlcs)
    ch.log(f"step4", f"{peer} builds {initiator}'s commitment v{v}")
    # 5. peer signs it and transmits
    c_init.counterparty_signature = crypto.sign(peer, c_init.tx.sighash())
    ch.log(f"step5", f"{peer} signs and transmits {initiator}'s commitment v{v}")
    # 6. initiator countersigns and retains it
    ch.latest_commitment[initiator] = c_init
    ch.all_commitments[(initiator, v)] = c_init
    ch.log(f"step6", f"{initiator} countersigns and retains commitment v{v}")
    # 7. initiator discloses its old revocation secret
    ch.received_revocations[peer][n] = RevocationSecret(
        n, ch.secret_for(initiator, n), initiator)
    ch.log(f"step7", f"{initiator} discloses revocation secret for v{n}")
    # 8. peer discloses its old revocation secret
    ch.received_revocations[initiator][n] = RevocationSecret(
        n, ch.secret_for(peer, n), peer)
    ch.log(f"step8", f"{peer} discloses revocation secret for v{n}")

    ch.version_n = v
    ch.balances = dict(new_balances)
    ch.pending_htlcs = list(new_htlcs)
    ch.state = ChannelState.OPEN
    ch.log(label, detail)


# --------------------------------------------------------------------------
# operations

def _select_utxos(ledger: Ledger, key: str, target: int):
    """Pick single-key utxos covering target; exact match preferred."""
    owned = ledger.utxos_of(key)
    for op, amount in owned.items():
        if amount == target and op not in ledger.mempool_spent:
            return [(op, amount)], amount
    picked, total = [], 0
    for op, amount in owned.items():
        if op in ledger.mempool_spent:
            continue
        picked.append((op, amount))
        total += amount
        if total >= target:
            return picked, total
    raise InsufficientFunds(f"{key} holds {total} msat, needs {target}")


def open_channel(ledger: Ledger, a: str, b: str, fund_a: int, fund_b: int, *,
                 channel_id: str | None = None,
                 to_self_delay: int = DEFAULT_TO_SELF_DELAY,
                 rng_seed: int | None = None,
                 auto_mine: bool = True) -> Channel:
    """Fund a channel on-chain and exchange version-0 commitments.

    Commitments are signed before the funding transaction is broadcast.
    With auto_mine=False the funding stays in the mempool and the caller
    must mine and then call confirm_funding().
    """
    if fund_a < 0 or fund_b < 0 or fund_a + fund_b <= 0:
        raise InsufficientFunds("channel capacity must be positive")
    inputs: list[TxInput] = []
    owners: list[str] = []
    outputs = [Output(fund_a + fund_b, Multisig2of2(a, b))]
    for party, fund in ((a, fund_a), (b, fund_b)):
        if fund == 0:
            continue
        picked, total = _select_utxos(ledger, party, fund)
        for op, _ in picked:
            inputs.append(TxInput(op))
            owners.append(party)
        if total > fund:
            outputs.append(Output(total - fund, SingleKey(party)))
    tx = Transaction(inputs, outputs)
    funding_outpoint = (tx.txid, 0)

    if channel_id is None:
        channel_id = f"ch-{tx.txid[:12]}"
    if rng_seed is None:
        seed_src = f"channel-rng:{channel_id}:{tx.txid}"
        rng_seed = int.from_bytes(crypto.sha256(seed_src.encode())[:8], "big")
    ch = Channel(channel_id, ledger, a, b, fund_a, fund_b, to_self_delay,
                 random.Random(rng_seed))
    ch.funding_txid = tx.txid
    ch.funding_outpoint = funding_outpoint

    # initial commitments, signed and exchanged before broadcast
    for holder in (a, b):
        c = _build_commitment(ch, holder, 0, ch.balances, [])
        c.counterparty_signature = crypto.sign(ch.other(holder), c.tx.sighash())
        ch.latest_commitment[holder] = c
        ch.all_commitments[(holder, 0)] = c

    msg = tx.sighash()
    for txin, owner in zip(inputs, owners):
        txin.witness = SingleSig(crypto.sign(owner, msg))
    ledger.submit_transaction(tx)
    ch.onchain_txids.append(tx.txid)
    ch.log("funding_submitted", f"txid={tx.txid[:16]}")
    if auto_mine:
        ledger.mine_block()
        confirm_funding(ch)
    return ch


def confirm_funding(ch: Channel) -> None:
    if ch.funding_txid not in ch.ledger.confirmed_ids:
        raise FundingUnconfirmed(ch.id)
    ch.state = ChannelState.OPEN
    ch.log("open", f"capacity={ch.capacity_msat}")


def update_balance(ch: Channel, payer: str, amount: int) -> Channel:
    """Shift amount from payer to the counterparty, off-chain."""
    if ch.state is ChannelState.PENDING_UPDATE:
        raise ConcurrentUpdate(ch.id)
    if ch.state is not ChannelState.OPEN:
        raise ChannelNotOpen(f"{ch.id} is {ch.state.value}")
    if amount < 0:
        raise InsufficientChannelBalance("negative amount")
    payee = ch.other(payer)
    if amount > ch.balances[payer]:
        raise InsufficientChannelBalance(
            f"{payer} has {ch.balances[payer]} msat, needs {amount}")
    new_balances = dict(ch.balances)
    new_balances[payer] -= amount
    new_balances[payee] += amount
    renegotiate(ch, payer, new_balances, list(ch.pending_htlcs), "update",
                f"{payer} pays {payee} {amount} msat")
    return ch


def cooperative_close(ch: Channel, ledger: Ledger | None = None, *,
                      counterparty_online: bool = True,
                      auto_mine: bool = True) -> str:
    """Settle the channel with one transaction at the current balances.

    The fixed on-chain fee is split pro-rata between the two outputs.
    """
    ledger = ledger or ch.ledger
    if ch.state is not ChannelState.OPEN:
        raise ChannelNotOpen(f"{ch.id} is {ch.state.value}")
    if ch.pending_htlcs:
        raise ChannelNotOpen(f"{ch.id} has pending HTLCs")
    if not counterparty_online:
        raise PartyOffline(ch.id)
    a, b = ch.parties
    fee = min(ONCHAIN_FEE_MSAT, ch.capacity_msat)
    fee_a = fee * ch.balances[a] // ch.capacity_msat
    fee_b = fee - fee_a
    outputs = [Output(ch.balances[a] - fee_a, SingleKey(a)),
               Output(ch.balances[b] - fee_b, SingleKey(b))]
    tx = Transaction([TxInput(ch.funding_outpoint)], outputs)
    msg = tx.sighash()
    tx.inputs[0].witness = Sigs2of2(crypto.sign(a, msg), crypto.sign(b, msg))
    ledger.submit_transaction(tx)
    ch.onchain_txids.append(tx.txid)
    ch.settlement_txids.append(tx.txid)
    if auto_mine:
        ledger.mine_block()
    ch.state = ChannelState.COOPERATIVE_CLOSED
    ch.log("cooperative_close", f"txid={tx.txid[:16]}")
    return tx.txid


def broadcast_commitment(ch: Channel, party: str, version: int, *,
                         ledger: Ledger | None = None,
                         auto_mine: bool = True) -> str:
    """Broadcast party's commitment of the given version (latest or revoked)."""
    ledger = ledger or ch.ledger
    c = ch.all_commitments.get((party, version))
    if c is None or c.counterparty_signature is None:
        raise NoSignedCommitment(f"{party} holds no signed commitment v{version}")
    a, b = ch.parties
    msg = c.tx.sighash()
    own_sig = crypto.sign(party, msg)
    if party == a:
        witness = Sigs2of2(own_sig, c.counterparty_signature)
    else:
        witness = Sigs2of2(c.counterparty_signature, own_sig)
    c.tx.inputs[0].witness = witness
    ledger.submit_transaction(c.tx)
    ch.onchain_txids.append(c.tx.txid)
    ch.settlement_txids.append(c.tx.txid)
    revoked = version < ch.version_n
    ch.state = ChannelState.UNILATERAL_CLOSING
    ch.closing_party = party
    ch.broadcast_version = version
    ch.broadcast_ctx = c
    if auto_mine:
        ledger.mine_block()
        ch.broadcast_height = ledger.confirm_heights[c.tx.txid]
    else:
        ch.broadcast_height = None
    ch.log("broadcast_revoked" if revoked else "unilateral_close",
           f"by={party} v{version} txid={c.tx.txid[:16]}")
    return c.tx.txid


def unilateral_close(ch: Channel, party: str, ledger: Ledger | None = None, *,
                     auto_mine: bool = True) -> str:
    """Broadcast party's latest countersigned commitment."""
    if ch.latest_commitment.get(party) is None:
        raise NoSignedCommitment(party)
    return broadcast_commitment(ch, party, ch.version_n,
                                ledger=ledger, auto_mine=auto_mine)


def punish(ch: Channel, cheater_tx: CommitmentTx, ledger: Ledger | None = None, *,
           auto_mine: bool = True) -> str:
    """Sweep every output of a revoked on-chain commitment to the victim."""
    ledger = ledger or ch.ledger
    cheater = cheater_tx.holder
    victim = ch.other(cheater)
    v = cheater_tx.version_n
    if v >= ch.version_n:
        raise NoRevocationSecret(f"commitment v{v} is not revoked")
    rs = ch.received_revocations[victim].get(v)
    if rs is None or rs.owner != cheater:
        raise NoRevocationSecret(f"{victim} holds no secret for v{v}")
    txid = cheater_tx.tx.txid
    if txid not in ledger.confirmed_ids:
        raise LnSimError(f"commitment {txid[:16]} not observed on-chain")
    revocable_op = (txid, 0)
    if revocable_op not in ledger.utxo_set:
        raise DelayElapsed(f"revocable output of {txid[:16]} already swept")
    inputs, kinds, total = [], [], 0
    for idx in range(len(cheater_tx.tx.outputs)):
        op = (txid, idx)
        entry = ledger.utxo_set.get(op)
        if entry is None or op in ledger.mempool_spent:
            continue
        cond = entry.output.spend_condition
        if isinstance(cond, SingleKey):
            if cond.key != victim:
                continue
            kinds.append("single")
        else:
            kinds.append("revocation")
        inputs.append(TxInput(op))
        total += entry.output.amount_msat
    fee = min(ONCHAIN_FEE_MSAT, total)
    tx = Transaction(inputs, [Output(total - fee, SingleKey(victim))])
    msg = tx.sighash()
    for txin, kind in zip(tx.inputs, kinds):
        if kind == "revocation":
            txin.witness = Revocation(crypto.revocation_sign(rs.secret, msg))
        else:
            txin.witness = SingleSig(crypto.sign(victim, msg))
    ledger.submit_transaction(tx)
    ch.onchain_txids.append(tx.txid)
    ch.settlement_txids.append(tx.txid)
    if auto_mine:
        ledger.mine_block()
    ch.state = ChannelState.PUNISHED
    ch.punished_victim = victim
    ch.log("punished", f"victim={victim} swept={total - fee}")
    return tx.txid


def sweep_delayed(ch: Channel, party: str, ledger: Ledger | None = None, *,
                  auto_mine: bool = True) -> str:
    """Claim the broadcaster's time-locked commitment output after the delay."""
    ledger = ledger or ch.ledger
    if ch.broadcast_ctx is None or ch.closing_party != party:
        raise NoSignedCommitment(f"{party} has no broadcast commitment to sweep")
    op = (ch.broadcast_ctx.tx.txid, 0)
    entry = ledger.utxo_set.get(op)
    if entry is None:
        raise LnSimError("commitment output already spent")
    amount = entry.output.amount_msat
    fee = min(ONCHAIN_FEE_MSAT, amount)
    tx = Transaction([TxInput(op)], [Output(amount - fee, SingleKey(party))])
    tx.inputs[0].witness = LocalAfterDelay(crypto.sign(party, tx.sighash()))
    ledger.submit_transaction(tx)
    ch.onchain_txids.append(tx.txid)
    if auto_mine:
        ledger.mine_block()
    ch.log("swept_delayed", f"by={party} amount={amount - fee}")
    return tx.txid


def resolve_htlc_onchain(ch: Channel, payment_hash: bytes,
                         ledger: Ledger | None = None, *,
                         preimage: bytes | None = None,
                         auto_mine: bool = True) -> str:
    """Resolve an HTLC output of a broadcast commitment on-chain.

    With a preimage the claimer spends via the hashlock-claim path before
    expiry; without one the offerer refunds at/after expiry.
    """
    ledger = ledger or ch.ledger
    if ch.broadcast_ctx is None:
        raise LnSimError("no commitment on-chain")
    txid = ch.broadcast_ctx.tx.txid
    for idx, out in enumerate(ch.broadcast_ctx.tx.outputs):
        cond = out.spend_condition
        if not isinstance(cond, Hashlock) or cond.payment_hash != payment_hash:
            continue
        op = (txid, idx)
        if op not in ledger.utxo_set:
            continue
        if preimage is not None:
            beneficiary = cond.claim_key
        else:
            beneficiary = cond.refund_key
        amount = out.amount_msat
        fee = min(ONCHAIN_FEE_MSAT, amount)
        tx = Transaction([TxInput(op)], [Output(amount - fee, SingleKey(beneficiary))])
        msg = tx.sighash()
        if preimage is not None:
            tx.inputs[0].witness = HashlockClaim(preimage, crypto.sign(beneficiary, msg))
        else:
            tx.inputs[0].witness = HashlockRefund(crypto.sign(beneficiary, msg))
        ledger.submit_transaction(tx)
        ch.onchain_txids.append(tx.txid)
        if auto_mine:
            ledger.mine_block()
        path = "claim" if preimage is not None else "refund"
        ch.log(f"htlc_onchain_{path}", f"to={beneficiary} amount={amount - fee}")
        return tx.txid
    raise LnSimError("no matching unspent HTLC output")


def on_party_offline(ch: Channel, offline: str, ledger: Ledger | None = None, *,
                     remaining_online: bool = True,
                     auto_mine: bool = True) -> str:
    """Force-close when one party goes offline; frozen if both are."""
    if not remaining_online:
        ch.frozen = True
        ch.log("frozen", "both parties offline")
        raise BothOffline(ch.id)
    remaining = ch.other(offline)
    txid = unilateral_close(ch, remaining, ledger, auto_mine=auto_mine)
    ch.log("offline_close", f"offline={offline} closer={remaining}")
    return txid
