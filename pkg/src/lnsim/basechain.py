"""Simulated base-layer ledger: UTXO set, script evaluation, TPS-capped blocks.

One Ledger per asset.  Blocks confirm mempool transactions FIFO up to
tps_cap * block_interval_secs per block, re-validating each against the
evolving UTXO set.  There is no proof-of-work, no forks and no fee market;
fees are whatever a transaction leaves unclaimed (inputs minus outputs) and
are burned.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import crypto, wire
from .errors import (
    BadWitness,
    DoubleSpend,
    DuplicateAsset,
    PrematureLocktime,
    UnknownInput,
    ValueCreated,
)

MSAT_PER_BTC = 100_000_000_000

# Conventional fee settlement-type transactions include; the ledger itself
# accepts any non-negative fee (a zero-fee funding transaction is valid).
ONCHAIN_FEE_MSAT = 1_000

DEFAULT_TO_SELF_DELAY = 144

# Locktimes further in the future than this are rejected at submission.
LOCKTIME_HORIZON = 4_032

Outpoint = tuple[str, int]


# --------------------------------------------------------------------------
# spend conditions

@dataclass(frozen=True)
class SingleKey:
    key: str

    def ser(self) -> bytes:
        return b"\x01" + wire.ser_str(self.key)


@dataclass(frozen=True)
class Multisig2of2:
    key_a: str
    key_b: str

    def ser(self) -> bytes:
        return b"\x02" + wire.ser_str(self.key_a) + wire.ser_str(self.key_b)


@dataclass(frozen=True)
class CommitmentScript:
    """Revocable, time-locked output: local key after a delay, or the
    counterparty at any height with the revocation secret."""

    local_key: str
    remote_revocation_key: str
    to_self_delay_blocks: int

    def ser(self) -> bytes:
        return (b"\x03" + wire.ser_str(self.local_key)
                + wire.ser_str(self.remote_revocation_key)
                + wire.ser_int(self.to_self_delay_blocks))


@dataclass(frozen=True)
class Hashlock:
    """Claimable with the hash preimage before expiry, refundable after.

    revocation_key is set on HTLC outputs of commitment transactions so a
    penalty spend can also sweep in-flight HTLCs of a revoked commitment.
    """

    payment_hash: bytes
    claim_key: str
    refund_key: str
    expiry_height: int
    revocation_key: str | None = None

    def ser(self) -> bytes:
        return (b"\x04" + wire.ser_bytes(self.payment_hash)
                + wire.ser_str(self.claim_key) + wire.ser_str(self.refund_key)
                + wire.ser_int(self.expiry_height)
                + wire.ser_str(self.revocation_key or ""))


# --------------------------------------------------------------------------
# witnesses

@dataclass(frozen=True)
class SingleSig:
    sig: bytes


@dataclass(frozen=True)
class Sigs2of2:
    sig_a: bytes
    sig_b: bytes


@dataclass(frozen=True)
class LocalAfterDelay:
    sig: bytes


@dataclass(frozen=True)
class Revocation:
    # sig = revocation secret (32 bytes) || binding mac (32 bytes)
    sig: bytes


@dataclass(frozen=True)
class HashlockClaim:
    preimage: bytes
    sig: bytes


@dataclass(frozen=True)
class HashlockRefund:
    sig: bytes


# --------------------------------------------------------------------------
# transactions

@dataclass(frozen=True)
class Output:
    amount_msat: int
    spend_condition: object

    def ser(self) -> bytes:
        return wire.ser_int(self.amount_msat) + wire.ser_bytes(self.spend_condition.ser())


@dataclass
class TxInput:
    outpoint: Outpoint
    witness: object | None = None


@dataclass
class Transaction:
    inputs: list[TxInput]
    outputs: list[Output]
    locktime_height: int = 0
    _digest: bytes | None = field(default=None, repr=False, compare=False)

    def serialize(self) -> bytes:
        """Canonical witness-free encoding; the txid preimage.

        Witnesses are excluded so signatures can commit to the id without
        circularity; id determinism therefore covers everything but sigs.
        """
        ins = [wire.ser_str(op[0]) + wire.ser_int(op[1]) for op, _ in
               ((i.outpoint, i.witness) for i in self.inputs)]
        outs = [o.ser() for o in self.outputs]
        return wire.ser_list(ins) + wire.ser_list(outs) + wire.ser_int(self.locktime_height)

    def sighash(self) -> bytes:
        if self._digest is None:
            self._digest = crypto.sha256(self.serialize())
        return self._digest

    @property
    def txid(self) -> str:
        return self.sighash().hex()


def evaluate_spend(output: Output, witness, height: int,
                   utxo_height: int = 0, msg: bytes = b"") -> bool:
    """True iff witness satisfies output.spend_condition at this height.

    utxo_height is the block height at which the output was confirmed
    (the broadcast height for commitment scripts); msg is the sighash of
    the spending transaction.
    """
    cond = output.spend_condition
    if isinstance(cond, SingleKey):
        return isinstance(witness, SingleSig) and crypto.verify(cond.key, msg, witness.sig)
    if isinstance(cond, Multisig2of2):
        return (isinstance(witness, Sigs2of2)
                and crypto.verify(cond.key_a, msg, witness.sig_a)
                and crypto.verify(cond.key_b, msg, witness.sig_b))
    if isinstance(cond, CommitmentScript):
        if isinstance(witness, Revocation):
            return crypto.revocation_verify(cond.remote_revocation_key, msg, witness.sig)
        if isinstance(witness, LocalAfterDelay):
            return (height >= utxo_height + cond.to_self_delay_blocks
                    and crypto.verify(cond.local_key, msg, witness.sig))
        return False
    if isinstance(cond, Hashlock):
        if isinstance(witness, HashlockClaim):
            return (crypto.payment_hash(witness.preimage) == cond.payment_hash
                    and height < cond.expiry_height
                    and crypto.verify(cond.claim_key, msg, witness.sig))
        if isinstance(witness, HashlockRefund):
            return (height >= cond.expiry_height
                    and crypto.verify(cond.refund_key, msg, witness.sig))
        if isinstance(witness, Revocation) and cond.revocation_key is not None:
            return crypto.revocation_verify(cond.revocation_key, msg, witness.sig)
        return False
    return False


# --------------------------------------------------------------------------
# ledger

@dataclass
class ChainParams:
    asset_id: str
    tps_cap: int
    block_interval_secs: int
    genesis_allocations: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.tps_cap < 1:
            raise ValueError("tps_cap must be >= 1")
        if self.block_interval_secs < 1:
            raise ValueError("block_interval_secs must be >= 1")

    @property
    def block_capacity(self) -> int:
        return self.tps_cap * self.block_interval_secs


@dataclass
class UtxoEntry:
    output: Output
    height: int


class Ledger:
    """Single-writer UTXO ledger with a FIFO mempool."""

    def __init__(self, params: ChainParams):
        self.params = params
        self.height = 0
        self.utxo_set: dict[Outpoint, UtxoEntry] = {}
        self.mempool: deque[Transaction] = deque()
        self.mempool_spent: set[Outpoint] = set()
        self.confirmed: list[Transaction] = []
        self.confirmed_ids: set[str] = set()
        self.confirm_heights: dict[str, int] = {}
        self.dropped: list[tuple[str, str]] = []
        self.cumulative_fees = 0
        self.genesis_total = 0
        # single-key ownership index: key -> {outpoint: amount}
        self._owner_index: dict[str, dict[Outpoint, int]] = {}
        for key, amount in params.genesis_allocations.items():
            op = (crypto.sha256(f"genesis:{params.asset_id}:{key}".encode()).hex(), 0)
            self._add_utxo(op, Output(amount, SingleKey(key)), 0)
            self.genesis_total += amount

    # --- internal utxo bookkeeping ---

    def _add_utxo(self, op: Outpoint, output: Output, height: int) -> None:
        self.utxo_set[op] = UtxoEntry(output, height)
        cond = output.spend_condition
        if isinstance(cond, SingleKey):
            self._owner_index.setdefault(cond.key, {})[op] = output.amount_msat

    def _remove_utxo(self, op: Outpoint) -> None:
        entry = self.utxo_set.pop(op)
        cond = entry.output.spend_condition
        if isinstance(cond, SingleKey):
            owned = self._owner_index.get(cond.key)
            if owned is not None:
                owned.pop(op, None)

    # --- validation ---

    def _validate(self, tx: Transaction, height: int) -> None:
        seen: set[Outpoint] = set()
        total_in = 0
        msg = tx.sighash()
        for txin in tx.inputs:
            op = txin.outpoint
            if op in seen:
                raise DoubleSpend(f"{op} spent twice within transaction")
            seen.add(op)
            entry = self.utxo_set.get(op)
            if entry is None:
                raise UnknownInput(str(op))
            if not evaluate_spend(entry.output, txin.witness, height, entry.height, msg):
                raise BadWitness(str(op))
            total_in += entry.output.amount_msat
        total_out = sum(o.amount_msat for o in tx.outputs)
        if total_out > total_in:
            raise ValueCreated(f"outputs {total_out} exceed inputs {total_in}")
        if tx.locktime_height > height + LOCKTIME_HORIZON:
            raise PrematureLocktime(str(tx.locktime_height))

    def submit_transaction(self, tx: Transaction) -> str:
        for txin in tx.inputs:
            if txin.outpoint in self.mempool_spent:
                raise DoubleSpend(f"{txin.outpoint} already spent in mempool")
        self._validate(tx, self.height)
        self.mempool.append(tx)
        for txin in tx.inputs:
            self.mempool_spent.add(txin.outpoint)
        return tx.txid

    def mine_block(self) -> list[str]:
        """Advance one block; confirm up to block_capacity mempool txs FIFO."""
        self.height += 1
        mined: list[str] = []
        capacity = self.params.block_capacity
        while self.mempool and len(mined) < capacity:
            tx = self.mempool.popleft()
            for txin in tx.inputs:
                self.mempool_spent.discard(txin.outpoint)
            try:
                self._validate(tx, self.height)
                if tx.locktime_height > self.height:
                    raise PrematureLocktime(str(tx.locktime_height))
            except Exception as exc:  # noqa: BLE001 - reason recorded, block goes on
                self.dropped.append((tx.txid, type(exc).__name__))
                continue
            total_in = 0
            for txin in tx.inputs:
                total_in += self.utxo_set[txin.outpoint].output.amount_msat
                self._remove_utxo(txin.outpoint)
            for idx, out in enumerate(tx.outputs):
                self._add_utxo((tx.txid, idx), out, self.height)
            self.cumulative_fees += total_in - sum(o.amount_msat for o in tx.outputs)
            self.confirmed.append(tx)
            self.confirmed_ids.add(tx.txid)
            self.confirm_heights[tx.txid] = self.height
            mined.append(tx.txid)
        return mined

    def mine_until_empty(self) -> int:
        """Mine blocks until the mempool drains; returns blocks mined."""
        blocks = 0
        while self.mempool:
            self.mine_block()
            blocks += 1
        return blocks

    # --- queries ---

    def balance_of(self, key: str) -> int:
        return sum(self._owner_index.get(key, {}).values())

    def utxos_of(self, key: str) -> dict[Outpoint, int]:
        return dict(self._owner_index.get(key, {}))

    def supply_msat(self) -> int:
        return sum(e.output.amount_msat for e in self.utxo_set.values())

    def check_conservation(self) -> bool:
        return self.supply_msat() + self.cumulative_fees == self.genesis_total


class ChainRegistry:
    """Per-asset ledger registry; asset ids must be unique."""

    def __init__(self):
        self.ledgers: dict[str, Ledger] = {}

    def register_chain(self, params: ChainParams) -> Ledger:
        if params.asset_id in self.ledgers:
            raise DuplicateAsset(params.asset_id)
        ledger = Ledger(params)
        self.ledgers[params.asset_id] = ledger
        return ledger

    def __getitem__(self, asset_id: str) -> Ledger:
        return self.ledgers[asset_id]

    def __iter__(self):
        return iter(self.ledgers.values())


def register_chain(registry: ChainRegistry, params: ChainParams) -> Ledger:
    return registry.register_chain(params)
