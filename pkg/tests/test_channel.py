"""Channel lifecycle, eight-step update exchange, and penalty enforcement."""

import random

import pytest

from lnsim.basechain import ONCHAIN_FEE_MSAT, ChainParams, Ledger
from lnsim.channel import (
    ChannelState,
    broadcast_commitment,
    cooperative_close,
    on_party_offline,
    open_channel,
    punish,
    sweep_delayed,
    unilateral_close,
    update_balance,
)
from lnsim.errors import (
    BadWitness,
    BothOffline,
    ChannelNotOpen,
    ConcurrentUpdate,
    DelayElapsed,
    InsufficientChannelBalance,
    InsufficientFunds,
    NoRevocationSecret,
    PartyOffline,
)

BTC = 100_000_000_000


def fresh(fund_a=10 * BTC, fund_b=10 * BTC, delay=144):
    ledger = Ledger(ChainParams("BTC", 100, 1,
                                {"alice": fund_a or 1, "bob": fund_b or 1}))
    ch = open_channel(ledger, "alice", "bob", fund_a, fund_b,
                      channel_id="t", to_self_delay=delay, rng_seed=1)
    return ledger, ch


def test_open_channel_state_and_funding():
    ledger, ch = fresh()
    assert ch.state is ChannelState.OPEN
    assert ch.balances == {"alice": 10 * BTC, "bob": 10 * BTC}
    assert ch.funding_txid in ledger.confirmed_ids
    assert ch.funding_outpoint in ledger.utxo_set
    assert ledger.utxo_set[ch.funding_outpoint].output.amount_msat == 20 * BTC


def test_open_requires_funds():
    ledger = Ledger(ChainParams("BTC", 100, 1, {"alice": 5}))
    with pytest.raises(InsufficientFunds):
        open_channel(ledger, "alice", "bob", 10, 0)


def test_update_eight_step_trace_order():
    _, ch = fresh()
    update_balance(ch, "alice", 2 * BTC)
    assert ch.balances == {"alice": 8 * BTC, "bob": 12 * BTC}
    events = [ev.event for ev in ch.trace if ev.event.startswith("step")]
    assert events == [f"step{i}" for i in range(1, 9)]
    # revocation disclosure comes strictly after both countersign steps
    order = {ev: i for i, ev in enumerate(events)}
    assert order["step7"] > order["step3"] and order["step7"] > order["step6"]
    assert order["step8"] > order["step7"]


def test_update_insufficient_balance():
    _, ch = fresh()
    with pytest.raises(InsufficientChannelBalance):
        update_balance(ch, "alice", 11 * BTC)
    with pytest.raises(InsufficientChannelBalance):
        update_balance(ch, "alice", -1)


def test_concurrent_update_rejected():
    _, ch = fresh()
    ch.state = ChannelState.PENDING_UPDATE
    with pytest.raises(ConcurrentUpdate):
        update_balance(ch, "alice", 1)


def test_full_balance_sweep_allowed():
    _, ch = fresh()
    update_balance(ch, "alice", 10 * BTC)
    assert ch.balances == {"alice": 0, "bob": 20 * BTC}


def test_cooperative_close_pro_rata_fee():
    ledger, ch = fresh()
    update_balance(ch, "alice", 2 * BTC)
    cooperative_close(ch)
    fee_a = ONCHAIN_FEE_MSAT * 8 * BTC // (20 * BTC)
    fee_b = ONCHAIN_FEE_MSAT - fee_a
    assert ledger.balance_of("alice") == 8 * BTC - fee_a
    assert ledger.balance_of("bob") == 12 * BTC - fee_b
    assert ch.state is ChannelState.COOPERATIVE_CLOSED
    assert ledger.check_conservation()
    with pytest.raises(ChannelNotOpen):
        update_balance(ch, "alice", 1)


def test_cooperative_close_requires_counterparty():
    _, ch = fresh()
    with pytest.raises(PartyOffline):
        cooperative_close(ch, counterparty_online=False)


def test_unilateral_close_time_locks_broadcaster():
    ledger, ch = fresh(delay=5)
    update_balance(ch, "alice", 2 * BTC)
    unilateral_close(ch, "alice")
    # counterparty output is immediately spendable, broadcaster's is delayed
    with pytest.raises(BadWitness):
        sweep_delayed(ch, "alice")
    for _ in range(5):
        ledger.mine_block()
    sweep_delayed(ch, "alice")
    # alice nets 8 BTC minus the commitment reserve and the sweep fee
    assert ledger.balance_of("alice") == 8 * BTC - 2 * ONCHAIN_FEE_MSAT
    assert ledger.balance_of("bob") == 12 * BTC
    assert ledger.check_conservation()


def test_punish_revoked_broadcast():
    ledger, ch = fresh(delay=5)
    update_balance(ch, "alice", 2 * BTC)   # v1
    update_balance(ch, "bob", 5 * BTC)     # v2: alice 13 / bob 7
    # bob broadcasts the stale v1 (alice 8 / bob 12)
    broadcast_commitment(ch, "bob", 1)
    punish(ch, ch.broadcast_ctx)
    assert ch.state is ChannelState.PUNISHED
    assert ch.punished_victim == "alice"
    # victim sweeps the whole capacity minus commitment reserve and penalty fee
    assert ledger.balance_of("alice") == 20 * BTC - 2 * ONCHAIN_FEE_MSAT
    assert ledger.balance_of("bob") == 0
    assert ledger.check_conservation()


def test_punish_requires_revoked_version():
    _, ch = fresh(delay=5)
    update_balance(ch, "alice", 2 * BTC)
    unilateral_close(ch, "bob")  # latest version, nothing to punish
    with pytest.raises(NoRevocationSecret):
        punish(ch, ch.broadcast_ctx)


def test_cheat_succeeds_when_victim_sleeps_past_delay():
    ledger, ch = fresh(delay=3)
    update_balance(ch, "alice", 2 * BTC)
    update_balance(ch, "bob", 5 * BTC)
    broadcast_commitment(ch, "bob", 1)
    for _ in range(3):
        ledger.mine_block()
    sweep_delayed(ch, "bob")
    with pytest.raises(DelayElapsed):
        punish(ch, ch.broadcast_ctx)
    # cheater keeps the stale 12 BTC less reserve and sweep fee
    assert ledger.balance_of("bob") == 12 * BTC - 2 * ONCHAIN_FEE_MSAT
    assert ledger.check_conservation()


def test_both_offline_freezes_channel():
    _, ch = fresh()
    with pytest.raises(BothOffline):
        on_party_offline(ch, "alice", remaining_online=False)
    assert ch.frozen
    assert ch.state is ChannelState.OPEN


def test_offline_close_by_survivor():
    ledger, ch = fresh(delay=2)
    update_balance(ch, "alice", 2 * BTC)
    on_party_offline(ch, "alice")  # bob closes with the latest state
    assert ch.state is ChannelState.UNILATERAL_CLOSING
    assert ch.closing_party == "bob"
    assert ledger.balance_of("alice") == 8 * BTC
    for _ in range(2):
        ledger.mine_block()
    sweep_delayed(ch, "bob")
    assert ledger.balance_of("bob") == 12 * BTC - 2 * ONCHAIN_FEE_MSAT


def test_randomized_update_sequences_conserve(seeded_runs=25):
    for seed in range(seeded_runs):
        rng = random.Random(seed)
        _, ch = fresh()
        for _ in range(rng.randint(1, 12)):
            payer = rng.choice(ch.parties)
            bal = ch.balances[payer]
            if bal == 0:
                continue
            update_balance(ch, payer, rng.randint(1, bal))
            assert ch.check_conservation()
        assert ch.version_n >= 1
