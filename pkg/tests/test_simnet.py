"""Scenario parsing, network construction, and the simulation loop."""

import pytest

from lnsim.channel import ChannelState
from lnsim.errors import ConfigInvalid
from lnsim.simnet import (
    apply_node_failures,
    build_network,
    collect_metrics,
    parse_scenario,
    run_scenario,
)

BTC = 100_000_000_000

TWO_PARTY = """
[scenario]
seed = 5
duration_ticks = 20

[chain:BTC]
tps_cap = 7
block_interval_secs = 10

[nodes]
names = alice bob

[channel:ch1]
a = alice
b = bob
asset = BTC
fund_a = {fund}
fund_b = {fund}
""".format(fund=10 * BTC)


def test_parse_two_party():
    cfg = parse_scenario(TWO_PARTY)
    assert cfg.seed == 5 and cfg.duration_ticks == 20
    assert cfg.chains[0].asset_id == "BTC"
    assert cfg.chains[0].block_capacity == 70
    assert cfg.node_names == ["alice", "bob"]
    (spec,) = cfg.channels
    assert (spec.a, spec.b, spec.fund_a) == ("alice", "bob", 10 * BTC)


@pytest.mark.parametrize("mangle,field", [
    (lambda t: t.replace("tps_cap = 7\n", ""), "chain:BTC"),
    (lambda t: t.replace("asset = BTC", "asset = DOGE"), "channel:ch1"),
    (lambda t: t.replace("names = alice bob", "names = alice"), "nodes"),
    (lambda t: t + "\n[mystery]\nx = 1\n", "mystery"),
    (lambda t: t + "\n[workload]\nfrobnicate:x = 1\n", "workload.frobnicate:x"),
])
def test_config_errors_name_the_field(mangle, field):
    with pytest.raises(ConfigInvalid) as err:
        parse_scenario(mangle(TWO_PARTY))
    assert err.value.field == field


def test_build_network_explicit():
    world = build_network(parse_scenario(TWO_PARTY))
    ch = world.channels["ch1"]
    assert ch.state is ChannelState.OPEN
    assert ch.capacity_msat == 20 * BTC
    assert set(world.graph.edges) == {"ch1"}
    # genesis was derived from the deposits and fully consumed
    ledger = world.ledger("BTC")
    assert ledger.genesis_total == 20 * BTC
    assert ledger.check_conservation()


def test_block_cadence():
    cfg = parse_scenario(TWO_PARTY)
    world = build_network(cfg)
    before = world.ledger("BTC").height
    run_scenario(world)
    # 20 ticks at one block per 10 ticks
    assert world.ledger("BTC").height == before + 2


def test_netting_scenario_metrics():
    text = TWO_PARTY + """
[workload]
repeat:burst = 1000 0 alice bob BTC 1000000

[events]
close:5 = ch1
"""
    world = build_network(parse_scenario(text))
    m = run_scenario(world)
    assert m.payments_attempted == m.payments_succeeded == 1000
    assert m.offchain_update_count == 1000
    assert m.onchain_tx_count == 2  # funding + cooperative close
    assert m.netting_ratio == 1000.0
    assert world.check_conservation()


def test_determinism_byte_identical_csv():
    text = TWO_PARTY + """
[workload]
rate = 3 1000 100000 BTC
"""
    runs = {run_scenario(build_network(parse_scenario(text))).to_csv()
            for _ in range(2)}
    assert len(runs) == 1


def test_cheat_event_is_punished_when_victim_online():
    text = TWO_PARTY + """
[workload]
payment:p1 = 0 alice bob BTC 1000000
payment:p2 = 1 alice bob BTC 1000000

[events]
force_broadcast_revoked:3 = alice ch1 1
"""
    world = build_network(parse_scenario(text))
    m = run_scenario(world)
    assert m.cheat_attempts == 1
    assert m.cheats_punished == 1
    assert world.channels["ch1"].state is ChannelState.PUNISHED
    assert world.ledger("BTC").check_conservation()


def test_offline_triggers_force_close_after_timeout():
    text = TWO_PARTY + """
[events]
offline:2 = bob
"""
    world = build_network(parse_scenario(text))
    run_scenario(world)
    ch = world.channels["ch1"]
    assert ch.state is ChannelState.UNILATERAL_CLOSING
    assert ch.closing_party == "alice"
    assert "ch1" not in world.graph.edges


RANDOM_NET = """
[scenario]
seed = 17
duration_ticks = 5

[chain:BTC]
tps_cap = 1000
block_interval_secs = 5

[nodes]
count = 30

[topology]
kind = random
asset = BTC
edge_count = 60
capacity_min_msat = 1000000
capacity_max_msat = 9000000
"""


def test_node_failures_capacity_accounting():
    world = build_network(parse_scenario(RANDOM_NET))
    before = collect_metrics(world).ln_capacity_msat
    report = apply_node_failures(world, 0.2)
    after = collect_metrics(world).ln_capacity_msat
    assert before - after == report.capacity_removed_msat
    assert len(report.offline_nodes) == 6  # ceil(0.2 * 30)
    touched = set(report.closed_channels) | set(report.frozen_channels)
    off = set(report.offline_nodes)
    for name, ch in world.channels.items():
        hit = bool(off & set(ch.parties))
        assert (name in touched) == hit
    assert world.ledger("BTC").check_conservation()


def test_node_failures_nested_and_monotone():
    world1 = build_network(parse_scenario(RANDOM_NET))
    world2 = build_network(parse_scenario(RANDOM_NET))
    r1 = apply_node_failures(world1, 0.1)
    r2 = apply_node_failures(world2, 0.3)
    assert set(r1.offline_nodes) <= set(r2.offline_nodes)
    assert r1.capacity_removed_msat <= r2.capacity_removed_msat
