"""Bootstrap simulator: protocol outcomes, adversaries, timing, work accounting."""

import math

import pytest

from bftboot.protocol import quorum_threshold
from bftboot.sim import (
    ConfigInvalid,
    NetworkConfig,
    SimConfig,
    Simulation,
    WorkUnitCosts,
    gossip,
    measure_reconfiguration,
    run_bootstrap,
    run_pow_baseline,
)
from bftboot.sim.report import Stats, render_timeseries_csv, write_json

NET = NetworkConfig()
SERVICE_MS = NET.transmission_ms(NET.announcement_bytes)


def small_config(**overrides):
    base = dict(node_count=40, endorser_count=5, seed=1)
    base.update(overrides)
    return SimConfig(**base)


def by_label(sim):
    return {ident.label: ident for ident in sim.identities + sim.joiners}


def test_all_honest_candidates_admitted():
    report = run_bootstrap(SimConfig(node_count=100, endorser_count=10, seed=1))
    assert report.ledger["active_records"] == 100
    assert report.ledger["records_total"] == 100
    assert report.ledger["failed_candidates"] == {}
    assert report.ledger["outcomes"] == {"accepted": 100}
    assert report.population["honest_nodes"] == 100
    assert report.messages["timeouts"] == 0
    assert all(row.status == "active" for row in report.rows)


def test_quorum_survives_minority_silence():
    # Exactly 3 of candidate 0's 12 endorsers go silent: 9 = threshold.
    config = SimConfig(node_count=100, endorser_count=12, seed=4)
    sim = Simulation(config)
    victim = sim.identities[0]
    for endorser in victim.endorsers[:3]:
        sim.node_kind[endorser] = "SILENT"
    sim.run()
    assert quorum_threshold(12) == 9
    assert victim.status == "active"
    assert victim.aggregate.vector.popcount == 9
    silenced = set(victim.endorsers[:3])
    signer_nodes = {victim.endorsers[j] for j in victim.aggregate.vector.indices()}
    assert signer_nodes.isdisjoint(silenced)


def test_quorum_lost_one_past_the_threshold():
    config = SimConfig(node_count=100, endorser_count=12, seed=4)
    sim = Simulation(config)
    victim = sim.identities[0]
    for endorser in victim.endorsers[:4]:
        sim.node_kind[endorser] = "SILENT"
    sim.run()
    assert victim.status == "timeout:quorum_unreachable"
    assert victim.aggregate is None
    assert sim.ledger.active_record(victim.pk_bytes) is None


def test_quorum_outcome_matches_honest_endorser_count():
    # Non-colluding fault kinds: admission succeeds iff responsive endorsers
    # reach the quorum threshold, in both directions.
    config = SimConfig(
        node_count=60, endorser_count=6, adversary_fraction=0.3,
        adversary_mix=(("SILENT", 1.0), ("INVALID_SIG", 1.0)), seed=8,
    )
    sim = Simulation(config)
    sim.run()
    threshold = quorum_threshold(6)
    statuses = {"active": 0, "timeout:quorum_unreachable": 0}
    for ident in sim.identities:
        responsive = sum(
            1 for e in ident.endorsers
            if sim.node_kind.get(e, "HONEST") not in ("SILENT", "INVALID_SIG")
        )
        if responsive >= threshold:
            assert ident.status == "active", ident.label
        else:
            assert ident.status == "timeout:quorum_unreachable", ident.label
        statuses[ident.status] += 1
    assert statuses["active"] > 0
    assert statuses["timeout:quorum_unreachable"] > 0


def test_invalid_signatures_never_counted():
    config = SimConfig(
        node_count=60, endorser_count=6, adversary_fraction=0.25,
        adversary_mix=(("INVALID_SIG", 1.0),), seed=3,
    )
    sim = Simulation(config)
    sim.run()
    assert sim.counters["invalid_responses"] > 0
    bad_nodes = {n for n, k in sim.node_kind.items() if k == "INVALID_SIG"}
    for ident in sim.identities:
        if ident.aggregate is None:
            continue
        signers = {ident.endorsers[j] for j in ident.aggregate.vector.indices()}
        assert signers.isdisjoint(bad_nodes), ident.label
    # No retries: a candidate is admitted exactly when its honest endorsers
    # alone can reach the quorum.
    threshold = quorum_threshold(6)
    expected_active = sum(
        1 for ident in sim.identities
        if sum(1 for e in ident.endorsers if e not in bad_nodes) >= threshold
    )
    assert sim.ledger.active_count() == expected_active
    assert 0 < expected_active < 60


def test_rogue_forgeries_always_rejected():
    for seed in range(40):
        config = SimConfig(
            node_count=12, endorser_count=4, adversary_fraction=0.25,
            adversary_mix=(("ROGUE_KEY", 1.0),), seed=seed,
        )
        sim = Simulation(config)
        sim.run()
        rogues = [i for i in sim.identities if i.kind == "ROGUE_KEY"]
        assert rogues
        for ident in rogues:
            assert ident.status == "rejected:verification_failed"
            assert sim.ledger.active_record(ident.pk_bytes) is None
        honest = [i for i in sim.identities if i.kind != "ROGUE_KEY"]
        assert all(i.status == "active" for i in honest)
        assert sim.ledger.active_count() == len(honest)


def test_sybil_deposit_linearity():
    config = SimConfig(
        node_count=30, endorser_count=4, adversary_fraction=0.3,
        adversary_mix=(("SYBIL_DUPLICATE", 1.0),), seed=6,
        sybil_identities_per_node=5,
    )
    sim = Simulation(config)
    sim.run()
    sybil_nodes = [n for n, k in sim.node_kind.items() if k == "SYBIL_DUPLICATE"]
    assert sybil_nodes
    per_token: dict = {}
    for ident in sim.identities:
        per_token.setdefault(ident.token, []).append(ident.status)
    for token, statuses in per_token.items():
        assert statuses.count("active") <= 1, token
    # One admission per deposit: actives equal nodes, not identities.
    assert sim.ledger.active_count() == 30
    assert len(sim.identities) == 30 + 4 * len(sybil_nodes)
    reused = sum(
        1 for i in sim.identities if i.status == "rejected:deposit_reused"
    )
    assert reused == 4 * len(sybil_nodes)


def test_work_units_exact_for_honest_run():
    # Fixed cost ledger per candidate: key generation (5), request digest (1),
    # five response verifications (2 pairings + hash + weighted key, 106 each),
    # final aggregate check over cached weighted keys (101).
    config = SimConfig(node_count=20, endorser_count=6, seed=2)
    sim = Simulation(config)
    sim.run()
    report = sim.build_report()
    per_candidate = report.work["candidate_units"]
    assert per_candidate["minimum"] == 637
    assert per_candidate["maximum"] == 637
    assert report.work["ledger_units_per_replica"] == 20 * 101
    costs = WorkUnitCosts()
    ops = report.work["op_totals"]
    assert report.work["total_units"] == costs.units(ops)


def test_direct_message_budget_honest():
    config = SimConfig(node_count=50, endorser_count=8, seed=5)
    sim = Simulation(config)
    sim.run()
    report = sim.build_report()
    # n requests plus one announcement per identity, no deviation.
    assert report.messages["direct_total"] == 50 * 9
    assert report.messages["direct_deviation"] == 0.0
    assert report.messages["direct_max_per_identity"] == 9
    assert report.messages["requests_sent"] == 400
    assert report.messages["responses_sent"] == 400


def test_timing_rows_ordered_and_bounded():
    config = SimConfig(node_count=40, endorser_count=5, seed=7,
                       announcement_mode="events")
    sim = Simulation(config)
    sim.run()
    report = sim.build_report()
    bound = config.network.delta_bound_ms(config.node_count)
    for ident in sim.identities:
        assert ident.start_ms <= config.start_jitter_ms
        assert ident.start_ms < ident.quorum_ms <= ident.announce_ms
        assert ident.delivered_ms - ident.announce_ms <= bound
        assert ident.resolved_ms > ident.announce_ms
        assert ident.status == "active"
    assert report.timing_ms["completion"] >= report.timing_ms["last_ledger_append"]


def test_analytic_matches_event_dissemination():
    analytic = Simulation(small_config(seed=13, announcement_mode="analytic"))
    events = Simulation(small_config(seed=13, announcement_mode="events"))
    analytic.run()
    events.run()
    a_rows = by_label(analytic)
    e_rows = by_label(events)
    assert a_rows.keys() == e_rows.keys()
    for label, a in a_rows.items():
        e = e_rows[label]
        assert a.announce_ms == e.announce_ms
        # Same arrival stream, one worst-case receiver queue against many
        # per-receiver queues: deliveries agree to within one service slot.
        assert abs(a.delivered_ms - e.delivered_ms) <= SERVICE_MS, label
    assert abs(analytic.last_delivery_ms - events.last_delivery_ms) <= SERVICE_MS


def test_backends_agree_on_full_report():
    base = dict(
        node_count=16, endorser_count=4, adversary_fraction=0.25,
        adversary_mix=(("SILENT", 1.0), ("INVALID_SIG", 1.0),
                       ("SYBIL_DUPLICATE", 1.0), ("ROGUE_KEY", 1.0)),
        seed=9, sybil_identities_per_node=3,
    )
    model = run_bootstrap(SimConfig(crypto_backend="model", **base))
    pairing = run_bootstrap(SimConfig(crypto_backend="pairing", **base))
    assert model.population == pairing.population
    assert model.timing_ms == pairing.timing_ms
    assert model.messages == pairing.messages
    assert model.work == pairing.work
    assert model.ledger == pairing.ledger
    for m_row, p_row in zip(model.rows, pairing.rows):
        assert m_row == p_row


def test_gossip_full_mesh_single_hop():
    delivered = gossip(0, 8, 1024, NET, seed=0, fanout=7)
    hop = NET.message_delay_ms(1024)
    assert delivered[0] == 0.0
    assert all(delivered[n] == hop for n in range(1, 8))
    assert hop == pytest.approx(100.32768)


def test_gossip_reaches_everyone_within_bound():
    for node_count in (16, 64):
        bound = NET.delta_bound_ms(node_count)
        for seed in range(30):
            delivered = gossip(3, node_count, NET.announcement_bytes, NET,
                               seed=seed, message_id="m")
            assert set(delivered) == set(range(node_count))
            worst = max(delivered.values())
            assert worst <= bound, (node_count, seed, worst, bound)


def test_gossip_deterministic():
    a = gossip(2, 32, 256, NET, seed=11, message_id="x")
    b = gossip(2, 32, 256, NET, seed=11, message_id="x")
    c = gossip(2, 32, 256, NET, seed=12, message_id="x")
    assert a == b
    assert a != c


def test_pow_trivial_difficulty():
    report = run_pow_baseline(difficulty=0, trials=5, seed=1)
    assert report.expected_hashes_per_solve == 1.0
    assert report.mean_hashes_per_solve == 1.0
    assert report.min_hashes == report.max_hashes == 1
    assert report.total_hashes == 5


def test_pow_mean_tracks_expected_hash_count():
    report = run_pow_baseline(difficulty=10, trials=60, seed=3)
    expected = 2.0 ** 10
    assert report.expected_hashes_per_solve == expected
    assert abs(report.mean_hashes_per_solve - expected) / expected < 0.25
    assert report.mean_solve_seconds == pytest.approx(
        report.mean_hashes_per_solve / report.hash_rate
    )
    assert report.work_units_per_solve == pytest.approx(
        report.mean_hashes_per_solve * WorkUnitCosts().hash
    )


def test_pow_difficulty_out_of_range():
    with pytest.raises(ValueError):
        run_pow_baseline(difficulty=-1, trials=3)
    with pytest.raises(ValueError):
        run_pow_baseline(difficulty=31, trials=3)
    with pytest.raises(ValueError):
        run_pow_baseline(difficulty=5, trials=0)


def test_reconfiguration_cost_scales_with_join_count():
    config = small_config(seed=3)
    none = measure_reconfiguration(config, join_count=0)
    assert none.joins == 0
    assert none.message_ratio < 0.01
    assert none.work_ratio == 0.0

    few = measure_reconfiguration(config, join_count=2)  # 5% of 40
    assert few.message_ratio < 0.25
    assert few.work_ratio < 0.25
    assert few.join_completion_ms > 0

    everyone = measure_reconfiguration(config, join_count=40)
    assert 0.9 < everyone.message_ratio < 1.2
    assert 0.9 < everyone.work_ratio < 1.2
    assert everyone.bootstrap_direct_messages == 40 * 6
    assert everyone.node_count == 40


def test_joiners_admitted_against_running_groups():
    config = small_config(seed=21)
    sim = Simulation(config)
    sim.run()
    phase = sim.run_joiners(3)
    assert phase["active"] == 3
    assert [i.status for i in sim.joiners] == ["active"] * 3
    assert sim.ledger.active_count() == 43
    assert sim.joiner_labels() == ("j0", "j1", "j2")


def test_same_seed_reproduces_report():
    config = small_config(seed=17)
    a = run_bootstrap(config)
    b = run_bootstrap(config)
    assert a.to_dict() == b.to_dict()
    assert [r for r in a.rows] == [r for r in b.rows]
    c = run_bootstrap(small_config(seed=18))
    assert a.to_dict() != c.to_dict()


def test_network_override_applies():
    slow = NetworkConfig(latency_ms=300.0)
    report = run_bootstrap(small_config(seed=2), network=slow)
    assert report.config["network"]["latency_ms"] == 300.0
    # Two request/response legs dominate: nothing can finish in under
    # four propagation delays minus jitter allowances.
    assert report.timing_ms["candidate_duration"]["minimum"] > 2 * 300.0


def test_config_validation_messages():
    with pytest.raises(ConfigInvalid):
        SimConfig(node_count=4, endorser_count=10).validate()
    with pytest.raises(ConfigInvalid):
        SimConfig(endorser_count=2).validate()
    with pytest.raises(ConfigInvalid):
        SimConfig(adversary_fraction=1.5).validate()
    with pytest.raises(ConfigInvalid):
        SimConfig(adversary_mix=(("NOISY", 1.0),)).validate()
    with pytest.raises(ConfigInvalid):
        SimConfig(crypto_backend="openssl").validate()
    with pytest.raises(ConfigInvalid):
        SimConfig.from_dict({"node_countt": 10})
    SimConfig().validate()


def test_threat_model_warning():
    hot = SimConfig(node_count=40, endorser_count=5, adversary_fraction=0.5)
    assert not hot.threat_model_conformant()
    assert any("1/3" in w for w in hot.warnings())
    cool = SimConfig(node_count=40, endorser_count=5, adversary_fraction=0.2)
    assert cool.threat_model_conformant()
    assert cool.warnings() == []


def test_stats_nearest_rank():
    stats = Stats.from_values([5.0, 1.0, 3.0, 2.0, 4.0])
    assert stats.count == 5
    assert stats.minimum == 1.0
    assert stats.maximum == 5.0
    assert stats.mean == 3.0
    assert stats.p50 == 3.0
    assert stats.p95 == 5.0
    empty = Stats.from_values([])
    assert empty.count == 0
    assert empty.mean == 0.0


def test_timeseries_csv_shape(tmp_path):
    config = small_config(seed=1, node_count=8, endorser_count=3)
    sim = Simulation(config)
    sim.run()
    report = sim.build_report()
    text = render_timeseries_csv(report)
    lines = text.strip().split("\n")
    assert lines[0].startswith("# manifest: {")
    assert lines[1] == "event_time_ms,event_type,node_id,identity"
    times = []
    for line in lines[2:]:
        cell = line.split(",")
        assert len(cell) == 4
        times.append(float(cell[0]))
    assert times == sorted(times)
    # One start, quorum, announce, delivery and resolution per identity.
    assert len(lines) - 2 == 5 * len(report.rows)

    out = tmp_path / "report.json"
    write_json(report, str(out))
    data = out.read_text()
    assert data.endswith("}\n")
    assert '"manifest"' in data


def test_report_manifest_contents():
    config = small_config(seed=33)
    report = run_bootstrap(config)
    manifest = report.manifest
    assert manifest.command == "simulate"
    assert manifest.seed == 33
    assert manifest.config_digest == config.digest()
    assert manifest.backend == "model"
    assert "report.json" in manifest.outputs
