"""Bootstrap simulation: every node runs the endorsement flow end to end.

Each node is simultaneously a candidate (it wants a membership record) and an
endorser (other candidates draw it from the group partition).  The event flow
per candidate identity is

    start -> request to each assigned endorser -> endorser evaluates and
    signs -> responses return -> candidate verifies and collects to quorum ->
    aggregate + self-check -> announcement -> ledger verification and append

with a timeout cancelling identities stuck below quorum.  Processing delays
are derived from the metered group-operation work of the handler that just
ran (units times ``work_unit_time_ms``), so reported op counts and simulated
time cannot drift apart.  Each node has one serial compute queue shared by
its candidate and endorser roles.

The network model is point-to-point latency plus size/bandwidth transmission
for requests and responses.  Announcements fan out through a gossip overlay
whose relay cost is not modeled; the bottleneck is receiver-side ingestion,
modeled as a per-receiver inbound FIFO serialized at line rate.  In
"analytic" mode the delivery times come from the single-queue recursion
D_i = max(A_i, D_{i-1}) + service over the emission-sorted announcement
stream (every receiver sees the same stream minus its own announcement,
which can only help, so the recursion is the worst receiver).  In "events"
mode every delivery is simulated individually; the two agree when inbound
queues do not saturate, and the event mode is the reference for small runs.

Adversary kinds set node behavior: SILENT endorsers drop requests,
INVALID_SIG endorsers return garbage signature points, SYBIL_DUPLICATE nodes
run several identities against one deposit, ROGUE_KEY nodes skip requesting
and directly announce a key-cancellation forgery.  Adversarial nodes still
act as honest endorsers for others unless their kind says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .. import protocol, selection
from ..protocol import (
    CandidateIdentity,
    GlobalLedger,
    LedgerRecord,
    PerformancePolicy,
    ProtocolError,
    TokenRegistry,
)
from ..rng import SplitMix64, derive_seed
from ..scheme import AggregateEndorsement, EndorserVector
from .config import SimConfig
from .engine import build_engine, junk_signature_point
from .events import EventLoop
from .report import (
    BootstrapReport,
    IdentityRow,
    ReconfigurationReport,
    Stats,
    make_manifest,
)


@dataclass
class SimIdentity:
    label: str
    node: int
    kind: str
    keypair: object
    pk_bytes: bytes
    token: str
    endorsers: tuple
    key_set: object
    request: object = None
    message: bytes = b""
    state: object = None
    aggregate: object = None
    start_ms: float = 0.0
    quorum_ms: float | None = None
    announce_ms: float | None = None
    delivered_ms: float | None = None
    resolved_ms: float | None = None
    status: str = "pending"

    @property
    def expected_direct(self) -> int:
        # a forger sends no requests, only its announcement
        if self.kind == "ROGUE_KEY":
            return 1
        return len(self.endorsers) + 1


class Simulation:
    """One seeded run of the bootstrap protocol over a node population."""

    LEDGER_OWNER = "ledger"

    def __init__(self, config: SimConfig):
        self.config = config.validate()
        self.scheme, self.backend, self.meter = build_engine(config)
        self.policy = PerformancePolicy(min_deposit=config.min_deposit)
        self.matrix = {
            "cpu_score": 2.0 * self.policy.min_cpu_score,
            "bandwidth_mbps": max(self.policy.min_bandwidth_mbps,
                                  config.network.bandwidth_mbps),
            "storage_gb": 10.0 * self.policy.min_storage_gb,
        }
        self.registry = TokenRegistry()
        self.ledger = GlobalLedger()

        seed = config.seed
        groups = selection.partition_candidates(
            range(config.node_count), config.group_count,
            derive_seed(seed, "groups"),
        )
        self.epoch = protocol.EpochState(
            number=0, groups=tuple(groups), seed=derive_seed(seed, "epoch")
        )
        self.assign_seed = derive_seed(seed, "endorsers")
        self.node_kind = self._assign_adversaries()
        self.node_keypair = {}
        self.identities: list[SimIdentity] = []
        self.joiners: list[SimIdentity] = []
        self._build_identities()

        self.loop = EventLoop()
        self.node_busy: dict = {}
        self.inbound_busy: dict = {}
        self.announce_emits: list = []
        self.direct: dict = {}
        self.last_delivery_ms = 0.0
        self.last_append_ms = 0.0
        self.ledger_outcomes: dict = {}
        self.counters = {
            "requests_sent": 0,
            "responses_sent": 0,
            "rejected_evaluations": 0,
            "dropped_requests": 0,
            "invalid_responses": 0,
            "duplicate_responses": 0,
            "late_responses": 0,
            "announcements": 0,
            "announcement_deliveries": 0,
            "timeouts": 0,
        }

    # -- population ----------------------------------------------------------

    def _assign_adversaries(self) -> dict:
        config = self.config
        count = round(config.adversary_fraction * config.node_count)
        if count == 0:
            return {}
        mix = [(kind, w) for kind, w in config.adversary_mix if w > 0]
        total_weight = sum(w for _, w in mix)
        shares = [count * w / total_weight for _, w in mix]
        baseline = [math.floor(s) for s in shares]
        leftover = count - sum(baseline)
        by_fraction = sorted(
            range(len(mix)), key=lambda i: (baseline[i] - shares[i], i)
        )
        for i in by_fraction[:leftover]:
            baseline[i] += 1
        rng = SplitMix64(derive_seed(config.seed, "adversaries"))
        chosen = rng.sample(list(range(config.node_count)), count)
        kinds = {}
        pos = 0
        for (kind, _), n in zip(mix, baseline):
            for node in chosen[pos:pos + n]:
                kinds[node] = kind
            pos += n
        return kinds

    def _new_keypair(self, label: str):
        rng = SplitMix64(derive_seed(self.config.seed, "key", label))
        with self.backend.owned_by(label):
            return self.scheme.key_generate(rng)

    def _make_identity(self, label: str, node: int, kind: str, token: str,
                       keypair, assignment) -> SimIdentity:
        key_set = self.scheme.make_key_set(
            [self.node_keypair[e].public for e in assignment.endorsers]
        )
        return SimIdentity(
            label=label,
            node=node,
            kind=kind,
            keypair=keypair,
            pk_bytes=bytes(self.backend.g2_to_bytes(keypair.public)),
            token=token,
            endorsers=assignment.endorsers,
            key_set=key_set,
        )

    def _build_identities(self) -> None:
        config = self.config
        extra_keys: dict = {}
        for node in range(config.node_count):
            self.node_keypair[node] = self._new_keypair(f"n{node}")
            if self.node_kind.get(node) == "SYBIL_DUPLICATE":
                for j in range(1, config.sybil_identities_per_node):
                    label = f"n{node}s{j}"
                    extra_keys[label] = (node, self._new_keypair(label))

        for node in range(config.node_count):
            kind = self.node_kind.get(node, "HONEST")
            token = f"tok-{node}"
            keypair = self.node_keypair[node]
            self.registry.register(
                token, config.deposit_amount,
                bytes(self.backend.g2_to_bytes(keypair.public)),
            )
            assignment = selection.assign_endorsers(
                node, self.epoch.groups, self.assign_seed
            )
            self.identities.append(
                self._make_identity(f"n{node}", node, kind, token, keypair,
                                    assignment)
            )
            if kind == "SYBIL_DUPLICATE":
                for j in range(1, config.sybil_identities_per_node):
                    label = f"n{node}s{j}"
                    _, kp = extra_keys[label]
                    assignment = selection.mid_epoch_assign(
                        label, self.epoch.groups, self.assign_seed
                    )
                    self.identities.append(
                        self._make_identity(label, node, kind, token, kp,
                                            assignment)
                    )

    # -- helpers -------------------------------------------------------------

    def _work_since(self, owner, before_units: int) -> float:
        delta = self.meter.owner_units(owner) - before_units
        return delta * self.config.work_unit_time_ms

    def _count_direct(self, ident: SimIdentity, n: int = 1) -> None:
        self.direct[ident.label] = self.direct.get(ident.label, 0) + n

    # -- event handlers ------------------------------------------------------

    def _start_identity(self, ident: SimIdentity) -> None:
        now = self.loop.now
        ident.start_ms = now
        if ident.kind == "ROGUE_KEY":
            self._start_rogue(ident)
            return
        net = self.config.network
        before = self.meter.owner_units(ident.label)
        with self.backend.owned_by(ident.label):
            try:
                ident.request = protocol.build_request(
                    self.scheme,
                    CandidateIdentity(ident.keypair, ident.token),
                    self.matrix, self.registry, self.epoch,
                )
            except ProtocolError as exc:
                ident.status = f"rejected:{type(exc).__name__}"
                return
            self.meter.add(ident.label, "hash")  # request digest assembly
            ident.message = protocol.endorsement_message(ident.request)
            ident.state = protocol.new_collection(ident.key_set)
        proc = self._work_since(ident.label, before)
        send_gap = net.transmission_ms(net.request_bytes)
        for pos in range(len(ident.endorsers)):
            departure = now + proc + (pos + 1) * send_gap
            self.loop.schedule(
                departure + net.message_delay_ms(net.request_bytes),
                self._request_arrive, ident, pos,
            )
            self.counters["requests_sent"] += 1
            self._count_direct(ident)
        self.loop.schedule(now + self.config.protocol_timeout_ms,
                           self._timeout, ident)

    def _start_rogue(self, ident: SimIdentity) -> None:
        """Forge an aggregate over the assigned endorsers plus a rogue key."""
        now = self.loop.now
        scheme = self.scheme
        before = self.meter.owner_units(ident.label)
        with self.backend.owned_by(ident.label):
            request = protocol.EndorsementRequest(
                candidate_pk=ident.pk_bytes,
                performance_matrix=tuple(sorted(self.matrix.items())),
                token_address=ident.token,
                epoch=self.epoch.number,
            )
            ident.message = protocol.endorsement_message(request)
            alpha = SplitMix64(
                derive_seed(self.config.seed, "rogue", ident.label)
            ).random_scalar(self.backend.ORDER)
            n = len(ident.endorsers)
            victim_vector = EndorserVector.from_indices(
                range(n), n, ident.key_set.digest
            )
            rogue_pk, forged = scheme.rogue_key_attempt(
                alpha, ident.key_set, victim_vector, ident.message
            )
            announced_set = scheme.make_key_set(
                tuple(ident.key_set.keys) + (rogue_pk,)
            )
            ident.aggregate = AggregateEndorsement(
                forged,
                EndorserVector.from_indices(range(n + 1), n + 1,
                                            announced_set.digest),
                ident.message,
            )
            ident.key_set = announced_set
        proc = self._work_since(ident.label, before)
        self._emit_announcement(ident, now + proc)

    def _request_arrive(self, ident: SimIdentity, pos: int) -> None:
        endorser = ident.endorsers[pos]
        kind = self.node_kind.get(endorser, "HONEST")
        if kind == "SILENT":
            self.counters["dropped_requests"] += 1
            return
        now = self.loop.now
        start = max(now, self.node_busy.get(endorser, 0.0))
        before = self.meter.owner_units(endorser)
        sig = None
        with self.backend.owned_by(endorser):
            self.meter.add(endorser, "hash")  # admission check digest
            verdict = protocol.evaluate_request(ident.request, self.registry,
                                                self.policy)
            if verdict.approved:
                if kind == "INVALID_SIG":
                    point = junk_signature_point(
                        self.backend, f"{endorser}:{ident.label}".encode()
                    )
                    sig = protocol.Signature(point, pos)
                else:
                    sig = protocol.endorse(
                        self.scheme, self.node_keypair[endorser],
                        ident.request, ident.key_set, pos,
                    )
        end = start + self._work_since(endorser, before)
        self.node_busy[endorser] = end
        if sig is None:
            self.counters["rejected_evaluations"] += 1
            return
        self.counters["responses_sent"] += 1
        net = self.config.network
        self.loop.schedule(end + net.message_delay_ms(net.response_bytes),
                           self._response_arrive, ident, sig)

    def _response_arrive(self, ident: SimIdentity, sig) -> None:
        if ident.status != "pending":
            self.counters["late_responses"] += 1
            return
        now = self.loop.now
        start = max(now, self.node_busy.get(ident.node, 0.0))
        before = self.meter.owner_units(ident.label)
        finalized = False
        with self.backend.owned_by(ident.label):
            try:
                ident.state = protocol.collect(
                    self.scheme, ident.state, sig, ident.message,
                    ident.key_set,
                )
            except protocol.DuplicateEndorser:
                self.counters["duplicate_responses"] += 1
            except protocol.BadSignature:
                self.counters["invalid_responses"] += 1
            else:
                if ident.state.reached():
                    aggregate = protocol.try_finalize(
                        self.scheme, ident.state, ident.message
                    )
                    apk = self.scheme.aggregate_public_keys(
                        aggregate.vector, ident.key_set
                    )
                    if self.scheme.verify(aggregate, apk):
                        ident.aggregate = aggregate
                        finalized = True
                    else:
                        ident.status = "failed:self_check"
        end = start + self._work_since(ident.label, before)
        self.node_busy[ident.node] = end
        if finalized:
            ident.quorum_ms = now
            self._emit_announcement(ident, end)

    def _emit_announcement(self, ident: SimIdentity, t_emit: float) -> None:
        ident.announce_ms = t_emit
        ident.status = "announced"
        self.counters["announcements"] += 1
        self._count_direct(ident)
        self.announce_emits.append((t_emit, ident))
        record = LedgerRecord(
            candidate_pk=ident.pk_bytes,
            aggregate=ident.aggregate,
            endorser_set=ident.key_set,
            token_address=ident.token,
            epoch=self.epoch.number,
        )
        net = self.config.network
        self.loop.schedule(
            t_emit + net.message_delay_ms(net.announcement_bytes),
            self._ledger_append, ident, record,
        )
        if self.config.announcement_mode == "events":
            arrive = t_emit + net.latency_ms
            for receiver in range(self.config.node_count):
                if receiver != ident.node:
                    self.loop.schedule(arrive, self._deliver_announcement,
                                       ident, receiver)

    def _deliver_announcement(self, ident: SimIdentity, receiver: int) -> None:
        net = self.config.network
        start = max(self.loop.now, self.inbound_busy.get(receiver, 0.0))
        end = start + net.transmission_ms(net.announcement_bytes)
        self.inbound_busy[receiver] = end
        self.counters["announcement_deliveries"] += 1
        ident.delivered_ms = max(ident.delivered_ms or 0.0, end)
        self.last_delivery_ms = max(self.last_delivery_ms, end)

    def _ledger_append(self, ident: SimIdentity, record: LedgerRecord) -> None:
        # verification work is charged to one replica's bucket; every replica
        # repeats it, so the report labels the bucket per-replica
        with self.backend.owned_by(self.LEDGER_OWNER):
            try:
                self.ledger.append(self.scheme, record, self.registry)
            except protocol.VerificationFailed:
                outcome = "verification_failed"
            except protocol.DepositReused:
                outcome = "deposit_reused"
            except protocol.DuplicateActive:
                outcome = "duplicate_active"
            except protocol.InvalidToken:
                outcome = "invalid_token"
            else:
                outcome = "accepted"
        self.ledger_outcomes[outcome] = self.ledger_outcomes.get(outcome, 0) + 1
        ident.status = "active" if outcome == "accepted" else f"rejected:{outcome}"
        ident.resolved_ms = self.loop.now
        self.last_append_ms = max(self.last_append_ms, self.loop.now)

    def _timeout(self, ident: SimIdentity) -> None:
        if ident.status == "pending":
            ident.status = "timeout:quorum_unreachable"
            ident.resolved_ms = self.loop.now
            self.counters["timeouts"] += 1

    # -- dissemination (analytic mode) ----------------------------------------

    def _disseminate_analytic(self, emits) -> None:
        net = self.config.network
        service = net.transmission_ms(net.announcement_bytes)
        done = 0.0
        for t_emit, ident in sorted(emits, key=lambda e: (e[0], e[1].label)):
            done = max(t_emit + net.latency_ms, done) + service
            ident.delivered_ms = done
            self.counters["announcement_deliveries"] += (
                self.config.node_count - 1
            )
        self.last_delivery_ms = max(self.last_delivery_ms, done)

    # -- phases ---------------------------------------------------------------

    def _schedule_starts(self, identities) -> None:
        for ident in identities:
            jitter = SplitMix64(
                derive_seed(self.config.seed, "jitter", ident.label)
            ).random() * self.config.start_jitter_ms
            self.loop.schedule(jitter, self._start_identity, ident)

    def run(self) -> None:
        self._schedule_starts(self.identities)
        self.loop.run()
        if self.config.announcement_mode == "analytic":
            self._disseminate_analytic(self.announce_emits)

    def run_joiners(self, join_count: int) -> dict:
        """Mid-epoch join phase on a fresh clock; returns phase counters."""
        units_before = self.meter.total_units()
        direct_before = sum(self.direct.values())
        emits_mark = len(self.announce_emits)
        self.loop = EventLoop()
        self.node_busy = {}
        self.inbound_busy = {}

        for i in range(join_count):
            label = f"j{i}"
            token = f"join-tok-{i}"
            keypair = self._new_keypair(label)
            self.registry.register(
                token, self.config.deposit_amount,
                bytes(self.backend.g2_to_bytes(keypair.public)),
            )
            assignment = selection.mid_epoch_assign(
                label, self.epoch.groups, self.assign_seed
            )
            # joiners are new machines: each gets its own compute queue
            self.joiners.append(
                self._make_identity(label, self.config.node_count + i,
                                    "HONEST", token, keypair, assignment)
            )

        phase_delivery = 0.0
        if join_count:
            self._schedule_starts(self.joiners)
            self.loop.run()
            emits = self.announce_emits[emits_mark:]
            if self.config.announcement_mode == "analytic":
                self._disseminate_analytic(emits)
            phase_delivery = max(
                (i.delivered_ms or 0.0 for i in self.joiners), default=0.0
            )
        return {
            "work_units": self.meter.total_units() - units_before,
            "direct": sum(self.direct.values()) - direct_before,
            "completion_ms": phase_delivery,
            "active": sum(1 for i in self.joiners if i.status == "active"),
        }

    # -- reporting ------------------------------------------------------------

    def joiner_labels(self) -> tuple:
        return tuple(ident.label for ident in self.joiners)

    def build_report(self) -> BootstrapReport:
        config = self.config
        everyone = self.identities + self.joiners
        manifest = make_manifest(config, "simulate",
                                 ("report.json", "timeseries.csv"))
        adversary_nodes: dict = {}
        for kind in self.node_kind.values():
            adversary_nodes[kind] = adversary_nodes.get(kind, 0) + 1
        population = {
            "nodes": config.node_count,
            "identities": len(everyone),
            "honest_nodes": config.node_count - len(self.node_kind),
            "adversary_nodes": dict(sorted(adversary_nodes.items())),
            "threat_model_conformant": config.threat_model_conformant(),
            "warnings": config.warnings(),
        }

        durations = [
            ident.announce_ms - ident.start_ms
            for ident in everyone if ident.announce_ms is not None
        ]
        deliveries = [
            ident.delivered_ms for ident in everyone
            if ident.delivered_ms is not None
        ]
        completion = max(
            [self.last_delivery_ms, self.last_append_ms] + deliveries
        )
        timing = {
            "completion": completion,
            "last_ledger_append": self.last_append_ms,
            "delta_bound": config.network.delta_bound_ms(config.node_count),
            "candidate_duration": Stats.from_values(durations).to_dict(),
            "announcement_delivery": Stats.from_values(deliveries).to_dict(),
        }

        direct_total = sum(self.direct.values())
        expected_direct = sum(ident.expected_direct for ident in everyone)
        deviation = (
            (direct_total - expected_direct) / expected_direct
            if expected_direct else 0.0
        )
        messages = dict(self.counters)
        messages.update({
            "direct_total": direct_total,
            "expected_direct": expected_direct,
            "direct_deviation": deviation,
            "direct_max_per_identity": max(self.direct.values(), default=0),
        })

        candidate_units = [
            self.meter.owner_units(ident.label) for ident in everyone
        ]
        active_units = [
            self.meter.owner_units(ident.label)
            for ident in everyone if ident.status == "active"
        ]
        endorser_units = [
            self.meter.owner_units(node) for node in range(config.node_count)
        ]
        work = {
            "op_totals": dict(self.meter.totals),
            "total_units": self.meter.total_units(),
            "candidate_units": Stats.from_values(candidate_units).to_dict(),
            "active_candidate_units": Stats.from_values(active_units).to_dict(),
            "endorser_units": Stats.from_values(endorser_units).to_dict(),
            "ledger_units_per_replica": self.meter.owner_units(
                self.LEDGER_OWNER
            ),
        }

        failed: dict = {}
        for ident in everyone:
            if ident.status != "active":
                failed[ident.status] = failed.get(ident.status, 0) + 1
        ledger = {
            "active_records": self.ledger.active_count(),
            "records_total": len(self.ledger.records),
            "outcomes": dict(sorted(self.ledger_outcomes.items())),
            "failed_candidates": dict(sorted(failed.items())),
        }

        rows = [
            IdentityRow(
                identity=ident.label,
                node=ident.node,
                kind=ident.kind,
                start_ms=ident.start_ms,
                quorum_ms=ident.quorum_ms,
                announce_ms=ident.announce_ms,
                delivered_ms=ident.delivered_ms,
                resolved_ms=ident.resolved_ms,
                status=ident.status,
            )
            for ident in everyone
        ]
        return BootstrapReport(
            manifest=manifest,
            config=config.to_dict(),
            population=population,
            timing_ms=timing,
            messages=messages,
            work=work,
            ledger=ledger,
            events_processed=self.loop.processed,
            rows=rows,
        )


def run_bootstrap(config: SimConfig, network=None) -> BootstrapReport:
    """Run one seeded bootstrap simulation and summarize it."""
    if network is not None:
        config = config.with_overrides(network=network)
    sim = Simulation(config)
    sim.run()
    return sim.build_report()


def measure_reconfiguration(config: SimConfig, join_count: int,
                            network=None) -> ReconfigurationReport:
    """Compare a mid-epoch join wave against a full bootstrap.

    The bootstrap phase admits all nodes; the join phase then runs
    ``join_count`` fresh identities against the existing groups and closes
    with the epoch reshuffle broadcast (one origin message, gossip fanout
    delivers it network-wide).  Ratios are join-phase cost over bootstrap
    cost for direct messages and for metered work.
    """
    if join_count < 0:
        raise ValueError("join count cannot be negative")
    if network is not None:
        config = config.with_overrides(network=network)
    sim = Simulation(config)
    sim.run()
    bootstrap_direct = sum(sim.direct.values())
    bootstrap_units = sim.meter.total_units()
    phase = sim.run_joiners(join_count)

    # epoch boundary: fold joiners into the next partition
    protocol.epoch_reconfigure(sim.epoch, sim.joiner_labels())

    net = config.network
    broadcast_ms = net.message_delay_ms(net.announcement_bytes)
    reconfig_direct = phase["direct"] + 1  # the reshuffle broadcast itself
    return ReconfigurationReport(
        manifest=make_manifest(config, "reconfigure"),
        joins=join_count,
        node_count=config.node_count,
        reconfig_direct_messages=reconfig_direct,
        bootstrap_direct_messages=bootstrap_direct,
        message_ratio=reconfig_direct / bootstrap_direct,
        reconfig_work_units=phase["work_units"],
        bootstrap_work_units=bootstrap_units,
        work_ratio=phase["work_units"] / bootstrap_units,
        broadcast_delivery_ms=broadcast_ms,
        join_completion_ms=max(phase["completion_ms"], broadcast_ms),
    )
