"""Endorsement protocol state machines: requests, collection, ledger, epochs.

The flow for one candidate: build a request referencing an unspent deposit,
have each assigned endorser evaluate it against the performance policy and
sign the endorsement message, collect signatures until the floor(2n/3) + 1
quorum, then append the aggregate to the global ledger.  The ledger is the
arbiter: it verifies the aggregate against the announced endorser set,
enforces one membership per deposit (Sybil identities sharing a deposit race
for a single record) and at most one ACTIVE record per identity.

Deposit ownership is recorded but deliberately not enforced at evaluation
time; in a permissionless setting endorsers can check that a deposit exists
and is unspent, while reuse across identities is only caught at the ledger,
where the spend happens atomically with the append.

Epoch bookkeeping is minimal: a request log for per-epoch rate limiting,
pending joins, and reshuffling of all members at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import selection
from .encoding import pack_fields
from .rng import derive_seed
from .scheme import (
    AggregateEndorsement,
    DigestMismatch,
    EndorsementScheme,
    EndorserVector,
    KeyPair,
    PublicKeySet,
    Signature,
)

STATUS_ACTIVE = "ACTIVE"
STATUS_REVOKED = "REVOKED"


class ProtocolError(Exception):
    pass


class NoDeposit(ProtocolError):
    pass


class AlreadyRequestedThisEpoch(ProtocolError):
    pass


class InvalidToken(ProtocolError):
    pass


class BadSignature(ProtocolError):
    pass


class DuplicateEndorser(ProtocolError):
    pass


class VerificationFailed(ProtocolError):
    pass


class DepositReused(ProtocolError):
    pass


class DuplicateActive(ProtocolError):
    pass


class NotActive(ProtocolError):
    pass


# ---------------------------------------------------------------------------
# Deposits
# ---------------------------------------------------------------------------


@dataclass
class Deposit:
    amount: int
    owner_pk: bytes
    spent: bool = False


class TokenRegistry:
    """Stub of the external deposit chain: register, resolve, spend, release."""

    def __init__(self):
        self._deposits: dict[str, Deposit] = {}

    def register(self, address: str, amount: int, owner_pk: bytes) -> None:
        if address in self._deposits:
            raise InvalidToken(f"token {address!r} already registered")
        self._deposits[address] = Deposit(int(amount), bytes(owner_pk))

    def resolve(self, address: str) -> Deposit | None:
        return self._deposits.get(address)

    def mark_spent(self, address: str) -> None:
        deposit = self._deposits.get(address)
        if deposit is None:
            raise InvalidToken(f"unknown token {address!r}")
        if deposit.spent:
            raise DepositReused(f"token {address!r} already spent")
        deposit.spent = True

    def release(self, address: str) -> None:
        deposit = self._deposits.get(address)
        if deposit is None:
            raise InvalidToken(f"unknown token {address!r}")
        deposit.spent = False


@dataclass(frozen=True)
class PerformancePolicy:
    min_cpu_score: float = 1.0
    min_bandwidth_mbps: float = 25.0
    min_storage_gb: float = 1.0
    min_deposit: int = 1

    def required(self) -> dict:
        return {
            "cpu_score": self.min_cpu_score,
            "bandwidth_mbps": self.min_bandwidth_mbps,
            "storage_gb": self.min_storage_gb,
        }


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CandidateIdentity:
    keypair: KeyPair
    token_address: str


@dataclass(frozen=True)
class EndorsementRequest:
    candidate_pk: bytes
    performance_matrix: tuple  # sorted (metric, value) pairs
    token_address: str
    epoch: int


@dataclass(frozen=True)
class Verdict:
    approved: bool
    reason: str | None = None


@dataclass
class EpochState:
    number: int
    groups: tuple
    seed: int
    request_log: set = field(default_factory=set)
    pending_joins: tuple = ()

    def members(self) -> tuple:
        out = []
        for group in self.groups:
            out.extend(group.members)
        return tuple(out)


def build_request(scheme: EndorsementScheme, identity: CandidateIdentity,
                  performance_matrix: Mapping[str, float],
                  registry: TokenRegistry,
                  epoch_state: EpochState) -> EndorsementRequest:
    """Assemble and log a request; honest candidates call this once per epoch."""
    deposit = registry.resolve(identity.token_address)
    if deposit is None or deposit.spent:
        raise NoDeposit(f"no unspent deposit at {identity.token_address!r}")
    pk_bytes = bytes(scheme.backend.g2_to_bytes(identity.keypair.public))
    log_key = (pk_bytes, epoch_state.number)
    if log_key in epoch_state.request_log:
        raise AlreadyRequestedThisEpoch(
            "identity already submitted a request this epoch"
        )
    epoch_state.request_log.add(log_key)
    return EndorsementRequest(
        candidate_pk=pk_bytes,
        performance_matrix=tuple(sorted(performance_matrix.items())),
        token_address=identity.token_address,
        epoch=epoch_state.number,
    )


def evaluate_request(request: EndorsementRequest, registry: TokenRegistry,
                     policy: PerformancePolicy) -> Verdict:
    """Endorser-side admission check.

    Unknown tokens raise InvalidToken (the reference itself is malformed);
    failing any admission rule returns a REJECT verdict with the reason.
    """
    deposit = registry.resolve(request.token_address)
    if deposit is None:
        raise InvalidToken(f"unknown token {request.token_address!r}")
    if deposit.spent:
        return Verdict(False, "spent_deposit")
    if deposit.amount < policy.min_deposit:
        return Verdict(False, "insufficient_deposit")
    matrix = dict(request.performance_matrix)
    for metric, minimum in policy.required().items():
        if matrix.get(metric, 0.0) < minimum:
            return Verdict(False, f"below_minimum:{metric}")
    return Verdict(True)


def endorsement_message(request: EndorsementRequest) -> bytes:
    """Bytes signed by endorsers: binds key, deposit, and epoch."""
    return pack_fields(
        b"endorse",
        request.candidate_pk,
        request.token_address.encode("utf-8"),
        request.epoch.to_bytes(8, "big"),
    )


def exit_message(candidate_pk: bytes, token_address: str, epoch: int) -> bytes:
    return pack_fields(
        b"exit",
        candidate_pk,
        token_address.encode("utf-8"),
        epoch.to_bytes(8, "big"),
    )


def endorse(scheme: EndorsementScheme, keypair: KeyPair,
            request: EndorsementRequest, key_set: PublicKeySet,
            signer_index: int) -> Signature:
    return scheme.sign(keypair, endorsement_message(request), key_set,
                       signer_index)


# ---------------------------------------------------------------------------
# Signature collection
# ---------------------------------------------------------------------------


def quorum_threshold(endorser_count: int) -> int:
    return (2 * endorser_count) // 3 + 1


@dataclass(frozen=True)
class CollectionState:
    vector: EndorserVector
    signatures: tuple  # Signature tuple ordered by arrival
    threshold: int

    @property
    def count(self) -> int:
        return len(self.signatures)

    def reached(self) -> bool:
        return self.count >= self.threshold


def new_collection(key_set: PublicKeySet,
                   threshold: int | None = None) -> CollectionState:
    n = len(key_set)
    return CollectionState(
        vector=EndorserVector.empty(n, key_set.digest),
        signatures=(),
        threshold=quorum_threshold(n) if threshold is None else threshold,
    )


def collect(scheme: EndorsementScheme, state: CollectionState,
            sig: Signature, message: bytes,
            key_set: PublicKeySet) -> CollectionState:
    """Fold one endorsement into the collection, verifying it first."""
    if not 0 <= sig.signer_index < len(state.vector.bits):
        raise BadSignature("signer index outside the endorser set")
    if state.vector.bits[sig.signer_index]:
        raise DuplicateEndorser(
            f"endorser {sig.signer_index} already contributed"
        )
    if not scheme.verify_single(sig, message, key_set):
        raise BadSignature(f"signature from endorser {sig.signer_index}")
    return CollectionState(
        vector=state.vector.with_bit(sig.signer_index),
        signatures=state.signatures + (sig,),
        threshold=state.threshold,
    )


def try_finalize(scheme: EndorsementScheme, state: CollectionState,
                 message: bytes) -> AggregateEndorsement | None:
    if not state.reached():
        return None
    return scheme.aggregate_signatures(state.vector, state.signatures, message)


# ---------------------------------------------------------------------------
# Global ledger
# ---------------------------------------------------------------------------


@dataclass
class LedgerRecord:
    candidate_pk: bytes
    aggregate: AggregateEndorsement
    endorser_set: PublicKeySet
    token_address: str
    epoch: int
    status: str = STATUS_ACTIVE

    def revoke(self) -> None:
        if self.status != STATUS_ACTIVE:
            raise NotActive("only ACTIVE records can be revoked")
        self.status = STATUS_REVOKED


class GlobalLedger:
    """Append-only record list; status may only step ACTIVE -> REVOKED."""

    def __init__(self):
        self.records: list[LedgerRecord] = []
        self._active: dict[bytes, LedgerRecord] = {}

    def active_record(self, candidate_pk: bytes) -> LedgerRecord | None:
        return self._active.get(bytes(candidate_pk))

    def active_count(self) -> int:
        return len(self._active)

    def append(self, scheme: EndorsementScheme, record: LedgerRecord,
               registry: TokenRegistry) -> int:
        """Verify, enforce deposit linearity and uniqueness, then append."""
        n = len(record.endorser_set)
        if record.aggregate.vector.popcount < quorum_threshold(n):
            raise VerificationFailed("endorsement quorum not reached")
        try:
            apk = scheme.aggregate_public_keys(
                record.aggregate.vector, record.endorser_set
            )
        except DigestMismatch as exc:
            raise VerificationFailed(str(exc)) from exc
        if not scheme.verify(record.aggregate, apk):
            raise VerificationFailed("aggregate endorsement does not verify")
        deposit = registry.resolve(record.token_address)
        if deposit is None:
            raise InvalidToken(f"unknown token {record.token_address!r}")
        if deposit.spent:
            raise DepositReused(
                f"deposit {record.token_address!r} already backs a record"
            )
        if record.candidate_pk in self._active:
            raise DuplicateActive("identity already has an ACTIVE record")
        registry.mark_spent(record.token_address)
        self.records.append(record)
        self._active[record.candidate_pk] = record
        return len(self.records) - 1

    def revoke(self, candidate_pk: bytes, registry: TokenRegistry) -> None:
        record = self._active.pop(bytes(candidate_pk), None)
        if record is None:
            raise NotActive("no ACTIVE record for this identity")
        record.revoke()
        registry.release(record.token_address)

    def export_lines(self, scheme: EndorsementScheme) -> list[str]:
        import json

        lines = []
        for record in self.records:
            lines.append(json.dumps({
                "candidate_pk": record.candidate_pk.hex(),
                "aggregate": scheme.aggregate_to_bytes(record.aggregate).hex(),
                "endorser_set": scheme.key_set_to_bytes(record.endorser_set).hex(),
                "token_address": record.token_address,
                "epoch": record.epoch,
                "status": record.status,
            }, sort_keys=True, separators=(",", ":")))
        return lines


def parse_ledger_line(scheme: EndorsementScheme, line: str) -> LedgerRecord:
    import json

    obj = json.loads(line)
    return LedgerRecord(
        candidate_pk=bytes.fromhex(obj["candidate_pk"]),
        aggregate=scheme.aggregate_from_bytes(bytes.fromhex(obj["aggregate"])),
        endorser_set=scheme.key_set_from_bytes(
            bytes.fromhex(obj["endorser_set"])
        ),
        token_address=obj["token_address"],
        epoch=int(obj["epoch"]),
        status=obj["status"],
    )


def check_record(scheme: EndorsementScheme,
                 record: LedgerRecord) -> tuple[bool, str]:
    """Re-verify an exported record: quorum and aggregate signature."""
    n = len(record.endorser_set)
    if record.aggregate.vector.popcount < quorum_threshold(n):
        return False, "quorum_not_reached"
    try:
        apk = scheme.aggregate_public_keys(
            record.aggregate.vector, record.endorser_set
        )
    except DigestMismatch:
        return False, "vector_set_mismatch"
    if not scheme.verify(record.aggregate, apk):
        return False, "signature_invalid"
    return True, "ok"


# ---------------------------------------------------------------------------
# Exit and reconfiguration
# ---------------------------------------------------------------------------


def begin_exit(scheme: EndorsementScheme, ledger: GlobalLedger,
               candidate_node, candidate_pk: bytes,
               epoch_state: EpochState) -> tuple:
    """Pick a fresh endorsement group for an exit and build its message.

    Returns (record, endorsement_group, message).  The caller runs collection
    over the group (honest drivers can use process_exit) and then calls
    finalize_exit with the aggregate.
    """
    record = ledger.active_record(candidate_pk)
    if record is None:
        raise NotActive("no ACTIVE record for this identity")
    group = selection.assign_endorsers(
        candidate_node, epoch_state.groups,
        derive_seed(epoch_state.seed, "exit", epoch_state.number),
    )
    message = exit_message(candidate_pk, record.token_address,
                           epoch_state.number)
    return record, group, message


def finalize_exit(scheme: EndorsementScheme, ledger: GlobalLedger,
                  record: LedgerRecord, aggregate: AggregateEndorsement,
                  key_set: PublicKeySet, registry: TokenRegistry) -> None:
    """Validate an exit aggregate and flip the record to REVOKED."""
    n = len(key_set)
    if aggregate.vector.popcount < quorum_threshold(n):
        raise VerificationFailed("exit quorum not reached")
    try:
        apk = scheme.aggregate_public_keys(aggregate.vector, key_set)
    except DigestMismatch as exc:
        raise VerificationFailed(str(exc)) from exc
    if not scheme.verify(aggregate, apk):
        raise VerificationFailed("exit endorsement does not verify")
    ledger.revoke(record.candidate_pk, registry)


def process_exit(scheme: EndorsementScheme, ledger: GlobalLedger,
                 candidate_node, candidate_pk: bytes,
                 epoch_state: EpochState, registry: TokenRegistry,
                 keypair_of: Callable) -> AggregateEndorsement:
    """Full honest exit: fresh group, quorum collection, revocation."""
    record, group, message = begin_exit(
        scheme, ledger, candidate_node, candidate_pk, epoch_state
    )
    keypairs = [keypair_of(node) for node in group.endorsers]
    key_set = scheme.make_key_set([kp.public for kp in keypairs])
    state = new_collection(key_set)
    for index, keypair in enumerate(keypairs):
        if state.reached():
            break
        sig = scheme.sign(keypair, message, key_set, index)
        state = collect(scheme, state, sig, message, key_set)
    aggregate = try_finalize(scheme, state, message)
    if aggregate is None:
        raise VerificationFailed("exit quorum not reached")
    finalize_exit(scheme, ledger, record, aggregate, key_set, registry)
    return aggregate


def epoch_reconfigure(epoch_state: EpochState,
                      joiners: Sequence = ()) -> EpochState:
    """Advance one epoch: fold in joiners, reshuffle groups, reset the log."""
    members = list(epoch_state.members())
    members.extend(epoch_state.pending_joins)
    members.extend(joiners)
    number = epoch_state.number + 1
    groups = selection.partition_candidates(
        members, len(epoch_state.groups),
        derive_seed(epoch_state.seed, "epoch", number),
    )
    return EpochState(
        number=number,
        groups=tuple(groups),
        seed=epoch_state.seed,
        request_log=set(),
        pending_joins=(),
    )
