"""Crypto engine selection and work metering for the simulator.

The simulator runs the same scheme code over either the real pairing backend
or the algebraic model backend; a counting proxy sits between the scheme and
the backend and attributes operation counts to whichever owner (node id or a
named bucket) is active when the call happens.  Scheduled processing delays
are derived from the metered work of the handler that just ran, so the time
model and the op counts can never drift apart.
"""

from __future__ import annotations

from contextlib import contextmanager

from .. import bls12381, modelgroup
from ..scheme import EndorsementScheme
from .config import SimConfig

OPS = ("pairing", "exponentiation", "hash", "group_op")


class WorkMeter:
    def __init__(self, costs):
        self.costs = costs
        self.by_owner: dict = {}
        self.totals: dict = {op: 0 for op in OPS}

    def add(self, owner, op: str, count: int = 1) -> None:
        self.totals[op] += count
        if owner is not None:
            bucket = self.by_owner.setdefault(owner, {o: 0 for o in OPS})
            bucket[op] += count

    def owner_counts(self, owner) -> dict:
        return dict(self.by_owner.get(owner, {o: 0 for o in OPS}))

    def owner_units(self, owner) -> int:
        return self.costs.units(self.owner_counts(owner))

    def total_units(self) -> int:
        return self.costs.units(self.totals)


class CountingBackend:
    """Delegating proxy that meters group operations per owner."""

    def __init__(self, backend, meter: WorkMeter):
        self._backend = backend
        self._meter = meter
        self._owner = None

    def __getattr__(self, attr):
        return getattr(self._backend, attr)

    @contextmanager
    def owned_by(self, owner):
        previous = self._owner
        self._owner = owner
        try:
            yield
        finally:
            self._owner = previous

    def g1_mul(self, pt, k):
        self._meter.add(self._owner, "exponentiation")
        return self._backend.g1_mul(pt, k)

    def g2_mul(self, pt, k):
        self._meter.add(self._owner, "exponentiation")
        return self._backend.g2_mul(pt, k)

    def g1_add(self, a, b):
        self._meter.add(self._owner, "group_op")
        return self._backend.g1_add(a, b)

    def g2_add(self, a, b):
        self._meter.add(self._owner, "group_op")
        return self._backend.g2_add(a, b)

    def hash_to_g1(self, message, dst=None):
        self._meter.add(self._owner, "hash")
        if dst is None:
            return self._backend.hash_to_g1(message)
        return self._backend.hash_to_g1(message, dst)

    def pairing_product_is_one(self, pairs):
        pairs = list(pairs)
        live = sum(1 for a, b in pairs if a is not None and b is not None)
        self._meter.add(self._owner, "pairing", live)
        return self._backend.pairing_product_is_one(pairs)


def build_engine(config: SimConfig) -> tuple[EndorsementScheme, CountingBackend, WorkMeter]:
    base = modelgroup if config.crypto_backend == "model" else bls12381
    meter = WorkMeter(config.work_units)
    backend = CountingBackend(base, meter)
    return EndorsementScheme(backend), backend, meter


def junk_signature_point(backend, tag: bytes):
    """A valid-looking group element that verifies against nothing."""
    return backend.hash_to_g1(b"bogus|" + tag)
