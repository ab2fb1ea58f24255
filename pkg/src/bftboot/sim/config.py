"""Simulation configuration with validation and canonical serialization.

A config fully determines a run: same config and seed give byte-identical
reports.  Canonical JSON (sorted keys, no whitespace variation) feeds the
config digest recorded in every output's manifest header.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

ADVERSARY_KINDS = ("SILENT", "INVALID_SIG", "SYBIL_DUPLICATE", "ROGUE_KEY")


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    latency_ms: float = 100.0
    bandwidth_mbps: float = 25.0
    request_bytes: int = 512
    response_bytes: int = 128
    announcement_bytes: int = 256
    gossip_fanout: int = 8
    delta_ms: float | None = None  # derived when None

    def transmission_ms(self, size_bytes: int) -> float:
        return size_bytes * 8.0 / (self.bandwidth_mbps * 1000.0)

    def message_delay_ms(self, size_bytes: int) -> float:
        return self.latency_ms + self.transmission_ms(size_bytes)

    def delta_bound_ms(self, node_count: int) -> float:
        """Gossip delivery bound: relay depth plus worst-case inbound backlog.

        Push gossip reaches every node in about log_f(N) rounds; three
        extra rounds absorb the stochastic tail of the random overlay.
        """
        if self.delta_ms is not None:
            return self.delta_ms
        trans = self.transmission_ms(self.announcement_bytes)
        fanout = max(self.gossip_fanout, 2)
        hops = math.ceil(
            math.log(max(node_count, 2)) / math.log(fanout)
        ) + 3
        backlog = node_count * trans
        return hops * (self.latency_ms + trans) + 1.05 * backlog + 10.0


@dataclass(frozen=True)
class WorkUnitCosts:
    pairing: int = 50
    exponentiation: int = 5
    hash: int = 1
    group_op: int = 0

    def units(self, counts: dict) -> int:
        return (
            self.pairing * counts.get("pairing", 0)
            + self.exponentiation * counts.get("exponentiation", 0)
            + self.hash * counts.get("hash", 0)
            + self.group_op * counts.get("group_op", 0)
        )


@dataclass(frozen=True)
class SimConfig:
    node_count: int = 250
    endorser_count: int = 20
    adversary_fraction: float = 0.0
    adversary_mix: tuple = (("SILENT", 1.0),)
    seed: int = 0
    crypto_backend: str = "model"  # "model" or "pairing"
    announcement_mode: str = "analytic"  # "analytic" or "events"
    sybil_identities_per_node: int = 5
    work_unit_time_ms: float = 0.05
    start_jitter_ms: float = 1.0
    protocol_timeout_ms: float = 2000.0
    deposit_amount: int = 100
    min_deposit: int = 1
    pow_hash_rate: float = 26214.4  # simulated hashes per second
    network: NetworkConfig = field(default_factory=NetworkConfig)
    work_units: WorkUnitCosts = field(default_factory=WorkUnitCosts)

    @property
    def group_count(self) -> int:
        return self.endorser_count + 1

    def validate(self) -> "SimConfig":
        problems = []
        if self.node_count < self.group_count:
            problems.append(
                f"node_count {self.node_count} cannot fill "
                f"{self.group_count} groups"
            )
        if self.endorser_count < 3:
            problems.append("endorser_count must be at least 3")
        if not 0.0 <= self.adversary_fraction <= 1.0:
            problems.append("adversary_fraction must lie in [0, 1]")
        mix = dict(self.adversary_mix)
        if any(kind not in ADVERSARY_KINDS for kind in mix):
            problems.append(f"adversary kinds must be among {ADVERSARY_KINDS}")
        if any(weight < 0 for weight in mix.values()):
            problems.append("adversary mix weights must be nonnegative")
        if self.adversary_fraction > 0 and sum(mix.values()) <= 0:
            problems.append("adversary mix weights must not all be zero")
        if self.crypto_backend not in ("model", "pairing"):
            problems.append("crypto_backend must be 'model' or 'pairing'")
        if self.announcement_mode not in ("analytic", "events"):
            problems.append("announcement_mode must be 'analytic' or 'events'")
        if self.sybil_identities_per_node < 2:
            problems.append("sybil nodes need at least 2 identities")
        if self.work_unit_time_ms < 0 or self.start_jitter_ms < 0:
            problems.append("timing parameters must be nonnegative")
        if self.network.latency_ms < 0 or self.network.bandwidth_mbps <= 0:
            problems.append("network parameters out of range")
        if self.pow_hash_rate <= 0:
            problems.append("pow_hash_rate must be positive")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def warnings(self) -> list[str]:
        out = []
        if self.adversary_fraction > 1.0 / 3.0:
            out.append(
                "adversary_fraction exceeds 1/3: outside the threat model, "
                "stress run only"
            )
        return out

    def threat_model_conformant(self) -> bool:
        return self.adversary_fraction <= 1.0 / 3.0

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        out = asdict(self)
        out["adversary_mix"] = {k: v for k, v in self.adversary_mix}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        if "network" in data and isinstance(data["network"], dict):
            data["network"] = NetworkConfig(**data["network"])
        if "work_units" in data and isinstance(data["work_units"], dict):
            data["work_units"] = WorkUnitCosts(**data["work_units"])
        if "adversary_mix" in data and isinstance(data["adversary_mix"], dict):
            data["adversary_mix"] = tuple(
                sorted(data["adversary_mix"].items())
            )
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {sorted(unknown)}")
        return cls(**data).validate()

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs).validate()


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    return SimConfig.from_dict(data)
