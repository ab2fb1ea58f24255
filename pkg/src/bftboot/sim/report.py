"""Run reports, provenance manifests, and file writers.

Every artifact the simulator emits carries the same manifest header (tool
version, seed, config digest, backend) so a result file can always be traced
back to the exact run that produced it.  Nothing here records wall-clock
time: outputs are a pure function of config and seed, and identical runs
must produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .. import __version__


@dataclass(frozen=True)
class RunManifest:
    tool_version: str
    command: str
    seed: int
    config_digest: str
    backend: str
    outputs: tuple = ()

    def to_dict(self) -> dict:
        return asdict(self)


def make_manifest(config, command: str, outputs=()) -> RunManifest:
    return RunManifest(
        tool_version=__version__,
        command=command,
        seed=config.seed,
        config_digest=config.digest(),
        backend=config.crypto_backend,
        outputs=tuple(outputs),
    )


@dataclass(frozen=True)
class Stats:
    count: int
    minimum: float
    mean: float
    p50: float
    p95: float
    maximum: float

    @classmethod
    def from_values(cls, values) -> "Stats":
        values = sorted(values)
        if not values:
            return cls(0, 0.0, 0.0, 0.0, 0.0, 0.0)
        n = len(values)

        def rank(q: float) -> float:
            return values[min(n - 1, round(q * (n - 1)))]

        return cls(
            count=n,
            minimum=values[0],
            mean=sum(values) / n,
            p50=rank(0.5),
            p95=rank(0.95),
            maximum=values[-1],
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IdentityRow:
    identity: str
    node: int
    kind: str
    start_ms: float
    quorum_ms: float | None
    announce_ms: float | None
    delivered_ms: float | None
    resolved_ms: float | None
    status: str


@dataclass
class BootstrapReport:
    manifest: RunManifest
    config: dict
    population: dict
    timing_ms: dict
    messages: dict
    work: dict
    ledger: dict
    events_processed: int
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "manifest": self.manifest.to_dict(),
            "config": self.config,
            "population": self.population,
            "timing_ms": self.timing_ms,
            "messages": self.messages,
            "work": self.work,
            "ledger": self.ledger,
            "events_processed": self.events_processed,
        }


@dataclass
class ReconfigurationReport:
    manifest: RunManifest
    joins: int
    node_count: int
    reconfig_direct_messages: int
    bootstrap_direct_messages: int
    message_ratio: float
    reconfig_work_units: int
    bootstrap_work_units: int
    work_ratio: float
    broadcast_delivery_ms: float
    join_completion_ms: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["manifest"] = self.manifest.to_dict()
        return out


@dataclass
class PowBaselineReport:
    manifest: RunManifest
    difficulty: int
    trials: int
    hash_rate: float
    expected_hashes_per_solve: float
    mean_hashes_per_solve: float
    min_hashes: int
    max_hashes: int
    total_hashes: int
    mean_solve_seconds: float
    work_units_per_solve: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["manifest"] = self.manifest.to_dict()
        return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_json(report, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_timeseries_csv(report: BootstrapReport) -> str:
    """Flat event log: one row per lifecycle event of each identity."""
    events = []
    for row in report.rows:
        events.append((row.start_ms, "start", row))
        if row.quorum_ms is not None:
            events.append((row.quorum_ms, "quorum", row))
        if row.announce_ms is not None:
            events.append((row.announce_ms, "announce", row))
        if row.delivered_ms is not None:
            events.append((row.delivered_ms, "delivered", row))
        if row.resolved_ms is not None:
            events.append((row.resolved_ms, row.status, row))
    events.sort(key=lambda e: (e[0], e[2].identity, e[1]))
    lines = [
        "# manifest: " + json.dumps(report.manifest.to_dict(),
                                    sort_keys=True, separators=(",", ":")),
        "event_time_ms,event_type,node_id,identity",
    ]
    for at_ms, event_type, row in events:
        lines.append(",".join([
            _fmt(at_ms), event_type, str(row.node), row.identity
        ]))
    return "\n".join(lines) + "\n"


def write_timeseries_csv(report: BootstrapReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_timeseries_csv(report))
