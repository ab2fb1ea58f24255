"""Proof-of-work admission baseline.

The comparison point for endorsement-based admission: a joiner must find a
nonce whose sha256 falls below a difficulty threshold, costing an expected
2^difficulty hash evaluations per admission.  The hashes are actually
computed (no shortcut sampling), so measured counts carry real variance;
the simulated solve time divides them by a configured hash rate instead of
timing this machine.
"""

from __future__ import annotations

import hashlib
import json

from .. import __version__
from ..rng import derive_seed
from .config import WorkUnitCosts
from .report import PowBaselineReport, RunManifest

MAX_DIFFICULTY = 30  # 2^30 expected hashes per trial is already minutes


def solve_hash_count(prefix: bytes, difficulty: int) -> int:
    """Hashes evaluated until sha256(prefix || counter) clears the target."""
    threshold = 1 << (256 - difficulty)
    sha256 = hashlib.sha256
    counter = 0
    while True:
        digest = sha256(prefix + counter.to_bytes(8, "big")).digest()
        counter += 1
        if int.from_bytes(digest, "big") < threshold:
            return counter


def run_pow_baseline(difficulty: int, trials: int, seed: int = 0,
                     hash_rate: float = 26214.4,
                     costs: WorkUnitCosts | None = None) -> PowBaselineReport:
    if not 0 <= difficulty <= MAX_DIFFICULTY:
        raise ValueError(
            f"difficulty must lie in [0, {MAX_DIFFICULTY}]"
        )
    if trials < 1:
        raise ValueError("need at least one trial")
    if hash_rate <= 0:
        raise ValueError("hash_rate must be positive")
    costs = costs or WorkUnitCosts()

    counts = []
    for trial in range(trials):
        prefix = derive_seed(seed, "pow", trial).to_bytes(8, "big")
        counts.append(solve_hash_count(prefix, difficulty))

    total = sum(counts)
    mean = total / trials
    params = {
        "difficulty": difficulty,
        "trials": trials,
        "seed": seed,
        "hash_rate": hash_rate,
    }
    digest = hashlib.sha256(
        json.dumps(params, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    manifest = RunManifest(
        tool_version=__version__,
        command="pow-baseline",
        seed=seed,
        config_digest=digest,
        backend="sha256",
    )
    return PowBaselineReport(
        manifest=manifest,
        difficulty=difficulty,
        trials=trials,
        hash_rate=hash_rate,
        expected_hashes_per_solve=float(1 << difficulty),
        mean_hashes_per_solve=mean,
        min_hashes=min(counts),
        max_hashes=max(counts),
        total_hashes=total,
        mean_solve_seconds=mean / hash_rate,
        work_units_per_solve=mean * costs.hash,
    )
