"""Endorsement group selection and failure probability analysis.

Candidates are partitioned into n+1 groups by seeded shuffle; a candidate's
endorsers are one uniformly drawn member from each of the n groups it does
not belong to.  Endorsement of a candidate fails when the faulty endorsers
among its n draws reach n - floor(2n/3), i.e. when the remaining honest
endorsers cannot reach the floor(2n/3) + 1 quorum.

``failure_probability`` is the closed-form tail expression used to size
groups.  Note its exponents n/3 + i and 2n/3 - i are evaluated as real
numbers, not integers, for all n; the reference group-size tables are
computed with that convention, and the golden tests pin it.

``monte_carlo_group_failure`` simulates the group process directly
(hypergeometric adversary placement, per-group endorser draws) with numpy.
Work is chunked with one derived seed per chunk, so a run is reproducible
from (config seed, trials, chunk_size).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import SplitMix64, derive_seed


class SelectionError(ValueError):
    pass


class TooFewNodes(SelectionError):
    pass


class UnknownCandidate(SelectionError):
    pass


class BadRatio(SelectionError):
    pass


@dataclass(frozen=True)
class SelectionConfig:
    total_candidates: int
    group_count: int
    adversary_ratio: float
    seed: int

    def validate(self) -> None:
        problems = []
        if self.group_count < 2:
            problems.append("group_count must be at least 2")
        if self.total_candidates < self.group_count:
            problems.append("total_candidates must cover every group")
        if not 0.0 <= self.adversary_ratio <= 0.5:
            problems.append("adversary_ratio must lie in [0, 1/2]")
        if problems:
            raise SelectionError("; ".join(problems))


@dataclass(frozen=True)
class CandidateGroup:
    index: int  # 1-based
    members: tuple


@dataclass(frozen=True)
class EndorsementGroup:
    candidate: object
    endorsers: tuple
    source_groups: tuple  # 1-based indices of the groups drawn from


@dataclass(frozen=True)
class MonteCarloResult:
    trials: int
    failures: int
    rate: float
    stderr: float
    ci_low: float
    ci_high: float
    endorser_count: int
    fault_threshold: int


def partition_candidates(nodes: Sequence, group_count: int,
                         seed: int) -> list[CandidateGroup]:
    """Seeded shuffle, then contiguous slices differing in size by at most 1."""
    if group_count < 2:
        raise TooFewNodes("need at least 2 groups")
    nodes = list(nodes)
    if len(nodes) < group_count:
        raise TooFewNodes(
            f"{len(nodes)} nodes cannot fill {group_count} groups"
        )
    SplitMix64(derive_seed(seed, "partition")).shuffle(nodes)
    base, rem = divmod(len(nodes), group_count)
    groups = []
    pos = 0
    for idx in range(1, group_count + 1):
        size = base + (1 if idx <= rem else 0)
        groups.append(CandidateGroup(idx, tuple(nodes[pos:pos + size])))
        pos += size
    return groups


def _draw_one_per_group(candidate, groups, skip_indices, seed, tag):
    rng = SplitMix64(derive_seed(seed, tag, repr(candidate)))
    endorsers = []
    sources = []
    for group in groups:
        if group.index in skip_indices:
            continue
        if not group.members:
            raise TooFewNodes(f"group {group.index} is empty")
        endorsers.append(group.members[rng.randrange(len(group.members))])
        sources.append(group.index)
    return EndorsementGroup(candidate, tuple(endorsers), tuple(sources))


def assign_endorsers(candidate, groups: Sequence[CandidateGroup],
                     seed: int) -> EndorsementGroup:
    """One uniform endorser from each group the candidate is not in."""
    own = None
    for group in groups:
        if candidate in group.members:
            own = group.index
            break
    if own is None:
        raise UnknownCandidate(f"candidate {candidate!r} is not partitioned")
    return _draw_one_per_group(candidate, groups, {own}, seed, "assign")


def mid_epoch_assign(new_node, groups: Sequence[CandidateGroup],
                     seed: int) -> EndorsementGroup:
    """Endorsers for a node joining between reconfigurations.

    The joiner belongs to no group yet, so one of the existing groups is
    skipped uniformly and the remaining ones each contribute one endorser;
    group membership itself is not modified until the next epoch.
    """
    for group in groups:
        if new_node in group.members:
            raise SelectionError(f"node {new_node!r} is already partitioned")
    rng = SplitMix64(derive_seed(seed, "join-skip", repr(new_node)))
    skip = groups[rng.randrange(len(groups))].index
    return _draw_one_per_group(new_node, groups, {skip}, seed, "join")


def fault_threshold(endorser_count: int) -> int:
    """Smallest number of faulty endorsers that breaks the quorum."""
    return endorser_count - (2 * endorser_count) // 3


def failure_probability(endorser_count: int, adversary_ratio: float) -> float:
    """Closed-form endorsement failure bound for n endorsers.

    Sum over i of p^(n/3 + i) * (1-p)^(2n/3 - i) for i = 1 .. floor(2n/3),
    with real-valued exponents.
    """
    if not 0.0 < adversary_ratio <= 0.5:
        raise BadRatio("adversary ratio must lie in (0, 1/2]")
    if endorser_count < 1:
        raise SelectionError("endorser count must be positive")
    n = endorser_count
    p = adversary_ratio
    q = 1.0 - p
    terms = [
        math.pow(p, n / 3.0 + i) * math.pow(q, 2.0 * n / 3.0 - i)
        for i in range(1, (2 * n) // 3 + 1)
    ]
    return math.fsum(terms)


def min_group_count(target: float, adversary_ratio: float) -> int:
    """Smallest n from which the failure bound stays below target.

    For n < 3 the closed form degenerates (the sum is empty or flat), so the
    scan keeps going until it is in the strictly decreasing regime and only
    then trusts a value below target.
    """
    if not 0.0 < target <= 1.0:
        raise SelectionError("target probability must lie in (0, 1]")
    last_exceeding = 0
    prev = None
    below_and_falling = 0
    n = 0
    while below_and_falling < 3:
        n += 1
        if n > 100_000:
            raise SelectionError("no group size satisfies the target")
        fp = failure_probability(n, adversary_ratio)
        if fp >= target:
            last_exceeding = n
            below_and_falling = 0
        elif n >= 4 and prev is not None and fp < prev:
            below_and_falling += 1
        prev = fp
    return last_exceeding + 1 if last_exceeding else 1


def expected_groups_to_first_failure(probability: float) -> float:
    """Mean number of independent endorsement groups until one fails."""
    if not 0.0 < probability <= 1.0:
        raise SelectionError("probability must lie in (0, 1]")
    return 1.0 / probability


def monte_carlo_group_failure(config: SelectionConfig, trials: int,
                              chunk_size: int = 200_000) -> MonteCarloResult:
    """Empirical endorsement failure rate under the group process.

    Each trial places round(ratio * N) adversaries uniformly among the N
    partitioned nodes, picks the candidate's group proportionally to group
    size, draws one endorser per foreign group, and records failure when
    the faulty draws reach the quorum-breaking threshold.
    """
    config.validate()
    if trials < 1:
        raise SelectionError("need at least one trial")
    total = config.total_candidates
    g = config.group_count
    n = g - 1
    adversaries = round(config.adversary_ratio * total)
    base, rem = divmod(total, g)
    sizes = np.array([base + 1 if i < rem else base for i in range(g)],
                     dtype=np.int64)
    threshold = fault_threshold(n)

    failures = 0
    done = 0
    chunk_index = 0
    while done < trials:
        m = min(chunk_size, trials - done)
        rng = np.random.Generator(
            np.random.PCG64(derive_seed(config.seed, "mc-chunk", chunk_index))
        )
        counts = rng.multivariate_hypergeometric(
            sizes, adversaries, size=m, method="marginals"
        )
        own = rng.choice(g, size=m, p=sizes / total)
        faulty_prob = counts / sizes
        draws = rng.random((m, g)) < faulty_prob
        rows = np.arange(m)
        faulty = draws.sum(axis=1) - draws[rows, own]
        failures += int((faulty >= threshold).sum())
        done += m
        chunk_index += 1

    rate = failures / trials
    stderr = math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)
    half = 1.96 * stderr
    return MonteCarloResult(
        trials=trials,
        failures=failures,
        rate=rate,
        stderr=stderr,
        ci_low=max(rate - half, 0.0),
        ci_high=min(rate + half, 1.0),
        endorser_count=n,
        fault_threshold=threshold,
    )
