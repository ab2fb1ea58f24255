"""Seeded gossip dissemination over a random fanout overlay.

One message spreads by repeated push rounds: every node holding the rumor
pushes it to a fresh seeded random peer sample of size ``fanout`` each
round, until the whole network holds it.  Per-hop delay is latency plus
size/bandwidth; later copies at an already-delivered node are dropped.
Delivery order between two messages from the same origin is not
guaranteed, only the per-message delivery bound is.
"""

from __future__ import annotations

from ..rng import SplitMix64, derive_seed
from .config import NetworkConfig

MAX_ROUNDS = 100


def gossip(origin: int, node_count: int, size_bytes: int,
           net: NetworkConfig, seed: int,
           message_id: str = "", fanout: int | None = None,
           start_ms: float = 0.0) -> dict:
    """First-delivery time per node for one gossiped message.

    Returns {node: milliseconds}; the origin is delivered at ``start_ms``.
    A fanout of node_count - 1 degenerates to a full mesh (single hop).
    """
    if not 0 <= origin < node_count:
        raise ValueError("origin must be a node index")
    if fanout is None:
        fanout = net.gossip_fanout
    if fanout < 1:
        raise ValueError("fanout must be positive")
    hop_ms = net.message_delay_ms(size_bytes)
    delivered = {origin: start_ms}

    for round_index in range(MAX_ROUNDS):
        if len(delivered) == node_count:
            break
        arrival = start_ms + (round_index + 1) * hop_ms
        fresh = []
        for sender in sorted(delivered):
            rng = SplitMix64(
                derive_seed(seed, "gossip", message_id, sender, round_index)
            )
            peers = [p for p in range(node_count) if p != sender]
            for peer in rng.sample(peers, min(fanout, len(peers))):
                if peer not in delivered:
                    fresh.append(peer)
        for peer in fresh:
            delivered.setdefault(peer, arrival)  # duplicates suppressed
    else:
        # unreachable in practice; cover every node rather than hang
        arrival = start_ms + MAX_ROUNDS * hop_ms
        for node in range(node_count):
            delivered.setdefault(node, arrival)
    return delivered
