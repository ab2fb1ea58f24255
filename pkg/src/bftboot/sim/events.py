"""Minimal deterministic discrete-event loop.

Events are (time, sequence, callback) triples on a heap; the sequence number
breaks time ties in scheduling order, which keeps runs reproducible without
relying on callback identity.
"""

from __future__ import annotations

import heapq
from typing import Callable


class EventLoop:
    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = 0.0
        self.processed = 0

    def schedule(self, time: float, callback: Callable, *args) -> None:
        if time < self.now:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._heap, (time, self._seq, callback, args))
        self._seq += 1

    def run(self, horizon: float | None = None) -> None:
        while self._heap:
            time, _, callback, args = self._heap[0]
            if horizon is not None and time > horizon:
                break
            heapq.heappop(self._heap)
            self.now = time
            callback(*args)
            self.processed += 1
