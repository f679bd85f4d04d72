"""Deterministic discrete-event core: virtual time, ordered dispatch, port wiring.

Time is an integer nanosecond count (the modeled CPU runs at 1 GHz, so one
cycle is one nanosecond). Events are totally ordered by (fire_time, sequence);
the sequence number is assigned at scheduling time, which makes dispatch order
independent of heap internals and therefore reproducible.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

# Headroom guard: runs are specified to stay below 10^15 ns.
MAX_SIM_NS = 10**15


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled in the past (a simulation bug)."""


@dataclass(order=True)
class Event:
    fire_time: int
    sequence: int
    action: Callable[..., None] = field(compare=False)
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class Port:
    """One-way link between two components with a fixed delivery delay.

    Messages sent through one port arrive in FIFO order because the engine
    breaks fire-time ties by scheduling sequence.
    """

    source: str
    sink: str
    fixed_delay: int = 0

    def __post_init__(self):
        if self.fixed_delay < 0:
            raise ValueError("port delay must be >= 0")


class Engine:
    """Single-threaded event engine. One instance owns all component state."""

    def __init__(self):
        self.now = 0
        self._queue: list[Event] = []
        self._seq = 0
        self.dispatched = 0

    def schedule(self, fire_time: int, action: Callable[..., None], payload: Any = None) -> Event:
        if fire_time < self.now:
            raise SchedulingError(f"event at t={fire_time} scheduled in the past (now={self.now})")
        if fire_time > MAX_SIM_NS:
            raise SchedulingError(f"event at t={fire_time} exceeds simulation horizon")
        ev = Event(int(fire_time), self._seq, action, payload)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_after(self, delay: int, action: Callable[..., None], payload: Any = None) -> Event:
        return self.schedule(self.now + int(delay), action, payload)

    def send(self, port: Port, action: Callable[..., None], payload: Any = None) -> Event:
        return self.schedule(self.now + port.fixed_delay, action, payload)

    def run_until(self, deadline: int) -> int:
        """Process every event with fire_time <= deadline.

        Returns the fire time of the last processed event, or the deadline if
        nothing was processed.
        """
        last = None
        while self._queue and self._queue[0].fire_time <= deadline:
            ev = heapq.heappop(self._queue)
            assert ev.fire_time >= self.now, "event queue went backwards"
            self.now = ev.fire_time
            ev.action(ev.payload)
            self.dispatched += 1
            last = ev.fire_time
        self.now = max(self.now, deadline if last is None else last)
        return deadline if last is None else last

    def run(self) -> int:
        """Drain the queue completely; returns the final virtual time."""
        return self.run_until(MAX_SIM_NS) if self._queue else self.now

    def pending(self) -> int:
        return len(self._queue)
