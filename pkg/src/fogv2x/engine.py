"""Deterministic discrete-event core.

The queue orders events by ``(time, seq)``; ``seq`` is assigned at
scheduling time so equal-time events come out in FIFO order. Random
numbers come from :class:`RngStream` objects keyed by ``(seed, label)``.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Protocol


class EventKind(str, Enum):
    MOBILITY_STEP = "mobility-step"
    STREAM_TICK = "stream-tick"
    BSM_TICK = "bsm-tick"
    TX_COMPLETE = "tx-complete"
    LINK_ESTABLISHED = "link-established"
    HANDOVER_CHECK = "handover-check"
    CLOUD_SYNC = "cloud-sync"
    SIM_END = "sim-end"


@dataclass(frozen=True)
class Event:
    time: float
    seq: int
    kind: EventKind
    payload: Any = None


class CausalityError(ValueError):
    """An event was scheduled before the current simulated time."""


class SimulationError(RuntimeError):
    """A handler failed; carries the offending event."""

    def __init__(self, event: Event, cause: BaseException):
        super().__init__(
            f"handler for {event.kind.value} at t={event.time!r} (seq={event.seq}) failed: {cause!r}"
        )
        self.event = event
        self.cause = cause


class EventQueue:
    """Min-heap of events keyed by ``(time, seq)`` plus the simulated clock."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._next_seq = 0
        self.clock = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: float, kind: EventKind, payload: Any = None) -> Event:
        if not (time >= self.clock):  # also rejects NaN
            raise CausalityError(f"event at t={time!r} precedes clock {self.clock!r}")
        if time == float("inf"):
            raise CausalityError("event time must be finite")
        ev = Event(time, self._next_seq, kind, payload)
        self._next_seq += 1
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def next_event(self) -> Optional[Event]:
        if not self._heap:
            return None
        _, _, ev = heapq.heappop(self._heap)
        self.clock = ev.time
        return ev


def schedule(queue: EventQueue, time: float, kind: EventKind, payload: Any = None) -> EventQueue:
    queue.schedule(time, kind, payload)
    return queue


def next_event(queue: EventQueue) -> Optional[Event]:
    return queue.next_event()


class World(Protocol):
    queue: EventQueue

    def handle(self, event: Event) -> None: ...


def run_until(
    world: World,
    t_end: float,
    observer: Optional[Callable[[Event], None]] = None,
) -> int:
    """Process every queued event with ``time <= t_end``; return the count.

    Handler exceptions are re-raised as :class:`SimulationError` with the
    event attached. ``observer`` is called after each event, which is how
    tests inspect state at event boundaries.
    """
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    queue = world.queue
    processed = 0
    while True:
        t = queue.peek_time()
        if t is None or t > t_end:
            break
        ev = queue.next_event()
        try:
            world.handle(ev)
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(ev, exc) from exc
        processed += 1
        if observer is not None:
            observer(ev)
    return processed


def _derive_seed(seed: int, label: str) -> int:
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    h = hashlib.sha256(seed.to_bytes(8, "little") + label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


@dataclass
class RngStream:
    """Independent random substream for one consumer.

    The Mersenne Twister state is seeded from ``sha256(seed || label)``, so
    two labels never share draws and creating a new consumer leaves every
    existing stream untouched. ``random.Random`` output is specified
    bit-for-bit by CPython, which keeps runs portable.
    """

    seed: int
    stream_label: str
    _gen: random.Random = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._gen = random.Random(_derive_seed(self.seed, self.stream_label))

    def random(self) -> float:
        return self._gen.random()

    def uniform(self, lo: float, hi: float) -> float:
        if lo == hi:
            return lo
        return lo + (hi - lo) * self._gen.random()

    def bernoulli(self, p: float) -> bool:
        return self._gen.random() < p

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.stream_label}/{label}")
