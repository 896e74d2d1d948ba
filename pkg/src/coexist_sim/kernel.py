"""Deterministic discrete-event kernel.

Time is an integer count of nanoseconds. Events with equal fire times are
delivered in insertion order. Random draws come from named streams keyed
by ``(node, purpose)`` so that one subsystem's draw count never perturbs
another's sequence.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Any, Callable, Hashable

NS = 1
US = 1_000
MS = 1_000_000
S = 1_000_000_000


def us(x: float) -> int:
    return round(x * US)


def ms(x: float) -> int:
    return round(x * MS)


def seconds(x: float) -> int:
    return round(x * S)


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class SimEvent:
    __slots__ = ("fire_at", "seq", "kind", "target", "callback", "args", "cancelled", "fired")

    def __init__(self, fire_at, seq, kind, target, callback, args):
        self.fire_at = fire_at
        self.seq = seq
        self.kind = kind
        self.target = target
        self.callback = callback
        self.args = args
        self.cancelled = False
        self.fired = False

    @property
    def payload(self):
        return self.args

    def __lt__(self, other: "SimEvent") -> bool:
        if self.fire_at != other.fire_at:
            return self.fire_at < other.fire_at
        return self.seq < other.seq

    def __repr__(self) -> str:
        return f"SimEvent(t={self.fire_at}, seq={self.seq}, kind={self.kind!r}, target={self.target!r})"


class RngStream(random.Random):
    """Mersenne-Twister stream seeded from ``(seed, stream_id)``.

    The derived seed goes through blake2b so it does not depend on
    Python's per-process string hashing.
    """

    def __new__(cls, seed: int, stream_id: tuple):
        return super().__new__(cls)

    def __init__(self, seed: int, stream_id: tuple):
        self.base_seed = seed
        self.stream_id = stream_id
        digest = hashlib.blake2b(repr((int(seed), tuple(stream_id))).encode(), digest_size=16).digest()
        super().__init__(int.from_bytes(digest, "big"))


def draw_uniform(stream: random.Random, n: int) -> int:
    if n < 1:
        raise ValueError(f"draw_uniform needs n >= 1, got {n}")
    return stream.randrange(n)


class Simulator:
    def __init__(self, seed: int = 0, trace: bool = False):
        self.seed = int(seed)
        self.now = 0
        self._queue: list[SimEvent] = []
        self._seq = 0
        self._streams: dict[tuple, RngStream] = {}
        self._trace = hashlib.blake2b(digest_size=16) if trace else None
        self.delivered = 0

    def schedule(self, fire_at: int, callback: Callable[..., Any], *args,
                 kind: str = "", target: Hashable = None) -> SimEvent:
        if fire_at < self.now:
            raise SchedulingError(f"event {kind!r} at {fire_at} is before clock {self.now}")
        self._seq += 1
        ev = SimEvent(fire_at, self._seq, kind, target, callback, args)
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay: int, callback: Callable[..., Any], *args,
                    kind: str = "", target: Hashable = None) -> SimEvent:
        return self.schedule(self.now + delay, callback, *args, kind=kind, target=target)

    @staticmethod
    def cancel(handle: SimEvent | None) -> bool:
        if handle is None or handle.fired or handle.cancelled:
            return False
        handle.cancelled = True
        return True

    def run_until(self, end: int) -> int:
        if end < self.now:
            raise SchedulingError(f"run_until({end}) is before clock {self.now}")
        queue = self._queue
        count = 0
        trace = self._trace
        while queue and queue[0].fire_at <= end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = ev.fire_at
            ev.fired = True
            if trace is not None:
                trace.update(f"{ev.fire_at}|{ev.seq}|{ev.kind}|{ev.target}\n".encode())
            ev.callback(*ev.args)
            count += 1
        self.now = end
        self.delivered += count
        return count

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def stream(self, node: Hashable, purpose: str) -> RngStream:
        key = (node, purpose)
        s = self._streams.get(key)
        if s is None:
            s = self._streams[key] = RngStream(self.seed, key)
        return s

    def trace_digest(self) -> str:
        if self._trace is None:
            raise RuntimeError("simulator was created without trace=True")
        return self._trace.hexdigest()
