"""Slotted backoff countdown with freeze/resume, shared by EDCA and CAT4 LBT."""

from __future__ import annotations

from typing import Callable

from .kernel import US
from .profiles import SLOT_US

SLOT_NS = SLOT_US * US


class Backoff:
    """Counts ``k`` idle slots after an idle defer period.

    The owner forwards carrier-sense edges through :meth:`set_busy`. A busy
    edge freezes the counter, keeping only fully elapsed idle slots; the next
    idle edge re-arms the full defer before counting resumes. A busy edge that
    lands exactly on the grant instant does not stop the grant, which is how
    two contenders finishing in the same slot collide.
    """

    def __init__(self, sim, on_grant: Callable[[int], None], slot_ns: int = SLOT_NS, name: str = ""):
        self.sim = sim
        self.on_grant = on_grant
        self.slot_ns = slot_ns
        self.name = name
        self.active = False
        self.busy = False
        self.remaining = 0
        self.defer_ns = 0
        self.started_at = 0
        self._origin = 0
        self._handle = None
        self._grant_at = None

    def start(self, k: int, defer_ns: int, busy: bool) -> None:
        if self.active:
            raise RuntimeError("backoff already running")
        self.active = True
        self.remaining = k
        self.defer_ns = defer_ns
        self.busy = busy
        self.started_at = self.sim.now
        if not busy:
            self._arm()

    def _arm(self) -> None:
        self._origin = self.sim.now
        self._grant_at = self._origin + self.defer_ns + self.remaining * self.slot_ns
        self._handle = self.sim.schedule(self._grant_at, self._fire, kind="grant", target=self.name)

    def _fire(self) -> None:
        self._handle = None
        self._grant_at = None
        self.active = False
        self.remaining = 0
        self.on_grant(self.sim.now)

    def set_busy(self, busy: bool) -> None:
        if busy == self.busy:
            return
        self.busy = busy
        if not self.active:
            return
        now = self.sim.now
        if busy:
            if self._handle is None or now >= self._grant_at:
                return
            elapsed = now - self._origin - self.defer_ns
            if elapsed > 0:
                self.remaining -= min(self.remaining, elapsed // self.slot_ns)
            self.sim.cancel(self._handle)
            self._handle = None
            self._grant_at = None
        elif self._handle is None:
            self._arm()

    def stop(self) -> None:
        if self._handle is not None:
            self.sim.cancel(self._handle)
        self._handle = None
        self._grant_at = None
        self.active = False

    @property
    def grant_at(self) -> int | None:
        return self._grant_at
