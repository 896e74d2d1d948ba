"""FTP model 3 traffic: Poisson file arrivals, packetisation and transmit buffers."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import count

from .kernel import S

FILE_BITS = 4_000_000  # 0.5 MB
MTU_BYTES = 1500
PROCESSING_US = 10


@dataclass
class FtpFlow:
    tech: str
    direction: str  # "dl" or "ul"
    src: int
    dst: int
    user: int
    lam: float
    file_bits: int = FILE_BITS

    @property
    def owner(self) -> tuple:
        return (self.src, self.direction)


class FileRecord:
    __slots__ = ("id", "flow", "t1", "size", "n_packets", "done_packets", "t2", "failed",
                 "delivered_bits", "_next_seq", "stalled")

    def __init__(self, file_id: int, flow: FtpFlow, t1: int, size: int, mtu_bits: int):
        self.id = file_id
        self.flow = flow
        self.t1 = t1
        self.size = size
        self.n_packets = math.ceil(size / mtu_bits)
        self.done_packets = 0
        self.t2: int | None = None
        self.failed = False
        self.delivered_bits = 0
        self._next_seq = 0
        self.stalled = False  # flow was in outage while this file was pending

    @property
    def complete(self) -> bool:
        return self.t2 is not None

    @property
    def outage(self) -> bool:
        return self.failed or self.stalled


class Packet:
    __slots__ = ("id", "file", "seq", "bits", "arrival", "unsent", "acked", "tries",
                 "tb_ns", "ti_ns", "delivered_at", "last_cot", "ti_mark")

    def __init__(self, pid: int, file: FileRecord, seq: int, bits: int, arrival: int):
        self.id = pid
        self.file = file
        self.seq = seq
        self.bits = bits
        self.arrival = arrival
        self.unsent = bits
        self.acked = 0
        self.tries = 0
        self.tb_ns = 0
        self.ti_ns = 0
        self.delivered_at: int | None = None
        self.last_cot = -1
        self.ti_mark = -1


def packet_sizes(file_bits: int, mtu_bits: int = MTU_BYTES * 8) -> list[int]:
    n = math.ceil(file_bits / mtu_bits)
    sizes = [mtu_bits] * n
    if n:
        sizes[-1] = file_bits - mtu_bits * (n - 1)
    return sizes


def arrival_times(lam: float, horizon_ns: int, rng) -> list[int]:
    if lam <= 0:
        raise ValueError("arrival rate must be positive")
    out = []
    t = 0.0
    horizon_s = horizon_ns / S
    while True:
        t += rng.expovariate(lam)
        if t >= horizon_s:
            return out
        out.append(round(t * S))


def generate_arrivals(flow: FtpFlow, horizon_ns: int, rng, mtu_bytes: int = MTU_BYTES,
                      ids=None) -> list[FileRecord]:
    ids = count() if ids is None else ids
    return [FileRecord(next(ids), flow, t, flow.file_bits, mtu_bytes * 8)
            for t in arrival_times(flow.lam, horizon_ns, rng)]


class TxQueue:
    """FIFO of files for one destination, packetised on demand.

    ``retry`` holds packets that were pulled but must go out again; they are
    served before new packets. Partially scheduled packets (``unsent`` > 0
    with some bits in flight) stay at the head of ``retry``.
    """

    def __init__(self, mtu_bytes: int = MTU_BYTES, ids=None):
        self.mtu_bits = mtu_bytes * 8
        self.files: deque[FileRecord] = deque()
        self.retry: deque[Packet] = deque()
        self.backlog_bits = 0  # bits not yet handed to a transmission
        self._ids = ids if ids is not None else count()

    def __len__(self) -> int:
        return len(self.retry) + sum(f.n_packets - f._next_seq for f in self.files)

    @property
    def empty(self) -> bool:
        return self.backlog_bits == 0

    def add_file(self, f: FileRecord) -> None:
        self.files.append(f)
        self.backlog_bits += f.size

    def _materialise(self) -> Packet | None:
        while self.files:
            f = self.files[0]
            if f._next_seq < f.n_packets:
                seq = f._next_seq
                f._next_seq += 1
                bits = self.mtu_bits if seq < f.n_packets - 1 else f.size - self.mtu_bits * (f.n_packets - 1)
                if f._next_seq == f.n_packets:
                    self.files.popleft()
                return Packet(next(self._ids), f, seq, bits, f.t1)
            self.files.popleft()
        return None

    def peek(self) -> Packet | None:
        if self.retry:
            return self.retry[0]
        p = self._materialise()
        if p is not None:
            self.retry.appendleft(p)
        return p

    def pull_packets(self, n: int) -> list[Packet]:
        out = []
        while len(out) < n:
            if self.retry:
                p = self.retry.popleft()
            else:
                p = self._materialise()
                if p is None:
                    break
            self.backlog_bits -= p.unsent
            p.unsent = 0
            out.append(p)
        return out

    def pull_bits(self, cap: int) -> list[tuple[Packet, int]]:
        """Segment up to ``cap`` bits from the head of the queue."""
        out = []
        while cap > 0:
            p = self.peek()
            if p is None:
                break
            take = min(cap, p.unsent)
            p.unsent -= take
            self.backlog_bits -= take
            cap -= take
            out.append((p, take))
            if p.unsent == 0:
                self.retry.popleft()
        return out

    def requeue(self, packets) -> None:
        for p in reversed(list(packets)):
            self.backlog_bits += p.bits - p.unsent
            p.unsent = p.bits
            self.retry.appendleft(p)

    def return_bits(self, segments) -> None:
        for p, nbits in reversed(list(segments)):
            if p.unsent == 0:
                self.retry.appendleft(p)
            p.unsent += nbits
            self.backlog_bits += nbits

    def pending_files(self) -> list[FileRecord]:
        seen = {}
        for p in self.retry:
            seen[p.file.id] = p.file
        for f in self.files:
            seen[f.id] = f
        return list(seen.values())

    def drop_all(self) -> list[tuple[FileRecord, int]]:
        """Remove everything still queued; returns (file, bits) pairs removed."""
        removed = []
        while self.retry:
            p = self.retry.popleft()
            removed.append((p.file, p.unsent))
            p.unsent = 0
        for f in self.files:
            rem = f.n_packets - f._next_seq
            if rem:
                bits = f.size - self.mtu_bits * f._next_seq
                removed.append((f, bits))
                f._next_seq = f.n_packets
        self.files.clear()
        self.backlog_bits = 0
        return removed
