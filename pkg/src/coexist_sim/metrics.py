"""Run accounting (UPT, latency decomposition, buffer occupancy, utilisation) and CSV output."""

from __future__ import annotations

import bisect
import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .kernel import S, US
from .traffic import PROCESSING_US, FileRecord, Packet

UPT_HEADER = ["run_id", "seed", "lambda", "tech", "direction", "node", "file_id", "upt_bps"]
LATENCY_HEADER = ["run_id", "lambda", "tech", "packet_id", "tq_us", "tb_us", "ti_us", "ts_us", "tp_us"]
SUMMARY_HEADER = ["lambda", "tech", "mean_upt", "mean_latency", "bo", "rho", "outage_frac"]


def compute_upt(record: FileRecord, outage: bool = False) -> float:
    """File size over delivery time in bit/s; zero for failed or outage files."""
    if outage or record.failed or record.stalled:
        return 0.0
    if record.t2 is None:
        raise ValueError(f"file {record.id} is not complete")
    dt = record.t2 - record.t1
    if dt <= 0:
        raise ValueError("delivery must take at least one tick")
    return record.size / (dt / S)


def compute_bo(busy_ns: int, sim_duration_ns: int) -> float:
    if sim_duration_ns <= 0:
        raise ValueError("simulation duration must be positive")
    return min(1.0, busy_ns / sim_duration_ns)


def interval_union_length(intervals: Iterable[tuple[int, int]]) -> int:
    total = 0
    cur_a = cur_b = None
    for a, b in sorted(intervals):
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def compute_rho(delivered_bits: float, offered_bits: float) -> float | None:
    if offered_bits <= 0:
        return None
    return min(1.0, max(0.0, delivered_bits / offered_bits))


def build_cdf(samples: Sequence[float]) -> list[tuple[float, float]]:
    if len(samples) == 0:
        raise ValueError("cannot build a CDF from no samples")
    xs = sorted(samples)
    n = len(xs)
    out = []
    for i, x in enumerate(xs):
        if i + 1 < n and xs[i + 1] == x:
            continue
        out.append((x, (i + 1) / n))
    return out


def cdf_at(cdf: list[tuple[float, float]], x: float) -> float:
    i = bisect.bisect_right([v for v, _ in cdf], x)
    return 0.0 if i == 0 else cdf[i - 1][1]


class BufferMonitor:
    """Tracks the time a node's transmit buffer holds undelivered bits."""

    __slots__ = ("held", "busy_ns", "_since")

    def __init__(self):
        self.held = 0
        self.busy_ns = 0
        self._since = None

    def add(self, bits: int, now: int) -> None:
        if self.held == 0 and bits > 0:
            self._since = now
        self.held += bits

    def remove(self, bits: int, now: int) -> None:
        self.held -= bits
        if self.held < 0:
            raise AssertionError("buffer monitor went negative")
        if self.held == 0 and self._since is not None:
            self.busy_ns += now - self._since
            self._since = None

    def close(self, now: int) -> int:
        if self._since is not None:
            return self.busy_ns + now - self._since
        return self.busy_ns


@dataclass
class LatencyRecord:
    packet_id: int
    tech: str
    direction: str
    tq: int
    tb: int
    ti: int
    ts: int

    @property
    def tp(self) -> int:
        return self.tq + self.tb + self.ti + self.ts


class FlowLedger:
    """Per-run accounting shared by every node."""

    def __init__(self, keep_latency: bool = True):
        self.files: list[FileRecord] = []
        self.offered = defaultdict(int)
        self.delivered = defaultdict(int)
        self.dropped = defaultdict(int)
        self.user_delivered = defaultdict(int)
        self.users: dict[int, str] = {}
        self.monitors: dict[int, BufferMonitor] = {}
        self.node_tech: dict[int, str] = {}
        self.keep_latency = keep_latency
        self.latency: list[LatencyRecord] = []
        self.latency_sum = defaultdict(int)
        self.latency_count = defaultdict(int)
        self.max_occupancy_ns = defaultdict(int)
        self.occupancy_violations: list[tuple] = []
        self.fbe_idle_violations: list[tuple] = []
        self.cot_count = defaultdict(int)

    def register_node(self, node: int, tech: str, buffered: bool) -> None:
        self.node_tech[node] = tech
        if buffered:
            self.monitors[node] = BufferMonitor()

    def register_user(self, user: int, tech: str) -> None:
        self.users[user] = tech
        self.user_delivered.setdefault(user, 0)

    def file_arrived(self, f: FileRecord, now: int) -> None:
        self.files.append(f)
        key = (f.flow.tech, f.flow.direction)
        self.offered[key] += f.size
        self.monitors[f.flow.src].add(f.size, now)

    def bits_delivered(self, p: Packet, nbits: int, now: int) -> None:
        f = p.file
        key = (f.flow.tech, f.flow.direction)
        self.delivered[key] += nbits
        self.user_delivered[f.flow.user] += nbits
        f.delivered_bits += nbits
        self.monitors[f.flow.src].remove(nbits, now)

    def packet_delivered(self, p: Packet, now: int) -> None:
        """Close a packet whose last bit was decoded at ``now``."""
        p.delivered_at = now
        f = p.file
        f.done_packets += 1
        if f.done_packets == f.n_packets and not f.failed:
            f.t2 = now
        total = now - p.arrival
        tq = total - p.tb_ns - p.ti_ns
        if tq < 0:
            raise AssertionError(f"negative queueing time for packet {p.id}")
        rec = LatencyRecord(p.id, f.flow.tech, f.flow.direction, tq, p.tb_ns, p.ti_ns, PROCESSING_US * US)
        key = (f.flow.tech, f.flow.direction)
        self.latency_sum[key] += rec.tp
        self.latency_count[key] += 1
        if self.keep_latency:
            self.latency.append(rec)

    def bits_dropped(self, f: FileRecord, nbits: int, now: int) -> None:
        if nbits <= 0:
            return
        f.failed = True
        key = (f.flow.tech, f.flow.direction)
        self.dropped[key] += nbits
        self.monitors[f.flow.src].remove(nbits, now)

    def occupancy(self, node: int, start: int, end: int, limit_ns: int, tech: str) -> None:
        length = end - start
        self.cot_count[tech] += 1
        if length > self.max_occupancy_ns[tech]:
            self.max_occupancy_ns[tech] = length
        if length > limit_ns:
            self.occupancy_violations.append((node, start, end, limit_ns))


@dataclass
class RunMetrics:
    run_id: str
    seed: int
    lam: float
    duration_ns: int
    upt: dict = field(default_factory=dict)          # (tech, dir) -> list[(node, file_id, upt)]
    latency_mean_us: dict = field(default_factory=dict)
    bo: dict = field(default_factory=dict)           # tech -> mean BO over that tech's nodes
    rho: dict = field(default_factory=dict)          # tech -> rho (None if nothing offered)
    rho_dir: dict = field(default_factory=dict)
    outage: dict = field(default_factory=dict)       # user -> bool
    user_tech: dict = field(default_factory=dict)
    conservation: dict = field(default_factory=dict)
    max_occupancy_ns: dict = field(default_factory=dict)
    occupancy_violations: list = field(default_factory=list)
    fbe_idle_violations: list = field(default_factory=list)
    latency: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def upt_values(self, tech: str, direction: str | None = None) -> list[float]:
        out = []
        for (t, d), rows in self.upt.items():
            if t == tech and (direction is None or d == direction):
                out.extend(r[2] for r in rows)
        return out

    def mean_upt(self, tech: str, direction: str | None = None) -> float:
        v = self.upt_values(tech, direction)
        return sum(v) / len(v) if v else 0.0

    def outage_fraction(self, tech: str) -> float:
        users = [u for u, t in self.user_tech.items() if t == tech]
        if not users:
            return 0.0
        return sum(1 for u in users if self.outage[u]) / len(users)

    def mean_latency(self, tech: str) -> float:
        vals = [(v, n) for (t, _), (v, n) in self.latency_mean_us.items() if t == tech]
        n = sum(c for _, c in vals)
        return sum(v * c for v, c in vals) / n if n else math.nan


def summarise(ledger: FlowLedger, run_id: str, seed: int, lam: float, duration_ns: int,
              buffered_bits: dict, tech_directions: dict) -> RunMetrics:
    """Turn a finished ledger into metrics; ``buffered_bits`` is counted from node state."""
    m = RunMetrics(run_id, seed, lam, duration_ns)
    m.user_tech = dict(ledger.users)
    for u in ledger.users:
        m.outage[u] = ledger.user_delivered[u] == 0
    for f in ledger.files:
        key = (f.flow.tech, f.flow.direction)
        if key not in tech_directions.get(f.flow.tech, {key}):
            continue
        if m.outage[f.flow.user]:
            val = 0.0
        elif f.failed or f.stalled:
            val = 0.0
        elif f.t2 is not None:
            val = compute_upt(f)
        else:
            continue
        m.upt.setdefault(key, []).append((f.flow.dst if f.flow.direction == "dl" else f.flow.src, f.id, val))
    for key, n in ledger.latency_count.items():
        m.latency_mean_us[key] = (ledger.latency_sum[key] / n / US, n)
    by_tech = defaultdict(list)
    for node, mon in ledger.monitors.items():
        by_tech[ledger.node_tech[node]].append(compute_bo(mon.close(duration_ns), duration_ns))
    m.bo = {t: sum(v) / len(v) for t, v in by_tech.items()}
    techs = {t for t, _ in ledger.offered}
    for t in techs:
        off = sum(v for (tt, _), v in ledger.offered.items() if tt == t)
        dlv = sum(v for (tt, _), v in ledger.delivered.items() if tt == t)
        m.rho[t] = compute_rho(dlv, off)
    for key, off in ledger.offered.items():
        m.rho_dir[key] = compute_rho(ledger.delivered[key], off)
        m.conservation[key] = (off, ledger.delivered[key], ledger.dropped[key], buffered_bits.get(key, 0))
    m.max_occupancy_ns = dict(ledger.max_occupancy_ns)
    m.occupancy_violations = list(ledger.occupancy_violations)
    m.fbe_idle_violations = list(ledger.fbe_idle_violations)
    m.latency = ledger.latency
    return m


def _us(ticks: int) -> str:
    # exact: ticks are integer nanoseconds
    whole, frac = divmod(ticks, US)
    return f"{whole}.{frac:03d}"


def write_upt_csv(path: Path, runs: Iterable[RunMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(UPT_HEADER)
        for m in runs:
            for (tech, direction), rows in sorted(m.upt.items()):
                for node, fid, val in rows:
                    w.writerow([m.run_id, m.seed, repr(m.lam), tech, direction, node, fid, f"{val:.3f}"])


def write_latency_csv(path: Path, runs: Iterable[RunMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LATENCY_HEADER)
        for m in runs:
            for r in m.latency:
                w.writerow([m.run_id, repr(m.lam), r.tech, r.packet_id, _us(r.tq), _us(r.tb),
                            _us(r.ti), _us(r.ts), _us(r.tp)])


def summary_rows(runs: Sequence[RunMetrics]) -> list[list]:
    """Average per-run values across drops, one row per (lambda, tech)."""
    groups = defaultdict(list)
    for m in runs:
        groups[m.lam].append(m)
    rows = []
    for lam in sorted(groups):
        ms = groups[lam]
        for tech in ("nru", "wifi"):
            present = [m for m in ms if tech in m.rho]
            if not present:
                continue
            n = len(present)
            mean_upt = sum(m.mean_upt(tech) for m in present) / n
            lats = [m.mean_latency(tech) for m in present]
            lats = [x for x in lats if not math.isnan(x)]
            mean_lat = sum(lats) / len(lats) if lats else math.nan
            bo = sum(m.bo.get(tech, 0.0) for m in present) / n
            rhos = [m.rho[tech] for m in present if m.rho[tech] is not None]
            rho = sum(rhos) / len(rhos) if rhos else math.nan
            out = sum(m.outage_fraction(tech) for m in present) / n
            rows.append([repr(lam), tech, f"{mean_upt:.3f}", f"{mean_lat:.3f}", f"{bo:.6f}",
                         f"{rho:.6f}", f"{out:.6f}"])
    return rows


def write_summary_csv(path: Path, runs: Sequence[RunMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(summary_rows(runs))
