"""Propagation, energy sensing and reception on the shared medium."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import count
from typing import Callable, Iterable, Optional

log = logging.getLogger(__name__)

NEG_INF = float("-inf")

THERMAL_NOISE_DBM_HZ = -174.0
NOISE_FIGURE_DB = 7.0
PREAMBLE_US = 20
SUPPORTED_BANDWIDTHS = (20, 40, 80, 160)

# (decode SINR threshold dB, spectral efficiency b/s/Hz per stream); index 7 is 64-QAM 5/6
MCS_TABLE = (
    (5.0, 0.5),
    (8.0, 1.0),
    (10.0, 1.5),
    (13.0, 2.0),
    (16.0, 3.0),
    (19.0, 4.0),
    (22.0, 4.5),
    (25.0, 5.0),
)
MAX_MCS = len(MCS_TABLE) - 1


def mcs_threshold(mcs: int) -> float:
    return MCS_TABLE[mcs][0]


def mcs_efficiency(mcs: int) -> float:
    return MCS_TABLE[mcs][1]


def best_mcs_for(sinr_db: float) -> int:
    """Highest MCS whose threshold is met, or -1 if none is."""
    best = -1
    for i, (thr, _) in enumerate(MCS_TABLE):
        if sinr_db >= thr:
            best = i
    return best


def dbm_to_mw(dbm: float) -> float:
    if dbm == NEG_INF:
        return 0.0
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0.0:
        return NEG_INF
    return 10.0 * math.log10(mw)


def noise_floor_dbm(bandwidth_mhz: float = 20.0, noise_figure_db: float = NOISE_FIGURE_DB) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_mhz * 1e6) + noise_figure_db


def scale_ed_threshold(base_dbm: float, bandwidth_mhz: int) -> float:
    if bandwidth_mhz not in SUPPORTED_BANDWIDTHS:
        raise ValueError(f"unsupported bandwidth {bandwidth_mhz} MHz; expected one of {SUPPORTED_BANDWIDTHS}")
    return base_dbm + 10.0 * math.log10(bandwidth_mhz / 20.0)


# --- path loss -------------------------------------------------------------

INH_OFFICE = "InH-Office"
UMI_STREET_CANYON = "UMi-StreetCanyon"


@dataclass(frozen=True)
class PathLossModel:
    kind: str
    carrier_ghz: float

    def __post_init__(self):
        if self.kind not in (INH_OFFICE, UMI_STREET_CANYON):
            raise ValueError(f"unknown path loss model {self.kind!r}")


def path_loss(model: PathLossModel, d3d: float, los: bool = True) -> float:
    """Loss in dB at 3-D distance ``d3d``; the NLOS branch is never below LOS."""
    if d3d < 1.0:
        log.warning("distance %.3f m below 1 m, clamped", d3d)
        d3d = 1.0
    lg = math.log10(d3d)
    lf = math.log10(model.carrier_ghz)
    if model.kind == INH_OFFICE:
        pl = 32.4 + 17.3 * lg + 20.0 * lf
        if not los:
            pl = max(pl, 17.3 + 38.3 * lg + 24.9 * lf)
    else:
        pl = 32.4 + 21.0 * lg + 20.0 * lf
        if not los:
            pl = max(pl, 22.4 + 35.3 * lg + 21.3 * lf)
    return pl


def los_probability(model: PathLossModel, d2d: float) -> float:
    if model.kind == INH_OFFICE:
        if d2d <= 1.2:
            return 1.0
        if d2d < 6.5:
            return math.exp(-(d2d - 1.2) / 4.7)
        return 0.32 * math.exp(-(d2d - 6.5) / 32.6)
    if d2d <= 18.0:
        return 1.0
    return 18.0 / d2d + math.exp(-d2d / 36.0) * (1.0 - 18.0 / d2d)


# --- on-air objects --------------------------------------------------------

CRITICALITY = ("data", "block-ack", "management", "discovery", "harq-feedback")
_tx_ids = count()


class Transmission:
    """A frame or burst on air. ``end`` may be None while a burst is open."""

    __slots__ = ("id", "source", "tech", "tx_power", "tx_mw", "channels", "start", "end",
                 "mcs", "streams", "payload", "criticality", "overlaps", "collided", "nav_ns")

    def __init__(self, source: int, tech: str, tx_power: float, channels: Iterable[int],
                 start: int, end: Optional[int] = None, mcs: int = 0, streams: int = 1,
                 payload=None, criticality: str = "data", nav_ns: int = 0):
        channels = tuple(sorted(set(channels)))
        if not channels:
            raise ValueError("transmission needs at least one channel")
        if streams not in (1, 2):
            raise ValueError("streams must be 1 or 2")
        if end is not None and end <= start:
            raise ValueError("transmission must end after it starts")
        if criticality not in CRITICALITY:
            raise ValueError(f"unknown criticality {criticality!r}")
        self.id = next(_tx_ids)
        self.nav_ns = nav_ns  # Duration field: how long after its end third parties defer
        self.source = source
        self.tech = tech
        self.tx_power = tx_power
        self.tx_mw = dbm_to_mw(tx_power)
        self.channels = channels
        self.start = start
        self.end = end
        self.mcs = mcs
        self.streams = streams
        self.payload = payload
        self.criticality = criticality
        self.overlaps: list[Transmission] = []
        self.collided: set[int] = set()

    def __repr__(self) -> str:
        return f"Transmission(src={self.source}, ch={self.channels}, {self.start}-{self.end}, {self.criticality})"


@dataclass(frozen=True)
class DetectionConfig:
    ed_threshold_20mhz: float
    pd_threshold: Optional[float] = None
    bandwidth: int = 20

    def __post_init__(self):
        if self.pd_threshold is not None and self.pd_threshold > self.ed_threshold_20mhz:
            raise ValueError("preamble threshold must not exceed the energy threshold")

    @property
    def ed_threshold(self) -> float:
        return scale_ed_threshold(self.ed_threshold_20mhz, self.bandwidth)


@dataclass
class SenseReport:
    total_energy: float
    strongest_preamble: Optional[tuple] = None
    channel_id: int = 0


@dataclass(eq=False)
class Subscription:
    node: int
    tech: str
    channels: tuple
    ed_mw: float
    pd_mw: Optional[float]
    callback: Optional[Callable[[bool], None]]
    busy: bool = False
    idle_since: int = 0
    detected: set = field(default_factory=set)  # on-air frames whose preamble this node caught
    energy_mw: float = 0.0
    on_nav: Optional[Callable[[int], None]] = None


class Medium:
    """Per-channel occupancy timelines plus per-node carrier sensing.

    ``loss_db[i][j]`` is the path loss from node ``i`` to node ``j``. Every
    start/end re-evaluates the subscriptions on the affected channels and
    fires their callbacks on busy/idle edges.
    """

    def __init__(self, sim, loss_db, techs, noise_dbm: float | None = None):
        self.sim = sim
        self.n = len(loss_db)
        self.loss_db = [list(row) for row in loss_db]
        self.gain = [[0.0 if i == j else 10.0 ** (-loss_db[i][j] / 10.0) for j in range(self.n)]
                     for i in range(self.n)]
        self.techs = list(techs)
        self.noise_dbm = noise_floor_dbm() if noise_dbm is None else noise_dbm
        self.noise_mw = dbm_to_mw(self.noise_dbm)
        self.active: dict[int, list[Transmission]] = {}
        self._subs: dict[int, list[Subscription]] = {}
        self.listeners: list[Callable[[str, Transmission], None]] = []
        self.preamble_sinr_db = MCS_TABLE[0][0]

    def rx_dbm(self, tx_power: float, src: int, dst: int) -> float:
        return tx_power - self.loss_db[src][dst]

    # sensing ---------------------------------------------------------------

    def subscribe(self, node: int, channels, config: DetectionConfig,
                  callback: Callable[[bool], None] | None = None,
                  on_nav: Callable[[int], None] | None = None) -> Subscription:
        channels = tuple(sorted(set(channels)))
        bw = 20 * len(channels)
        ed = scale_ed_threshold(config.ed_threshold_20mhz, bw) if bw in SUPPORTED_BANDWIDTHS else \
            config.ed_threshold_20mhz + 10.0 * math.log10(len(channels))
        sub = Subscription(node, self.techs[node], channels, dbm_to_mw(ed),
                           None if config.pd_threshold is None else dbm_to_mw(config.pd_threshold),
                           callback, idle_since=self.sim.now, on_nav=on_nav)
        for c in channels:
            self._subs.setdefault(c, []).append(sub)
        self._evaluate(sub)
        return sub

    def _energy(self, sub: Subscription) -> float:
        node = sub.node
        total = 0.0
        for c in sub.channels:
            for tx in self.active.get(c, ()):
                if tx.source != node:
                    total += tx.tx_mw * self.gain[tx.source][node]
        return total

    def _evaluate(self, sub: Subscription) -> None:
        e = self._energy(sub)
        sub.energy_mw = e
        busy = e >= sub.ed_mw or bool(sub.detected)
        if busy != sub.busy:
            sub.busy = busy
            if not busy:
                sub.idle_since = self.sim.now
            if sub.callback is not None:
                sub.callback(busy)

    def idle_for(self, sub: Subscription) -> int:
        """Nanoseconds the subscription has been continuously idle (0 if busy)."""
        return 0 if sub.busy else self.sim.now - sub.idle_since

    def sense(self, node: int, channel: int, config: DetectionConfig) -> tuple[bool, SenseReport]:
        total = 0.0
        strongest = None
        for tx in self.active.get(channel, ()):
            if tx.source == node:
                continue
            p = tx.tx_mw * self.gain[tx.source][node]
            total += p
            if (tx.tech == "wifi" and self.techs[node] == "wifi" and config.pd_threshold is not None
                    and self._preamble_decodable(tx, node, channel)):
                if strongest is None or p > strongest[1]:
                    strongest = (tx.tech, p)
        report = SenseReport(mw_to_dbm(total),
                             None if strongest is None else (strongest[0], mw_to_dbm(strongest[1])),
                             channel)
        busy = total >= dbm_to_mw(scale_ed_threshold(config.ed_threshold_20mhz, config.bandwidth))
        if strongest is not None and report.strongest_preamble[1] >= config.pd_threshold:
            busy = True
        return busy, report

    def _preamble_decodable(self, tx: Transmission, node: int, channel: int) -> bool:
        a, b = tx.start, tx.start + PREAMBLE_US * 1000
        sinr = self._min_sinr(tx, node, a, b, (channel,))
        return sinr >= self.preamble_sinr_db

    # occupancy -------------------------------------------------------------

    def start(self, tx: Transmission) -> None:
        now = self.sim.now
        if tx.start != now:
            raise ValueError("transmission must start at the current clock")
        for c in tx.channels:
            lst = self.active.setdefault(c, [])
            for other in lst:
                if other is tx:
                    raise ValueError("transmission already on air")
                if other not in tx.overlaps:
                    tx.overlaps.append(other)
                    other.overlaps.append(tx)
                tx.collided.add(c)
                other.collided.add(c)
            lst.append(tx)
        for listener in self.listeners:
            listener("start", tx)
        self._update_preamble_detection(tx)
        self._refresh(tx.channels)

    def end(self, tx: Transmission, at: int | None = None) -> None:
        now = self.sim.now
        if at is not None and at != now:
            raise ValueError("transmission must end at the current clock")
        if tx.end is None:
            tx.end = now
        elif tx.end != now:
            raise ValueError(f"transmission declared end {tx.end} but ended at {now}")
        for c in tx.channels:
            self.active[c].remove(tx)
        thr = MCS_TABLE[tx.mcs][0]
        for c in tx.channels:
            for sub in self._subs.get(c, ()):
                if tx in sub.detected:
                    sub.detected.discard(tx)
                    # a decoded header sets the receiver's NAV
                    if tx.nav_ns and sub.on_nav is not None and \
                            self._min_sinr(tx, sub.node, tx.start, now, (c,)) >= thr:
                        sub.on_nav(now + tx.nav_ns)
        for listener in self.listeners:
            listener("end", tx)
        self._refresh(tx.channels)

    def _refresh(self, channels) -> None:
        seen = set()
        for c in channels:
            for sub in self._subs.get(c, ()):
                if id(sub) not in seen:
                    seen.add(id(sub))
                    self._evaluate(sub)

    def _update_preamble_detection(self, tx: Transmission) -> None:
        now = self.sim.now
        window = PREAMBLE_US * 1000
        gain = self.gain
        noise = self.noise_mw
        thr = 10.0 ** (self.preamble_sinr_db / 10.0)
        for c in tx.channels:
            active = self.active[c]
            for sub in self._subs.get(c, ()):
                if sub.pd_mw is None:
                    continue
                node = sub.node
                if sub.detected and tx.source != node:
                    # preambles still inside their first 20 us are spoiled by strong new energy
                    for held in [h for h in sub.detected if now - h.start < window and h.source != tx.source]:
                        interf = sum(o.tx_mw * gain[o.source][node] for o in active
                                     if o is not held and o.source != node)
                        if held.tx_mw * gain[held.source][node] < thr * (noise + interf):
                            sub.detected.discard(held)
                if tx.tech != "wifi" or tx.source == node:
                    continue
                if any(o.source == node for o in active):
                    continue  # half duplex: a transmitting node hears nothing
                sig = tx.tx_mw * gain[tx.source][node]
                if sig < sub.pd_mw:
                    continue
                interf = sum(o.tx_mw * gain[o.source][node] for o in active
                             if o is not tx and o.source != node)
                if sig >= thr * (noise + interf):
                    sub.detected.add(tx)

    # reception -------------------------------------------------------------

    def _min_sinr(self, tx: Transmission, rx: int, a: int, b: int, channels=None) -> float:
        channels = tx.channels if channels is None else channels
        g = self.gain
        sig = tx.tx_mw * g[tx.source][rx]
        if sig <= 0.0:
            return NEG_INF
        relevant = []
        for o in tx.overlaps:
            if o.start >= b or (o.end is not None and o.end <= a):
                continue
            shared = [c for c in o.channels if c in channels]
            if not shared:
                continue
            if o.source == rx:
                return NEG_INF
            relevant.append(o)
        noise = self.noise_mw
        if not relevant:
            return 10.0 * math.log10(sig / noise)
        cuts = {a, b}
        for o in relevant:
            if a < o.start < b:
                cuts.add(o.start)
            if o.end is not None and a < o.end < b:
                cuts.add(o.end)
        cuts = sorted(cuts)
        worst = float("inf")
        for t0, t1 in zip(cuts, cuts[1:]):
            interf = 0.0
            for o in relevant:
                if o.start <= t0 and (o.end is None or o.end >= t1):
                    interf += o.tx_mw * g[o.source][rx]
            s = sig / (noise + interf)
            if s < worst:
                worst = s
        return 10.0 * math.log10(worst)

    def resolve_reception(self, tx: Transmission, rx: int, mcs: int | None = None,
                          interval: tuple[int, int] | None = None, gain_db: float = 0.0,
                          channels=None) -> tuple[bool, float]:
        """Decode outcome and effective SINR (min over the overlap-partitioned interval)."""
        if interval is None:
            if tx.end is None:
                raise ValueError("open transmission needs an explicit interval")
            interval = (tx.start, tx.end)
        sinr = self._min_sinr(tx, rx, interval[0], interval[1], channels) + gain_db
        m = tx.mcs if mcs is None else mcs
        return sinr >= MCS_TABLE[m][0], sinr

    def release(self, tx: Transmission) -> None:
        """Drop overlap references once a transmission can no longer be resolved."""
        tx.overlaps = []

    def prune(self, tx: Transmission) -> None:
        # keep overlaps that may still matter for transmissions on air
        tx.overlaps = [o for o in tx.overlaps if o.end is None]
