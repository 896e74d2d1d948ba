"""802.11ac EDCA MAC: contention, TXOP with A-MSDU and block ACK, Minstrel, critical frames."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .backoff import Backoff
from .kernel import MS, US, draw_uniform
from .profiles import EVAL_TXOP_US, SIFS_US, AccessProfile, contention_window, profile
from .radio import MAX_MCS, MCS_TABLE, DetectionConfig, Transmission
from .traffic import TxQueue

PHY_HEADER_US = 44
SYMBOL_US = 4
DATA_SUBCARRIERS = 52
MSDU_OVERHEAD_BYTES = 36
BAR_BYTES = 24
BA_BYTES = 32
ACK_BYTES = 14
FRAME_BYTES = {"association": 110, "arp": 72}

FRAME_KINDS = ("data-aggregate", "block-ack-request", "block-ack", "association", "arp")


@dataclass
class WifiConfig:
    ac: str = "AC_BE"
    ed_threshold: float = -62.0
    pd_threshold: Optional[float] = -82.0
    txop_limit_us: float = EVAL_TXOP_US
    amsdu_max: int = 64
    retry_limit: int = 7
    streams: int = 2
    reassoc_interval_ms: float = 500.0
    arp_retries: int = 3             # address-resolution requests resent after the first one times out
    arp_wait_ms: float = 1000.0      # wait for a reply before resending
    arp_dead_ms: float = 100_000.0   # resolution that exhausted its retries stays dead this long
    # a data drop triggers re-association once the link has gone this long without an ACK;
    # 0 re-associates on every drop, None never does
    relink_silence_ms: Optional[float] = 0.0
    minstrel_interval_ms: float = 100.0
    minstrel_sample_frac: float = 0.1

    def access_profile(self) -> AccessProfile:
        p = profile(self.ac)
        return p.with_occupancy(self.txop_limit_us) if self.txop_limit_us else p


@dataclass
class WifiFrame:
    kind: str
    msdu_count: int = 1
    size: int = 0
    retries: int = 0
    src: int = -1
    dst: int = -1
    on_success: Optional[Callable[[], None]] = None
    on_failure: Optional[Callable[[], None]] = None
    broadcast: bool = False  # sent once, never acknowledged

    def __post_init__(self):
        if self.kind not in FRAME_KINDS:
            raise ValueError(f"unknown frame kind {self.kind!r}")
        if self.kind == "data-aggregate":
            if not 1 <= self.msdu_count <= 64:
                raise ValueError("data aggregates carry 1 to 64 MSDUs")
        elif self.msdu_count != 1:
            raise ValueError("control and management frames carry exactly one unit")


def ppdu_duration_ns(payload_bytes: int, mcs: int, streams: int) -> int:
    bits_per_symbol = DATA_SUBCARRIERS * MCS_TABLE[mcs][1] * streams
    symbols = math.ceil((16 + 8 * payload_bytes + 6) / bits_per_symbol)
    return (PHY_HEADER_US + symbols * SYMBOL_US) * US


def msdu_spans(start: int, packets, mcs: int, streams: int) -> list[tuple[int, int]]:
    """Air interval of each MSDU inside an aggregate that starts at ``start``."""
    bits_per_symbol = DATA_SUBCARRIERS * MCS_TABLE[mcs][1] * streams
    t0 = start + PHY_HEADER_US * US
    spans, cum = [], 16  # service field
    for p in packets:
        a = t0 + math.floor(cum / bits_per_symbol) * SYMBOL_US * US
        cum += 8 * (p.bits // 8 + MSDU_OVERHEAD_BYTES)
        b = t0 + math.ceil(cum / bits_per_symbol) * SYMBOL_US * US
        spans.append((a, b))
    return spans


def phy_rate_bps(mcs: int, streams: int) -> float:
    return DATA_SUBCARRIERS * MCS_TABLE[mcs][1] * streams / (SYMBOL_US * 1e-6)


# Duration fields: each frame reserves the rest of its own exchange
NAV_AFTER_BAR = SIFS_US * US + ppdu_duration_ns(BA_BYTES, 0, 1)
NAV_AFTER_DATA = SIFS_US * US + ppdu_duration_ns(BAR_BYTES, 0, 1) + NAV_AFTER_BAR
NAV_AFTER_MGMT = SIFS_US * US + ppdu_duration_ns(ACK_BYTES, 0, 1)


class EdcaState:
    """Retry index and backoff for one access category of one node."""

    def __init__(self, sim, ac: AccessProfile, rng, on_grant, name=""):
        self.ac = ac
        self.j = 0
        self.rng = rng
        self.backoff = Backoff(sim, on_grant, name=name)
        self.txop_deadline = None

    @property
    def window(self) -> int:
        return contention_window(self.ac, self.j)

    def draw(self) -> int:
        return draw_uniform(self.rng, self.window)

    @property
    def aifs_ns(self) -> int:
        return self.ac.dl_defer_us * US

    def attempt(self, busy: bool, k: int | None = None) -> int:
        """Start contending; the grant fires once AIFS plus ``k`` idle slots elapse."""
        if k is None:
            k = self.draw()
        self.backoff.start(k, self.aifs_ns, busy)
        return k

    def success(self) -> None:
        self.j = 0

    def failure(self) -> None:
        self.j += 1


class Minstrel:
    """EWMA success probability per MCS; best expected throughput wins.

    About ``sample_frac`` of data frames probe another rate. Probes walk a
    shuffled sample table, and rates never tried go first.
    """

    def __init__(self, rng, streams: int = 2, ewma: float = 0.25, sample_frac: float = 0.1,
                 interval_ns: int = 100 * MS):
        self.rng = rng
        self.streams = streams
        self.ewma = ewma
        self.sample_frac = sample_frac
        self.interval_ns = interval_ns
        n = MAX_MCS + 1
        self.prob = [None] * n
        self.attempts = [0] * n
        self.successes = [0] * n
        self.best = 0
        self.last_update = 0
        self.sampled = 0
        self.frames = 0
        self._table: list[int] = []

    def record(self, mcs: int, successes: int, attempts: int = 1) -> None:
        """Count ``attempts`` MSDUs sent at ``mcs``, ``successes`` of them acknowledged."""
        self.attempts[mcs] += attempts
        self.successes[mcs] += int(successes)

    def update(self, now: int | None = None) -> int:
        for i in range(len(self.prob)):
            if self.attempts[i]:
                p = self.successes[i] / self.attempts[i]
                old = self.prob[i]
                self.prob[i] = p if old is None else (1 - self.ewma) * old + self.ewma * p
                self.attempts[i] = self.successes[i] = 0
        ranked = sorted((i for i, p in enumerate(self.prob) if p is not None),
                        key=lambda i: (-self.prob[i] * MCS_TABLE[i][1], i))
        best = ranked[0] if ranked else 0
        self.best = best
        if now is not None:
            self.last_update = now
        return best

    def _next_sample(self) -> int:
        untried = [i for i, p in enumerate(self.prob) if p is None and not self.attempts[i] and i != self.best]
        if untried:
            return untried[-1]
        while True:
            if not self._table:
                self._table = list(range(len(self.prob)))
                self.rng.shuffle(self._table)
            i = self._table.pop()
            if i != self.best:
                return i

    def select(self, now: int) -> tuple[int, bool]:
        if now - self.last_update >= self.interval_ns:
            self.update(now)
        self.frames += 1
        if self.rng.random() < self.sample_frac:
            self.sampled += 1
            return self._next_sample(), True
        return self.best, False


def minstrel_update(history: dict[int, tuple[int, int]], streams: int = 2) -> int:
    """Best MCS from ``{mcs: (successes, attempts)}`` by expected throughput."""
    if not history:
        raise ValueError("history window is empty")
    best, best_tp = None, -1.0
    for mcs, (ok, n) in sorted(history.items()):
        if n <= 0:
            continue
        tp = ok / n * MCS_TABLE[mcs][1] * streams
        if tp > best_tp:
            best, best_tp = mcs, tp
    return best


class Link:
    """Association and ARP state shared by an AP and one STA."""

    __slots__ = ("sta", "ap", "associated", "arp_done", "arp_tries", "outage", "busy_exchange", "outage_since",
                 "outages", "last_ok")

    def __init__(self, sta: int, ap: int):
        self.sta = sta
        self.ap = ap
        self.associated = False
        self.arp_done = False
        self.arp_tries = 0
        self.outage = False
        self.busy_exchange = False
        self.outage_since = None
        self.outages = 0
        self.last_ok = 0

    @property
    def up(self) -> bool:
        return self.associated and self.arp_done and not self.outage


class WifiNode:
    tech = "wifi"

    def __init__(self, net, idx: int, role: str, tx_power: float, cfg: WifiConfig, ap: int | None = None):
        self.net = net
        self.sim = net.sim
        self.idx = idx
        self.role = role
        self.tx_power = tx_power
        self.cfg = cfg
        self.ap = ap
        self.queues: dict[int, TxQueue] = {}
        self.links: dict[int, Link] = {}
        self.critical: deque[WifiFrame] = deque()
        self.profile = cfg.access_profile()
        self.edca = EdcaState(self.sim, self.profile, self.sim.stream(idx, "backoff"), self._on_grant, name=idx)
        self.minstrel: dict[int, Minstrel] = {}
        self.in_txop = False
        self.txop_start = 0
        self.inflight = []
        self.channel = 0
        self.sub = None
        self.cca_busy = False
        self.nav_until = 0
        self.stats = {"exchanges": 0, "failures": 0, "drops": 0, "critical_fail": 0}

    # setup ------------------------------------------------------------------

    def attach_medium(self, channel: int = 0) -> None:
        self.channel = channel
        det = DetectionConfig(self.cfg.ed_threshold, self.cfg.pd_threshold)
        self.sub = self.net.medium.subscribe(self.idx, (channel,), det, self._on_cca, self._on_nav)

    def add_peer(self, peer: int, link: Link) -> None:
        self.queues[peer] = TxQueue(ids=self.net.packet_ids)
        self.links[peer] = link
        self.minstrel[peer] = Minstrel(self.sim.stream((self.idx, peer), "minstrel"), self.cfg.streams,
                                       sample_frac=self.cfg.minstrel_sample_frac,
                                       interval_ns=round(self.cfg.minstrel_interval_ms * MS))

    def _on_cca(self, busy: bool) -> None:
        self.cca_busy = busy
        self.edca.backoff.set_busy(self._busy())

    def _on_nav(self, until: int) -> None:
        if until <= self.nav_until:
            return
        self.nav_until = until
        self.sim.schedule(until, self._nav_expired, until, kind="wifi-nav", target=self.idx)
        self.edca.backoff.set_busy(True)

    def _nav_expired(self, until: int) -> None:
        if until == self.nav_until:
            self.edca.backoff.set_busy(self._busy())

    def _busy(self) -> bool:
        """Physical or virtual carrier sense."""
        return self.cca_busy or self.sim.now < self.nav_until

    # traffic ----------------------------------------------------------------

    def enqueue_file(self, f) -> None:
        dst = f.flow.dst
        self.net.ledger.file_arrived(f, self.sim.now)
        link = self.links[dst]
        if link.outage:
            f.stalled = True
        self.queues[dst].add_file(f)
        if link.associated and not link.arp_done and not link.busy_exchange:
            self._start_arp(dst)
        self._contend()

    def buffered_bits(self) -> int:
        return sum(q.backlog_bits for q in self.queues.values()) + sum(p.bits for p in self.inflight)

    def _has_work(self) -> bool:
        if self.critical:
            return True
        for dst, q in self.queues.items():
            if not q.empty and self.links[dst].up:
                return True
        return False

    def _contend(self) -> None:
        if self.in_txop or self.edca.backoff.active or not self._has_work():
            return
        self.edca.attempt(self._busy())

    # critical frames ----------------------------------------------------------

    def send_critical(self, frame: WifiFrame) -> None:
        frame.size = FRAME_BYTES[frame.kind]
        self.critical.append(frame)
        self._contend()

    def start_association(self, dst: int) -> None:
        """STA side: association request then response from the AP."""
        link = self.links[dst]
        if link.busy_exchange:
            return
        link.busy_exchange = True
        ap = self.net.nodes[dst]

        def req_ok():
            ap.send_critical(WifiFrame("association", src=dst, dst=self.idx,
                                       on_success=assoc_ok, on_failure=fail))

        def assoc_ok():
            link.associated = True
            link.busy_exchange = False
            if link.outage:
                link.outage = False
            for node in (self, ap):
                node._contend()
            if not self.queues[dst].empty or not ap.queues[self.idx].empty:
                self._start_arp(dst)

        def fail():
            self._link_outage(dst)

        self.send_critical(WifiFrame("association", src=self.idx, dst=dst,
                                     on_success=req_ok, on_failure=fail))

    def _start_arp(self, peer: int) -> None:
        link = self.links[peer]
        if link.busy_exchange or link.arp_done or not link.associated:
            return
        link.busy_exchange = True
        other = self.net.nodes[peer]

        def req_ok():
            other.send_critical(WifiFrame("arp", src=peer, dst=self.idx, on_success=done, on_failure=fail))

        def done():
            link.arp_done = True
            link.arp_tries = 0
            link.busy_exchange = False
            self._contend()
            other._contend()

        def fail():
            link.arp_tries += 1
            if link.arp_tries <= self.cfg.arp_retries:
                self.sim.schedule_in(round(self.cfg.arp_wait_ms * MS), retry, kind="arp-retry", target=self.idx)
                return
            link.arp_tries = 0
            sta = self if self.role == "sta" else other
            sta._link_outage(peer if self.role == "sta" else self.idx, self.cfg.arp_dead_ms)

        def retry():
            # re-association may have taken over the link meanwhile
            if link.associated and not link.arp_done and link.arp_tries:
                link.busy_exchange = False
                self._start_arp(peer)

        # an AP's request is a broadcast; a STA's goes unicast to its AP
        self.send_critical(WifiFrame("arp", src=self.idx, dst=peer, on_success=req_ok, on_failure=fail,
                                     broadcast=self.role == "ap"))

    def _link_outage(self, ap: int, retry_ms: float | None = None) -> None:
        """STA side: critical exchange exhausted its retries; try again after ``retry_ms``."""
        link = self.links[ap]
        link.busy_exchange = False
        link.associated = False
        link.arp_tries = 0
        if not link.outage:
            link.outage = True
            link.outages += 1
            link.outage_since = self.sim.now
        # traffic is held, but every pending file of the flow is marked as outage
        for node, peer in ((self, ap), (self.net.nodes[ap], self.idx)):
            for f in node.queues[peer].pending_files():
                f.stalled = True
            for p in node.inflight:
                if p.file.flow.dst == peer:
                    p.file.stalled = True
        wait = self.cfg.reassoc_interval_ms if retry_ms is None else retry_ms
        self.sim.schedule_in(round(wait * MS), self.start_association, ap, kind="reassoc", target=self.idx)

    def _link_lost(self, peer: int) -> None:
        """Data retries exhausted: the STA re-associates."""
        link = self.links[peer]
        if not link.associated or link.busy_exchange:
            return
        link.associated = False  # address resolution survives re-association
        sta = self if self.role == "sta" else self.net.nodes[peer]
        sta.start_association(link.ap)

    # TXOP ---------------------------------------------------------------------

    def _on_grant(self, now: int) -> None:
        if not self._has_work():
            return
        self.in_txop = True
        self.txop_start = now
        self._air_end = now
        self._txop_contention_start = self.edca.backoff.started_at
        self.edca.txop_deadline = now + round(self.profile.max_occupancy_us * US) \
            if self.profile.max_occupancy_us else None
        self._next_exchange()

    def _remaining(self) -> int:
        if self.edca.txop_deadline is None:
            return 1 << 62
        return self.edca.txop_deadline - self.sim.now

    def _tx(self, dur: int, dst: int, mcs: int, streams: int, criticality: str, payload=None,
            nav_ns: int = 0) -> Transmission:
        now = self.sim.now
        tx = Transmission(self.idx, "wifi", self.tx_power, (self.channel,), now, now + dur,
                          mcs=mcs, streams=streams, payload=payload, criticality=criticality, nav_ns=nav_ns)
        self.net.medium.start(tx)
        return tx

    def _next_exchange(self) -> None:
        if self.critical:
            if self.sim.now == self.txop_start:
                self._critical_exchange(self.critical[0])
                return
            self._end_txop()
            return
        dst = self._pick_destination()
        if dst is None:
            self._end_txop()
            return
        mins = self.minstrel[dst]
        q = self.queues[dst]
        mcs, _ = mins.select(self.sim.now)
        overhead = 2 * SIFS_US * US + ppdu_duration_ns(BAR_BYTES, 0, 1) + ppdu_duration_ns(BA_BYTES, 0, 1)
        budget = self._remaining() - overhead
        n = min(self.cfg.amsdu_max, len(q) if len(q) < self.cfg.amsdu_max else self.cfg.amsdu_max)
        packets = []
        nbytes = 0
        # fit the aggregate into the remaining TXOP
        cand = q.pull_packets(n)
        keep = []
        for p in cand:
            b = nbytes + p.bits // 8 + MSDU_OVERHEAD_BYTES
            if ppdu_duration_ns(b, mcs, self.cfg.streams) > budget and keep:
                break
            if ppdu_duration_ns(b, mcs, self.cfg.streams) > budget and self.sim.now != self.txop_start:
                break
            keep.append(p)
            nbytes = b
        rest = cand[len(keep):]
        if rest:
            q.requeue(rest)
        if not keep:
            self._end_txop()
            return
        packets = keep
        grant = self.txop_start
        cstart = self._txop_contention_start
        for p in packets:
            p.tb_ns += max(0, grant - max(cstart, p.arrival)) if p.last_cot != grant else 0
            p.last_cot = grant
        self.inflight = packets
        dur = ppdu_duration_ns(nbytes, mcs, self.cfg.streams)
        frame = WifiFrame("data-aggregate", msdu_count=len(packets), size=nbytes, src=self.idx, dst=dst)
        tx = self._tx(dur, dst, mcs, self.cfg.streams, "data", frame, nav_ns=NAV_AFTER_DATA)
        self._exchange_start = self.sim.now
        self.sim.schedule(tx.end, self._data_end, tx, dst, mcs, packets, kind="wifi-data-end", target=self.idx)

    def _pick_destination(self) -> int | None:
        best, best_t = None, None
        for dst, q in self.queues.items():
            if q.empty or not self.links[dst].up:
                continue
            p = q.peek()
            if best_t is None or p.arrival < best_t:
                best, best_t = dst, p.arrival
        return best

    def _data_end(self, tx, dst, mcs, packets) -> None:
        med = self.net.medium
        med.end(tx)
        ok, _ = med.resolve_reception(tx, dst)
        if ok:
            acked = [True] * len(packets)
        elif not med.resolve_reception(tx, dst, mcs=0, interval=(tx.start, tx.start + PHY_HEADER_US * US))[0]:
            acked = [False] * len(packets)  # header lost: nothing decodes
        else:
            acked = [med.resolve_reception(tx, dst, interval=span)[0]
                     for span in msdu_spans(tx.start, packets, mcs, tx.streams)]
        med.release(tx)
        self.sim.schedule_in(SIFS_US * US, self._send_bar, dst, mcs, packets, acked,
                             kind="wifi-bar", target=self.idx)

    def _send_bar(self, dst, mcs, packets, data_ok) -> None:
        tx = self._tx(ppdu_duration_ns(BAR_BYTES, 0, 1), dst, 0, 1, "block-ack", nav_ns=NAV_AFTER_BAR)
        self.sim.schedule(tx.end, self._bar_end, tx, dst, mcs, packets, data_ok, kind="wifi-bar-end", target=self.idx)

    def _bar_end(self, tx, dst, mcs, packets, data_ok) -> None:
        med = self.net.medium
        med.end(tx)
        ok, _ = med.resolve_reception(tx, dst)
        med.release(tx)
        if not ok:
            self._exchange_done(dst, mcs, packets, [False] * len(packets))
            return
        self.sim.schedule_in(SIFS_US * US, self.net.nodes[dst]._send_ba, self.idx, mcs, packets, data_ok,
                             kind="wifi-ba", target=dst)

    def _send_ba(self, origin, mcs, packets, data_ok) -> None:
        tx = self._tx(ppdu_duration_ns(BA_BYTES, 0, 1), origin, 0, 1, "block-ack")
        self.sim.schedule(tx.end, self._ba_end, tx, origin, mcs, packets, data_ok, kind="wifi-ba-end", target=self.idx)

    def _ba_end(self, tx, origin, mcs, packets, data_ok) -> None:
        med = self.net.medium
        med.end(tx)
        ok, _ = med.resolve_reception(tx, origin)
        med.release(tx)
        self.net.nodes[origin]._exchange_done(self.idx, mcs, packets, data_ok if ok else [False] * len(packets))

    def _exchange_done(self, dst, mcs, packets, acked: list) -> None:
        """Apply the block ACK bitmap: acked MSDUs are delivered, the rest retried or dropped."""
        now = self.sim.now
        ledger = self.net.ledger
        air = now - self._exchange_start
        self._air_end = now
        n_ok = sum(acked)
        self.minstrel[dst].record(mcs, n_ok, len(packets))
        self.inflight = []
        self.stats["exchanges"] += 1
        keep, dropped = [], []
        for p, ok in zip(packets, acked):
            p.ti_ns += air
            p.tries += 1
            if ok:
                ledger.bits_delivered(p, p.bits, now)
                ledger.packet_delivered(p, now)
            else:
                (dropped if p.tries >= self.cfg.retry_limit else keep).append(p)
        if keep:
            self.queues[dst].requeue(keep)
        for p in dropped:
            ledger.bits_dropped(p.file, p.bits, now)
            self.stats["drops"] += 1
        if n_ok:
            self.links[dst].last_ok = now
            self.edca.success()
            if self._remaining() > 0 and self._has_work():
                self.sim.schedule_in(SIFS_US * US, self._continue_txop, kind="wifi-txop-next", target=self.idx)
                return
            self._end_txop()
            return
        self.stats["failures"] += 1
        self.edca.failure()
        if dropped:
            self.edca.success()  # window resets after a discard
            limit = self.cfg.relink_silence_ms
            if limit is not None and now - self.links[dst].last_ok >= round(limit * MS):
                self._end_txop(contend=False)
                self._link_lost(dst)
                self._contend()
                return
        self._end_txop()

    def _continue_txop(self) -> None:
        if self._remaining() <= 0:
            self._end_txop()
            return
        self._next_exchange()

    def _critical_exchange(self, frame: WifiFrame) -> None:
        dur = ppdu_duration_ns(frame.size, 0, 1)
        tx = self._tx(dur, frame.dst, 0, 1, "management", frame, nav_ns=0 if frame.broadcast else NAV_AFTER_MGMT)
        self.sim.schedule(tx.end, self._critical_end, tx, frame, kind="wifi-mgmt-end", target=self.idx)

    def _critical_end(self, tx, frame) -> None:
        med = self.net.medium
        med.end(tx)
        ok, _ = med.resolve_reception(tx, frame.dst)
        med.release(tx)
        if frame.broadcast:
            self._broadcast_done(frame, ok)
            return
        if not ok:
            self._critical_result(frame, False)
            return
        self.sim.schedule_in(SIFS_US * US, self.net.nodes[frame.dst]._send_ack, frame, kind="wifi-ack",
                             target=frame.dst)

    def _broadcast_done(self, frame: WifiFrame, delivered: bool) -> None:
        # the sender cannot tell; only the addressed peer's reaction shows whether it arrived
        self._air_end = self.sim.now
        self.critical.popleft()
        self._end_txop()
        cb = frame.on_success if delivered else frame.on_failure
        if cb:
            cb()

    def _send_ack(self, frame) -> None:
        tx = self._tx(ppdu_duration_ns(ACK_BYTES, 0, 1), frame.src, 0, 1, "block-ack")
        self.sim.schedule(tx.end, self._ack_end, tx, frame, kind="wifi-ack-end", target=self.idx)

    def _ack_end(self, tx, frame) -> None:
        med = self.net.medium
        med.end(tx)
        ok, _ = med.resolve_reception(tx, frame.src)
        med.release(tx)
        self.net.nodes[frame.src]._critical_result(frame, ok)

    def _critical_result(self, frame: WifiFrame, ok: bool) -> None:
        self._air_end = self.sim.now
        if ok:
            self.links[frame.dst].last_ok = self.sim.now
            self.edca.success()
            self.critical.popleft()
            self._end_txop()
            if frame.on_success:
                frame.on_success()
            return
        frame.retries += 1
        self.edca.failure()
        if frame.retries >= self.cfg.retry_limit:
            self.stats["critical_fail"] += 1
            self.critical.popleft()
            self.edca.success()
            self._end_txop()
            if frame.on_failure:
                frame.on_failure()
            return
        self._end_txop()

    def _end_txop(self, contend: bool = True) -> None:
        if self.in_txop:
            self.in_txop = False
            # the TXOP ends with its last frame on air, not at a trailing SIFS check
            now = self._air_end
            limit = round(self.profile.max_occupancy_us * US) if self.profile.max_occupancy_us else 1 << 62
            self.net.ledger.occupancy(self.idx, self.txop_start, now, limit, "wifi")
        if contend:
            self._contend()
