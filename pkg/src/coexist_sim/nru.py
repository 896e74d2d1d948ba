"""NR-U channel access: LBT categories, CW adaptation, FBE, discovery bursts, attach, gNB/UE engines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .backoff import Backoff
from .kernel import MS, US, draw_uniform
from .nr_phy import (HarqProcess, HarqTimers, Numerology, allocate_interlaced, bits_per_rb, check_ocb,
                     harq_step, leading_segment, split_rbs, transport_block_rate)
from .profiles import AccessProfile, profile
from .radio import MAX_MCS, DetectionConfig, Transmission, best_mcs_for, noise_floor_dbm
from .traffic import TxQueue

CAT2_SENSE_US = {"CAT2A": 25, "CAT2B": 16, "FBE": 9}
CAT1_MAX_COT_US = 584
NACK_THRESHOLD = 0.8
FBE_IDLE_FRACTION = 0.05
HARQ_PROCESSES = 16
MSG1_SYMBOLS = 2


@dataclass(frozen=True)
class LbtConfig:
    category: str = "CAT4"
    priority_class: str = "P3"
    role: str = "gnb"
    mode: str = "LBE"
    cot_us: Optional[float] = None  # only meaningful for CAT1 continuations

    def __post_init__(self):
        if self.category not in ("CAT1", "CAT2A", "CAT2B", "CAT4"):
            raise ValueError(f"unknown LBT category {self.category!r}")
        if self.role not in ("gnb", "ue"):
            raise ValueError("role must be gnb or ue")
        if self.mode not in ("LBE", "FBE"):
            raise ValueError("mode must be LBE or FBE")
        if self.category == "CAT1" and (self.cot_us is None or self.cot_us > CAT1_MAX_COT_US):
            raise ValueError(f"CAT1 is only allowed for continuations up to {CAT1_MAX_COT_US} us")
        profile(self.priority_class)

    @property
    def profile(self) -> AccessProfile:
        return profile(self.priority_class)

    @property
    def sense_us(self) -> Optional[int]:
        return CAT2_SENSE_US.get(self.category)


class CwState:
    def __init__(self, prof: AccessProfile):
        self.profile = prof
        self.current_cw = prof.cw_min
        self.reference_feedback: list[str] = []

    def draw(self, rng) -> int:
        return draw_uniform(rng, self.current_cw)


def update_cw(state: CwState, feedback) -> int:
    """Double on >= 80 % NACK in the reference slot, otherwise fall back to cw_min."""
    fb = list(feedback)
    if not fb:
        return state.current_cw
    state.reference_feedback = fb
    nacks = sum(1 for x in fb if x in ("NACK", "N", False))
    if nacks / len(fb) >= NACK_THRESHOLD:
        state.current_cw = min(2 * state.current_cw, state.profile.cw_max)
    else:
        state.current_cw = state.profile.cw_min
    return state.current_cw


def cat4_contend(backoff: Backoff, state: CwState, role: str, busy: bool, rng, k: int | None = None) -> int:
    """Start a CAT4 countdown: defer by role, then ``k`` idle 9 us slots."""
    if k is None:
        k = state.draw(rng)
    backoff.start(k, state.profile.defer_us(role) * US, busy)
    return k


def cat2_sense(medium, sub, kind: str) -> bool:
    """True iff the subscription has been idle for the whole fixed sensing time."""
    return medium.idle_for(sub) >= CAT2_SENSE_US[kind] * US


@dataclass(frozen=True)
class FbeSchedule:
    period_ns: int
    cot_ns: int
    idle_ns: int
    phase_ns: int = 0

    def frame_start(self, n: int) -> int:
        return self.phase_ns + n * self.period_ns


def fbe_cycle(prof: AccessProfile, cot_len_ns: int, period_ns: int | None = None, phase_ns: int = 0) -> FbeSchedule:
    if prof.max_occupancy_us is not None and cot_len_ns > prof.max_occupancy_us * US:
        raise ValueError(f"COT {cot_len_ns} ns exceeds {prof.name} limit of {prof.max_occupancy_us} us")
    idle = math.ceil(FBE_IDLE_FRACTION * cot_len_ns)
    if period_ns is None:
        period_ns = cot_len_ns + idle
    if period_ns < cot_len_ns + idle:
        raise ValueError("frame period too short for the COT plus its mandatory idle time")
    return FbeSchedule(period_ns, cot_len_ns, idle, phase_ns)


@dataclass(frozen=True)
class DiscoveryConfig:
    period_ms: float = 20.0
    window_ms: float = 5.0
    candidates: int = 10
    max_cot_ms: float = 1.0
    burst_ms: float = 0.5

    def __post_init__(self):
        if self.window_ms > self.period_ms:
            raise ValueError("discovery window longer than its period")
        if self.candidates not in (10, 20):
            raise ValueError("discovery windows hold 10 or 20 candidate positions")
        if self.burst_ms > self.max_cot_ms:
            raise ValueError("discovery burst exceeds its maximum COT")

    @classmethod
    def for_numerology(cls, mu: int, **kw) -> "DiscoveryConfig":
        if mu == 0:
            return cls(candidates=10, max_cot_ms=1.0, **kw)
        return cls(candidates=20, max_cot_ms=0.5, burst_ms=min(kw.pop("burst_ms", 0.5), 0.5), **kw)

    def candidate_offsets_ns(self) -> list[int]:
        step = round(self.window_ms * MS) // self.candidates
        return [i * step for i in range(self.candidates)]


@dataclass
class NruConfig:
    priority_class: str = "P3"
    lbt_category: str = "CAT4"
    mode: str = "LBE"
    ed_threshold: float = -72.0
    max_cot_ms: float = 8.0
    discovery_period_ms: float = 20.0
    discovery_burst_ms: float = 0.5
    mu: int = 0
    streams: int = 2
    harq_max_tx: int = 4
    combining_gain_db: float = 3.0
    in_cot_feedback: bool = False
    timers: HarqTimers = field(default_factory=HarqTimers)
    fbe_period_ms: float = 10.0
    olla_step_down_db: float = 1.0
    olla_max_db: float = 30.0
    bler_target: float = 0.1
    ue_priority_class: str = "P1"

    def access_profile(self) -> AccessProfile:
        return profile(self.priority_class).with_occupancy(self.max_cot_ms * 1000)


class TransportBlock:
    __slots__ = ("ue", "proc", "segments", "bits", "mcs", "decoded", "ref_cot")

    def __init__(self, ue, proc, segments, bits, mcs):
        self.ue = ue
        self.proc = proc
        self.segments = segments
        self.bits = bits
        self.mcs = mcs
        self.decoded = False
        self.ref_cot = None  # COT number if this TB sits in that COT's reference slot


class UeContext:
    """gNB-side view of one UE: DL buffer, HARQ entities, link adaptation."""

    def __init__(self, ue: int, ids, timers: HarqTimers, snr_db: float):
        self.ue = ue
        self.queue = TxQueue(ids=ids)
        self.procs = [HarqProcess(i, ue, timers) for i in range(HARQ_PROCESSES)]
        self.retx: list[TransportBlock] = []
        self.attached = False
        self.pending_response = False
        self.olla = 0.0
        self.snr_db = snr_db
        self.inflight_bits = 0

    def free_proc(self) -> HarqProcess | None:
        for p in self.procs:
            if p.state in ("idle", "done"):
                return p
        return None

    def mcs(self) -> int:
        return max(0, min(MAX_MCS, best_mcs_for(self.snr_db + self.olla)))


class GnbNode:
    tech = "nru"

    def __init__(self, net, idx: int, tx_power: float, cfg: NruConfig):
        self.net = net
        self.sim = net.sim
        self.idx = idx
        self.tx_power = tx_power
        self.cfg = cfg
        self.num = Numerology(cfg.mu)
        self.slot_ns = self.num.slot_ns
        self.n_rb = self.num.rb_count(20)
        self.profile = cfg.access_profile()
        self.max_cot_ns = round(cfg.max_cot_ms * MS)
        self.cw = CwState(self.profile)
        self.rng = self.sim.stream(idx, "backoff")
        self.backoff = Backoff(self.sim, self._on_grant, name=idx)
        self.disc = DiscoveryConfig.for_numerology(cfg.mu, period_ms=cfg.discovery_period_ms,
                                                   burst_ms=cfg.discovery_burst_ms)
        self.ues: dict[int, UeContext] = {}
        self.channel = 0
        self.sub = None
        self.in_cot = False
        self.bursting = False
        self.cot_tx: Transmission | None = None
        self.cot_start = 0
        self.cot_contention_start = 0
        self.cot_seq = 0
        self._ref_pending: dict[int, list] = {}
        self._ref_done = 0
        self._ref_sizes: dict[int, int] = {}
        self._grant_after_burst = False
        self._wakeup = None
        self._pending_discovery = None
        self.fbe: FbeSchedule | None = None
        self.discovery_due = False
        self.stats = {"cots": 0, "slots": 0, "tbs": 0, "nacks": 0, "rlc_requeue": 0,
                      "disc_attempts": [], "disc_emitted": 0, "disc_skipped": 0, "fbe_skipped": 0}

    # setup ------------------------------------------------------------------

    def attach_medium(self, channel: int = 0) -> None:
        self.channel = channel
        self.sub = self.net.medium.subscribe(self.idx, (channel,), DetectionConfig(self.cfg.ed_threshold),
                                             self._on_cca)

    def add_ue(self, ue: int) -> UeContext:
        med = self.net.medium
        snr = self.tx_power - med.loss_db[self.idx][ue] - med.noise_dbm
        ctx = UeContext(ue, self.net.packet_ids, self.cfg.timers, snr)
        self.ues[ue] = ctx
        return ctx

    def start(self) -> None:
        """Kick off the periodic procedures with a random phase."""
        rng = self.sim.stream(self.idx, "phase")
        period = round(self.disc.period_ms * MS)
        phase = rng.randrange(period // self.slot_ns) * self.slot_ns
        self.sim.schedule(phase, self._discovery_period, phase, kind="nru-disc", target=self.idx)
        if self.cfg.mode == "FBE":
            fperiod = round(self.cfg.fbe_period_ms * MS)
            cot = min(self.max_cot_ns, (fperiod * 100) // 105 // self.slot_ns * self.slot_ns)
            fphase = rng.randrange(fperiod // self.slot_ns) * self.slot_ns
            self.fbe = fbe_cycle(self.profile, cot, fperiod, fphase)
            self.sim.schedule(fphase, self._fbe_frame, 0, kind="nru-fbe", target=self.idx)

    def _on_cca(self, busy: bool) -> None:
        self.backoff.set_busy(busy or self.bursting)

    # traffic ----------------------------------------------------------------

    def enqueue_file(self, f) -> None:
        self.net.ledger.file_arrived(f, self.sim.now)
        self.ues[f.flow.dst].queue.add_file(f)
        self._contend()

    def buffered_bits(self) -> int:
        return sum(c.queue.backlog_bits + c.inflight_bits for c in self.ues.values())

    def _eligible(self, t: int) -> bool:
        for c in self.ues.values():
            if not c.attached:
                continue
            for tb in c.retx:
                if tb.proc.retx_slot * self.slot_ns <= t:
                    return True
            if not c.queue.empty and c.free_proc() is not None:
                return True
        return False

    def _next_retx_time(self) -> int | None:
        best = None
        for c in self.ues.values():
            if c.attached:
                for tb in c.retx:
                    t = tb.proc.retx_slot * self.slot_ns
                    if best is None or t < best:
                        best = t
        return best

    def _contend(self) -> None:
        # a grant that landed during a discovery burst is still waiting for the burst to end
        if self.fbe is not None or self.in_cot or self.backoff.active or self._grant_after_burst:
            return
        now = self.sim.now
        if self._eligible(now):
            cat4_contend(self.backoff, self.cw, "dl", self.sub.busy or self.bursting, self.rng)
            return
        t = self._next_retx_time()
        if t is not None and (self._wakeup is None or self._wakeup.cancelled or self._wakeup.fired):
            self._wakeup = self.sim.schedule(max(t, now), self._contend, kind="nru-wake", target=self.idx)

    # COT ----------------------------------------------------------------------

    def _on_grant(self, now: int) -> None:
        if self.bursting:
            self._grant_after_burst = True
            return
        if not self._eligible(now):
            self._contend()
            return
        self._open_cot(now, self.backoff.started_at, self.max_cot_ns)

    def _open_cot(self, now: int, contention_start: int, max_len: int) -> None:
        self.in_cot = True
        self.cot_seq += 1
        self.cot_start = now
        self.cot_contention_start = contention_start
        self.cot_deadline = now + max_len
        self.stats["cots"] += 1
        tx = Transmission(self.idx, "nru", self.tx_power, (self.channel,), now, None,
                          streams=self.cfg.streams, criticality="data")
        self.cot_tx = tx
        self.net.medium.start(tx)
        lead = leading_segment(now, self.num)
        if lead is None:
            self._run_slot(now, min(now + self.slot_ns, self.cot_deadline), 14)
        elif lead.direction == "RES":
            end = min(lead.end, self.cot_deadline)
            self.sim.schedule(end, self._after_slot, kind="nru-res", target=self.idx)
        else:
            self._run_slot(now, min(lead.end, self.cot_deadline), lead.symbols)

    def _run_slot(self, start: int, end: int, nsym: int) -> None:
        ctxs = [c for c in self.ues.values() if c.attached]
        demand = {}
        plan = {}
        for c in ctxs:
            mcs = c.mcs()
            bpr = bits_per_rb(mcs, self.cfg.streams, nsym)
            need = 0
            ready = [tb for tb in c.retx if tb.proc.retx_slot * self.slot_ns <= start]
            for tb in ready:
                need += math.ceil(tb.bits / bits_per_rb(tb.mcs, self.cfg.streams, nsym))
            new = 0
            if not c.queue.empty and c.free_proc() is not None:
                new = math.ceil(c.queue.backlog_bits / bpr)
                need += new
            if need:
                demand[c.ue] = need
                plan[c.ue] = (c, mcs, ready)
        alloc = split_rbs(demand, self.n_rb)
        tbs = []
        slot_idx = start // self.slot_ns
        for ue, rbs in alloc.items():
            c, mcs, ready = plan[ue]
            for tb in ready:
                need = math.ceil(tb.bits / bits_per_rb(tb.mcs, self.cfg.streams, nsym))
                if need > rbs:
                    continue
                rbs -= need
                c.retx.remove(tb)
                harq_step(tb.proc, "data-sent", max(slot_idx, tb.proc.retx_slot), self.cfg.harq_max_tx)
                tbs.append(tb)
            if rbs > 0:
                proc = c.free_proc()
                if proc is not None and not c.queue.empty:
                    cap = transport_block_rate(rbs, mcs, self.cfg.streams, self.num, nsym)
                    segs = c.queue.pull_bits(cap)
                    if segs:
                        bits = sum(b for _, b in segs)
                        tb = TransportBlock(ue, proc, segs, bits, mcs)
                        proc.load(tb)
                        harq_step(proc, "data-sent", slot_idx, self.cfg.harq_max_tx)
                        c.inflight_bits += bits
                        tbs.append(tb)
        grant = self.cot_start
        cstart = self.cot_contention_start
        for tb in tbs:
            for p, _ in tb.segments:
                if p.last_cot != grant:
                    p.tb_ns += max(0, grant - max(cstart, p.arrival))
                    p.last_cot = grant
                if p.ti_mark != start:
                    p.ti_ns += end - start
                    p.ti_mark = start
        self.stats["slots"] += 1
        self.stats["tbs"] += len(tbs)
        if tbs and self.cot_seq not in self._ref_sizes and self._ref_done != self.cot_seq:
            self._ref_sizes[self.cot_seq] = len(tbs)
            self._ref_done = self.cot_seq
            for tb in tbs:
                tb.ref_cot = self.cot_seq
        self.sim.schedule(end, self._slot_end, start, end, tbs, kind="nru-slot", target=self.idx)

    def _slot_end(self, start: int, end: int, tbs: list) -> None:
        med = self.net.medium
        ledger = self.net.ledger
        now = self.sim.now
        fb_at = now + self.cfg.timers.d1 * self.slot_ns
        for tb in tbs:
            c = self.ues[tb.ue]
            ok, _ = med.resolve_reception(self.cot_tx, tb.ue, mcs=tb.mcs, interval=(start, end),
                                          gain_db=self.cfg.combining_gain_db * tb.proc.soft_copies)
            if ok:
                tb.decoded = True
                c.inflight_bits -= tb.bits
                for p, nbits in tb.segments:
                    p.acked += nbits
                    ledger.bits_delivered(p, nbits, now)
                    if p.acked == p.bits:
                        ledger.packet_delivered(p, now)
            ref, tb.ref_cot = tb.ref_cot, None
            self.sim.schedule(fb_at, self._feedback, tb, ok, ref, kind="nru-harq-fb", target=self.idx)
        if self._pending_discovery is not None:
            c0 = self._pending_discovery
            self._pending_discovery = None
            self._deliver_discovery(self.cot_tx, (max(c0, start), end))
        self._after_slot()

    def _after_slot(self) -> None:
        now = self.sim.now
        if now + self.slot_ns <= self.cot_deadline and self._eligible(now):
            self._run_slot(now, now + self.slot_ns, 14)
            return
        self._close_cot()

    def _close_cot(self) -> None:
        now = self.sim.now
        med = self.net.medium
        med.end(self.cot_tx)
        med.release(self.cot_tx)
        self.cot_tx = None
        self.in_cot = False
        limit = round(self.profile.max_occupancy_us * US)
        self.net.ledger.occupancy(self.idx, self.cot_start, now, limit, "nru")
        if self.fbe is not None:
            nxt = self._fbe_next_start
            if nxt - now < FBE_IDLE_FRACTION * (now - self.cot_start):
                self.net.ledger.fbe_idle_violations.append((self.idx, self.cot_start, now, nxt))
            return
        self._contend()

    def _feedback(self, tb: TransportBlock, ok: bool, ref_cot: int | None) -> None:
        c = self.ues[tb.ue]
        proc = tb.proc
        slot = self.sim.now // self.slot_ns
        first = proc.tx_count == 1
        res = harq_step(proc, "ACK" if ok else "NACK", slot, self.cfg.harq_max_tx)
        if first:
            # outer-loop link adaptation on first transmissions only
            down = self.cfg.olla_step_down_db
            if ok:
                c.olla += down * self.cfg.bler_target / (1 - self.cfg.bler_target)
            else:
                c.olla -= down
            c.olla = max(-self.cfg.olla_max_db, min(self.cfg.olla_max_db, c.olla))
        if not ok:
            self.stats["nacks"] += 1
        if res == "retransmit":
            c.retx.append(tb)
        elif res == "give-up":
            c.inflight_bits -= tb.bits
            c.queue.return_bits(tb.segments)
            self.stats["rlc_requeue"] += 1
        if ref_cot is not None:
            self._ref_feedback(ref_cot, ok)
        self._contend()

    def _ref_feedback(self, cot: int, ok: bool) -> None:
        pend = self._ref_pending.setdefault(cot, [])
        pend.append("ACK" if ok else "NACK")
        if len(pend) == self._ref_sizes[cot]:
            update_cw(self.cw, pend)
            del self._ref_pending[cot]
            del self._ref_sizes[cot]

    # discovery ----------------------------------------------------------------

    def _discovery_period(self, period_start: int) -> None:
        self.stats["disc_attempts"].append(period_start)
        nxt = period_start + round(self.disc.period_ms * MS)
        self.sim.schedule(nxt, self._discovery_period, nxt, kind="nru-disc", target=self.idx)
        if self.fbe is not None:
            self.discovery_due = True
            return
        self._emitted = False
        offs = self.disc.candidate_offsets_ns()
        self._discovery_candidate(period_start, offs, 0)

    def _discovery_candidate(self, period_start: int, offs: list, i: int) -> None:
        now = self.sim.now
        if self.in_cot:
            self.stats["disc_emitted"] += 1
            self._pending_discovery = now
            return
        if not self.bursting and cat2_sense(self.net.medium, self.sub, "CAT2A"):
            self._emit_burst()
            return
        if i + 1 < len(offs):
            self.sim.schedule(period_start + offs[i + 1], self._discovery_candidate, period_start, offs, i + 1,
                              kind="nru-disc-cand", target=self.idx)
        else:
            self.stats["disc_skipped"] += 1

    def _emit_burst(self) -> None:
        now = self.sim.now
        dur = round(self.disc.burst_ms * MS)
        tx = Transmission(self.idx, "nru", self.tx_power, (self.channel,), now, now + dur,
                          criticality="discovery")
        self.bursting = True
        self.backoff.set_busy(True)
        self.net.medium.start(tx)
        self.stats["disc_emitted"] += 1
        self.sim.schedule(tx.end, self._burst_end, tx, kind="nru-disc-end", target=self.idx)

    def _burst_end(self, tx: Transmission) -> None:
        med = self.net.medium
        med.end(tx)
        self._deliver_discovery(tx, (tx.start, tx.end))
        med.release(tx)
        self.bursting = False
        self.net.ledger.occupancy(self.idx, tx.start, tx.end, round(self.disc.max_cot_ms * MS), "nru")
        if self._grant_after_burst:
            self._grant_after_burst = False
            if self._eligible(self.sim.now):
                self._open_cot(self.sim.now, self.backoff.started_at, self.max_cot_ns)
                return
        self.backoff.set_busy(self.sub.busy)
        self._contend()

    def _deliver_discovery(self, tx: Transmission, interval: tuple) -> None:
        med = self.net.medium
        for ue, c in self.ues.items():
            if c.attached and not c.pending_response:
                continue
            ok, _ = med.resolve_reception(tx, ue, mcs=0, interval=interval)
            if ok:
                self.net.nodes[ue].on_discovery(self.idx)

    # attach -----------------------------------------------------------------

    def receive_msg1(self, ue: int) -> None:
        self.ues[ue].pending_response = True

    def confirm_attach(self, ue: int) -> bool:
        c = self.ues[ue]
        if not c.pending_response:
            return False
        c.pending_response = False
        c.attached = True
        self._contend()
        return True

    # FBE ----------------------------------------------------------------------

    def _fbe_frame(self, n: int) -> None:
        now = self.sim.now
        self._fbe_next_start = self.fbe.frame_start(n + 1)
        self.sim.schedule(self._fbe_next_start, self._fbe_frame, n + 1, kind="nru-fbe", target=self.idx)
        want = self._eligible(now) or self.discovery_due
        if not want:
            return
        if self.in_cot or self.bursting or not cat2_sense(self.net.medium, self.sub, "FBE"):
            self.stats["fbe_skipped"] += 1
            return
        if self._eligible(now):
            if self.discovery_due:
                self.discovery_due = False
                self.stats["disc_emitted"] += 1
                self._pending_discovery = now
            self._open_cot(now, now, self.fbe.cot_ns)
        else:
            self.discovery_due = False
            self._emit_burst()


class UeNode:
    """NR-U user: hears discovery bursts and runs the attach handshake over CAT4 P1."""

    tech = "nru"

    def __init__(self, net, idx: int, gnb: int, tx_power: float, cfg: NruConfig):
        self.net = net
        self.sim = net.sim
        self.idx = idx
        self.gnb = gnb
        self.tx_power = tx_power
        self.cfg = cfg
        self.num = Numerology(cfg.mu)
        self.cw = CwState(profile(cfg.ue_priority_class))
        self.rng = self.sim.stream(idx, "backoff")
        self.backoff = Backoff(self.sim, self._on_grant, name=idx)
        self.channel = 0
        self.sub = None
        self.heard = 0
        self.attached = False
        self.attached_at = None
        self.msg1_busy = False
        self.msg1_sent = 0
        self.ocb_checked = 0
        self.transmitting = False

    def attach_medium(self, channel: int = 0) -> None:
        self.channel = channel
        self.sub = self.net.medium.subscribe(self.idx, (channel,), DetectionConfig(self.cfg.ed_threshold),
                                             self._on_cca)

    def _on_cca(self, busy: bool) -> None:
        self.backoff.set_busy(busy)

    def on_discovery(self, gnb: int) -> None:
        if gnb != self.gnb:
            return
        self.heard += 1
        if self.attached:
            return
        if self.net.nodes[gnb].confirm_attach(self.idx):
            self.attached = True
            self.attached_at = self.sim.now
            return
        if not self.msg1_busy:
            self.msg1_busy = True
            cat4_contend(self.backoff, self.cw, "ue", self.sub.busy, self.rng)

    def _on_grant(self, now: int) -> None:
        alloc = allocate_interlaced([self.idx], 20, self.num)
        if not check_ocb(alloc, 20.0):
            raise AssertionError(f"UL allocation of UE {self.idx} violates the occupied-bandwidth rule")
        self.ocb_checked += 1
        dur = self.num.symbol_offset(MSG1_SYMBOLS)
        tx = Transmission(self.idx, "nru", self.tx_power, (self.channel,), now, now + dur,
                          criticality="management")
        self.net.medium.start(tx)
        self.msg1_sent += 1
        self.sim.schedule(tx.end, self._msg1_end, tx, kind="nru-msg1-end", target=self.idx)

    def _msg1_end(self, tx: Transmission) -> None:
        med = self.net.medium
        med.end(tx)
        ok, _ = med.resolve_reception(tx, self.gnb, mcs=0)
        med.release(tx)
        self.msg1_busy = False
        if ok:
            self.net.nodes[self.gnb].receive_msg1(self.idx)
