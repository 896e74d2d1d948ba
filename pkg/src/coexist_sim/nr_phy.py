"""NR-U slot grid, COT composition, interlaced RB allocation, OCB and HARQ timing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .kernel import MS, US
from .radio import MCS_TABLE

SYMBOLS_PER_SLOT = 14
SUBCARRIERS_PER_RB = 12
CONTROL_OVERHEAD = 0.14
OCB_FRACTION = 0.8
CAT1_MAX_GAP_US = 16

RBS_20MHZ = {0: 106, 1: 51, 2: 24}
INTERLACES = {0: 10, 1: 5}


@dataclass(frozen=True)
class Numerology:
    mu: int = 0

    def __post_init__(self):
        if self.mu not in (0, 1, 2, 3):
            raise ValueError("numerology index must be 0..3")

    @property
    def scs_khz(self) -> int:
        return 15 * 2 ** self.mu

    @property
    def slot_ms(self) -> float:
        return 2.0 ** -self.mu

    @property
    def slot_ns(self) -> int:
        return MS >> self.mu

    @property
    def symbols_per_slot(self) -> int:
        return SYMBOLS_PER_SLOT

    def symbol_offset(self, i: int) -> int:
        """Offset in ns of symbol boundary ``i`` (0..14) from its slot start."""
        return (i * self.slot_ns) // SYMBOLS_PER_SLOT

    def rb_count(self, bandwidth_mhz: int = 20) -> int:
        try:
            return RBS_20MHZ[self.mu] * (bandwidth_mhz // 20)
        except KeyError:
            raise ValueError(f"no RB table for mu={self.mu}") from None

    def interlace_count(self) -> int:
        try:
            return INTERLACES[self.mu]
        except KeyError:
            raise ValueError(f"interlaces are defined for 15 and 30 kHz only, not mu={self.mu}") from None

    def rb_width_mhz(self) -> float:
        return SUBCARRIERS_PER_RB * self.scs_khz / 1000.0


def transport_block_rate(rb_count: int, mcs: int, streams: int, numerology: Numerology | None = None,
                         symbols: int = SYMBOLS_PER_SLOT) -> int:
    """Bits carried by ``rb_count`` RBs over ``symbols`` symbols."""
    if not 0 <= mcs < len(MCS_TABLE):
        raise ValueError(f"invalid MCS {mcs}")
    eff = MCS_TABLE[mcs][1]
    return math.floor(rb_count * SUBCARRIERS_PER_RB * symbols * eff * streams * (1 - CONTROL_OVERHEAD))


def bits_per_rb(mcs: int, streams: int, symbols: int = SYMBOLS_PER_SLOT) -> float:
    return SUBCARRIERS_PER_RB * symbols * MCS_TABLE[mcs][1] * streams * (1 - CONTROL_OVERHEAD)


# --- resource allocation ---------------------------------------------------------


@dataclass
class RbAllocation:
    bandwidth_mhz: int
    rb_count: int
    numerology: Numerology
    ue_rbs: dict = field(default_factory=dict)        # ue -> sorted RB indices
    ue_interlaces: dict = field(default_factory=dict)  # ue -> interlace ids
    deferred: list = field(default_factory=list)

    def ue_span_mhz(self, ue) -> float:
        rbs = self.ue_rbs[ue]
        if not rbs:
            return 0.0
        return (max(rbs) - min(rbs) + 1) * self.numerology.rb_width_mhz()

    @property
    def occupied_span(self) -> float:
        """Span of the narrowest UE allocation, in MHz."""
        if not self.ue_rbs:
            return 0.0
        return min(self.ue_span_mhz(u) for u in self.ue_rbs)


def allocate_interlaced(ues, bandwidth_mhz: int, numerology: Numerology) -> RbAllocation:
    """Give each UE whole interlaces (every N-th RB); extra UEs wait for a later TTI."""
    ues = list(ues)
    if not ues:
        raise ValueError("need at least one UE")
    n_int = numerology.interlace_count()
    n_rb = numerology.rb_count(bandwidth_mhz)
    served, deferred = ues[:n_int], ues[n_int:]
    alloc = RbAllocation(bandwidth_mhz, n_rb, numerology, deferred=deferred)
    k = len(served)
    for i, ue in enumerate(served):
        ids = list(range(i, n_int, k))
        alloc.ue_interlaces[ue] = ids
        alloc.ue_rbs[ue] = sorted(rb for m in ids for rb in range(m, n_rb, n_int))
    return alloc


def contiguous_allocation(ue, first_rb: int, n_rbs: int, bandwidth_mhz: int, numerology: Numerology) -> RbAllocation:
    n_rb = numerology.rb_count(bandwidth_mhz)
    if first_rb < 0 or first_rb + n_rbs > n_rb:
        raise ValueError("allocation outside the carrier")
    alloc = RbAllocation(bandwidth_mhz, n_rb, numerology)
    alloc.ue_rbs[ue] = list(range(first_rb, first_rb + n_rbs))
    return alloc


def check_ocb(alloc: RbAllocation | float, ncb_mhz: float = 20.0) -> bool:
    span = alloc if isinstance(alloc, (int, float)) else alloc.occupied_span
    # small epsilon: 0.8 * 20 is not exact in binary
    return span >= OCB_FRACTION * ncb_mhz - 1e-9


def split_rbs(demand: dict, n_rb: int) -> dict:
    """Water-fill ``n_rb`` RBs over per-UE demands (in RBs), in key order."""
    alloc = {u: 0 for u in demand}
    left = n_rb
    active = [u for u in demand if demand[u] > 0]
    while left > 0 and active:
        share = max(1, left // len(active))
        nxt = []
        for u in active:
            if left == 0:
                break
            give = min(share, demand[u] - alloc[u], left)
            alloc[u] += give
            left -= give
            if alloc[u] < demand[u]:
                nxt.append(u)
        active = nxt
    return alloc


# --- COT composition -------------------------------------------------------------


@dataclass(frozen=True)
class HarqTimers:
    d0: int = 0
    d1: int = 4
    d2: int = 2
    u0: int = 4
    u1: int = 4

    def __post_init__(self):
        # a same-slot DL grant is fine; everything after it needs at least one slot to happen
        if self.d0 < 0:
            raise ValueError("harq timer d0 must be >= 0")
        for name in ("d1", "d2", "u0", "u1"):
            if getattr(self, name) < 1:
                raise ValueError(f"harq timer {name} must be >= 1 slot")


@dataclass
class SlotPlan:
    index: int          # global slot number on the numerology grid
    start: int
    end: int
    symbols: int
    direction: str      # "DL" | "UL" | "RES" (reservation signal)


@dataclass
class HarqOccasion:
    direction: str
    grant_slot: int
    data_slot: int
    feedback_slot: int
    earliest_retx_slot: int
    in_cot: bool


@dataclass
class CotSchedule:
    owner: int
    start: int
    end: int
    numerology: Numerology
    slots: list
    bursts: list            # [(direction, [slot indices])]
    switch_gaps_us: list
    lbt_before_ul: list     # LBT type guarding each DL->UL switch
    reference_slot: Optional[int]
    harq: list
    max_cot_ns: int

    @property
    def length_ns(self) -> int:
        return self.end - self.start

    def slot(self, index: int) -> SlotPlan:
        for s in self.slots:
            if s.index == index:
                return s
        raise KeyError(index)

    @property
    def first_index(self) -> int:
        return self.slots[0].index

    @property
    def last_index(self) -> int:
        return self.slots[-1].index


def switch_lbt(gap_us: float) -> str:
    return "CAT1" if gap_us <= CAT1_MAX_GAP_US else "CAT2A"


def slot_grid_start(t: int, numerology: Numerology) -> tuple[int, int, int]:
    """(global slot index, slot start, first whole symbol index at or after ``t``)."""
    sl = numerology.slot_ns
    idx, off = divmod(t, sl)
    start = idx * sl
    sym = 0
    while sym < SYMBOLS_PER_SLOT and numerology.symbol_offset(sym) < off:
        sym += 1
    return idx, start, sym


def leading_segment(t: int, numerology: Numerology) -> Optional[SlotPlan]:
    """Mini-slot or reservation covering ``t`` up to the next slot boundary (None if aligned)."""
    idx, start, sym = slot_grid_start(t, numerology)
    if t == start:
        return None
    avail = SYMBOLS_PER_SLOT - sym
    end = start + numerology.slot_ns
    if avail >= 2:
        return SlotPlan(idx, t, end, avail, "DL")
    return SlotPlan(idx, t, end, 0, "RES")


def build_cot(start: int, numerology: Numerology, max_cot_ns: int, dl_slots: int, ul_slots: int = 0,
              timers: HarqTimers = HarqTimers(), in_cot_feedback: bool = False,
              switch_gap_us: float = 0.0, owner: int = 0) -> CotSchedule:
    """Lay out a gNB-initiated COT on the slot grid.

    The DL burst comes first. A grant landing mid-slot opens with a mini-slot
    (2-13 symbols) or, if fewer than two symbols remain, a reservation signal.
    With ``in_cot_feedback`` every HARQ feedback occasion must fall inside
    the COT, so DL data is limited to slots whose feedback fits.
    """
    if max_cot_ns <= 0:
        raise ValueError("max COT must be positive")
    sl = numerology.slot_ns
    slots: list[SlotPlan] = []
    lead = leading_segment(start, numerology)
    t = start
    if lead is not None:
        if lead.end - start > max_cot_ns:
            lead.end = start + max_cot_ns
        slots.append(lead)
        t = lead.end
    dl_slots = max(dl_slots, 0)
    ul_slots = max(ul_slots, 0)
    if dl_slots == 0 and ul_slots == 0 and not any(s.direction == "DL" for s in slots):
        dl_slots = 1  # control-only minimum
    deadline = start + max_cot_ns
    room = (deadline - t) // sl if t < deadline else 0
    lead_dl = 1 if lead is not None and lead.direction == "DL" else 0
    want_dl = max(0, dl_slots - lead_dl)
    if in_cot_feedback and (dl_slots + lead_dl) > 0:
        # feedback for the last DL slot must land in a UL slot inside the COT
        want_ul = max(ul_slots, 1)
        total_room = room
        want_dl = min(want_dl, max(0, total_room - max(want_ul, timers.d1)))
        want_ul = min(max(want_ul, timers.d1 if want_dl or lead_dl else want_ul), total_room - want_dl)
    else:
        want_ul = ul_slots
        if want_dl + want_ul > room:
            want_dl = min(want_dl, room)
            want_ul = min(want_ul, room - want_dl)
    for _ in range(want_dl):
        idx = t // sl
        slots.append(SlotPlan(idx, t, t + sl, SYMBOLS_PER_SLOT, "DL"))
        t += sl
    ul_start = len(slots)
    for _ in range(want_ul):
        idx = t // sl
        slots.append(SlotPlan(idx, t, t + sl, SYMBOLS_PER_SLOT, "UL"))
        t += sl
    if not slots:
        raise ValueError("COT has no room for a single slot")
    end = slots[-1].end
    bursts = []
    for s in slots:
        if s.direction == "RES":
            continue
        if bursts and bursts[-1][0] == s.direction:
            bursts[-1][1].append(s.index)
        else:
            bursts.append((s.direction, [s.index]))
    gaps, lbts = [], []
    for prev, nxt in zip(bursts, bursts[1:]):
        if prev[0] == "DL" and nxt[0] == "UL":
            gaps.append(switch_gap_us)
            lbts.append(switch_lbt(switch_gap_us))
    dl_idx = [s.index for s in slots if s.direction == "DL"]
    ul_idx = [s.index for s in slots if s.direction == "UL"]
    first, last = slots[0].index, slots[-1].index
    harq = []
    for n in dl_idx:
        grant = n - timers.d0
        if grant < first:
            continue  # the grant itself has to go out inside this COT
        fb = n + timers.d1
        if in_cot_feedback:
            later_ul = [u for u in ul_idx if u >= fb]
            if not later_ul:
                continue
            fb = later_ul[0]
        harq.append(HarqOccasion("DL", grant, n, fb, fb + timers.d2,
                                 in_cot=first <= grant and fb <= last))
    for u in ul_idx:
        grant = u - timers.u0
        fb = u + timers.u1
        if grant < first or grant not in dl_idx:
            continue  # UL data needs a DL grant occasion in this COT
        if in_cot_feedback and fb > last:
            continue
        harq.append(HarqOccasion("UL", grant, u, fb, fb + timers.d2, in_cot=fb <= last))
    ref = dl_idx[0] if dl_idx else None
    return CotSchedule(owner, start, end, numerology, slots, bursts, gaps, lbts, ref, harq, max_cot_ns)


def harq_order_ok(occ: HarqOccasion, timers: HarqTimers) -> bool:
    """Grant precedes data, data precedes feedback, feedback precedes retransmission."""
    if occ.direction == "DL":
        return (occ.data_slot - occ.grant_slot >= timers.d0
                and occ.feedback_slot - occ.data_slot >= timers.d1
                and occ.earliest_retx_slot - occ.feedback_slot >= timers.d2)
    return (occ.data_slot - occ.grant_slot >= timers.u0
            and occ.feedback_slot - occ.data_slot >= timers.u1
            and occ.earliest_retx_slot - occ.feedback_slot >= timers.d2)


# --- HARQ ------------------------------------------------------------------------


class HarqProcess:
    """One stop-and-wait HARQ process carrying a transport block."""

    __slots__ = ("id", "ue", "tb", "state", "soft_copies", "tx_count", "timers", "feedback_slot",
                 "retx_slot", "data_slot")

    def __init__(self, pid: int, ue: int = -1, timers: HarqTimers = HarqTimers()):
        self.id = pid
        self.ue = ue
        self.tb = None
        self.state = "idle"
        self.soft_copies = 0
        self.tx_count = 0
        self.timers = timers
        self.feedback_slot = None
        self.retx_slot = None
        self.data_slot = None

    def load(self, tb) -> None:
        if self.state not in ("idle", "done"):
            raise RuntimeError(f"HARQ process {self.id} is busy")
        self.tb = tb
        self.state = "loaded"
        self.soft_copies = 0
        self.tx_count = 0


def decode_sinr(sinr_db: float, soft_copies: int, combining_gain_db: float = 3.0) -> float:
    return sinr_db + combining_gain_db * soft_copies


def harq_step(proc: HarqProcess, event: str, slot: int, max_tx: int = 4) -> str:
    """Advance a process; returns 'wait', 'done', 'retransmit' or 'give-up'.

    ``event`` is 'data-sent', 'ACK', 'NACK' or 'timer' (a missed feedback
    occasion counts as NACK). ``slot`` is the global slot of the event.
    """
    t = proc.timers
    if event == "data-sent":
        if proc.state not in ("loaded", "retransmit"):
            raise RuntimeError(f"cannot send from state {proc.state}")
        if proc.state == "retransmit" and slot < proc.retx_slot:
            raise RuntimeError("retransmission before its earliest occasion")
        proc.tx_count += 1
        proc.data_slot = slot
        proc.feedback_slot = slot + t.d1
        proc.state = "awaiting-feedback"
        return "wait"
    if proc.state != "awaiting-feedback":
        raise RuntimeError(f"feedback in state {proc.state}")
    if event == "ACK":
        proc.state = "done"
        return "done"
    if event in ("NACK", "timer"):
        proc.soft_copies += 1
        if proc.tx_count >= max_tx:
            proc.state = "done"
            return "give-up"
        proc.retx_slot = slot + t.d2
        proc.state = "retransmit"
        return "retransmit"
    raise ValueError(f"unknown HARQ event {event!r}")
