"""Multi-carrier LBT: wideband, per-channel CAT4, primary CAT4 + secondary CAT2, primary-only."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .backoff import Backoff
from .kernel import MS, US, draw_uniform
from .nru import CAT2_SENSE_US, CwState, update_cw
from .profiles import AccessProfile, profile
from .radio import DetectionConfig, Transmission, scale_ed_threshold

OPTIONS = ("Opt1", "Opt2", "Opt3", "Opt4", "TypeA1", "TypeA2", "TypeB1", "TypeB2")
# Type A behaves like per-channel CAT4, Type B like primary CAT4 + CAT2 elsewhere
FAMILY = {"Opt1": "Opt1", "Opt2": "Opt2", "Opt3": "Opt3", "Opt4": "Opt4",
          "TypeA1": "Opt2", "TypeA2": "Opt2", "TypeB1": "Opt3", "TypeB2": "Opt3"}
DEFAULT_HOP_MS = 100.0


@dataclass(frozen=True)
class ChannelSet:
    primary: int
    secondaries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "secondaries", tuple(self.secondaries))
        if self.primary in self.secondaries:
            raise ValueError("primary channel listed as a secondary")
        if len(set(self.secondaries)) != len(self.secondaries):
            raise ValueError("duplicate secondary channel")

    @property
    def channels(self) -> tuple:
        return (self.primary,) + self.secondaries

    @property
    def bonded_bandwidth(self) -> int:
        return 20 * len(self.channels)


@dataclass(frozen=True)
class MultiLbtPolicy:
    option: str = "Opt2"
    hop_period_ms: Optional[float] = None

    def __post_init__(self):
        if self.option not in OPTIONS:
            raise ValueError(f"unknown multi-channel policy {self.option!r}")

    @property
    def family(self) -> str:
        return FAMILY[self.option]

    @property
    def hop_ns(self) -> Optional[int]:
        if not self.option.startswith("TypeB"):
            return None
        return round((self.hop_period_ms or DEFAULT_HOP_MS) * MS)


def wideband_ed_threshold(base_dbm: float, chset: ChannelSet) -> float:
    return scale_ed_threshold(base_dbm, chset.bonded_bandwidth)


def select_channels(policy: MultiLbtPolicy, chset: ChannelSet, completed=(), idle_now=None,
                    idle_cat2=None, anchor: Optional[int] = None) -> list[int]:
    """Channels granted at a grant instant.

    ``completed``: channels whose CAT4 instance just finished. ``idle_now``:
    channel -> idle at this instant. ``idle_cat2``: channel -> idle for the
    whole CAT2 window ending now. ``anchor`` is the CAT4 carrier for Opt3/Type B.
    """
    chans = chset.channels
    fam = policy.family
    idle_now = idle_now or {c: True for c in chans}
    idle_cat2 = idle_cat2 or idle_now
    if fam == "Opt1":
        return list(chans) if all(idle_now[c] for c in chans) else []
    if fam == "Opt2":
        return [c for c in chans if c in completed and idle_now[c]]
    if fam == "Opt3":
        a = chset.primary if anchor is None else anchor
        return [a] + [c for c in chans if c != a and idle_cat2[c]]
    return list(chans)


def typeA_init(n_channels: int, variant: str, cw: int, rng) -> list[int]:
    """Initial per-carrier counters: independent draws (A1) or one shared draw (A2)."""
    if variant not in ("A1", "A2", "TypeA1", "TypeA2"):
        raise ValueError(f"unknown Type A variant {variant!r}")
    if n_channels < 1:
        raise ValueError("need at least one carrier")
    if variant.endswith("A2"):
        k = draw_uniform(rng, cw)
        return [k] * n_channels
    return [draw_uniform(rng, cw) for _ in range(n_channels)]


def hop_carrier(chset: ChannelSet, now: int, hop_ns: int) -> int:
    chans = chset.channels
    return chans[(now // hop_ns) % len(chans)]


def typeB_update(cws: dict, variant: str, collided: dict) -> None:
    """CW update after a burst. B1 keeps one shared state, B2 one per carrier."""
    if variant.endswith("B1"):
        shared = next(iter(cws.values()))
        update_cw(shared, ["NACK"] if any(collided.values()) else ["ACK"])
    else:
        for c, hit in collided.items():
            update_cw(cws[c], ["NACK"] if hit else ["ACK"])


class MultiChannelNode:
    """Saturated transmitter contending over a channel set with one policy.

    Each burst lasts ``burst_ns`` and goes out as one Transmission per granted
    channel, so per-channel collisions can be read from ``tx.collided``.
    """

    tech = "nru"

    def __init__(self, net, idx: int, chset: ChannelSet, policy: MultiLbtPolicy, tx_power: float = 23.0,
                 prof: AccessProfile | None = None, ed_threshold: float = -72.0, burst_ns: int = 2 * MS,
                 role: str = "dl"):
        self.net = net
        self.sim = net.sim
        self.idx = idx
        self.chset = chset
        self.policy = policy
        self.tx_power = tx_power
        self.profile = prof or profile("P3")
        self.ed = ed_threshold
        self.burst_ns = burst_ns
        self.role = role
        self.defer_ns = self.profile.defer_us(role) * US
        self.rng = self.sim.stream(idx, "mc-backoff")
        chans = chset.channels
        shared = CwState(self.profile)
        if policy.option == "TypeB1":
            self.cws = {c: shared for c in chans}
        else:
            self.cws = {c: CwState(self.profile) for c in chans}
        self.subs = {}
        self.backoffs: dict[int, Backoff] = {}
        self.wide_sub = None
        self.transmitting = False
        self.completed: set[int] = set()
        self.bursts = 0
        self.channel_bursts = 0
        self.collided_bursts = 0
        self.granted_log: list[tuple] = []
        self._running = False

    def _anchor(self) -> int:
        hop = self.policy.hop_ns
        if hop is None:
            return self.chset.primary
        return hop_carrier(self.chset, self.sim.now, hop)

    def attach_medium(self) -> None:
        med = self.net.medium
        det = DetectionConfig(self.ed)
        for c in self.chset.channels:
            self.subs[c] = med.subscribe(self.idx, (c,), det, lambda busy, c=c: self._on_cca(c, busy))
        if self.policy.family == "Opt1":
            # the medium scales the threshold with the bonded bandwidth
            self.wide_sub = med.subscribe(self.idx, self.chset.channels, det, self._on_wide)

    def _on_cca(self, c: int, busy: bool) -> None:
        b = self.backoffs.get(c)
        if b is not None and self.policy.family in ("Opt2", "Opt3", "Opt4"):
            b.set_busy(busy or self.transmitting)

    def _on_wide(self, busy: bool) -> None:
        b = self.backoffs.get("wide")
        if b is not None:
            b.set_busy(busy or self.transmitting)

    def start(self) -> None:
        self._running = True
        self._contend()

    def _contend(self) -> None:
        fam = self.policy.family
        if fam == "Opt1":
            b = self.backoffs.get("wide") or Backoff(self.sim, lambda now: self._grant(None), name=self.idx)
            self.backoffs["wide"] = b
            if not b.active:
                b.start(self.cws[self.chset.primary].draw(self.rng), self.defer_ns, self.wide_sub.busy)
        elif fam == "Opt2":
            chans = self.chset.channels
            idle = [c for c in chans if c not in self.backoffs or not self.backoffs[c].active]
            if len(idle) == len(chans) and self.policy.option in ("TypeA1", "TypeA2"):
                ks = typeA_init(len(chans), self.policy.option, self.cws[chans[0]].current_cw, self.rng)
                draws = dict(zip(chans, ks))
            else:
                draws = {c: self.cws[c].draw(self.rng) for c in idle}
            for c in idle:
                b = self.backoffs.get(c) or Backoff(self.sim, lambda now, c=c: self._grant(c), name=self.idx)
                self.backoffs[c] = b
                b.start(draws[c], self.defer_ns, self.subs[c].busy)
        else:
            a = self._anchor()
            for c, b in list(self.backoffs.items()):
                if c != a and b.active:
                    b.stop()
            b = self.backoffs.get(a) or Backoff(self.sim, lambda now, a=a: self._grant(a), name=self.idx)
            self.backoffs[a] = b
            if not b.active:
                b.start(self.cws[a].draw(self.rng), self.defer_ns, self.subs[a].busy)

    def _grant(self, c) -> None:
        if self.transmitting:
            return
        med = self.net.medium
        now = self.sim.now
        idle_now = {ch: not self.subs[ch].busy for ch in self.chset.channels}
        fam = self.policy.family
        if fam == "Opt2":
            self.completed.add(c)
            # same-instant completions on other channels join this burst
            for ch, b in self.backoffs.items():
                if ch != c and b.active and b.grant_at == now:
                    b.stop()
                    self.completed.add(ch)
            granted = select_channels(self.policy, self.chset, self.completed, idle_now)
            if not granted:
                self.completed.clear()
                self._contend()
                return
        elif fam == "Opt3":
            cat2 = {ch: med.idle_for(self.subs[ch]) >= CAT2_SENSE_US["CAT2A"] * US for ch in self.chset.channels}
            granted = select_channels(self.policy, self.chset, idle_now=idle_now, idle_cat2=cat2, anchor=c)
        else:
            granted = select_channels(self.policy, self.chset, idle_now=idle_now)
            if not granted:  # Opt1 saw a busy channel at the last instant
                self._contend()
                return
        self.completed.difference_update(granted)
        self.transmitting = True
        for b in self.backoffs.values():
            b.set_busy(True)
        txs = []
        for ch in granted:
            tx = Transmission(self.idx, self.tech, self.tx_power, (ch,), now, now + self.burst_ns)
            med.start(tx)
            txs.append(tx)
        self.granted_log.append((now, tuple(granted)))
        self.sim.schedule(now + self.burst_ns, self._burst_end, txs, kind="mc-burst-end", target=self.idx)

    def _burst_end(self, txs) -> None:
        med = self.net.medium
        collided = {}
        for tx in txs:
            med.end(tx)
            hit = bool(tx.collided)
            collided[tx.channels[0]] = hit
            self.channel_bursts += 1
            self.collided_bursts += hit
            med.release(tx)
        self.bursts += 1
        if self.policy.option.startswith("TypeB"):
            typeB_update(self.cws, self.policy.option, collided)
        else:
            for ch, hit in collided.items():
                update_cw(self.cws[ch], ["NACK"] if hit else ["ACK"])
        self.transmitting = False
        for ch, b in self.backoffs.items():
            sub = self.wide_sub if ch == "wide" else self.subs[ch]
            b.set_busy(sub.busy)
        if self._running:
            self._contend()

    @property
    def collision_rate(self) -> float:
        return self.collided_bursts / self.channel_bursts if self.channel_bursts else 0.0


@dataclass
class CollisionTrial:
    option: str
    seeds: list = field(default_factory=list)
    rates: list = field(default_factory=list)


class _MiniNet:
    def __init__(self, sim, medium):
        self.sim = sim
        self.medium = medium
        self.nodes = {}


def collision_trial(option: str, seed: int, duration_ns: int = 2_000_000_000, burst_ns: int = 2 * MS,
                    distance_m: float | None = None) -> float:
    """Collision rate of a two-carrier node whose secondary is a rival's primary."""
    from .kernel import Simulator
    from .radio import INH_OFFICE, Medium, PathLossModel, path_loss

    sim = Simulator(seed)
    rng = sim.stream("trial", "geometry")
    d = distance_m if distance_m is not None else rng.uniform(5.0, 30.0)
    loss = path_loss(PathLossModel(INH_OFFICE, 5.18), d)
    med = Medium(sim, [[0.0, loss], [loss, 0.0]], ["nru", "nru"])
    net = _MiniNet(sim, med)
    node = MultiChannelNode(net, 0, ChannelSet(0, (1,)), MultiLbtPolicy(option), burst_ns=burst_ns)
    rival = MultiChannelNode(net, 1, ChannelSet(1, ()), MultiLbtPolicy("Opt4"), burst_ns=burst_ns)
    net.nodes = {0: node, 1: rival}
    for n in (node, rival):
        n.attach_medium()
    # rival starts at a random offset so drops differ in phase
    sim.schedule(rng.randrange(0, burst_ns), rival.start)
    node.start()
    sim.run_until(duration_ns)
    return node.collision_rate
