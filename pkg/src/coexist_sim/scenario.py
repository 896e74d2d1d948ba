"""Build a coexistence network from a topology, run it, and sweep experiment plans."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import platform
from dataclasses import dataclass
from itertools import count
from pathlib import Path

from .config import ExperimentPlan, plan_to_dict
from .kernel import MS, S, Simulator
from .metrics import FlowLedger, RunMetrics, summarise, write_latency_csv, write_summary_csv, write_upt_csv
from .nru import GnbNode, NruConfig, UeNode
from .radio import Medium
from .topology import CalibrationError, Topology, place_users, preset
from .traffic import FtpFlow, generate_arrivals
from .wifi import Link, WifiConfig, WifiNode

TECH_DIRECTIONS = {"nru": {("nru", "dl")}, "wifi": {("wifi", "dl"), ("wifi", "ul")}}
ASSOC_SPREAD_NS = 10 * MS


class RunError(RuntimeError):
    def __init__(self, lam, drop, seed, cause):
        self.lam, self.drop, self.seed = lam, drop, seed
        super().__init__(f"run failed at lambda={lam} drop={drop} seed={seed}: {cause!r}")


def derive_seed(seed_base: int, lam: float, drop: int) -> int:
    h = hashlib.blake2b(repr((float(lam), int(drop))).encode(), digest_size=8).digest()
    return (seed_base ^ int.from_bytes(h, "big")) & ((1 << 63) - 1)


def plan_seeds(plan: ExperimentPlan) -> dict:
    seeds = {(lam, d): derive_seed(plan.seed_base, lam, d) for lam in plan.lambda_sweep for d in range(plan.drops)}
    if len(set(seeds.values())) != len(seeds):
        raise RuntimeError("seed derivation collided inside the plan")
    return seeds


class Network:
    """Everything one run needs; nodes look their peers up through here."""

    def __init__(self, topo: Topology, seed: int, nru_cfg: NruConfig, wifi_cfg: WifiConfig,
                 keep_latency: bool = True, trace: bool = False):
        self.topo = topo
        self.sim = Simulator(seed, trace=trace)
        self.medium = Medium(self.sim, topo.loss_db, topo.techs)
        self.ledger = FlowLedger(keep_latency)
        self.packet_ids = count()
        self.file_ids = count()
        self.nodes: dict = {}
        self.flows: list[FtpFlow] = []
        for i, role in enumerate(topo.roles):
            p = topo.tx_power[i]
            if role == "gnb":
                self.nodes[i] = GnbNode(self, i, p, nru_cfg)
            elif role == "ue":
                self.nodes[i] = UeNode(self, i, topo.server[i], p, nru_cfg)
            elif role == "ap":
                self.nodes[i] = WifiNode(self, i, "ap", p, wifi_cfg)
            else:
                self.nodes[i] = WifiNode(self, i, "sta", p, wifi_cfg, ap=topo.server[i])
        for i, node in self.nodes.items():
            node.attach_medium(0)
            buffered = topo.roles[i] in ("gnb", "ap", "sta")
            self.ledger.register_node(i, topo.techs[i], buffered)
        for u, b in topo.server.items():
            self.ledger.register_user(u, topo.techs[u])
            if topo.roles[b] == "gnb":
                self.nodes[b].add_ue(u)
            else:
                link = Link(u, b)
                self.nodes[b].add_peer(u, link)
                self.nodes[u].add_peer(b, link)

    def add_traffic(self, lam: float, horizon_ns: int) -> None:
        t = self.topo
        for u, b in sorted(t.server.items()):
            if t.techs[u] == "nru":
                flows = [FtpFlow("nru", "dl", b, u, u, lam)]
            else:
                flows = [FtpFlow("wifi", "dl", b, u, u, lam / 2), FtpFlow("wifi", "ul", u, b, u, lam / 2)]
            for fl in flows:
                self.flows.append(fl)
                rng = self.sim.stream((fl.src, fl.dst), "arrivals")
                for f in generate_arrivals(fl, horizon_ns, rng, ids=self.file_ids):
                    self.sim.schedule(f.t1, self.nodes[fl.src].enqueue_file, f, kind="arrival", target=fl.src)

    def start(self) -> None:
        rng = self.sim.stream("net", "start")
        for i, node in self.nodes.items():
            role = self.topo.roles[i]
            if role == "gnb":
                node.start()
            elif role == "sta":
                self.sim.schedule(rng.randrange(ASSOC_SPREAD_NS), node.start_association, node.ap,
                                  kind="assoc", target=i)

    def buffered_bits(self) -> dict:
        out = {}
        for i, node in self.nodes.items():
            role = self.topo.roles[i]
            if role == "gnb":
                key = ("nru", "dl")
            elif role == "ap":
                key = ("wifi", "dl")
            elif role == "sta":
                key = ("wifi", "ul")
            else:
                continue
            out[key] = out.get(key, 0) + node.buffered_bits()
        return out


@dataclass
class RunSpec:
    preset: str
    lam: float
    seed: int
    duration: float = 30.0
    drop: int = 0
    nru: NruConfig = dataclasses.field(default_factory=NruConfig)
    wifi: WifiConfig = dataclasses.field(default_factory=WifiConfig)
    keep_latency: bool = True
    trace: bool = False

    @property
    def run_id(self) -> str:
        return f"{self.preset}-l{self.lam:g}-d{self.drop}"


def make_topology(preset_name: str, seed: int) -> Topology:
    sim = Simulator(seed)
    return place_users(preset(preset_name), sim.stream("topology", "placement"))


def run_single(spec: RunSpec, topo: Topology | None = None) -> RunMetrics:
    topo = topo or make_topology(spec.preset, spec.seed)
    net = Network(topo, spec.seed, spec.nru, spec.wifi, spec.keep_latency, spec.trace)
    horizon = round(spec.duration * S)
    net.add_traffic(spec.lam, horizon)
    net.start()
    net.sim.run_until(horizon)
    m = summarise(net.ledger, spec.run_id, spec.seed, spec.lam, horizon, net.buffered_bits(), TECH_DIRECTIONS)
    m.extra = {
        "calibration_fraction": topo.calibration_fraction,
        "band_fraction": topo.band_fraction,
        "placement_attempts": topo.attempts,
        "events": net.sim.delivered,
        "cw_final": {i: n.cw.current_cw for i, n in net.nodes.items() if topo.roles[i] == "gnb"},
        "ue_attached": sum(1 for i, n in net.nodes.items() if topo.roles[i] == "ue" and n.attached),
        "wifi_outage_events": sum(l.outages for i, n in net.nodes.items() if topo.roles[i] == "sta"
                                  for l in n.links.values()),
        "disc_emitted": sum(n.stats["disc_emitted"] for i, n in net.nodes.items() if topo.roles[i] == "gnb"),
        "disc_skipped": sum(n.stats["disc_skipped"] for i, n in net.nodes.items() if topo.roles[i] == "gnb"),
        "ocb_checked": sum(n.ocb_checked for i, n in net.nodes.items() if topo.roles[i] == "ue"),
    }
    if spec.trace:
        m.extra["trace"] = net.sim.trace_digest()
    return m


def plan_runs(plan: ExperimentPlan) -> list[RunSpec]:
    seeds = plan_seeds(plan)
    return [RunSpec(plan.preset, lam, seeds[(lam, d)], plan.duration, d, plan.nru, plan.wifi, plan.keep_latency)
            for lam in plan.lambda_sweep for d in range(plan.drops)]


def run_experiment(plan: ExperimentPlan, out_dir: Path | None = None, progress=None) -> list[RunMetrics]:
    """Run every (lambda, drop); write CSVs and metadata when ``out_dir`` is given."""
    runs = []
    for spec in plan_runs(plan):
        try:
            m = run_single(spec)
        except CalibrationError:
            raise
        except Exception as e:  # noqa: BLE001 - re-raised with run identity
            raise RunError(spec.lam, spec.drop, spec.seed, e) from e
        runs.append(m)
        if progress:
            progress(spec, m)
    if out_dir is not None:
        write_outputs(plan, runs, Path(out_dir))
    return runs


def write_outputs(plan: ExperimentPlan, runs: list[RunMetrics], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(out / "summary.csv", runs)
    write_upt_csv(out / "upt.csv", runs)
    write_latency_csv(out / "latency.csv", runs)
    meta = {
        "plan": plan_to_dict(plan),
        "preset": preset(plan.preset).dump(),
        "runs": [{"run_id": m.run_id, "lambda": m.lam, "seed": m.seed,
                  "calibration_fraction": m.extra.get("calibration_fraction"),
                  "band_fraction": m.extra.get("band_fraction"),
                  "placement_attempts": m.extra.get("placement_attempts")} for m in runs],
        "versions": {"python": platform.python_version(), "coexist_sim": _version()},
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:  # noqa: BLE001
        return "unknown"
