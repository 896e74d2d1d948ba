"""Experiment plans and YAML config loading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .multichannel import OPTIONS
from .nr_phy import HarqTimers
from .nru import NruConfig
from .topology import PRESETS
from .wifi import WifiConfig

DEFAULT_SWEEP = [0.5, 1.0, 1.5, 2.0, 2.5]


class ConfigError(ValueError):
    """Raised for anything wrong with a config file; ``kind`` says what."""

    def __init__(self, kind: str, msg: str):
        self.kind = kind
        super().__init__(f"{kind}: {msg}")


@dataclass
class MultichannelPlan:
    channels: list = field(default_factory=lambda: [0, 1])
    policy: str = "Opt2"
    hop_period_ms: float = 100.0


@dataclass
class ExperimentPlan:
    preset: str = "indoor5"
    lambda_sweep: list = field(default_factory=lambda: list(DEFAULT_SWEEP))
    drops: int = 20
    duration: float = 30.0
    seed_base: int = 0
    keep_latency: bool = True
    nru: NruConfig = field(default_factory=NruConfig)
    wifi: WifiConfig = field(default_factory=WifiConfig)
    multichannel: MultichannelPlan = field(default_factory=MultichannelPlan)

    def __post_init__(self):
        validate_plan(self)


def validate_plan(plan: ExperimentPlan) -> None:
    if plan.preset not in PRESETS:
        raise ConfigError("domain", f"preset: unknown {plan.preset!r}, expected one of {sorted(PRESETS)}")
    if not plan.lambda_sweep:
        raise ConfigError("domain", "lambda_sweep: must list at least one rate")
    for lam in plan.lambda_sweep:
        if not isinstance(lam, (int, float)) or isinstance(lam, bool) or lam <= 0:
            raise ConfigError("domain", f"lambda_sweep: rates must be positive numbers, got {lam!r}")
    if not isinstance(plan.drops, int) or plan.drops < 1:
        raise ConfigError("domain", f"drops: must be an integer >= 1, got {plan.drops!r}")
    if not isinstance(plan.duration, (int, float)) or plan.duration <= 0:
        raise ConfigError("domain", f"duration: must be > 0 seconds, got {plan.duration!r}")
    if not isinstance(plan.seed_base, int):
        raise ConfigError("domain", f"seed_base: must be an integer, got {plan.seed_base!r}")
    n = plan.nru
    if n.mode not in ("LBE", "FBE"):
        raise ConfigError("domain", f"nru.mode: expected LBE or FBE, got {n.mode!r}")
    if n.lbt_category != "CAT4":
        raise ConfigError("domain", "nru.lbt_category: data COTs use CAT4")
    if n.priority_class not in ("P1", "P2", "P3", "P4"):
        raise ConfigError("domain", f"nru.priority_class: unknown {n.priority_class!r}")
    if n.max_cot_ms <= 0 or n.max_cot_ms > 10:
        raise ConfigError("domain", "nru.max_cot_ms: must lie in (0, 10]")
    if n.discovery_period_ms <= 0:
        raise ConfigError("domain", "nru.discovery_period_ms: must be positive")
    if n.mu not in (0, 1):
        raise ConfigError("domain", "nru.mu: 0 or 1 supported")
    w = plan.wifi
    if w.ac not in ("AC_VO", "AC_VI", "AC_BE", "AC_BK", "LegacyDCF"):
        raise ConfigError("domain", f"wifi.ac: unknown {w.ac!r}")
    if w.pd_threshold is not None and w.pd_threshold > w.ed_threshold:
        raise ConfigError("domain", "wifi.pd_threshold: must not exceed wifi.ed_threshold")
    if not 1 <= w.amsdu_max <= 64:
        raise ConfigError("domain", "wifi.amsdu_max: must lie in 1..64")
    mc = plan.multichannel
    if mc.policy not in OPTIONS:
        raise ConfigError("domain", f"multichannel.policy: unknown {mc.policy!r}")
    if len(set(mc.channels)) != len(mc.channels) or not mc.channels:
        raise ConfigError("domain", "multichannel.channels: need distinct channel ids")


def _build(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError("parse", f"{section}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError("unknown-key", f"{section}: unknown key(s) {', '.join(unknown)}")
    kw = dict(data)
    if cls is NruConfig and "timers" in kw:
        kw["timers"] = _build(HarqTimers, kw["timers"], f"{section}.timers")
    return cls(**kw)


def plan_from_dict(data: dict) -> ExperimentPlan:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("parse", "top level must be a mapping")
    top = {f.name for f in dataclasses.fields(ExperimentPlan)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError("unknown-key", f"unknown key(s) {', '.join(unknown)}")
    kw = dict(data)
    try:
        if "nru" in kw:
            kw["nru"] = _build(NruConfig, kw["nru"], "nru")
        if "wifi" in kw:
            kw["wifi"] = _build(WifiConfig, kw["wifi"], "wifi")
        if "multichannel" in kw:
            kw["multichannel"] = _build(MultichannelPlan, kw["multichannel"], "multichannel")
        if "lambda_sweep" in kw and not isinstance(kw["lambda_sweep"], list):
            kw["lambda_sweep"] = [kw["lambda_sweep"]]
        return ExperimentPlan(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError("domain", str(e)) from None


def load_config(path) -> ExperimentPlan:
    path = Path(path)
    if not path.exists():
        raise ConfigError("missing-file", f"{path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError("parse", f"{path}: {e}") from None
    return plan_from_dict(data)


def plan_to_dict(plan: ExperimentPlan) -> dict:
    return dataclasses.asdict(plan)
