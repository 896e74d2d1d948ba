"""Discrete-event simulator for 5G NR-U and Wi-Fi sharing unlicensed spectrum."""

from .config import ConfigError, ExperimentPlan, load_config
from .nru import NruConfig
from .scenario import RunSpec, run_experiment, run_single
from .topology import CalibrationError
from .wifi import WifiConfig

__all__ = ["CalibrationError", "ConfigError", "ExperimentPlan", "NruConfig", "RunSpec", "WifiConfig",
           "load_config", "run_experiment", "run_single"]
