"""Discrete-event simulator for the endorsement bootstrap protocol."""

from .config import (
    ConfigInvalid,
    NetworkConfig,
    SimConfig,
    WorkUnitCosts,
    load_config,
)
from .bootstrap import Simulation, measure_reconfiguration, run_bootstrap
from .gossip import gossip
from .powbaseline import run_pow_baseline

__all__ = [
    "ConfigInvalid",
    "NetworkConfig",
    "SimConfig",
    "Simulation",
    "WorkUnitCosts",
    "gossip",
    "load_config",
    "measure_reconfiguration",
    "run_bootstrap",
    "run_pow_baseline",
]
