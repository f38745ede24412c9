"""Discrete-event simulator for a fog-orchestrated, multi-RAT C-ITS with scalable data layers."""

from .config import ConfigError, Scenario, parse_config, serialize
from .world import RunResult, Simulation, simulate

__all__ = ["ConfigError", "RunResult", "Scenario", "Simulation", "parse_config", "serialize", "simulate"]
__version__ = "0.1.0"
