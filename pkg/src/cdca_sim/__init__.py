"""Highway traffic simulator with a vehicular warning-broadcast layer for congestion detection and control."""

from .config import AccidentEvent, ConfigError, ScenarioConfig, load_scenario
from .engine import RunResult, Simulation, SimulationInvariantError, run

__all__ = [
    "AccidentEvent",
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "Simulation",
    "SimulationInvariantError",
    "load_scenario",
    "run",
]
__version__ = "0.1.0"
