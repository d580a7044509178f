"""Contact-inertial odometry toolkit: hybrid rolling/flying vehicle simulation,
external-wrench observers, contact-point recovery, an IMU-only EKF with
collision pseudo-measurements and a reactive bounce planner."""

from .config import ScenarioConfig, bundled, load
from .errors import CIOError, ConfigError, SimulationError
from .params import VehicleParams
from .sim_world import RunLog, run_scenario

__version__ = "0.1.0"

__all__ = ["CIOError", "ConfigError", "RunLog", "ScenarioConfig", "SimulationError", "VehicleParams",
           "bundled", "load", "run_scenario"]
