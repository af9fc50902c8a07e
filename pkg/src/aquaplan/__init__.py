"""Water treatment plant simulation with emissions-aware predictive control.

Subpackages map to the main concerns: ``network`` (hydraulic topology and
nodal solver), ``quality`` (chlorine and detention delay), ``exogenous``
(demand and grid emissions intensity), ``control`` (MPC and reactive
baseline), ``sim`` (closed loop and metrics), ``cli`` and ``config``.
"""

from .network import (ControlVector, HydraulicSolution, NetworkModel,
                      PlantParams, build_example_plant, closed_form_yD,
                      pump_power, solve_flows, step_tanks)
from .sim import Scenario, SimulationTrace, compare, metrics, run

__all__ = [
    "ControlVector", "HydraulicSolution", "NetworkModel", "PlantParams",
    "build_example_plant", "closed_form_yD", "pump_power", "solve_flows",
    "step_tanks", "Scenario", "SimulationTrace", "compare", "metrics", "run",
]

__version__ = "0.1.0"
