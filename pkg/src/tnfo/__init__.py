"""Steady-state flow optimization for steam district heating networks."""

from .model import CarrierConstants, Junction, Load, Network, OperationalBounds, Pipe, Plant, build_network
from .nlp import NetworkState, ObjectiveWeights, assemble_simulation, assemble_tnfo
from .scenario import RunSummary, Scenario, apply_scenario, run_batch, sensitivity_sweep, unmet_fraction
from .solver import SolverOptions, simulate, solve_nlp

__all__ = [
    "CarrierConstants", "Junction", "Load", "Network", "NetworkState", "ObjectiveWeights", "OperationalBounds",
    "Pipe", "Plant", "RunSummary", "Scenario", "SolverOptions", "apply_scenario", "assemble_simulation",
    "assemble_tnfo", "build_network", "run_batch", "sensitivity_sweep", "simulate", "solve_nlp", "unmet_fraction",
]
