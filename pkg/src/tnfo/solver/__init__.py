"""Nonlinear solvers: interior point for the optimization, Newton for simulation."""

from .fd import fd_jacobian, row_relative_error
from .ipm import InteriorPoint, IpmResult, SolverOptions, minimize, polish_feasibility
from .newton import NewtonResult, solve_newton
from .solve import SolveReport, solve_nlp, simulate

__all__ = [
    "InteriorPoint", "IpmResult", "NewtonResult", "SolveReport", "SolverOptions",
    "fd_jacobian", "minimize", "polish_feasibility", "row_relative_error",
    "simulate", "solve_newton", "solve_nlp",
]
