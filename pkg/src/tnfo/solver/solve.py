"""Entry points tying the network program to the numerical solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import IterationLimit
from .ipm import SolverOptions, minimize, polish_feasibility
from .newton import NewtonResult, solve_newton


@dataclass
class SolveReport:
    status: str  # optimal | infeasible-detected | iteration-limit
    iterations: int
    objective: float
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity: float
    overall_error: float
    residual_norms: dict
    elapsed: float
    restorations: int = 0
    polished: bool = False
    history: list = field(default_factory=list, repr=False)


def solve_nlp(problem, x0=None, opts: SolverOptions | None = None):
    """Solve the network program; returns ``(NetworkState, SolveReport)``.

    ``x0`` is an SI vector (default: :func:`tnfo.nlp.initial_guess`); it is
    pushed inside the bounds before the first iteration.  Raises
    :class:`~tnfo.errors.IterationLimit` carrying the best iterate and the
    report when ``max_iter`` runs out.
    """
    from ..nlp import ScaledProblem, initial_guess, make_state

    opts = opts or SolverOptions()
    if x0 is None:
        x0 = initial_guess(problem.net, problem=problem)
    x0 = np.clip(np.asarray(x0, dtype=float), problem.lower, problem.upper)
    sp = ScaledProblem(problem, x_ref=x0)
    res = minimize(sp, sp.to_y(x0), opts)
    y = res.y
    polished = False
    if res.status == "optimal" and opts.polish:
        yp = polish_feasibility(sp, y)
        polished = not np.array_equal(yp, y)
        y = yp
    state = make_state(problem, sp.to_x(y))
    report = SolveReport(
        status=res.status,
        iterations=res.iterations,
        objective=state.objective,
        primal_infeasibility=res.primal_infeasibility,
        dual_infeasibility=res.dual_infeasibility,
        complementarity=res.complementarity,
        overall_error=res.overall_error,
        residual_norms=state.norms,
        elapsed=res.elapsed,
        restorations=res.restorations,
        polished=polished,
        history=res.history,
    )
    if res.status == "iteration-limit":
        raise IterationLimit(f"no optimum within {res.iterations} iterations", x=state, report=report)
    return state, report


def simulate(system, x0=None, tol: float = 1e-10, max_iter: int = 50):
    """Newton solve of a :class:`tnfo.nlp.SimulationSystem`; returns ``(NetworkState, NewtonResult)``."""
    from ..nlp import initial_guess, make_state

    problem = system.problem
    if x0 is None:
        x0 = initial_guess(problem.net, problem=problem)
    res: NewtonResult = solve_newton(system, system.reduce(x0), tol=tol, max_iter=max_iter)
    return make_state(problem, system.full(res.x)), res
