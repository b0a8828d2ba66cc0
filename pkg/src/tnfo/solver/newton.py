"""Damped Newton method for square nonlinear systems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import IterationLimit, SingularJacobian


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    history: list = field(default_factory=list)


def solve_newton(system, x0, tol: float = 1e-10, max_iter: int = 50, min_step: float = 1e-12) -> NewtonResult:
    """Solve ``system.residual(z) = 0`` from ``x0``.

    Steps are damped by halving until the squared residual norm decreases
    (Armijo with constant 1e-4).  Convergence is ``||F||_inf <= tol``.
    """
    z = np.array(x0, dtype=float)
    F = system.residual(z)
    history = [float(np.max(np.abs(F), initial=0.0))]
    for it in range(max_iter + 1):
        norm = history[-1]
        if not np.isfinite(norm):
            raise SingularJacobian("residual is not finite")
        if norm <= tol:
            return NewtonResult(z, it, norm, history)
        if it == max_iter:
            break
        J = system.jacobian(z)
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"Newton matrix is singular at iteration {it}") from exc
        if not np.all(np.isfinite(dz)):
            raise SingularJacobian(f"Newton step is not finite at iteration {it}")
        merit = F @ F
        t = 1.0
        while True:
            trial = z + t * dz
            Ft = system.residual(trial)
            if np.all(np.isfinite(Ft)) and Ft @ Ft <= (1.0 - 1e-4 * t) * merit:
                break
            t *= 0.5
            if t < min_step:
                raise IterationLimit(f"line search stalled at iteration {it} with residual {norm:.3e}", x=z)
        z, F = trial, Ft
        history.append(float(np.max(np.abs(F), initial=0.0)))
    raise IterationLimit(f"no convergence in {max_iter} iterations, residual {history[-1]:.3e}", x=z)
