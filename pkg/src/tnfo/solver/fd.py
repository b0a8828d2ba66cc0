"""Central finite-difference Jacobians, used to verify analytic derivatives."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter, NonFiniteValue


def fd_jacobian(evaluator, x, step: float = 1e-6, relative: bool = True) -> np.ndarray:
    """Dense Jacobian of ``evaluator`` at ``x`` by central differences.

    With ``relative`` the step for entry k is ``step * max(1, |x_k|)``.
    """
    if not step > 0:
        raise InvalidParameter(f"finite-difference step must be positive, got {step!r}")
    x = np.array(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(evaluator(x), dtype=float))
    if not np.all(np.isfinite(f0)):
        raise NonFiniteValue("evaluator returned a non-finite value at the base point", int(np.argmin(np.isfinite(f0))))
    J = np.empty((f0.size, x.size))
    for k in range(x.size):
        h = step * max(1.0, abs(x[k])) if relative else step
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        diff = np.atleast_1d(np.asarray(evaluator(xp), dtype=float)) - np.atleast_1d(np.asarray(evaluator(xm), dtype=float))
        if not np.all(np.isfinite(diff)):
            raise NonFiniteValue(f"non-finite evaluation while perturbing entry {k}", k)
        J[:, k] = diff / (2.0 * h)
    return J


def row_relative_error(analytic, numeric) -> np.ndarray:
    """Per-row max error scaled by the row's largest analytic entry (1 when the row is empty)."""
    analytic = np.atleast_2d(analytic)
    numeric = np.atleast_2d(numeric)
    scale = np.maximum(np.max(np.abs(analytic), axis=1), 1e-300)
    scale = np.where(np.max(np.abs(analytic), axis=1) == 0, 1.0, scale)
    return np.max(np.abs(analytic - numeric), axis=1) / scale
