"""Component physics: closed-form relations and residuals with analytic partials.

Residuals are in natural units (Pa^2 for steam pipes, Pa for water pipes,
W for power balances, K for temperatures, kg/s for mass).  The array
kernels (``*_kernel``) broadcast over numpy arrays and return the residual,
its gradient and its Hessian, in the variable order named by the matching
``*_VARS`` tuple.  The NLP assembly is built on these kernels; the scalar
functions taking :class:`EdgeState` are thin wrappers for direct use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidGeometry, NonpositiveInput, PhaseOrderViolation
from .model import T_CONDENSE, CarrierConstants, Pipe


@dataclass
class EdgeState:
    f: float = 0.0
    T_in: float = 0.0
    T_out: float = 0.0
    p_in: float = 0.0
    p_out: float = 0.0
    alpha: float = 0.0
    QE: float = 0.0
    QS: float = 0.0


@dataclass(frozen=True)
class HeatLossParams:
    """Layered pipe wall: convection inside, steel, insulation, convection+radiation outside."""

    alpha_a: float
    alpha_b: float
    alpha_c: float
    K_a: float
    K_b: float
    d_a: float
    d_b: float
    d_c: float


def _arr(*xs):
    return [np.asarray(x, dtype=float) for x in xs]


# --------------------------------------------------------------------------
# thermal decay along a pipe


def decay_factor(f, a):
    """``exp(-a/f)`` with its first and second derivative in ``f``.

    ``a = L*gamma/c``.  At ``f <= 0`` the factor is taken as its limit, 0.
    """
    f, a = _arr(f, a)
    f, a = np.broadcast_arrays(f, a)
    E = np.zeros(f.shape)
    E1 = np.zeros(f.shape)
    E2 = np.zeros(f.shape)
    pos = f > 0
    u = a[pos] / f[pos]
    e = np.exp(-u)
    live = e > 0
    fp = f[pos]
    e1 = np.zeros_like(e)
    e2 = np.zeros_like(e)
    e1[live] = e[live] * u[live] / fp[live]
    e2[live] = e[live] * (u[live] * u[live] - 2.0 * u[live]) / (fp[live] * fp[live])
    E[pos], E1[pos], E2[pos] = e, e1, e2
    return E, E1, E2


def pipe_outlet_temperature(T_in, f, L, gamma, c, T_ext):
    """Outlet temperature of a pipe losing heat to ambient ``T_ext``.

    ``T_out = T_ext + (T_in - T_ext) exp(-L gamma / (c f))``; equals ``T_ext``
    at zero flow.
    """
    T_in, f, L, gamma, c, T_ext = _arr(T_in, f, L, gamma, c, T_ext)
    E, _, _ = decay_factor(f, L * gamma / c)
    out = T_ext + (T_in - T_ext) * E
    return float(out) if out.ndim == 0 else out


PIPE_TEMPERATURE_VARS = ("T_in", "T_out", "f")


def pipe_temperature_kernel(T_in, T_out, f, a, T_ext):
    """Residual ``T_out - T_ext - (T_in - T_ext) exp(-a/f)``."""
    T_in, T_out, f, a, T_ext = _arr(T_in, T_out, f, a, T_ext)
    E, E1, E2 = decay_factor(f, a)
    dT = T_in - T_ext
    r = T_out - T_ext - dT * E
    grad = (-E, np.ones_like(r), -dT * E1)
    hess = {(2, 0): -E1, (2, 2): -dT * E2}
    return r, grad, hess


def heat_loss_coefficient(p: HeatLossParams) -> float:
    """Per-length conductance from carrier to ambient through a layered wall."""
    for name in ("alpha_a", "alpha_b", "alpha_c", "K_a", "K_b", "d_a", "d_b", "d_c"):
        if not getattr(p, name) > 0:
            raise InvalidGeometry(f"{name} must be positive")
    if not (p.d_a <= p.d_b <= p.d_c):
        raise InvalidGeometry("diameters must satisfy d_a <= d_b <= d_c")
    inv = (
        1.0 / (p.alpha_a * math.pi * p.d_a)
        + math.log(p.d_b / p.d_a) / (2.0 * math.pi * p.K_a)
        + math.log(p.d_c / p.d_b) / (2.0 * math.pi * p.K_b)
        + 1.0 / (math.pi * p.d_c * (p.alpha_b + p.alpha_c))
    )
    return 1.0 / inv


# --------------------------------------------------------------------------
# hydraulics


def steam_density(p: float, T: float, R_s: float) -> float:
    if not (p > 0 and T > 0 and R_s > 0):
        raise NonpositiveInput("steam density needs positive p, T and R_s")
    return p / (R_s * T)


def steam_resistance(pipe: Pipe, R_s: float) -> float:
    """``lambda R_s / (A^2 d)`` for an outgoing pipe."""
    A = pipe.area
    return pipe.friction_factor * R_s / (A * A * pipe.diameter)


def water_resistance(pipe: Pipe, rho_w: float) -> float:
    """``lambda L / (2 A^2 d rho_w)`` for a return pipe."""
    A = pipe.area
    return pipe.friction_factor * pipe.length / (2.0 * A * A * pipe.diameter * rho_w)


STEAM_PRESSURE_VARS = ("p_in", "p_out", "f", "T_in", "T_out")


def steam_pressure_kernel(p_in, p_out, f, T_in, T_out, K, a, b):
    """Residual ``p_out^2 - p_in^2 + K f|f| (a + b f (T_in - T_out))``.

    ``K = lambda R_s/(A^2 d)``, ``a = T_ext L``, ``b = c_s/gamma``; the bracket
    is the integral of the temperature profile along the pipe.
    """
    p_in, p_out, f, T_in, T_out, K, a, b = _arr(p_in, p_out, f, T_in, T_out, K, a, b)
    af = np.abs(f)
    phi = f * af
    dT = T_in - T_out
    S = a + b * f * dT
    r = p_out * p_out - p_in * p_in + K * phi * S
    r_f = K * (2.0 * af * S + phi * b * dT)
    r_T = K * phi * b * f
    grad = (-2.0 * p_in, 2.0 * p_out, r_f, r_T, -r_T)
    cross = 3.0 * K * b * phi
    hess = {
        (0, 0): np.full_like(r, -2.0),
        (1, 1): np.full_like(r, 2.0),
        (2, 2): K * (2.0 * np.sign(f) * S + 4.0 * af * b * dT),
        (3, 2): cross,
        (4, 2): -cross,
    }
    return r, grad, hess


WATER_PRESSURE_VARS = ("p_in", "p_out", "f", "alpha")


def water_pressure_kernel(p_in, p_out, f, alpha, K):
    """Residual ``p_out - p_in - alpha + K f|f|`` with ``K = lambda L/(2 A^2 d rho_w)``."""
    p_in, p_out, f, alpha, K = _arr(p_in, p_out, f, alpha, K)
    af = np.abs(f)
    r = p_out - p_in - alpha + K * f * af
    one = np.ones_like(r)
    grad = (-one, one, 2.0 * K * af, -one)
    hess = {(2, 2): 2.0 * K * np.sign(f)}
    return r, grad, hess


def steam_pressure_residual(s: EdgeState, pipe: Pipe, constants: CarrierConstants, T_ext: float) -> float:
    K = steam_resistance(pipe, constants.R_s)
    r, _, _ = steam_pressure_kernel(
        s.p_in, s.p_out, s.f, s.T_in, s.T_out, K, T_ext * pipe.length, constants.c_s / pipe.heat_loss_coeff
    )
    return float(r)


def water_pressure_residual(s: EdgeState, pipe: Pipe, constants: CarrierConstants | None = None) -> float:
    rho = (constants or CarrierConstants()).rho_w
    r, _, _ = water_pressure_kernel(s.p_in, s.p_out, s.f, s.alpha, water_resistance(pipe, rho))
    return float(r)


# --------------------------------------------------------------------------
# plant and loads


def specific_phase_change(T_water, T_steam, c: CarrierConstants):
    """Energy per kg to take water at ``T_water`` to steam at ``T_steam``."""
    return c.c_w * (T_CONDENSE - T_water) + c.c_L + c.c_s * (T_steam - T_CONDENSE)


PLANT_POWER_VARS = ("f", "T_in", "T_out")


def plant_power_kernel(f, T_in, T_out, c: CarrierConstants):
    f, T_in, T_out = _arr(f, T_in, T_out)
    h = c.c_w * (T_CONDENSE - T_in) + c.c_L + c.c_s * (T_out - T_CONDENSE)
    P = f * h
    grad = (h, -c.c_w * f, c.c_s * f)
    hess = {(1, 0): np.full_like(P, -c.c_w), (2, 0): np.full_like(P, c.c_s)}
    return P, grad, hess


def plant_power(f: float, T_in: float, T_out: float, c: CarrierConstants, tol: float = 1e-6) -> float:
    """Thermal power the plant puts into the carrier: heat water, boil, superheat."""
    if T_in > T_CONDENSE + tol or T_out < T_CONDENSE - tol:
        raise PhaseOrderViolation(f"plant needs water in and steam out, got T_in={T_in}, T_out={T_out}")
    return float(f * specific_phase_change(T_in, T_out, c))


LOAD_POWER_VARS = ("f", "T_in", "T_out", "QE", "QS")


def load_supplied_kernel(f, T_in, T_out, c: CarrierConstants):
    """Power released by condensing steam at ``T_in`` to water at ``T_out``."""
    f, T_in, T_out = _arr(f, T_in, T_out)
    h = c.c_s * (T_in - T_CONDENSE) + c.c_L + c.c_w * (T_CONDENSE - T_out)
    return f * h, h


def load_power_kernel(f, T_in, T_out, QE, QS, Q, c: CarrierConstants):
    """Residual ``supplied(f, T_in, T_out) - Q - QE + QS``."""
    QE, QS, Q = _arr(QE, QS, Q)
    supplied, h = load_supplied_kernel(f, T_in, T_out, c)
    f = np.asarray(f, dtype=float)
    r = supplied - Q - QE + QS
    one = np.ones_like(r)
    grad = (h, c.c_s * f * one, -c.c_w * f * one, -one, one)
    hess = {(1, 0): np.full_like(r, c.c_s), (2, 0): np.full_like(r, -c.c_w)}
    return r, grad, hess


def load_supplied_power(f: float, T_in: float, T_out: float, c: CarrierConstants) -> float:
    return float(load_supplied_kernel(f, T_in, T_out, c)[0])


def load_power_residual(s: EdgeState, Q: float, c: CarrierConstants) -> float:
    r, _, _ = load_power_kernel(s.f, s.T_in, s.T_out, s.QE, s.QS, Q, c)
    return float(r)


# --------------------------------------------------------------------------
# junctions


def junction_mass_residual(inflows: Sequence[EdgeState], outflows: Sequence[EdgeState]) -> float:
    return sum(s.f for s in inflows) - sum(s.f for s in outflows)


def junction_energy_residual(inflows, outflows) -> float:
    """Sensible energy balance at a junction.

    ``inflows``/``outflows`` are ``(EdgeState, c)`` pairs where ``c`` is the
    heat capacity at the end of the edge touching the junction.
    """
    return sum(s.f * c * s.T_out for s, c in inflows) - sum(s.f * c * s.T_in for s, c in outflows)


def mixing_residuals(T_junction: float, outflows: Sequence[EdgeState]) -> list[float]:
    return [s.T_in - T_junction for s in outflows]


def pipe_heat_loss(f, T_in, T_out, c):
    """Power dissipated to ambient by a pipe."""
    return c * f * (np.asarray(T_in) - np.asarray(T_out))
