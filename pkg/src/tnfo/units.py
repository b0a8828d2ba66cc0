"""Unit conversion at the I/O boundary. Everything inside the package is SI."""

from __future__ import annotations

from .errors import UnitError

PSI = 6894.757293168361  # Pa per lbf/in^2
ZERO_CELSIUS = 273.15
MEGA = 1e6


def psi_to_pa(p):
    return p * PSI


def pa_to_psi(p):
    return p / PSI


def c_to_k(t):
    return t + ZERO_CELSIUS


def k_to_c(t):
    return t - ZERO_CELSIUS


def mw_to_w(q):
    return q * MEGA


def w_to_mw(q):
    return q / MEGA


# (scale, offset): si = value * scale + offset
_GROUPS: dict[str, dict[str, tuple[float, float]]] = {
    "pressure": {"Pa": (1.0, 0.0), "kPa": (1e3, 0.0), "bar": (1e5, 0.0), "psi": (PSI, 0.0)},
    "temperature": {"K": (1.0, 0.0), "C": (1.0, ZERO_CELSIUS), "degC": (1.0, ZERO_CELSIUS)},
    "power": {"W": (1.0, 0.0), "kW": (1e3, 0.0), "MW": (MEGA, 0.0)},
    "length": {"m": (1.0, 0.0), "km": (1e3, 0.0), "ft": (0.3048, 0.0)},
    "diameter": {"m": (1.0, 0.0), "mm": (1e-3, 0.0), "in": (0.0254, 0.0)},
    "heat_loss_coeff": {"W/(m*K)": (1.0, 0.0)},
    "mass_flow": {"kg/s": (1.0, 0.0)},
    "constants": {"SI": (1.0, 0.0)},
}

UNIT_GROUPS = tuple(_GROUPS)


def to_si(value: float, group: str, unit: str) -> float:
    try:
        scale, offset = _GROUPS[group][unit]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r} for {group}") from None
    return float(value) * scale + offset


def from_si(value: float, group: str, unit: str) -> float:
    try:
        scale, offset = _GROUPS[group][unit]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r} for {group}") from None
    return (float(value) - offset) / scale


def known_units(group: str) -> tuple[str, ...]:
    return tuple(_GROUPS[group])
