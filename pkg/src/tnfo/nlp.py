"""Flatten a network and scenario into the thermal network flow optimization program.

All evaluators here work on the SI vector ``x``.  Equality residuals come in
natural units; ``eq_scale``/``ineq_scale`` and ``x_scale`` carry the
conditioning the solver applies on top (see :class:`ScaledProblem`).

Equality row order: pipe temperature decay (all pipes), steam pressure
(outgoing pipes), water pressure (return pipes), load power balance, mixing
(one per edge), junction mass, junction energy.  Inequalities (``g >= 0``):
plant capacity, then load pressure ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import physics
from .errors import NonFiniteValue, NonSquareSystem, ScenarioMismatch
from .model import OUTGOING, RETURN, T_CONDENSE, Network, OperationalBounds, natural_key
from .units import MEGA, PSI, ZERO_CELSIUS

FLOW_FLOOR = 1e-6  # kg/s, lower bound on every edge flow

FIELDS = ("p", "T", "f", "T_in", "T_out", "alpha", "QE", "QS")


class VariableLayout:
    """Contiguous index map: p, T per junction; f, T_in, T_out per edge; alpha per pump; QE, QS per load."""

    def __init__(self, junctions, edges, pumps, loads):
        self.junctions = tuple(junctions)
        self.edges = tuple(edges)
        self.pumps = tuple(pumps)
        self.loads = tuple(loads)
        V, E, P, L = len(self.junctions), len(self.edges), len(self.pumps), len(self.loads)
        sizes = [("p", V), ("T", V), ("f", E), ("T_in", E), ("T_out", E), ("alpha", P), ("QE", L), ("QS", L)]
        self.offset = {}
        pos = 0
        for name, size in sizes:
            self.offset[name] = pos
            pos += size
        self.n = pos
        self._members = {
            "p": self.junctions, "T": self.junctions,
            "f": self.edges, "T_in": self.edges, "T_out": self.edges,
            "alpha": self.pumps, "QE": self.loads, "QS": self.loads,
        }
        self._pos = {name: {k: i for i, k in enumerate(ids)} for name, ids in self._members.items()}

    def __len__(self) -> int:
        return self.n

    def index(self, field_name: str, entity: str) -> int:
        return self.offset[field_name] + self._pos[field_name][entity]

    def indices(self, field_name: str, entities) -> np.ndarray:
        return np.array([self.index(field_name, e) for e in entities], dtype=np.intp)

    def block(self, field_name: str) -> slice:
        start = self.offset[field_name]
        return slice(start, start + len(self._members[field_name]))

    def has(self, field_name: str, entity: str) -> bool:
        return entity in self._pos[field_name]

    def names(self) -> list[tuple[str, str]]:
        return [(f, e) for f in FIELDS for e in self._members[f]]

    def unflatten(self, x) -> dict[tuple[str, str], float]:
        return {key: float(x[i]) for i, key in enumerate(self.names())}

    def flatten(self, values: Mapping[tuple[str, str], float]) -> np.ndarray:
        x = np.zeros(self.n)
        for (f, e), v in values.items():
            x[self.index(f, e)] = v
        return x


def index_variables(net: Network) -> VariableLayout:
    return VariableLayout(
        [j.id for j in net.junctions],
        [e.id for e in net.edges],
        [p.id for p in net.pumps],
        [ld.id for ld in net.loads],
    )


@dataclass(frozen=True)
class ObjectiveWeights:
    """Per-term objective weights, applied to slacks in MW, pressures in psi, temperature in °C, flow in kg/s.

    The slack default of 1000 per MW (one unit per kW) makes unmet and
    excess power dominate the plant terms; at weight 1 the optimizer prefers
    over-feeding far loads to raising the supply temperature.
    """

    load_slack: float = 1000.0
    plant_p_out: float = 1.0
    plant_T_out: float = 1.0
    plant_f: float = 1.0
    plant_p_in: float = 1.0

    def scaled(self, k: float) -> "ObjectiveWeights":
        return ObjectiveWeights(*(k * getattr(self, n) for n in self.__dataclass_fields__))


@dataclass(frozen=True)
class ResolvedInputs:
    """What the program needs from a scenario: demands, capacities and bounds."""

    demands: dict
    plant_capacity: dict
    bounds: OperationalBounds


def resolve_inputs(net: Network, scen=None) -> ResolvedInputs:
    """Accept ``None``, anything with ``resolve(net)``, or an already resolved object."""
    if scen is None:
        return ResolvedInputs(net.demands(), {p.id: p.power_max for p in net.plants}, net.bounds)
    if hasattr(scen, "resolve"):
        scen = scen.resolve(net)
    demands = dict(scen.demands)
    known = {ld.id for ld in net.loads}
    unknown = sorted(set(demands) - known, key=natural_key)
    if unknown:
        raise ScenarioMismatch(f"scenario references unknown loads: {', '.join(unknown)}")
    for lid in known - set(demands):
        demands[lid] = net.edge_index[lid].demand
    cap = dict(getattr(scen, "plant_capacity", None) or {})
    for p in net.plants:
        cap.setdefault(p.id, p.power_max)
    bounds = getattr(scen, "bounds", None) or net.bounds
    return ResolvedInputs(demands, cap, bounds)


def _scatter_sym(H, rows_i, rows_j, vals):
    """Add ``vals`` at (i, j) and (j, i); diagonal entries once."""
    np.add.at(H, (rows_i, rows_j), vals)
    off = rows_i != rows_j
    np.add.at(H, (rows_j[off], rows_i[off]), vals[off])


class NlpProblem:
    """The optimization program for one network under one scenario.

    Immutable after construction; evaluations allocate fresh outputs unless a
    :class:`Workspace` is passed to :func:`evaluate`.
    """

    def __init__(self, net: Network, inputs: ResolvedInputs, weights: ObjectiveWeights | None = None):
        self.net = net
        self.inputs = inputs
        self.weights = weights or ObjectiveWeights()
        self.layout = lay = index_variables(net)
        b = inputs.bounds
        c = net.constants
        self.bounds_si = b
        self.demand = np.array([inputs.demands[ld.id] for ld in net.loads], dtype=float)
        self.capacity = np.array([inputs.plant_capacity[p.id] for p in net.plants], dtype=float)

        jn = lay.junctions
        jidx = {j: i for i, j in enumerate(jn)}
        P = lambda j: lay.offset["p"] + jidx[j]  # noqa: E731
        Tj = lambda j: lay.offset["T"] + jidx[j]  # noqa: E731

        pipes = net.pipes
        self.pipe_f = lay.indices("f", [p.id for p in pipes])
        self.pipe_Tin = lay.indices("T_in", [p.id for p in pipes])
        self.pipe_Tout = lay.indices("T_out", [p.id for p in pipes])
        cap_pipe = np.array([c.c_s if p.system == OUTGOING else c.c_w for p in pipes])
        self.pipe_c = cap_pipe
        self.pipe_decay = np.array([p.length * p.heat_loss_coeff for p in pipes]) / cap_pipe if pipes else np.zeros(0)

        out = net.outgoing_pipes
        self.st_pin = np.array([P(p.from_junction) for p in out], dtype=np.intp)
        self.st_pout = np.array([P(p.to_junction) for p in out], dtype=np.intp)
        self.st_f = lay.indices("f", [p.id for p in out])
        self.st_Tin = lay.indices("T_in", [p.id for p in out])
        self.st_Tout = lay.indices("T_out", [p.id for p in out])
        self.st_K = np.array([physics.steam_resistance(p, c.R_s) for p in out])
        self.st_a = np.array([b.T_ext * p.length for p in out])
        self.st_b = np.array([c.c_s / p.heat_loss_coeff for p in out])

        ret = net.return_pipes
        self.wa_pin = np.array([P(p.from_junction) for p in ret], dtype=np.intp)
        self.wa_pout = np.array([P(p.to_junction) for p in ret], dtype=np.intp)
        self.wa_f = lay.indices("f", [p.id for p in ret])
        self.wa_alpha = np.array([lay.index("alpha", p.id) if p.has_pump else -1 for p in ret], dtype=np.intp)
        self.wa_K = np.array([physics.water_resistance(p, c.rho_w) for p in ret])

        loads = net.loads
        lids = [ld.id for ld in loads]
        self.ld_f = lay.indices("f", lids)
        self.ld_Tin = lay.indices("T_in", lids)
        self.ld_Tout = lay.indices("T_out", lids)
        self.ld_QE = lay.indices("QE", lids)
        self.ld_QS = lay.indices("QS", lids)
        self.ld_pfrom = np.array([P(ld.from_junction) for ld in loads], dtype=np.intp)
        self.ld_pto = np.array([P(ld.to_junction) for ld in loads], dtype=np.intp)

        plants = net.plants
        pids = [p.id for p in plants]
        self.pl_f = lay.indices("f", pids)
        self.pl_Tin = lay.indices("T_in", pids)
        self.pl_Tout = lay.indices("T_out", pids)
        self.pl_pout = np.array([P(p.to_junction) for p in plants], dtype=np.intp)
        self.pl_pin = np.array([P(p.from_junction) for p in plants], dtype=np.intp)

        edges = net.edges
        self.e_f = lay.indices("f", [e.id for e in edges])
        self.e_Tin = lay.indices("T_in", [e.id for e in edges])
        self.e_Tout = lay.indices("T_out", [e.id for e in edges])
        self.e_from = np.array([jidx[e.from_junction] for e in edges], dtype=np.intp)
        self.e_to = np.array([jidx[e.to_junction] for e in edges], dtype=np.intp)
        self.e_cin = np.array([c.c_in(e.kind, getattr(e, "system", None)) for e in edges])
        self.e_cout = np.array([c.c_out(e.kind, getattr(e, "system", None)) for e in edges])
        self.T_from_col = np.array([Tj(e.from_junction) for e in edges], dtype=np.intp)

        V, E = len(jn), len(edges)
        Np, No, Nr, L = len(pipes), len(out), len(ret), len(loads)
        r0 = 0
        self.rows = {}
        for name, size in (("pipe_temperature", Np), ("steam_pressure", No), ("water_pressure", Nr),
                           ("load_power", L), ("mixing", E), ("mass", V), ("energy", V)):
            self.rows[name] = slice(r0, r0 + size)
            r0 += size
        self.m_eq = r0
        self.ineq_rows = {"plant_capacity": slice(0, len(plants)), "load_pressure": slice(len(plants), len(plants) + L)}
        self.m_ineq = len(plants) + L
        self.n = lay.n

        # constant (linear) Jacobian pieces
        Jlin = np.zeros((self.m_eq, self.n))
        rm = np.arange(self.rows["mixing"].start, self.rows["mixing"].stop)
        Jlin[rm, self.e_Tin] = 1.0
        Jlin[rm, self.T_from_col] = -1.0
        ms = self.rows["mass"].start
        np.add.at(Jlin, (ms + self.e_to, self.e_f), 1.0)
        np.add.at(Jlin, (ms + self.e_from, self.e_f), -1.0)
        self._J_linear = Jlin

        self._set_bounds()
        self._set_scaling()

    # ------------------------------------------------------------------ bounds

    def _set_bounds(self):
        lay, b = self.layout, self.bounds_si
        lo = np.full(self.n, -np.inf)
        hi = np.full(self.n, np.inf)
        lo[lay.block("p")], hi[lay.block("p")] = b.p_min, b.p_max
        lo[self.pl_pout] = np.maximum(lo[self.pl_pout], b.plant_outlet_p_min)
        if b.plant_inlet_p_min is not None:
            lo[self.pl_pin] = np.maximum(lo[self.pl_pin], b.plant_inlet_p_min)
        lo[lay.block("T")], hi[lay.block("T")] = b.T_min, b.T_max
        lo[lay.block("f")] = FLOW_FLOOR
        hi[lay.block("T_out")] = b.T_max
        lo[self.ld_Tin] = T_CONDENSE
        hi[self.ld_Tout] = T_CONDENSE
        # without a floor a load could "supply" its demand by sub-cooling a trickle of flow
        lo[self.ld_Tout] = b.T_min
        pumps = self.net.pumps
        lo[lay.block("alpha")] = 0.0
        hi[lay.block("alpha")] = [p.pump_boost_max for p in pumps]
        lo[lay.block("QE")] = 0.0
        lo[lay.block("QS")] = 0.0
        self.lower, self.upper = lo, hi

    def _set_scaling(self):
        lay, b, c = self.layout, self.bounds_si, self.net.constants
        sx = np.ones(self.n)
        sx[lay.block("p")] = PSI
        sx[lay.block("alpha")] = PSI
        sx[lay.block("QE")] = MEGA
        sx[lay.block("QS")] = MEGA
        self.x_scale = sx
        F = max(self.demand.sum() / c.c_L, 0.1)
        self.flow_scale = F
        power = 1.0 / (c.c_w * F * b.T_max)
        es = np.empty(self.m_eq)
        es[self.rows["pipe_temperature"]] = 1.0 / b.T_max
        es[self.rows["steam_pressure"]] = 1.0 / b.p_max**2
        es[self.rows["water_pressure"]] = 1.0 / b.p_max
        es[self.rows["load_power"]] = power
        es[self.rows["mixing"]] = 1.0 / b.T_max
        es[self.rows["mass"]] = 1.0 / F
        es[self.rows["energy"]] = power
        self.eq_scale = es
        gs = np.empty(self.m_ineq)
        gs[self.ineq_rows["plant_capacity"]] = power
        gs[self.ineq_rows["load_pressure"]] = 1.0 / b.p_max
        self.ineq_scale = gs

    # --------------------------------------------------------------- objective

    def objective(self, x) -> float:
        w, lay = self.weights, self.layout
        slack = x[lay.block("QE")].sum() + x[lay.block("QS")].sum()
        return float(
            w.load_slack * slack / MEGA
            + w.plant_p_out * x[self.pl_pout].sum() / PSI
            + w.plant_T_out * (x[self.pl_Tout] - ZERO_CELSIUS).sum()
            + w.plant_f * x[self.pl_f].sum()
            + w.plant_p_in * x[self.pl_pin].sum() / PSI
        )

    def objective_gradient(self, x) -> np.ndarray:
        w, lay = self.weights, self.layout
        g = np.zeros(self.n)
        g[lay.block("QE")] = w.load_slack / MEGA
        g[lay.block("QS")] = w.load_slack / MEGA
        np.add.at(g, self.pl_pout, w.plant_p_out / PSI)
        np.add.at(g, self.pl_Tout, w.plant_T_out)
        np.add.at(g, self.pl_f, w.plant_f)
        np.add.at(g, self.pl_pin, w.plant_p_in / PSI)
        return g

    # ------------------------------------------------------------- residuals

    def _kernels(self, x):
        b, c = self.bounds_si, self.net.constants
        out = {}
        out["pipe_temperature"] = physics.pipe_temperature_kernel(
            x[self.pipe_Tin], x[self.pipe_Tout], x[self.pipe_f], self.pipe_decay, b.T_ext
        )
        out["steam_pressure"] = physics.steam_pressure_kernel(
            x[self.st_pin], x[self.st_pout], x[self.st_f], x[self.st_Tin], x[self.st_Tout],
            self.st_K, self.st_a, self.st_b,
        )
        alpha = np.where(self.wa_alpha >= 0, x[np.maximum(self.wa_alpha, 0)], 0.0) if len(self.wa_alpha) else np.zeros(0)
        out["water_pressure"] = physics.water_pressure_kernel(
            x[self.wa_pin], x[self.wa_pout], x[self.wa_f], alpha, self.wa_K
        )
        out["load_power"] = physics.load_power_kernel(
            x[self.ld_f], x[self.ld_Tin], x[self.ld_Tout], x[self.ld_QE], x[self.ld_QS], self.demand, c
        )
        return out

    def _kernel_cols(self):
        return {
            "pipe_temperature": (self.pipe_Tin, self.pipe_Tout, self.pipe_f),
            "steam_pressure": (self.st_pin, self.st_pout, self.st_f, self.st_Tin, self.st_Tout),
            "water_pressure": (self.wa_pin, self.wa_pout, self.wa_f, self.wa_alpha),
            "load_power": (self.ld_f, self.ld_Tin, self.ld_Tout, self.ld_QE, self.ld_QS),
        }

    def equalities(self, x, kern=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        kern = kern or self._kernels(x)
        r = np.empty(self.m_eq)
        for name in ("pipe_temperature", "steam_pressure", "water_pressure", "load_power"):
            r[self.rows[name]] = kern[name][0]
        r[self.rows["mixing"]] = x[self.e_Tin] - x[self.T_from_col]
        V = len(self.layout.junctions)
        f = x[self.e_f]
        r[self.rows["mass"]] = np.bincount(self.e_to, f, V) - np.bincount(self.e_from, f, V)
        r[self.rows["energy"]] = np.bincount(self.e_to, f * self.e_cout * x[self.e_Tout], V) - np.bincount(
            self.e_from, f * self.e_cin * x[self.e_Tin], V
        )
        return r

    def plant_power(self, x) -> np.ndarray:
        return physics.plant_power_kernel(x[self.pl_f], x[self.pl_Tin], x[self.pl_Tout], self.net.constants)[0]

    def inequalities(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.empty(self.m_ineq)
        g[self.ineq_rows["plant_capacity"]] = self.capacity - self.plant_power(x)
        g[self.ineq_rows["load_pressure"]] = x[self.ld_pfrom] - x[self.ld_pto]
        return g

    def jacobian(self, x, out_eq=None, out_ineq=None):
        """Dense Jacobians ``(J_eq, J_ineq)`` in natural units."""
        x = np.asarray(x, dtype=float)
        Je = out_eq if out_eq is not None else np.empty((self.m_eq, self.n))
        Je[...] = self._J_linear
        kern = self._kernels(x)
        for name, cols in self._kernel_cols().items():
            rs = np.arange(self.rows[name].start, self.rows[name].stop)
            grad = kern[name][1]
            for col, g in zip(cols, grad):
                ok = col >= 0
                Je[rs[ok], col[ok]] += g[ok]
        es = self.rows["energy"].start
        f = x[self.e_f]
        np.add.at(Je, (es + self.e_to, self.e_f), self.e_cout * x[self.e_Tout])
        np.add.at(Je, (es + self.e_to, self.e_Tout), self.e_cout * f)
        np.add.at(Je, (es + self.e_from, self.e_f), -self.e_cin * x[self.e_Tin])
        np.add.at(Je, (es + self.e_from, self.e_Tin), -self.e_cin * f)

        Ji = out_ineq if out_ineq is not None else np.empty((self.m_ineq, self.n))
        Ji[...] = 0.0
        _, pg, _ = physics.plant_power_kernel(x[self.pl_f], x[self.pl_Tin], x[self.pl_Tout], self.net.constants)
        rp = np.arange(len(self.pl_f))
        for col, g in zip((self.pl_f, self.pl_Tin, self.pl_Tout), pg):
            Ji[rp, col] -= g
        rl = self.ineq_rows["load_pressure"].start + np.arange(len(self.ld_f))
        Ji[rl, self.ld_pfrom] += 1.0
        Ji[rl, self.ld_pto] -= 1.0
        return Je, Ji

    def hessian(self, x, lam_eq, lam_ineq, obj_factor: float = 1.0, out=None) -> np.ndarray:
        """Hessian of ``obj_factor*f + lam_eq.c_eq + lam_ineq.g`` (the objective is linear)."""
        x = np.asarray(x, dtype=float)
        H = out if out is not None else np.empty((self.n, self.n))
        H[...] = 0.0
        kern = self._kernels(x)
        for name, cols in self._kernel_cols().items():
            lam = lam_eq[self.rows[name]]
            for (i, j), h in kern[name][2].items():
                ci, cj = cols[i], cols[j]
                ok = (ci >= 0) & (cj >= 0)
                _scatter_sym(H, ci[ok], cj[ok], (lam * h)[ok])
        le = lam_eq[self.rows["energy"]]
        _scatter_sym(H, self.e_f, self.e_Tout, le[self.e_to] * self.e_cout)
        _scatter_sym(H, self.e_f, self.e_Tin, -le[self.e_from] * self.e_cin)
        lc = lam_ineq[self.ineq_rows["plant_capacity"]]
        _, _, ph = physics.plant_power_kernel(x[self.pl_f], x[self.pl_Tin], x[self.pl_Tout], self.net.constants)
        pcols = (self.pl_f, self.pl_Tin, self.pl_Tout)
        for (i, j), h in ph.items():
            _scatter_sym(H, pcols[i], pcols[j], -lc * h)
        return H

    def jacobian_pattern(self) -> tuple[np.ndarray, np.ndarray]:
        """Structural nonzeros of ``J_eq`` as sorted (row, col) arrays."""
        S = self._J_linear != 0
        for name, cols in self._kernel_cols().items():
            rs = np.arange(self.rows[name].start, self.rows[name].stop)
            for col in cols:
                ok = col >= 0
                S[rs[ok], col[ok]] = True
        es = self.rows["energy"].start
        S[es + self.e_to, self.e_f] = True
        S[es + self.e_to, self.e_Tout] = True
        S[es + self.e_from, self.e_f] = True
        S[es + self.e_from, self.e_Tin] = True
        return np.nonzero(S)

    # --------------------------------------------------------------- reports

    def row_family(self, i: int) -> str:
        for name, s in self.rows.items():
            if s.start <= i < s.stop:
                return name
        raise IndexError(i)

    def redundant_mass_rows(self) -> list[int]:
        """One junction mass row per connected circuit; each is the negated sum of the others there."""
        import networkx as nx

        lay, start = self.layout, self.rows["mass"].start
        pos = {j: k for k, j in enumerate(lay.junctions)}
        out = []
        for comp in nx.weakly_connected_components(self.net.graph):
            if len(comp) > 1:
                out.append(start + min(pos[j] for j in comp))
        return sorted(out)

    def residual_norms(self, x) -> dict[str, float]:
        r = self.equalities(x)
        g = self.inequalities(x)
        out = {name: float(np.max(np.abs(r[s]), initial=0.0)) for name, s in self.rows.items()}
        out["eq_scaled"] = float(np.max(np.abs(r * self.eq_scale), initial=0.0))
        out["ineq_violation_scaled"] = float(np.max(np.maximum(-g * self.ineq_scale, 0.0), initial=0.0))
        out["plant_capacity_violation"] = float(np.max(np.maximum(-g[self.ineq_rows["plant_capacity"]], 0.0), initial=0.0))
        out["load_pressure_violation"] = float(np.max(np.maximum(-g[self.ineq_rows["load_pressure"]], 0.0), initial=0.0))
        return out


def assemble_tnfo(net: Network, scen=None, weights: ObjectiveWeights | None = None) -> NlpProblem:
    return NlpProblem(net, resolve_inputs(net, scen), weights)


# ---------------------------------------------------------------------- evaluate


@dataclass
class Workspace:
    """Preallocated buffers so repeated evaluations do not allocate Jacobians."""

    jac_eq: np.ndarray
    jac_ineq: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray

    @classmethod
    def for_problem(cls, problem: NlpProblem) -> "Workspace":
        m = problem.m_eq + problem.m_ineq
        return cls(
            np.empty((problem.m_eq, problem.n)),
            np.empty((problem.m_ineq, problem.n)),
            np.empty(m),
            np.empty((m, problem.n)),
        )


def evaluate(problem: NlpProblem, x, ws: Workspace | None = None):
    """``(objective, residuals, jacobian)``; residuals are equalities then inequalities."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({problem.n},)")
    ws = ws or Workspace.for_problem(problem)
    me = problem.m_eq
    ws.residuals[:me] = problem.equalities(x)
    ws.residuals[me:] = problem.inequalities(x)
    bad = np.flatnonzero(~np.isfinite(ws.residuals))
    if bad.size:
        raise NonFiniteValue(f"residual {bad[0]} is not finite", int(bad[0]))
    problem.jacobian(x, ws.jac_eq, ws.jac_ineq)
    ws.jacobian[:me] = ws.jac_eq
    ws.jacobian[me:] = ws.jac_ineq
    if not np.all(np.isfinite(ws.jacobian)):
        row = int(np.argwhere(~np.isfinite(ws.jacobian))[0, 0])
        raise NonFiniteValue(f"jacobian row {row} is not finite", row)
    return problem.objective(x), ws.residuals, ws.jacobian


# ------------------------------------------------------------------ scaled view


class ScaledProblem:
    """Solver-facing view: variables ``y = x / x_scale``, rows scaled, objective scaled.

    Rows whose largest scaled gradient at the reference point exceeds
    ``max_gradient`` are shrunk further, as is the objective.
    """

    def __init__(self, problem: NlpProblem, x_ref=None, max_gradient: float = 100.0):
        self.problem = problem
        # mass balances over a closed circuit sum to zero; one per circuit is implied by the rest
        self.keep_eq = np.setdiff1d(np.arange(problem.m_eq), problem.redundant_mass_rows())
        self.n, self.m_eq, self.m_ineq = problem.n, len(self.keep_eq), problem.m_ineq
        self.x_scale = problem.x_scale
        self.lower = problem.lower / self.x_scale
        self.upper = problem.upper / self.x_scale
        self.eq_scale = problem.eq_scale.copy()
        self.ineq_scale = problem.ineq_scale.copy()
        self.obj_scale = 1.0
        if x_ref is not None:
            Je, Ji = problem.jacobian(x_ref)
            for J, s in ((Je, self.eq_scale), (Ji, self.ineq_scale)):
                big = np.max(np.abs(J * self.x_scale), axis=1, initial=0.0) * s
                shrink = big > max_gradient
                s[shrink] *= max_gradient / big[shrink]
            gmax = np.max(np.abs(problem.objective_gradient(x_ref) * self.x_scale), initial=0.0)
            if gmax > max_gradient:
                self.obj_scale = max_gradient / gmax

    def to_x(self, y):
        return np.asarray(y) * self.x_scale

    def to_y(self, x):
        return np.asarray(x) / self.x_scale

    def objective(self, y):
        return self.obj_scale * self.problem.objective(self.to_x(y))

    def gradient(self, y):
        return self.obj_scale * self.problem.objective_gradient(self.to_x(y)) * self.x_scale

    def constraints(self, y):
        x = self.to_x(y)
        eq = (self.problem.equalities(x) * self.eq_scale)[self.keep_eq]
        return np.concatenate([eq, self.problem.inequalities(x) * self.ineq_scale])

    def jacobian(self, y):
        Je, Ji = self.problem.jacobian(self.to_x(y))
        J = np.vstack([(Je * self.eq_scale[:, None])[self.keep_eq], Ji * self.ineq_scale[:, None]])
        J *= self.x_scale[None, :]
        return J

    def hessian(self, y, lam, obj_factor=1.0):
        me = self.m_eq
        lam_eq = np.zeros(self.problem.m_eq)
        lam_eq[self.keep_eq] = lam[:me]
        H = self.problem.hessian(
            self.to_x(y), lam_eq * self.eq_scale, lam[me:] * self.ineq_scale, obj_factor * self.obj_scale
        )
        H *= self.x_scale[:, None]
        H *= self.x_scale[None, :]
        return H


# ----------------------------------------------------------------- start point


def _topo(nodes, edges):
    """Deterministic topological order of ``nodes`` under (u, v) ``edges``."""
    import networkx as nx

    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    g.add_edges_from(edges)
    return list(nx.lexicographical_topological_sort(g, key=natural_key))


def _aggregate_flows(net: Network, demand: dict, per_kg: float) -> dict:
    """Edge flows that carry each load's demand along the tree-like outgoing and return sides."""
    kinds = {j.id: j.kind for j in net.junctions}
    flow = {ld.id: max(demand[ld.id] / per_kg, FLOW_FLOOR) for ld in net.loads}
    out_j = [j for j, k in kinds.items() if k == OUTGOING]
    order = _topo(out_j, [(p.from_junction, p.to_junction) for p in net.outgoing_pipes])
    for j in reversed(order):
        need = sum(flow[e.id] for e in net.out_edges(j) if e.id in flow)
        feeders = [e for e in net.in_edges(j) if e.kind == "pipe"] or net.in_edges(j)
        for e in feeders:
            if e.kind == "pipe":
                flow[e.id] = max(need / len(feeders), FLOW_FLOOR)
    ret_j = [j for j, k in kinds.items() if k == RETURN]
    order = _topo(ret_j, [(p.from_junction, p.to_junction) for p in net.return_pipes])
    for j in order:
        arriving = sum(flow.get(e.id, 0.0) for e in net.in_edges(j))
        leaving = [e for e in net.out_edges(j) if e.kind == "pipe"]
        for e in leaving:
            flow[e.id] = max(arriving / len(leaving), FLOW_FLOOR)
    total = sum(flow[ld.id] for ld in net.loads)
    for p in net.plants:
        flow[p.id] = max(total / len(net.plants), FLOW_FLOOR)
    for e in net.edges:
        flow.setdefault(e.id, FLOW_FLOOR)
    return flow


def _mix(inflows, default):
    """Flow-weighted mean of ``(flow, value)`` pairs."""
    total = sum(f for f, _ in inflows)
    return sum(f * v for f, v in inflows) / total if total > 0 else default


def initial_guess(net: Network, scen=None, problem: NlpProblem | None = None) -> np.ndarray:
    """A start point that nearly satisfies the physics.

    Flows carry the demand; temperatures follow the decay and mixing rules
    from the lowest supply temperature that keeps every load inlet above
    condensation; each load's outlet temperature (and a slack, if needed)
    closes its power balance; pressures propagate from the plants.  Bounds
    are enforced by clipping, so meshed networks get an approximate point.
    """
    problem = problem or assemble_tnfo(net, scen)
    lay, b, c = problem.layout, problem.bounds_si, net.constants
    lo, hi = problem.lower, problem.upper
    x = np.zeros(lay.n)
    kinds = {j.id: j.kind for j in net.junctions}
    demand = dict(zip([ld.id for ld in net.loads], problem.demand))
    load_T_out = 0.5 * (b.T_min + T_CONDENSE)
    flow = _aggregate_flows(net, demand, c.c_L + c.c_w * (T_CONDENSE - load_T_out))
    decay = dict(zip([p.id for p in net.pipes], problem.pipe_decay))
    factor = {pid: float(physics.decay_factor(flow[pid], a)[0]) for pid, a in decay.items()}

    # outgoing side: temperature above ambient relative to the supply's
    out_j = [j for j, k in kinds.items() if k == OUTGOING]
    order = _topo(out_j, [(p.from_junction, p.to_junction) for p in net.outgoing_pipes])
    rel, rel_out = {}, {}
    for j in order:
        rel[j] = _mix([(flow[e.id], rel_out.get(e.id, 1.0)) for e in net.in_edges(j)], 1.0)
        for e in net.out_edges(j):
            if e.kind == "pipe":
                rel_out[e.id] = rel[j] * factor[e.id]
    worst = min((rel[ld.from_junction] for ld in net.loads), default=1.0)
    margin = 1.0
    T_s = b.T_ext + (T_CONDENSE + margin - b.T_ext) / max(worst, 1e-6)
    T_s = float(np.clip(T_s, T_CONDENSE + margin, b.T_max))
    T = {j: b.T_ext + rel[j] * (T_s - b.T_ext) for j in out_j}
    T_edge_out = {pid: b.T_ext + r * (T_s - b.T_ext) for pid, r in rel_out.items()}

    # loads: outlet temperature closes the balance, slacks take the rest
    for ld in net.loads:
        f, Q = flow[ld.id], demand[ld.id]
        T_in = T[ld.from_junction]
        base = c.c_L + c.c_s * (T_in - T_CONDENSE)
        T_o = float(np.clip(T_CONDENSE - (Q / f - base) / c.c_w, b.T_min, T_CONDENSE))
        gap = f * (base + c.c_w * (T_CONDENSE - T_o)) - Q
        T_edge_out[ld.id] = T_o
        x[lay.index("QE", ld.id)] = max(gap, 0.0)
        x[lay.index("QS", ld.id)] = max(-gap, 0.0)

    # return side: mix arriving water, cool it along the pipes
    ret_j = [j for j, k in kinds.items() if k == RETURN]
    order = _topo(ret_j, [(p.from_junction, p.to_junction) for p in net.return_pipes])
    for j in order:
        T[j] = _mix([(flow[e.id], T_edge_out[e.id]) for e in net.in_edges(j) if e.id in T_edge_out],
                    0.5 * (b.T_min + b.T_max))
        for e in net.out_edges(j):
            if e.kind == "pipe":
                T_edge_out[e.id] = b.T_ext + (T[j] - b.T_ext) * factor[e.id]
    for p in net.plants:
        T_edge_out[p.id] = T_s

    for e in net.edges:
        x[lay.index("f", e.id)] = flow[e.id]
        x[lay.index("T_in", e.id)] = T[e.from_junction]
        x[lay.index("T_out", e.id)] = T_edge_out[e.id]
    for j in lay.junctions:
        x[lay.index("T", j)] = T[j]
    al = lay.block("alpha")
    x[al] = lo[al]

    # pressures: squared drops accumulate along the steam side from the plants ...
    drop2 = {}
    for j in _topo(out_j, [(p.from_junction, p.to_junction) for p in net.outgoing_pipes]):
        cands = []
        for e in net.in_edges(j):
            if e.kind == "pipe":
                i = lay.index("f", e.id)
                k = int(np.flatnonzero(problem.st_f == i)[0])
                r, _, _ = physics.steam_pressure_kernel(0.0, 0.0, flow[e.id], x[lay.index("T_in", e.id)],
                                                        x[lay.index("T_out", e.id)], problem.st_K[k],
                                                        problem.st_a[k], problem.st_b[k])
                cands.append(drop2.get(e.from_junction, 0.0) + float(r))
        drop2[j] = min(cands) if cands else 0.0
    p_lo = b.p_min + 0.05 * (b.p_max - b.p_min)
    ps = lay.block("p")
    src_lo = max((lo[lay.index("p", pl.to_junction)] for pl in net.plants), default=b.p_min)
    p0 = min(b.p_max, max(src_lo, math.sqrt(max(drop2.values(), default=0.0) + p_lo * p_lo)))
    for j in out_j:
        x[lay.index("p", j)] = math.sqrt(max(p0 * p0 - drop2[j], 0.0))
    # ... and linear drops accumulate upstream from the plant inlets on the water side
    p_ret = {}
    for j in reversed(_topo(ret_j, [(p.from_junction, p.to_junction) for p in net.return_pipes])):
        cands = []
        for e in net.out_edges(j):
            if e.kind == "pipe":
                i = lay.index("f", e.id)
                k = int(np.flatnonzero(problem.wa_f == i)[0])
                boost = x[lay.index("alpha", e.id)] if lay.has("alpha", e.id) else 0.0
                cands.append(p_ret[e.to_junction] + problem.wa_K[k] * flow[e.id] ** 2 - boost)
        p_ret[j] = max(cands) if cands else max(lo[lay.index("p", j)], b.p_min + 0.15 * (b.p_max - b.p_min))
    for j in ret_j:
        x[lay.index("p", j)] = p_ret[j]
    x[ps] = np.clip(x[ps], lo[ps], hi[ps])
    return np.clip(x, lo, hi)


# ---------------------------------------------------------------- solved state


@dataclass
class NetworkState:
    """Solved vector with per-entity accessors."""

    x: np.ndarray
    layout: VariableLayout
    objective: float = float("nan")
    norms: dict = field(default_factory=dict)

    def value(self, field_name: str, entity: str) -> float:
        return float(self.x[self.layout.index(field_name, entity)])

    def junction(self, jid: str) -> dict[str, float]:
        return {"p": self.value("p", jid), "T": self.value("T", jid)}

    def edge(self, eid: str) -> dict[str, float]:
        lay = self.layout
        out = {k: self.value(k, eid) for k in ("f", "T_in", "T_out")}
        out["alpha"] = self.value("alpha", eid) if lay.has("alpha", eid) else 0.0
        if lay.has("QE", eid):
            out["QE"] = self.value("QE", eid)
            out["QS"] = self.value("QS", eid)
        return out

    def values(self) -> dict[tuple[str, str], float]:
        return self.layout.unflatten(self.x)


def make_state(problem: NlpProblem, x) -> NetworkState:
    x = np.array(x, dtype=float)
    return NetworkState(x, problem.layout, problem.objective(x), problem.residual_norms(x))


# ------------------------------------------------------------------ simulation


@dataclass(frozen=True)
class Setpoints:
    """Fixed quantities for a simulation run (SI).

    ``plants``: id -> (T_out, p_out, f).  ``pumps``: id -> alpha.
    ``loads``: id -> (QE, QS, dp) with ``dp`` the pressure drop across the load.
    """

    plants: dict
    pumps: dict
    loads: dict


def setpoints_from_state(problem: NlpProblem, x) -> Setpoints:
    lay, net = problem.layout, problem.net
    plants = {
        p.id: (x[lay.index("T_out", p.id)], x[lay.index("p", p.to_junction)], x[lay.index("f", p.id)]) for p in net.plants
    }
    pumps = {p.id: x[lay.index("alpha", p.id)] for p in net.pumps}
    loads = {
        ld.id: (
            x[lay.index("QE", ld.id)],
            x[lay.index("QS", ld.id)],
            x[lay.index("p", ld.from_junction)] - x[lay.index("p", ld.to_junction)],
        )
        for ld in net.loads
    }
    f = lambda d: {k: tuple(float(v) for v in val) if isinstance(val, tuple) else float(val) for k, val in d.items()}  # noqa: E731
    return Setpoints(f(plants), f(pumps), f(loads))


class SimulationSystem:
    """Square system ``F(z) = 0`` over the variables left free by the setpoints.

    Rows are the scaled equalities with one redundant mass row dropped, plus
    one row per load fixing its pressure drop.
    """

    def __init__(self, problem: NlpProblem, sp: Setpoints):
        net, lay = problem.net, problem.layout
        self.problem = problem
        missing = []
        for p in net.plants:
            if p.id not in sp.plants:
                missing.append(f"plant {p.id}")
        for p in net.pumps:
            if p.id not in sp.pumps:
                missing.append(f"pump {p.id}")
        for ld in net.loads:
            if ld.id not in sp.loads:
                missing.append(f"load {ld.id}")
        fixed = {}
        for p in net.plants:
            if p.id in sp.plants:
                T_out, p_out, f = sp.plants[p.id]
                fixed[lay.index("T_out", p.id)] = T_out
                fixed[lay.index("p", p.to_junction)] = p_out
                fixed[lay.index("f", p.id)] = f
        for pid, a in sp.pumps.items():
            fixed[lay.index("alpha", pid)] = a
        self.dp_rows = []
        for ld in net.loads:
            if ld.id in sp.loads:
                QE, QS, dp = sp.loads[ld.id]
                fixed[lay.index("QE", ld.id)] = QE
                fixed[lay.index("QS", ld.id)] = QS
                self.dp_rows.append((lay.index("p", ld.from_junction), lay.index("p", ld.to_junction), dp))
        self.fixed_idx = np.array(sorted(fixed), dtype=np.intp)
        self.fixed_val = np.array([fixed[i] for i in self.fixed_idx])
        self.free_idx = np.setdiff1d(np.arange(problem.n), self.fixed_idx)

        keep = np.ones(problem.m_eq, dtype=bool)
        if net.plants:
            jpos = lay.junctions.index(net.plants[0].from_junction)
            keep[problem.rows["mass"].start + jpos] = False
        self.keep_rows = np.flatnonzero(keep)
        self.n = len(self.free_idx)
        self.m = len(self.keep_rows) + len(self.dp_rows)
        if missing or self.n != self.m:
            detail = f"{self.m} equations for {self.n} unknowns"
            if missing:
                detail += "; no setpoint for " + ", ".join(missing)
            if len(net.plants) > 1:
                detail += f"; {len(net.plants)} plants fix {len(net.plants) - 1} more quantities than the network can absorb"
            raise NonSquareSystem(detail)
        self.dp_from = np.array([r[0] for r in self.dp_rows], dtype=np.intp)
        self.dp_to = np.array([r[1] for r in self.dp_rows], dtype=np.intp)
        self.dp_val = np.array([r[2] for r in self.dp_rows])
        self.dp_scale = 1.0 / problem.bounds_si.p_max

    def full(self, z) -> np.ndarray:
        x = np.empty(self.problem.n)
        x[self.fixed_idx] = self.fixed_val
        x[self.free_idx] = z
        return x

    def reduce(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.free_idx].copy()

    def residual(self, z) -> np.ndarray:
        x = self.full(z)
        r = (self.problem.equalities(x) * self.problem.eq_scale)[self.keep_rows]
        dp = (x[self.dp_from] - x[self.dp_to] - self.dp_val) * self.dp_scale
        return np.concatenate([r, dp])

    def jacobian(self, z) -> np.ndarray:
        x = self.full(z)
        Je, _ = self.problem.jacobian(x)
        Je = (Je * self.problem.eq_scale[:, None])[self.keep_rows]
        Jd = np.zeros((len(self.dp_rows), self.problem.n))
        r = np.arange(len(self.dp_rows))
        Jd[r, self.dp_from] = self.dp_scale
        Jd[r, self.dp_to] = -self.dp_scale
        return np.vstack([Je, Jd])[:, self.free_idx]


def assemble_simulation(net: Network, setpoints: Setpoints, scen=None) -> SimulationSystem:
    return SimulationSystem(assemble_tnfo(net, scen), setpoints)
