"""Network graph, component records and topology validation.

A district heating network is a directed graph whose vertices are junctions
and whose edges are plants, pipes and loads.  Steam leaves the plant on the
outgoing side, condenses at the loads, and returns as water on the return
side.  All quantities are SI (Pa, K, kg/s, W, m).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Iterable

import networkx as nx

from .errors import InvalidParameter, NonpositiveDiameter, ValidationError, Violation
from .units import PSI, c_to_k

T_CONDENSE = 373.15  # K, fixed condensation temperature

OUTGOING = "outgoing"
RETURN = "return"
SYSTEMS = (OUTGOING, RETURN)

# pipe defaults by system: (friction factor, heat loss coefficient W/(m K))
PIPE_DEFAULTS = {OUTGOING: (0.01, 0.1), RETURN: (0.002, 0.05)}


def natural_key(s: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


def cross_section_area(d: float) -> float:
    """Inner cross-sectional area of a circular pipe of diameter ``d``."""
    if not d > 0:
        raise NonpositiveDiameter(f"diameter must be positive, got {d!r}")
    return math.pi * d * d / 4.0


@dataclass(frozen=True)
class CarrierConstants:
    R_s: float = 461.5
    c_s: float = 1996.0
    c_w: float = 4186.0
    c_L: float = 2.23e6
    rho_s: float = 0.5
    rho_w: float = 1000.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidParameter(f"carrier constant {f.name} must be positive, got {v!r}")

    def c_in(self, kind: str, system: str | None = None) -> float:
        """Heat capacity of the carrier entering an edge of the given kind."""
        if kind == "plant":
            return self.c_w
        if kind == "load":
            return self.c_s
        return self.c_s if system == OUTGOING else self.c_w

    def c_out(self, kind: str, system: str | None = None) -> float:
        if kind == "plant":
            return self.c_s
        if kind == "load":
            return self.c_w
        return self.c_s if system == OUTGOING else self.c_w


@dataclass(frozen=True)
class OperationalBounds:
    T_max: float = c_to_k(150.0)
    T_min: float = c_to_k(80.0)
    T_ext: float = c_to_k(25.0)
    p_max: float = 80.0 * PSI
    p_min: float = 5.0 * PSI
    plant_outlet_p_min: float = 40.0 * PSI
    plant_inlet_p_min: float | None = None

    def __post_init__(self):
        if not self.T_min < self.T_max:
            raise InvalidParameter("T_min must be below T_max")
        if not self.p_min < self.p_max:
            raise InvalidParameter("p_min must be below p_max")
        if not self.T_ext < self.T_min:
            raise InvalidParameter("T_ext must be below T_min")
        if self.p_min <= 0:
            raise InvalidParameter("p_min must be positive")
        if self.plant_outlet_p_min > self.p_max:
            raise InvalidParameter("plant_outlet_p_min exceeds p_max")
        if self.plant_inlet_p_min is not None and self.plant_inlet_p_min > self.p_max:
            raise InvalidParameter("plant_inlet_p_min exceeds p_max")


@dataclass(frozen=True)
class Junction:
    id: str
    kind: str | None = None  # outgoing | return, derived from incident edges


@dataclass(frozen=True)
class Pipe:
    id: str
    from_junction: str
    to_junction: str
    system: str
    length: float
    diameter: float
    friction_factor: float | None = None
    heat_loss_coeff: float | None = None
    pump_boost_max: float = 0.0

    def __post_init__(self):
        # fill study defaults for the pipe's system; unknown systems are caught by validation
        lam, gam = PIPE_DEFAULTS.get(self.system, (None, None))
        if self.friction_factor is None:
            object.__setattr__(self, "friction_factor", lam)
        if self.heat_loss_coeff is None:
            object.__setattr__(self, "heat_loss_coeff", gam)

    @property
    def area(self) -> float:
        return cross_section_area(self.diameter)

    @property
    def has_pump(self) -> bool:
        return self.pump_boost_max > 0

    kind = "pipe"


@dataclass(frozen=True)
class Plant:
    id: str
    from_junction: str
    to_junction: str
    power_max: float

    kind = "plant"


@dataclass(frozen=True)
class Load:
    id: str
    from_junction: str
    to_junction: str
    demand: float = 0.0

    kind = "load"


@dataclass(frozen=True, eq=True)
class Network:
    """Validated, immutable network.  Build with :func:`build_network`."""

    junctions: tuple[Junction, ...]
    pipes: tuple[Pipe, ...]
    plants: tuple[Plant, ...]
    loads: tuple[Load, ...]
    constants: CarrierConstants = field(default_factory=CarrierConstants)
    bounds: OperationalBounds = field(default_factory=OperationalBounds)

    @cached_property
    def edges(self) -> tuple:
        """Plants, then pipes, then loads; each group sorted by id."""
        return self.plants + self.pipes + self.loads

    @cached_property
    def junction_index(self) -> dict[str, Junction]:
        return {j.id: j for j in self.junctions}

    @cached_property
    def edge_index(self) -> dict:
        return {e.id: e for e in self.edges}

    @property
    def outgoing_pipes(self) -> tuple[Pipe, ...]:
        return tuple(p for p in self.pipes if p.system == OUTGOING)

    @property
    def return_pipes(self) -> tuple[Pipe, ...]:
        return tuple(p for p in self.pipes if p.system == RETURN)

    @property
    def pumps(self) -> tuple[Pipe, ...]:
        return tuple(p for p in self.pipes if p.has_pump)

    @cached_property
    def graph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        for j in self.junctions:
            g.add_node(j.id, kind=j.kind)
        for e in self.edges:
            g.add_edge(e.from_junction, e.to_junction, key=e.id, kind=e.kind)
        return g

    def demands(self) -> dict[str, float]:
        return {ld.id: ld.demand for ld in self.loads}

    def total_demand(self) -> float:
        return sum(ld.demand for ld in self.loads)

    def components(self) -> dict:
        """Raw component lists; ``build_network(**net.components())`` rebuilds ``net``."""
        return dict(
            junctions=list(self.junctions),
            pipes=list(self.pipes),
            plants=list(self.plants),
            loads=list(self.loads),
            constants=self.constants,
            bounds=self.bounds,
        )

    def census(self) -> dict[str, int]:
        return {
            "junctions": len(self.junctions),
            "plants": len(self.plants),
            "loads": len(self.loads),
            "outgoing_pipes": len(self.outgoing_pipes),
            "return_pipes": len(self.return_pipes),
            "pumps": len(self.pumps),
        }

    def in_edges(self, jid: str) -> list:
        return [e for e in self.edges if e.to_junction == jid]

    def out_edges(self, jid: str) -> list:
        return [e for e in self.edges if e.from_junction == jid]


def _positive(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v) and v > 0


def validate_components(junctions, pipes, plants, loads) -> tuple[list[Violation], dict[str, str]]:
    """Collect every violation; also return the derived junction kinds."""
    out: list[Violation] = []
    if not plants:
        out.append(Violation("PlantlessNetwork", "network has no plant"))
    if not loads:
        out.append(Violation("LoadlessNetwork", "network has no load"))
    if not junctions:
        out.append(Violation("EmptyNetwork", "network has no junctions"))

    jids = [j.id for j in junctions]
    for jid in sorted({j for j in jids if jids.count(j) > 1}):
        out.append(Violation("DuplicateId", f"junction id {jid!r} used more than once"))
    edges = list(plants) + list(pipes) + list(loads)
    eids = [e.id for e in edges]
    for eid in sorted({e for e in eids if eids.count(e) > 1}):
        out.append(Violation("DuplicateId", f"edge id {eid!r} used more than once"))

    known = set(jids)
    for e in edges:
        for end in (e.from_junction, e.to_junction):
            if end not in known:
                out.append(Violation("DanglingJunctionRef", f"{e.kind} {e.id!r} references unknown junction {end!r}"))
        if e.from_junction == e.to_junction:
            out.append(Violation("SelfLoop", f"{e.kind} {e.id!r} starts and ends at {e.from_junction!r}"))

    for p in pipes:
        if p.system not in SYSTEMS:
            out.append(Violation("InvalidParameter", f"pipe {p.id!r} has unknown system {p.system!r}"))
            continue
        for name in ("length", "diameter", "friction_factor", "heat_loss_coeff"):
            if not _positive(getattr(p, name)):
                out.append(Violation("InvalidParameter", f"pipe {p.id!r} {name} must be positive"))
        if not (isinstance(p.pump_boost_max, (int, float)) and p.pump_boost_max >= 0):
            out.append(Violation("InvalidParameter", f"pipe {p.id!r} pump_boost_max must be >= 0"))
        elif p.pump_boost_max > 0 and p.system == OUTGOING:
            out.append(Violation("PumpOnOutgoingPipe", f"pipe {p.id!r} is an outgoing pipe with a pump"))
    for pl in plants:
        if not _positive(pl.power_max):
            out.append(Violation("InvalidParameter", f"plant {pl.id!r} power_max must be positive"))
    for ld in loads:
        if not (isinstance(ld.demand, (int, float)) and math.isfinite(ld.demand) and ld.demand >= 0):
            out.append(Violation("InvalidParameter", f"load {ld.id!r} demand must be >= 0"))

    # junction side: every incident edge end must agree
    sides: dict[str, set[str]] = {j: set() for j in known}
    for e in edges:
        if e.kind == "pipe":
            if e.system not in SYSTEMS:
                continue
            ends = ((e.from_junction, e.system), (e.to_junction, e.system))
        elif e.kind == "plant":
            ends = ((e.from_junction, RETURN), (e.to_junction, OUTGOING))
        else:
            ends = ((e.from_junction, OUTGOING), (e.to_junction, RETURN))
        for jid, side in ends:
            if jid in sides:
                sides[jid].add(side)
    kinds: dict[str, str] = {}
    for jid in sorted(sides, key=natural_key):
        s = sides[jid]
        if len(s) > 1:
            out.append(Violation("MixedSystemJunction", f"junction {jid!r} touches both outgoing and return sides"))
        elif s:
            kinds[jid] = next(iter(s))
    for j in junctions:
        if j.kind is not None and j.id in kinds and j.kind != kinds[j.id]:
            out.append(Violation("JunctionKindMismatch", f"junction {j.id!r} declared {j.kind} but is {kinds[j.id]}"))

    n_in = {j: 0 for j in known}
    n_out = {j: 0 for j in known}
    for e in edges:
        if e.to_junction in n_in:
            n_in[e.to_junction] += 1
        if e.from_junction in n_out:
            n_out[e.from_junction] += 1
    for jid in sorted(known, key=natural_key):
        if n_in[jid] == 0 or n_out[jid] == 0:
            out.append(Violation("DeadEndJunction", f"junction {jid!r} needs at least one incoming and one outgoing edge"))

    if known and not any(v.code in ("DanglingJunctionRef", "DuplicateId") for v in out):
        g = nx.MultiDiGraph()
        g.add_nodes_from(known)
        g.add_edges_from((e.from_junction, e.to_junction) for e in edges)
        if not nx.is_weakly_connected(g):
            n = nx.number_weakly_connected_components(g)
            out.append(Violation("DisconnectedGraph", f"graph has {n} disconnected parts"))
        for system in SYSTEMS:
            sub = nx.MultiDiGraph()
            sub.add_edges_from((p.from_junction, p.to_junction) for p in pipes if p.system == system)
            if not nx.is_directed_acyclic_graph(sub):
                out.append(Violation("CyclicSubsystem", f"{system} pipes contain a directed cycle"))
    return out, kinds


def build_network(
    junctions: Iterable[Junction | str],
    pipes: Iterable[Pipe],
    plants: Iterable[Plant],
    loads: Iterable[Load],
    constants: CarrierConstants | None = None,
    bounds: OperationalBounds | None = None,
) -> Network:
    """Validate raw components and return an immutable :class:`Network`.

    Raises :class:`~tnfo.errors.ValidationError` listing every violation.
    """
    junctions = [Junction(j) if isinstance(j, str) else j for j in junctions]
    pipes, plants, loads = list(pipes), list(plants), list(loads)
    violations, kinds = validate_components(junctions, pipes, plants, loads)
    if violations:
        raise ValidationError(violations)
    key = lambda c: natural_key(c.id)  # noqa: E731
    return Network(
        junctions=tuple(sorted((Junction(j.id, kinds[j.id]) for j in junctions), key=key)),
        pipes=tuple(sorted(pipes, key=key)),
        plants=tuple(sorted(plants, key=key)),
        loads=tuple(sorted(loads, key=key)),
        constants=constants or CarrierConstants(),
        bounds=bounds or OperationalBounds(),
    )
