"""Scenario definitions, batch runs and sensitivity sweeps."""

from __future__ import annotations

import dataclasses
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidParameter, SolverError, TnfoError, UnknownLoad, ZeroDemand
from .model import Network, OperationalBounds, natural_key
from .nlp import NetworkState, NlpProblem, ObjectiveWeights, ResolvedInputs, assemble_tnfo
from .physics import plant_power, pipe_heat_loss
from .solver import SolveReport, SolverOptions, solve_nlp
from .synth import largest_load

ALL_LOADS = "*"


@dataclass(frozen=True)
class Scenario:
    """Changes applied to a network's nominal inputs.

    ``multipliers`` scale load demands; the key ``"*"`` applies to every load
    not named explicitly.  ``overrides`` set absolute demands (W) after the
    multipliers.  ``plant_capacity`` maps plant ids to a power rating (W); a
    bare number applies to every plant.  ``bounds`` replaces fields of the
    network's :class:`~tnfo.model.OperationalBounds` (SI values).
    """

    name: str = "scenario"
    multipliers: Mapping[str, float] = field(default_factory=dict)
    overrides: Mapping[str, float] = field(default_factory=dict)
    plant_capacity: Mapping[str, float] | float | None = None
    bounds: Mapping[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        for key, v in self.multipliers.items():
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameter(f"multiplier for {key} must be finite and non-negative, got {v}")
        for key, v in self.overrides.items():
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameter(f"demand override for {key} must be finite and non-negative, got {v}")
        caps = self.plant_capacity
        values = caps.values() if isinstance(caps, Mapping) else ([] if caps is None else [caps])
        for v in values:
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameter(f"plant capacity must be positive, got {v}")
        unknown = set(self.bounds) - {f.name for f in dataclasses.fields(OperationalBounds)}
        if unknown:
            raise InvalidParameter(f"unknown bound fields: {', '.join(sorted(unknown))}")

    def demands(self, base: Mapping[str, float]) -> dict[str, float]:
        return dict(apply_scenario(base, self).overrides)

    def resolve(self, net: Network) -> ResolvedInputs:
        demands = self.demands(net.demands())
        caps = {p.id: p.power_max for p in net.plants}
        if isinstance(self.plant_capacity, Mapping):
            unknown = set(self.plant_capacity) - set(caps)
            if unknown:
                raise UnknownLoad(f"scenario references unknown plants: {', '.join(sorted(unknown, key=natural_key))}")
            caps.update(self.plant_capacity)
        elif self.plant_capacity is not None:
            caps = {k: float(self.plant_capacity) for k in caps}
        bounds = dataclasses.replace(net.bounds, **self.bounds) if self.bounds else net.bounds
        return ResolvedInputs(demands, caps, bounds)


def apply_scenario(base: Mapping[str, float], scen: Scenario | None) -> Scenario:
    """Fold multipliers and overrides into absolute demands for every load.

    The result carries one override per load in ``base`` and no multipliers,
    so applying it again is the identity.
    """
    if scen is None:
        return Scenario("base", overrides={k: float(v) for k, v in base.items()})
    named = set(scen.multipliers) - {ALL_LOADS}
    unknown = (named | set(scen.overrides)) - set(base)
    if unknown:
        raise UnknownLoad(f"scenario {scen.name!r} references unknown loads: {', '.join(sorted(unknown, key=natural_key))}")
    everyone = scen.multipliers.get(ALL_LOADS, 1.0)
    out = {}
    for lid, q in base.items():
        q = float(q) * scen.multipliers.get(lid, everyone)
        out[lid] = float(scen.overrides.get(lid, q))
    return Scenario(scen.name, overrides=out, plant_capacity=scen.plant_capacity, bounds=dict(scen.bounds))


# ------------------------------------------------------------------- results


@dataclass(frozen=True)
class RunSummary:
    """One row of a results table; powers in W, pressure in Pa, temperature in K."""

    name: str
    status: str
    required: float = math.nan
    supplied: float = math.nan
    pipe_losses: float = math.nan
    unmet: float = math.nan
    excess: float = math.nan
    unmet_pct: float = math.nan
    plant_T_out: float = math.nan
    plant_p_out: float = math.nan
    plant_f: float = math.nan
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def audit_gap(self) -> float:
        """Relative mismatch of supplied = required - unmet + excess + losses."""
        rhs = self.required - self.unmet + self.excess + self.pipe_losses
        return abs(self.supplied - rhs) / max(abs(self.supplied), abs(rhs), 1.0)


def plant_supplied(problem: NlpProblem, state: NetworkState) -> float:
    c = problem.net.constants
    total = 0.0
    for p in problem.net.plants:
        e = state.edge(p.id)
        total += plant_power(e["f"], e["T_in"], e["T_out"], c, tol=1e-3)
    return total


def pipe_losses(problem: NlpProblem, state: NetworkState) -> float:
    """Heat given off by all pipes, outgoing and return."""
    net, c = problem.net, problem.net.constants
    total = 0.0
    for p in net.pipes:
        e = state.edge(p.id)
        total += float(pipe_heat_loss(e["f"], e["T_in"], e["T_out"], c.c_in("pipe", p.system)))
    return total


def unmet_fraction(state: NetworkState, demands) -> float:
    """Share of the total demand left unserved, from the solved QS slacks.

    ``demands`` is a mapping of load id to W, or anything with a ``demands``
    mapping (resolved inputs, a problem's inputs).
    """
    if hasattr(demands, "demands") and not callable(demands.demands):
        demands = demands.demands
    total = float(sum(demands.values()))
    if total <= 0:
        raise ZeroDemand("unmet fraction is undefined without demand")
    return sum(state.value("QS", lid) for lid in demands) / total


def summarize(name: str, problem: NlpProblem, state: NetworkState, report: SolveReport | None = None,
              status: str | None = None) -> RunSummary:
    lay = problem.layout
    demands = problem.inputs.demands
    required = float(sum(demands.values()))
    unmet = float(state.x[lay.block("QS")].sum())
    excess = float(state.x[lay.block("QE")].sum())
    plant = problem.net.plants[0]
    e = state.edge(plant.id)
    return RunSummary(
        name=name,
        status=status or (report.status if report else "optimal"),
        required=required,
        supplied=plant_supplied(problem, state),
        pipe_losses=pipe_losses(problem, state),
        unmet=unmet,
        excess=excess,
        unmet_pct=100.0 * unmet / required if required > 0 else 0.0,
        plant_T_out=e["T_out"],
        plant_p_out=state.value("p", plant.to_junction),
        plant_f=e["f"],
        iterations=report.iterations if report else 0,
    )


@dataclass
class ScenarioRun:
    summary: RunSummary
    problem: NlpProblem | None = None
    state: NetworkState | None = None
    report: SolveReport | None = None
    elapsed: float = 0.0  # wall seconds for assembly and solve


def run_scenario(net: Network, scen: Scenario | None = None, opts: SolverOptions | None = None,
                 weights: ObjectiveWeights | None = None, x0=None, name: str | None = None) -> ScenarioRun:
    """Solve one scenario; solver failures become a row status instead of an exception."""
    name = name or (scen.name if scen else "base")
    t0 = time.perf_counter()
    problem = assemble_tnfo(net, scen, weights)
    try:
        state, report = solve_nlp(problem, x0=x0, opts=opts)
    except SolverError as exc:
        report = getattr(exc, "report", None)
        best = getattr(exc, "x", None)
        status = report.status if report else "failed"
        if best is not None:
            summary = dataclasses.replace(summarize(name, problem, best, report, status), message=str(exc))
        else:
            summary = RunSummary(name, status, message=str(exc))
        return ScenarioRun(summary, problem, best, report, time.perf_counter() - t0)
    return ScenarioRun(summarize(name, problem, state, report), problem, state, report, time.perf_counter() - t0)


def unique_names(names: Sequence[str]) -> list[str]:
    """Suffix repeated names with ``-2``, ``-3`` ... in order of appearance."""
    seen: Counter = Counter()
    taken = set(names)
    out = []
    for n in names:
        seen[n] += 1
        if seen[n] == 1:
            out.append(n)
            continue
        k = seen[n]
        while f"{n}-{k}" in taken:
            k += 1
        taken.add(f"{n}-{k}")
        out.append(f"{n}-{k}")
    return out


def solve_batch(net: Network, scenarios: Sequence[Scenario], opts: SolverOptions | None = None,
                weights: ObjectiveWeights | None = None, workers: int | None = None) -> list[ScenarioRun]:
    """Solve scenarios concurrently; rows come back in input order."""
    names = unique_names([s.name for s in scenarios])

    def one(k):
        try:
            return run_scenario(net, scenarios[k], opts, weights, name=names[k])
        except TnfoError as exc:  # bad scenario data: report it on the row
            return ScenarioRun(RunSummary(names[k], "invalid", message=str(exc)))

    if not scenarios:
        return []
    with ThreadPoolExecutor(max_workers=workers or min(4, len(scenarios))) as pool:
        return list(pool.map(one, range(len(scenarios))))


def run_batch(net: Network, scenarios: Sequence[Scenario], opts: SolverOptions | None = None,
              weights: ObjectiveWeights | None = None, workers: int | None = None) -> list[RunSummary]:
    return [r.summary for r in solve_batch(net, scenarios, opts, weights, workers)]


# ---------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepPoint:
    multiplier: float
    status: str
    plant_T_out: float
    plant_f: float
    pipe_losses: float
    unmet_pct: float
    iterations: int
    warm: bool


def sensitivity_sweep(net: Network, multiplier_from: float, multiplier_to: float, steps: int,
                      opts: SolverOptions | None = None, weights: ObjectiveWeights | None = None,
                      warm_start: bool = True, base: Scenario | None = None) -> list[SweepPoint]:
    """Uniform demand multiplier ladder, each step started from the previous solution.

    A warm start that does not reach an optimum is retried from the default
    start point; a point that fails both ways is recorded and the sweep goes on.
    """
    if steps < 2:
        raise InvalidParameter("a sweep needs at least 2 steps")
    if not multiplier_from <= multiplier_to:
        raise InvalidParameter("sweep must run from the smaller to the larger multiplier")
    if multiplier_from < 0:
        raise InvalidParameter("multipliers must be non-negative")
    base = apply_scenario(net.demands(), base)
    points, x_prev = [], None
    for m in np.linspace(multiplier_from, multiplier_to, steps):
        m = float(m)
        scen = Scenario(f"x{m:g}", overrides={k: v * m for k, v in base.overrides.items()},
                        plant_capacity=base.plant_capacity, bounds=dict(base.bounds))
        run, warm = None, False
        if warm_start and x_prev is not None:
            run = run_scenario(net, scen, opts, weights, x0=x_prev)
            warm = run.summary.ok
        if run is None or not run.summary.ok:
            run = run_scenario(net, scen, opts, weights)
        s = run.summary
        points.append(SweepPoint(m, s.status, s.plant_T_out, s.plant_f, s.pipe_losses, s.unmet_pct, s.iterations, warm))
        if s.ok:
            x_prev = run.state.x
    return points


# ---------------------------------------------------------- study scenarios


def study_scenarios(net: Network, outage_capacity: float = 20e6) -> list[Scenario]:
    """Baseline and four contingencies.

    The largest load triples; every load grows by half; both at once; both
    at once with the plant derated to ``outage_capacity``.
    """
    big = largest_load(net)
    return [
        Scenario("baseline"),
        Scenario("functional-contingency", multipliers={big: 3.0}),
        Scenario("extreme-load", multipliers={ALL_LOADS: 1.5}),
        Scenario("contingency-and-extreme-load", multipliers={ALL_LOADS: 1.5, big: 3.0}),
        Scenario("equipment-outage", multipliers={ALL_LOADS: 1.5, big: 3.0}, plant_capacity=outage_capacity),
    ]
