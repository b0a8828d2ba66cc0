"""Network, scenario and setpoint files; CSV and dot export.

Input files are JSON documents tagged with a schema version.  Every
dimensional field is read in the unit its group declares in the ``units``
block and converted to SI on the way in.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import FileFormatError, SchemaVersionMismatch, UnitError
from .model import CarrierConstants, Junction, Load, Network, OperationalBounds, Pipe, Plant, build_network, natural_key
from .nlp import NetworkState, Setpoints
from .scenario import RunSummary, Scenario, SweepPoint
from .units import UNIT_GROUPS, from_si, to_si

NET_SCHEMA = "tnfo-net/1"
SCENARIO_SCHEMA = "tnfo-scenario/1"
SETPOINTS_SCHEMA = "tnfo-setpoints/1"

DISPLAY_UNITS = {
    "pressure": "psi",
    "temperature": "C",
    "power": "MW",
    "length": "m",
    "diameter": "m",
    "heat_loss_coeff": "W/(m*K)",
    "mass_flow": "kg/s",
    "constants": "SI",
}
SI_UNITS = {
    "pressure": "Pa",
    "temperature": "K",
    "power": "W",
    "length": "m",
    "diameter": "m",
    "heat_loss_coeff": "W/(m*K)",
    "mass_flow": "kg/s",
    "constants": "SI",
}

BOUND_GROUPS = {
    "T_max": "temperature",
    "T_min": "temperature",
    "T_ext": "temperature",
    "p_max": "pressure",
    "p_min": "pressure",
    "plant_outlet_p_min": "pressure",
    "plant_inlet_p_min": "pressure",
}
PIPE_FIELDS = {
    "id": None,
    "from": None,
    "to": None,
    "system": None,
    "length": "length",
    "diameter": "diameter",
    "friction_factor": None,
    "heat_loss_coeff": "heat_loss_coeff",
    "pump_boost_max": "pressure",
}
PLANT_FIELDS = {"id": None, "from": None, "to": None, "power_max": "power"}
LOAD_FIELDS = {"id": None, "from": None, "to": None, "demand": "power"}
CONSTANT_FIELDS = tuple(f for f in CarrierConstants.__dataclass_fields__)


# ----------------------------------------------------------------- reading


class _Reader:
    """Walks a decoded document, checking field names and converting units."""

    def __init__(self, doc: Mapping, schema: str, source: str):
        if not isinstance(doc, Mapping):
            raise FileFormatError(f"{source}: top level must be an object")
        found = doc.get("schema")
        if found != schema:
            raise SchemaVersionMismatch(f"{source}: expected schema {schema!r}, found {found!r}")
        units = doc.get("units", {})
        if not isinstance(units, Mapping):
            raise FileFormatError(f"{source}: units must be an object")
        for group, unit in units.items():
            if group not in UNIT_GROUPS:
                raise UnitError(f"{source}: unknown unit group {group!r}")
            to_si(0.0, group, unit)  # rejects unknown units early
        self.units = dict(units)
        self.source = source

    def fields(self, obj, allowed: Iterable[str], where: str, required: Iterable[str] = ()) -> dict:
        if not isinstance(obj, Mapping):
            raise FileFormatError(f"{self.source}: {where} must be an object")
        allowed = set(allowed)
        extra = sorted(set(obj) - allowed)
        if extra:
            raise FileFormatError(f"{self.source}: unknown field(s) in {where}: {', '.join(extra)}")
        missing = [k for k in required if k not in obj]
        if missing:
            raise FileFormatError(f"{self.source}: {where} lacks {', '.join(missing)}")
        return dict(obj)

    def number(self, value, group: str | None, where: str) -> float | None:
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise FileFormatError(f"{self.source}: {where} must be a number, got {value!r}")
        if group is None:
            return float(value)
        if group not in self.units:
            raise UnitError(f"{self.source}: {where} has no declared unit (add a {group!r} entry to units)")
        return to_si(value, group, self.units[group])


def _load_json(path) -> tuple[Any, str]:
    source = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh), source
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{source}: not valid JSON ({exc})") from None


def network_from_dict(doc: Mapping, source: str = "<network>") -> Network:
    r = _Reader(doc, NET_SCHEMA, source)
    top = r.fields(doc, ["schema", "units", "constants", "bounds", "junctions", "pipes", "plants", "loads"], "document",
                   required=["junctions", "pipes", "plants", "loads"])

    constants = None
    if "constants" in top:
        raw = r.fields(top["constants"], CONSTANT_FIELDS, "constants")
        constants = CarrierConstants(**{k: r.number(v, "constants", f"constants.{k}") for k, v in raw.items()})
    bounds = None
    if "bounds" in top:
        raw = r.fields(top["bounds"], BOUND_GROUPS, "bounds")
        bounds = OperationalBounds(**{k: r.number(v, BOUND_GROUPS[k], f"bounds.{k}") for k, v in raw.items()})

    if not isinstance(top["junctions"], list) or not all(isinstance(j, str) for j in top["junctions"]):
        raise FileFormatError(f"{source}: junctions must be a list of ids")

    def edges(key, spec, required):
        items = top[key]
        if not isinstance(items, list):
            raise FileFormatError(f"{source}: {key} must be a list")
        out = []
        for k, raw in enumerate(items):
            raw = r.fields(raw, spec, f"{key}[{k}]", required)
            name = raw.get("id", f"#{k}")
            vals = {f: r.number(v, spec[f], f"{key}[{name}].{f}") if spec[f] or f == "friction_factor" else v
                    for f, v in raw.items()}
            out.append(vals)
        return out

    pipes = []
    for v in edges("pipes", PIPE_FIELDS, ["id", "from", "to", "system", "length", "diameter"]):
        extras = {k: v[k] for k in ("friction_factor", "heat_loss_coeff") if v.get(k) is not None}
        pipes.append(Pipe(v["id"], v["from"], v["to"], v["system"], v["length"], v["diameter"],
                          pump_boost_max=v.get("pump_boost_max") or 0.0, **extras))
    plants = [Plant(v["id"], v["from"], v["to"], v["power_max"])
              for v in edges("plants", PLANT_FIELDS, ["id", "from", "to", "power_max"])]
    loads = [Load(v["id"], v["from"], v["to"], v.get("demand", 0.0))
             for v in edges("loads", LOAD_FIELDS, ["id", "from", "to"])]
    return build_network([Junction(j) for j in top["junctions"]], pipes, plants, loads, constants, bounds)


def parse_network(path) -> Network:
    doc, source = _load_json(path)
    return network_from_dict(doc, source)


def scenario_from_dict(doc: Mapping, source: str = "<scenario>") -> Scenario:
    r = _Reader(doc, SCENARIO_SCHEMA, source)
    top = r.fields(doc, ["schema", "units", "name", "multipliers", "overrides", "plant_capacity", "bounds"], "document")
    for key in ("multipliers", "overrides"):
        if not isinstance(top.get(key, {}), Mapping):
            raise FileFormatError(f"{source}: {key} must be an object keyed by load id")
    mult = {k: r.number(v, None, f"multipliers.{k}") for k, v in top.get("multipliers", {}).items()}
    over = {k: r.number(v, "power", f"overrides.{k}") for k, v in top.get("overrides", {}).items()}
    cap = top.get("plant_capacity")
    if isinstance(cap, Mapping):
        cap = {k: r.number(v, "power", f"plant_capacity.{k}") for k, v in cap.items()}
    elif cap is not None:
        cap = r.number(cap, "power", "plant_capacity")
    bounds = r.fields(top.get("bounds", {}), BOUND_GROUPS, "bounds")
    bounds = {k: r.number(v, BOUND_GROUPS[k], f"bounds.{k}") for k, v in bounds.items()}
    name = top.get("name") or Path(source).stem
    return Scenario(str(name), mult, over, cap, bounds)


def parse_scenario(path) -> Scenario:
    doc, source = _load_json(path)
    return scenario_from_dict(doc, source)


def setpoints_from_dict(doc: Mapping, source: str = "<setpoints>") -> Setpoints:
    r = _Reader(doc, SETPOINTS_SCHEMA, source)
    top = r.fields(doc, ["schema", "units", "plants", "pumps", "loads"], "document", required=["plants"])

    def table(key, spec):
        raw = top.get(key, {})
        if not isinstance(raw, Mapping):
            raise FileFormatError(f"{source}: {key} must be an object keyed by id")
        out = {}
        for eid, vals in raw.items():
            vals = r.fields(vals, spec, f"{key}.{eid}", required=spec)
            out[eid] = tuple(r.number(vals[f], g, f"{key}.{eid}.{f}") for f, g in spec.items())
        return out

    plants = table("plants", {"T_out": "temperature", "p_out": "pressure", "f": "mass_flow"})
    pumps = {k: v[0] for k, v in table("pumps", {"alpha": "pressure"}).items()}
    loads = table("loads", {"QE": "power", "QS": "power", "dp": "pressure"})
    return Setpoints(plants, pumps, loads)


def parse_setpoints(path) -> Setpoints:
    doc, source = _load_json(path)
    return setpoints_from_dict(doc, source)


# ----------------------------------------------------------------- writing


def _out(value: float, group: str, units: Mapping[str, str]) -> float:
    return from_si(value, group, units[group])


def network_to_dict(net: Network, units: Mapping[str, str] | None = None) -> dict:
    """Document for :func:`network_from_dict`.

    SI by default, which round-trips bit for bit; psi and Celsius conversions
    can move the last digit.
    """
    units = dict(units or SI_UNITS)
    b = net.bounds
    bounds = {}
    for k, g in BOUND_GROUPS.items():
        v = getattr(b, k)
        bounds[k] = None if v is None else _out(v, g, units)
    pipes = []
    for p in net.pipes:
        d = {
            "id": p.id, "from": p.from_junction, "to": p.to_junction, "system": p.system,
            "length": _out(p.length, "length", units),
            "diameter": _out(p.diameter, "diameter", units),
            "friction_factor": p.friction_factor,
            "heat_loss_coeff": _out(p.heat_loss_coeff, "heat_loss_coeff", units),
        }
        if p.has_pump:
            d["pump_boost_max"] = _out(p.pump_boost_max, "pressure", units)
        pipes.append(d)
    return {
        "schema": NET_SCHEMA,
        "units": {g: units[g] for g in ("pressure", "temperature", "power", "length", "diameter", "heat_loss_coeff", "constants")},
        "constants": {k: getattr(net.constants, k) for k in CONSTANT_FIELDS},
        "bounds": bounds,
        "junctions": [j.id for j in net.junctions],
        "pipes": pipes,
        "plants": [{"id": p.id, "from": p.from_junction, "to": p.to_junction,
                    "power_max": _out(p.power_max, "power", units)} for p in net.plants],
        "loads": [{"id": ld.id, "from": ld.from_junction, "to": ld.to_junction,
                   "demand": _out(ld.demand, "power", units)} for ld in net.loads],
    }


def _dump_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def write_network(net: Network, path, units: Mapping[str, str] | None = None) -> None:
    _dump_json(network_to_dict(net, units), path)


def scenario_to_dict(scen: Scenario, units: Mapping[str, str] | None = None) -> dict:
    units = dict(units or DISPLAY_UNITS)
    doc = {"schema": SCENARIO_SCHEMA, "units": {g: units[g] for g in ("power", "pressure", "temperature")}, "name": scen.name}
    if scen.multipliers:
        doc["multipliers"] = dict(scen.multipliers)
    if scen.overrides:
        doc["overrides"] = {k: _out(v, "power", units) for k, v in scen.overrides.items()}
    cap = scen.plant_capacity
    if isinstance(cap, Mapping):
        doc["plant_capacity"] = {k: _out(v, "power", units) for k, v in cap.items()}
    elif cap is not None:
        doc["plant_capacity"] = _out(cap, "power", units)
    if scen.bounds:
        doc["bounds"] = {k: None if v is None else _out(v, BOUND_GROUPS[k], units) for k, v in scen.bounds.items()}
    return doc


def write_scenario(scen: Scenario, path, units: Mapping[str, str] | None = None) -> None:
    _dump_json(scenario_to_dict(scen, units), path)


def setpoints_to_dict(sp: Setpoints, units: Mapping[str, str] | None = None) -> dict:
    units = dict(units or DISPLAY_UNITS)
    key = lambda kv: natural_key(kv[0])  # noqa: E731
    return {
        "schema": SETPOINTS_SCHEMA,
        "units": {g: units[g] for g in ("pressure", "temperature", "power", "mass_flow")},
        "plants": {k: {"T_out": _out(T, "temperature", units), "p_out": _out(p, "pressure", units),
                       "f": _out(f, "mass_flow", units)} for k, (T, p, f) in sorted(sp.plants.items(), key=key)},
        "pumps": {k: {"alpha": _out(a, "pressure", units)} for k, a in sorted(sp.pumps.items(), key=key)},
        "loads": {k: {"QE": _out(qe, "power", units), "QS": _out(qs, "power", units), "dp": _out(dp, "pressure", units)}
                  for k, (qe, qs, dp) in sorted(sp.loads.items(), key=key)},
    }


def write_setpoints(sp: Setpoints, path, units: Mapping[str, str] | None = None) -> None:
    _dump_json(setpoints_to_dict(sp, units), path)


# --------------------------------------------------------------- CSV tables

JUNCTION_COLUMNS = ("id", "p_psi", "T_C")
EDGE_COLUMNS = ("id", "kind", "f_kgps", "T_in_C", "T_out_C", "p_in_psi", "p_out_psi", "alpha_psi", "QE_MW", "QS_MW")
SUMMARY_COLUMNS = (
    "scenario", "status", "required_MW", "supplied_MW", "pipe_losses_MW", "unmet_pct", "excess_MW",
    "plant_T_out_C", "plant_p_out_psi", "plant_f_kgps", "iterations",
)
SWEEP_COLUMNS = ("multiplier", "status", "plant_T_out_C", "plant_f_kgps", "pipe_losses_MW", "unmet_pct", "iterations", "warm_start")


def fmt(v) -> str:
    """Fixed text for a table cell; blank for missing numbers."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        v = 0.0 if v == 0 else v  # no negative zero
        return f"{v:.12g}"
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_table(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def junction_rows(net: Network, state: NetworkState) -> list[tuple]:
    rows = []
    for j in sorted(net.junctions, key=lambda j: natural_key(j.id)):
        v = state.junction(j.id)
        rows.append((j.id, from_si(v["p"], "pressure", "psi"), from_si(v["T"], "temperature", "C")))
    return rows


def edge_rows(net: Network, state: NetworkState) -> list[tuple]:
    rows = []
    nan = math.nan
    for e in sorted(net.edges, key=lambda e: natural_key(e.id)):
        v = state.edge(e.id)
        p_in = state.value("p", e.from_junction)
        p_out = state.value("p", e.to_junction)
        rows.append((
            e.id, "pump" if getattr(e, "has_pump", False) else e.kind, v["f"],
            from_si(v["T_in"], "temperature", "C"), from_si(v["T_out"], "temperature", "C"),
            from_si(p_in, "pressure", "psi"), from_si(p_out, "pressure", "psi"),
            from_si(v["alpha"], "pressure", "psi") if getattr(e, "has_pump", False) else nan,
            from_si(v["QE"], "power", "MW") if "QE" in v else nan,
            from_si(v["QS"], "power", "MW") if "QS" in v else nan,
        ))
    return rows


def summary_row(s: RunSummary) -> tuple:
    mw = lambda w: from_si(w, "power", "MW")  # noqa: E731
    return (
        s.name, s.status, mw(s.required), mw(s.supplied), mw(s.pipe_losses), s.unmet_pct, mw(s.excess),
        from_si(s.plant_T_out, "temperature", "C"), from_si(s.plant_p_out, "pressure", "psi"), s.plant_f, s.iterations,
    )


def sweep_row(p: SweepPoint) -> tuple:
    return (p.multiplier, p.status, from_si(p.plant_T_out, "temperature", "C"), p.plant_f,
            from_si(p.pipe_losses, "power", "MW"), p.unmet_pct, p.iterations, p.warm)


def write_summary(rows: Sequence[RunSummary], path) -> None:
    Path(path).write_text(csv_text(SUMMARY_COLUMNS, [summary_row(s) for s in rows]), encoding="utf-8")


def write_sweep(points: Sequence[SweepPoint], path) -> None:
    Path(path).write_text(csv_text(SWEEP_COLUMNS, [sweep_row(p) for p in points]), encoding="utf-8")


# ----------------------------------------------------------------------- dot


def _quote(s: str) -> str:
    # backslashes pass through so dot escapes such as \n keep working
    return '"' + str(s).replace('"', '\\"') + '"'


def dot_text(net: Network, state: NetworkState, max_width: float = 8.0) -> str:
    """Graphviz digraph annotated with the solved state; pipe pen width scales with diameter."""
    d_max = max((p.diameter for p in net.pipes), default=1.0)
    lines = ["digraph tnfo {", "  rankdir=LR;", "  node [shape=circle];"]
    for jid, p_psi, T_C in junction_rows(net, state):
        label = _quote(jid + "\\n" + f"{p_psi:.2f} psi" + "\\n" + f"{T_C:.1f} C")
        lines.append(f"  {_quote(jid)} [p_psi={_quote(fmt(p_psi))}, T_C={_quote(fmt(T_C))}, label={label}];")
    widths = {p.id: max_width * p.diameter / d_max for p in net.pipes}
    for row in edge_rows(net, state):
        eid, kind, f, T_in, T_out = row[:5]
        e = net.edge_index[eid]
        attrs = {"kind": kind, "f_kgps": fmt(f), "T_in_C": fmt(T_in), "T_out_C": fmt(T_out),
                 "penwidth": fmt(widths.get(eid, 1.0)), "label": f"{eid} {f:.2f} kg/s"}
        if eid in widths:
            attrs["diameter_m"] = fmt(e.diameter)
        if kind in ("plant", "load"):
            attrs["style"] = "dashed"
        body = ", ".join(f"{k}={_quote(v)}" for k, v in attrs.items())
        lines.append(f"  {_quote(e.from_junction)} -> {_quote(e.to_junction)} [{body}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_results(net: Network, state: NetworkState, summary: RunSummary | Sequence[RunSummary], out_dir) -> list[Path]:
    """Write junctions.csv, edges.csv, summary.csv and network.dot; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [summary] if isinstance(summary, RunSummary) else list(summary)
    files = {
        "junctions.csv": csv_text(JUNCTION_COLUMNS, junction_rows(net, state)),
        "edges.csv": csv_text(EDGE_COLUMNS, edge_rows(net, state)),
        "summary.csv": csv_text(SUMMARY_COLUMNS, [summary_row(s) for s in rows]),
        "network.dot": dot_text(net, state),
    }
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
