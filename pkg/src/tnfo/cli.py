"""Command-line entry point: ``tnfo <command> ...``.

Exit status is 0 on success, 1 when an input file is rejected and 2 when a
solve fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import io
from .errors import SolverError, TnfoError, ValidationError
from .nlp import ObjectiveWeights, assemble_simulation, setpoints_from_state
from .scenario import RunSummary, Scenario, run_batch, run_scenario, sensitivity_sweep, summarize
from .solver import SolverOptions, simulate
from .synth import campus_spec, minimal_network, synth_network
from .units import to_si

EXIT_OK, EXIT_INVALID, EXIT_SOLVE = 0, 1, 2
log = logging.getLogger("tnfo")


class UsageError(Exception):
    pass


def _weights(text: str | None) -> ObjectiveWeights | None:
    """``load_slack=1000,plant_f=1`` or a path to a JSON object with those keys."""
    if not text:
        return None
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = {}
        for part in text.split(","):
            key, sep, value = part.partition("=")
            if not sep:
                raise UsageError(f"--weights expects key=value pairs, got {part!r}")
            raw[key.strip()] = value
    known = {f.name for f in dataclasses.fields(ObjectiveWeights)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise UsageError(f"unknown weight(s): {', '.join(unknown)}; choose from {', '.join(sorted(known))}")
    try:
        return ObjectiveWeights(**{k: float(v) for k, v in raw.items()})
    except ValueError as exc:
        raise UsageError(f"--weights: {exc}") from None


def _options(args) -> SolverOptions:
    kw = {"max_iter": args.max_iter, "verbose": args.verbose}
    if args.tol is not None:
        kw.update(feasibility_tol=args.tol, optimality_tol=args.tol)
    return SolverOptions(**kw)


def _network(args):
    net = io.parse_network(args.network)
    if args.plant_outlet_pmin is not None:
        b = dataclasses.replace(net.bounds, plant_outlet_p_min=to_si(args.plant_outlet_pmin, "pressure", "psi"))
        net = dataclasses.replace(net, bounds=b)
    return net


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ commands


def cmd_validate(args) -> int:
    net = io.parse_network(args.network)
    census = ", ".join(f"{k}={v}" for k, v in net.census().items())
    print(f"{args.network}: valid ({census})")
    return EXIT_OK


def cmd_optimize(args) -> int:
    net = _network(args)
    scen = io.parse_scenario(args.scenario) if args.scenario else Scenario("base")
    run = run_scenario(net, scen, _options(args), _weights(args.weights))
    if run.state is not None:
        io.export_results(net, run.state, run.summary, args.output)
        io.write_setpoints(setpoints_from_state(run.problem, run.state.x), Path(args.output) / "setpoints.json")
    else:
        io.write_summary([run.summary], _out_dir(args.output) / "summary.csv")
    _report(run.summary)
    return EXIT_OK if run.summary.ok else EXIT_SOLVE


def cmd_simulate(args) -> int:
    net = _network(args)
    setpoints = io.parse_setpoints(args.setpoints)
    scen = io.parse_scenario(args.scenario) if args.scenario else None
    system = assemble_simulation(net, setpoints, scen)
    tol = args.tol if args.tol is not None else 1e-10
    state, res = simulate(system, tol=tol, max_iter=args.max_iter)
    summary = dataclasses.replace(summarize("simulation", system.problem, state, status="converged"),
                                  iterations=res.iterations)
    io.export_results(net, state, summary, args.output)
    _report(summary)
    return EXIT_OK


def cmd_batch(args) -> int:
    net = _network(args)
    files = sorted(Path(args.scenarios).glob("*.json"))
    if not files:
        raise UsageError(f"no scenario files (*.json) in {args.scenarios}")
    scenarios = [io.parse_scenario(f) for f in files]
    rows = run_batch(net, scenarios, _options(args), _weights(args.weights), workers=args.workers)
    io.write_summary(rows, _out_dir(args.output) / "summary.csv")
    for r in rows:
        _report(r)
    return EXIT_OK if all(r.ok for r in rows) else EXIT_SOLVE


def cmd_sweep(args) -> int:
    net = _network(args)
    base = io.parse_scenario(args.scenario) if args.scenario else None
    points = sensitivity_sweep(net, args.multiplier_from, args.multiplier_to, args.steps, _options(args),
                               _weights(args.weights), warm_start=not args.cold, base=base)
    io.write_sweep(points, _out_dir(args.output) / "sweep.csv")
    for p in points:
        print(f"x{p.multiplier:.3g}: {p.status}, T_out {p.plant_T_out - 273.15:.2f} C, f {p.plant_f:.3f} kg/s")
    return EXIT_OK if all(p.status == "optimal" for p in points) else EXIT_SOLVE


def cmd_synth(args) -> int:
    net = minimal_network() if args.minimal else synth_network(campus_spec(args.seed))
    units = io.DISPLAY_UNITS if args.display_units else None
    io.write_network(net, args.out, units)
    print(f"wrote {args.out} ({', '.join(f'{k}={v}' for k, v in net.census().items())})")
    return EXIT_OK


def _report(s: RunSummary) -> None:
    line = f"{s.name}: {s.status}"
    if s.required == s.required:  # skip rows without numbers
        line += (f", supplied {s.supplied / 1e6:.3f} MW, unmet {s.unmet_pct:.2f}%, "
                 f"T_out {s.plant_T_out - 273.15:.2f} C, f {s.plant_f:.3f} kg/s")
    if s.message:
        line += f" ({s.message})"
    print(line)


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="convergence tolerance (solver default if omitted)")
    common.add_argument("--max-iter", type=int, default=500, help="iteration limit per solve")
    common.add_argument("--weights", help="objective weights as key=value,... or a JSON file")
    common.add_argument("--plant-outlet-pmin", type=float, metavar="PSI", help="minimum plant outlet pressure in psi")
    common.add_argument("-v", "--verbose", action="store_true", help="print solver iterations")

    p = argparse.ArgumentParser(prog="tnfo", description="Steam district heating flow optimization.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a network file")
    s.add_argument("network")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", parents=[common], help="solve the network for fixed setpoints")
    s.add_argument("network")
    s.add_argument("setpoints")
    s.add_argument("--scenario", help="scenario file applied to the demands")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("optimize", parents=[common], help="optimal operating point for one scenario")
    s.add_argument("network")
    s.add_argument("scenario", nargs="?")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("batch", parents=[common], help="optimize every scenario file in a directory")
    s.add_argument("network")
    s.add_argument("scenarios")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_batch)

    s = sub.add_parser("sweep", parents=[common], help="uniform demand multiplier sweep")
    s.add_argument("network")
    s.add_argument("--from", dest="multiplier_from", type=float, required=True)
    s.add_argument("--to", dest="multiplier_to", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--scenario", help="base scenario the multipliers scale")
    s.add_argument("--cold", action="store_true", help="start every point from the default guess")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic network")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--minimal", action="store_true", help="one plant, one load, two pipes")
    s.add_argument("--display-units", action="store_true", help="psi, Celsius and MW instead of SI")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("TNFO_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"{getattr(args, 'network', '')}: invalid network", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2 like any usage error
    except SolverError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except (TnfoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_INVALID  # unreachable: parser.error exits


if __name__ == "__main__":
    sys.exit(main())
