"""fogvm command line: generate, solve, experiment, export-lp."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import FogVmError, Infeasible, ScenarioError
from .experiment import ExperimentSpec, emit_reports, format_table, run_experiment
from .milp import build_milp, write_lp
from .model import Scenario, dumps_scenario, loads_scenario, topology_from_dict, validate_scenario
from .power import total_power
from .scenarios import GeneratorParams, baseline_place, default_topology, generate_scenario
from .solver import SolverConfig, Status, solve_exact

log = logging.getLogger("fogvm")

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_int_list(text: str) -> list[int]:
    """'10,15,20' or '1..20' or a mix like '1..3,7'."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_topology(args):
    if args.topology is None:
        return default_topology()
    data = json.loads(Path(args.topology).read_text())
    return topology_from_dict(data.get("topology", data))


def _load_scenario(path: str, args) -> Scenario:
    sc = loads_scenario(Path(path).read_text())
    if args.topology is not None:
        sc = Scenario(_load_topology(args), sc.vms, sc.traffic, sc.seed, sc.provenance)
    return validate_scenario(sc)


def cmd_generate(args) -> int:
    sc = generate_scenario(GeneratorParams(args.vms, args.seed), _load_topology(args))
    _write(args.out, dumps_scenario(sc))
    return EXIT_OK


def cmd_solve(args) -> int:
    sc = _load_scenario(args.file, args)
    if args.mode == "exact":
        res = solve_exact(sc, SolverConfig(node_limit=args.node_limit,
                                           symmetry_breaking=not args.no_symmetry))
        _write(args.out, json.dumps(res.to_dict(), indent=2) + "\n")
        if res.status is Status.INFEASIBLE:
            return EXIT_INFEASIBLE
        if res.status is Status.NODE_LIMIT:
            log.warning("node limit reached after %d nodes; result not proven optimal", res.nodes_explored)
        return EXIT_OK
    try:
        p = baseline_place(sc, args.seed)
    except Infeasible as exc:
        log.error("%s", exc)
        _write(args.out, json.dumps({"status": "Infeasible", "assignment": None}, indent=2) + "\n")
        return EXIT_INFEASIBLE
    doc = {
        "status": "Feasible",
        "assignment": {str(k): v for k, v in sorted(p.assignment.items())},
        "power": total_power(p, sc).to_dict(),
    }
    _write(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = ExperimentSpec(
        vm_counts=tuple(args.vms), seeds=tuple(args.seeds), node_limit=args.node_limit,
        topology=_load_topology(args) if args.topology else None, jobs=args.jobs,
    )
    rows, summary = run_experiment(spec)
    emit_reports(rows, summary, args.csv, args.json, args.table, timings=args.timings)
    if args.table is None:
        sys.stdout.write(format_table(summary))
    return EXIT_OK


def cmd_export_lp(args) -> int:
    sc = _load_scenario(args.file, args)
    _write(args.out, write_lp(build_milp(sc)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fogvm", description=__doc__)
    ap.add_argument("--topology", metavar="FILE", help="topology JSON replacing the default 3x2x4 fabric")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded random scenario")
    g.add_argument("--vms", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="place a scenario's VMs")
    s.add_argument("file")
    s.add_argument("--mode", choices=["exact", "baseline"], default="exact")
    s.add_argument("--seed", type=int, default=0, help="baseline RNG seed")
    s.add_argument("--node-limit", type=int, default=10**8)
    s.add_argument("--no-symmetry", action="store_true", help="disable symmetry breaking")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="optimal vs. baseline sweep")
    e.add_argument("--vms", type=parse_int_list, default=[10, 15, 20])
    e.add_argument("--seeds", type=parse_int_list, default=list(range(1, 21)))
    e.add_argument("--csv", default="results.csv")
    e.add_argument("--json", default="summary.json")
    e.add_argument("--table", default=None, help="text table path (stdout if omitted)")
    e.add_argument("--node-limit", type=int, default=10**6)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--timings", action="store_true", help="add wall_ms column (breaks byte-reproducibility)")
    e.set_defaults(func=cmd_experiment)

    x = sub.add_parser("export-lp", help="write the MILP in LP format")
    x.add_argument("file")
    x.add_argument("--out", default="-")
    x.set_defaults(func=cmd_export_lp)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except FogVmError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
