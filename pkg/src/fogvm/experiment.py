"""Optimal vs. random-baseline comparison across VM counts and seeds."""
from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import Infeasible, UnsatisfiableParams
from .model import Topology
from .power import total_power
from .scenarios import RNG_ID, GeneratorParams, baseline_place, default_topology, generate_scenario
from .solver import SolverConfig, Status, solve_exact

MODES = ("exact", "baseline")
CSV_FIELDS = ["vm_count", "seed", "mode", "total_w", "spc_w", "onu_w",
              "active_servers", "status", "nodes_explored"]


@dataclass(frozen=True)
class ExperimentSpec:
    vm_counts: tuple[int, ...] = (10, 15, 20)
    seeds: tuple[int, ...] = tuple(range(1, 21))
    modes: tuple[str, ...] = MODES
    node_limit: int = 10**8
    topology: Topology | None = None
    jobs: int = 1

    def __post_init__(self):
        if not self.vm_counts or not self.seeds:
            raise ValueError("vm_counts and seeds must be nonempty")
        unknown = set(self.modes) - set(MODES)
        if unknown or not self.modes:
            raise ValueError(f"modes must be a nonempty subset of {MODES}")


@dataclass(frozen=True)
class ExperimentRow:
    vm_count: int
    seed: int
    mode: str
    total_w: float | None
    spc_w: float | None
    onu_w: float | None
    active_servers: int | None
    status: str
    nodes_explored: int
    wall_ms: float = field(default=0.0, compare=False)

    @property
    def succeeded(self) -> bool:
        return self.total_w is not None


def _run_one(vm_count: int, seed: int, modes: Sequence[str], node_limit: int,
             topology: Topology | None) -> list[ExperimentRow]:
    try:
        sc = generate_scenario(GeneratorParams(vm_count, seed), topology or default_topology())
    except UnsatisfiableParams:
        return [ExperimentRow(vm_count, seed, m, None, None, None, None, "Unsatisfiable", 0) for m in modes]

    rows = []
    for mode in modes:
        t0 = time.perf_counter()
        if mode == "exact":
            res = solve_exact(sc, SolverConfig(node_limit=node_limit))
            ms = (time.perf_counter() - t0) * 1e3
            if res.placement is None:
                rows.append(ExperimentRow(vm_count, seed, mode, None, None, None, None,
                                          res.status.value, res.nodes_explored, ms))
                continue
            pw = res.power
            rows.append(ExperimentRow(vm_count, seed, mode, pw.total_w, pw.spc_w, pw.onu_w,
                                      pw.active_servers, res.status.value, res.nodes_explored, ms))
        else:
            try:
                pw = total_power(baseline_place(sc, seed), sc)
            except Infeasible:
                rows.append(ExperimentRow(vm_count, seed, mode, None, None, None, None, "Infeasible", 0,
                                          (time.perf_counter() - t0) * 1e3))
                continue
            rows.append(ExperimentRow(vm_count, seed, mode, pw.total_w, pw.spc_w, pw.onu_w,
                                      pw.active_servers, "Feasible", 0, (time.perf_counter() - t0) * 1e3))
    return rows


def _mean(xs):
    return statistics.fmean(xs) if xs else None


def summarize(rows: Sequence[ExperimentRow], vm_counts: Sequence[int]) -> dict:
    by_key = {(r.vm_count, r.seed, r.mode): r for r in rows}
    groups = []
    for n in vm_counts:
        seeds = sorted({r.seed for r in rows if r.vm_count == n})
        pairs = []
        for seed in seeds:
            e, b = by_key.get((n, seed, "exact")), by_key.get((n, seed, "baseline"))
            if e is not None and b is not None and e.succeeded and b.succeeded:
                pairs.append((e, b))
        mean_opt = _mean([e.total_w for e, _ in pairs])
        mean_base = _mean([b.total_w for _, b in pairs])
        exact_rows = [r for r in rows if r.vm_count == n and r.mode == "exact"]
        groups.append({
            "vm_count": n,
            "seeds": len(seeds),
            "compared": len(pairs),
            "excluded": len(seeds) - len(pairs),
            "mean_baseline_w": mean_base,
            "mean_exact_w": mean_opt,
            "savings": 1 - mean_opt / mean_base if pairs else None,
            "savings_mean_of_ratios": _mean([1 - e.total_w / b.total_w for e, b in pairs]),
            "mean_active_baseline": _mean([b.active_servers for _, b in pairs]),
            "mean_active_exact": _mean([e.active_servers for e, _ in pairs]),
            "exact_status": {s.value: sum(r.status == s.value for r in exact_rows) for s in Status},
            "baseline_infeasible": sum(r.mode == "baseline" and not r.succeeded
                                       for r in rows if r.vm_count == n),
        })
    return {"rng": RNG_ID, "groups": groups}


def run_experiment(spec: ExperimentSpec) -> tuple[list[ExperimentRow], dict]:
    tasks = [(n, seed) for n in spec.vm_counts for seed in spec.seeds]
    args = [(n, seed, spec.modes, spec.node_limit, spec.topology) for n, seed in tasks]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            chunks = list(pool.map(_run_one, *zip(*args)))
    else:
        chunks = [_run_one(*a) for a in args]
    rows = [r for chunk in chunks for r in chunk]
    mode_rank = {m: k for k, m in enumerate(MODES)}
    rows.sort(key=lambda r: (r.vm_count, r.seed, mode_rank[r.mode]))
    summary = summarize(rows, spec.vm_counts)
    summary["spec"] = {"vm_counts": list(spec.vm_counts), "seeds": list(spec.seeds),
                       "modes": list(spec.modes), "node_limit": spec.node_limit}
    return rows, summary


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[ExperimentRow], timings: bool = False) -> str:
    fields = CSV_FIELDS + (["wall_ms"] if timings else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(getattr(r, f)) for f in fields])
    return buf.getvalue()


def format_table(summary: dict) -> str:
    """Plain-text counterpart of the power and active-server bar charts."""
    def num(v, fmt):
        return "-".rjust(int(fmt.split(".")[0])) if v is None else format(v, fmt)

    lines = [
        f"{'VMs':>5} {'baseline W':>12} {'optimal W':>12} {'savings':>8} "
        f"{'base srv':>9} {'opt srv':>8} {'compared':>9}",
    ]
    for g in summary["groups"]:
        lines.append(
            f"{g['vm_count']:>5} {num(g['mean_baseline_w'], '12.1f')} {num(g['mean_exact_w'], '12.1f')} "
            f"{num(None if g['savings'] is None else 100 * g['savings'], '7.1f')}% "
            f"{num(g['mean_active_baseline'], '9.2f')} {num(g['mean_active_exact'], '8.2f')} "
            f"{g['compared']:>4}/{g['seeds']:<4}"
        )
    return "\n".join(lines) + "\n"


def emit_reports(rows: Sequence[ExperimentRow], summary: dict, csv_path: str | Path | None = None,
                 json_path: str | Path | None = None, table_path: str | Path | None = None,
                 timings: bool = False) -> None:
    outputs = [
        (csv_path, lambda: rows_to_csv(rows, timings)),
        (json_path, lambda: json.dumps(summary, indent=2, sort_keys=True) + "\n"),
        (table_path, lambda: format_table(summary)),
    ]
    for path, render in outputs:
        if path is None:
            continue
        try:
            with open(path, "w", newline="") as fh:
                fh.write(render())
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
