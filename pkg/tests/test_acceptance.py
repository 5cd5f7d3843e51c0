"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before asserting.
"""
import itertools
import random

from fogvm.cli import main
from fogvm.experiment import ExperimentSpec, run_experiment
from fogvm.milp import build_milp, check_feasibility, extract_placement, placement_point
from fogvm.model import Placement
from fogvm.power import processing_fraction, total_power
from fogvm.scenarios import GeneratorParams, default_topology, generate_scenario
from fogvm.solver import Status, brute_force_oracle, solve_exact

from conftest import make_scenario, place, record, small_topology

SEEDS = tuple(range(1, 21))


def test_1_oracle_equivalence():
    topo = small_topology()  # 2 cells x 1 rack x 3 servers
    checked = feasible = 0
    mismatches = []
    for seed in range(200):
        n = 1 + seed % 7
        # alternate the default rate range with a lighter one so both outcomes occur
        rates = (100, 10_000) if seed % 2 else (100, 2_500)
        sc = generate_scenario(GeneratorParams(n, seed, rate_range_mbps=rates), topo)
        got, want = solve_exact(sc), brute_force_oracle(sc)
        checked += 1
        feasible += want.status is Status.OPTIMAL
        same = got.status == want.status and got.placement == want.placement and (
            want.placement is None or abs(got.power.total_w - want.power.total_w) <= 1e-9)
        if not same:
            mismatches.append(seed)
    ok = checked >= 200 and not mismatches
    record(1, ok, f"{checked} scenarios ({feasible} feasible), mismatching seeds: {mismatches[:5]}")
    assert ok


def test_2_hand_computed_optima():
    topo = default_topology()
    single = solve_exact(make_scenario(topo, [(1.0,)]))
    pair = solve_exact(make_scenario(topo, [(0.5,), (0.5,)], [(0, 1, 5000), (1, 0, 5000)]))
    split = solve_exact(make_scenario(topo, [(1.0,), (1.0,)], [(0, 1, 5000), (1, 0, 5000)]))
    # two full servers: 2*457 W; each ONU carries 5000 out + 5000 in, 2.5 W apiece
    want = (457.0, 457.0, 919.0)
    got = (single.power.total_w, pair.power.total_w, split.power.total_w)
    ok = all(abs(g - w) <= 1e-9 for g, w in zip(got, want)) and pair.power.active_servers == 1
    record(2, ok, f"got {got}, expected {want}")
    assert ok


def test_3_dynamic_power_invariant():
    sc = generate_scenario(GeneratorParams(12, 5))
    rng = random.Random(3)
    values = []
    for _ in range(100):
        p = Placement({v.id: rng.randrange(24) for v in sc.vms})
        values.append(sum(srv.dynamic_range_w * processing_fraction(vm, srv, p)
                          for srv in sc.topology.servers for vm in sc.vms))
    spread = max(values) - min(values)
    ok = spread <= 1e-9
    record(3, ok, f"spread over 100 placements {spread:.3g} W")
    assert ok


def _sweep():
    return run_experiment(ExperimentSpec(vm_counts=(10, 15, 20), seeds=SEEDS, node_limit=10**6))


def test_4_power_dominance():
    rows, summary = _sweep()
    by = {(r.vm_count, r.seed, r.mode): r for r in rows}
    missing, violations = [], []
    for n, seed in itertools.product((10, 15, 20), SEEDS):
        e, b = by[n, seed, "exact"], by[n, seed, "baseline"]
        if not (e.succeeded and b.succeeded):
            missing.append((n, seed, e.status, b.status))
        elif not (e.total_w <= b.total_w + 1e-9 and 0 <= 1 - e.total_w / b.total_w < 1):
            violations.append((n, seed))
    ok = not missing and not violations
    record(4, ok, f"60 pairs: {len(missing)} without both placements (first {missing[:1]}), "
                  f"{len(violations)} dominance violations")
    assert ok


def test_5_savings_band():
    rows, summary = _sweep()
    parts, ok = [], True
    exact = [r for r in rows if r.mode == "exact"]
    proven = sum(r.status == Status.OPTIMAL.value for r in exact)
    for g in summary["groups"]:
        s = g["savings"]
        in_band = s is not None and 0.25 <= s <= 0.65
        fewer = g["mean_active_exact"] is not None and g["mean_active_exact"] <= g["mean_active_baseline"]
        ok &= in_band and fewer
        parts.append(f"{g['vm_count']} VMs savings={s} compared={g['compared']}")
    ok &= proven >= 0.8 * len(exact)
    record(5, ok, "; ".join(parts) + f"; proven optimal {proven}/{len(exact)}")
    assert ok


def test_6_milp_round_trip():
    topo = small_topology(2, 1, 2)
    checked = 0
    bad = []
    for seed in range(50):
        sc = generate_scenario(GeneratorParams(1 + seed % 4, seed, rate_range_mbps=(100, 6000)), topo)
        inst = build_milp(sc)
        ids = [v.id for v in sc.vms]
        for combo in itertools.product([s.id for s in topo.servers], repeat=len(ids)):
            p = Placement(dict(zip(ids, combo)))
            x = placement_point(inst, p, sc)
            checked += 1
            agree = inst.is_feasible(x) == (not check_feasibility(p, sc))
            if not agree or extract_placement(inst, x, sc) != p or \
                    abs(inst.objective_value(x) - total_power(p, sc).total_w) > 1e-6:
                bad.append((seed, combo))
    ok = not bad
    record(6, ok, f"50 instances, {checked} placements, {len(bad)} disagreements")
    assert ok


def test_7_colocation_monotonicity():
    rng = random.Random(7)
    topo = default_topology()
    triples = 0
    counterexample = None
    seed = 0
    while triples < 500:
        seed += 1
        sc = generate_scenario(GeneratorParams(rng.randint(2, 10), seed))
        if not sc.traffic:
            continue
        p = Placement({v.id: rng.randrange(24) for v in sc.vms})
        t = rng.choice(sc.traffic)
        f, partner = (t.src, t.dst) if rng.random() < 0.5 else (t.dst, t.src)
        target = p[partner]
        cpu = sum(v.cpu_demand for v in sc.vms if p[v.id] == target and v.id != f)
        mem = sum(v.mem_demand_mb for v in sc.vms if p[v.id] == target and v.id != f)
        vm = next(v for v in sc.vms if v.id == f)
        srv = topo.server(target)
        if cpu + vm.cpu_demand > srv.cpu_capacity + 1e-9 or mem + vm.mem_demand_mb > srv.mem_capacity_mb:
            continue
        triples += 1
        before, after = total_power(p, sc).onu_w, total_power(p.moved(f, target), sc).onu_w
        if after > before + 1e-9 and counterexample is None:
            counterexample = (seed, f, target, before, after)
    ok = counterexample is None
    record(7, ok, f"{triples} triples; first increase (seed, vm, server, before W, after W): {counterexample}")
    assert ok


def test_8_deterministic_csv(tmp_path):
    blobs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        code = main(["experiment", "--csv", str(d / "r.csv"), "--json", str(d / "s.json"),
                     "--table", str(d / "t.txt")])
        assert code == 0
        blobs.append((d / "r.csv").read_bytes())
    ok = blobs[0] == blobs[1] and blobs[0].count(b"\r\n") == 1 + 3 * 20 * 2
    record(8, ok, f"two runs, {len(blobs[0])} bytes each, identical={blobs[0] == blobs[1]}")
    assert ok
