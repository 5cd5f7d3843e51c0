from __future__ import annotations

import dataclasses

import pytest

from fogvm.model import Cell, Placement, Rack, Scenario, Topology, TrafficDemand, VmRequest, validate_scenario
from fogvm.scenarios import default_topology


def small_topology(cells=2, racks=1, servers=3, wavelength=None, **overrides) -> Topology:
    """Default servers on a reduced fabric (default 2 cells x 1 rack x 3 servers)."""
    base = default_topology(cells, racks, servers)
    if not overrides and wavelength is None:
        return base
    return Topology(tuple(
        Cell(wavelength or c.wavelength_capacity_mbps,
             tuple(Rack(tuple(dataclasses.replace(s, **overrides) for s in r.servers)) for r in c.racks))
        for c in base.cells
    ))


def make_scenario(topo: Topology, vms, traffic=(), seed=0) -> Scenario:
    """vms: list of (cpu, mem) or VmRequest; traffic: list of (src, dst, rate)."""
    vm_objs = tuple(
        v if isinstance(v, VmRequest) else VmRequest(i, v[0], v[1] if len(v) > 1 else 200)
        for i, v in enumerate(vms)
    )
    demands = tuple(TrafficDemand(*t) for t in traffic)
    return validate_scenario(Scenario(topo, vm_objs, demands, seed))


@pytest.fixture
def table1():
    return default_topology()


@pytest.fixture
def small():
    return small_topology()


def place(*servers) -> Placement:
    return Placement({i: s for i, s in enumerate(servers)})


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}")
