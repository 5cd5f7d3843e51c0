"""Domain types for the fog fabric, VM workloads, traffic and placements."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping

from .errors import ScenarioError, UnknownVm, Violation


@dataclass(frozen=True)
class Server:
    id: int
    cpu_capacity: float
    mem_capacity_mb: int
    onu_rate_mbps: int
    onu_power_w: float
    idle_power_w: float
    max_power_w: float

    @property
    def dynamic_range_w(self) -> float:
        return self.max_power_w - self.idle_power_w


@dataclass(frozen=True)
class Rack:
    servers: tuple[Server, ...]


@dataclass(frozen=True)
class Cell:
    wavelength_capacity_mbps: int
    racks: tuple[Rack, ...]


@dataclass(frozen=True)
class Topology:
    cells: tuple[Cell, ...]

    @property
    def servers(self) -> list[Server]:
        return [s for c in self.cells for r in c.racks for s in r.servers]

    @property
    def racks(self) -> list[Rack]:
        return [r for c in self.cells for r in c.racks]

    def rack_of(self) -> dict[int, int]:
        """Map server id -> global rack index (cells flattened in order)."""
        out = {}
        for g, rack in enumerate(self.racks):
            for s in rack.servers:
                out[s.id] = g
        return out

    def rack_capacities(self) -> list[int]:
        return [c.wavelength_capacity_mbps for c in self.cells for _ in c.racks]

    def server(self, sid: int) -> Server:
        for s in self.servers:
            if s.id == sid:
                return s
        raise KeyError(sid)


@dataclass(frozen=True)
class VmRequest:
    id: int
    cpu_demand: float
    mem_demand_mb: int


@dataclass(frozen=True)
class TrafficDemand:
    src: int
    dst: int
    rate_mbps: int


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    vms: tuple[VmRequest, ...]
    traffic: tuple[TrafficDemand, ...]
    seed: int = 0
    provenance: Mapping[str, Any] | None = field(default=None, compare=False)

    def vm(self, vid: int) -> VmRequest:
        for v in self.vms:
            if v.id == vid:
                return v
        raise UnknownVm(vid)


@dataclass(frozen=True)
class Placement:
    """Total map VM id -> server id."""

    assignment: Mapping[int, int]

    def __getitem__(self, vid: int) -> int:
        try:
            return self.assignment[vid]
        except KeyError:
            raise UnknownVm(vid) from None

    def __iter__(self) -> Iterator[int]:
        return iter(self.assignment)

    def __len__(self) -> int:
        return len(self.assignment)

    def as_vector(self, vm_ids: Iterable[int]) -> tuple[int, ...]:
        return tuple(self.assignment[v] for v in vm_ids)

    def moved(self, vid: int, sid: int) -> Placement:
        a = dict(self.assignment)
        a[vid] = sid
        return Placement(a)


def validate_scenario(s: Scenario) -> Scenario:
    """Check every type invariant, merging duplicate ordered traffic pairs.

    Raises ScenarioError carrying all violations found, not just the first.
    """
    errors: list[Violation] = []

    if not s.topology.cells:
        errors.append(Violation("EmptyTopology", None, "topology has no cells"))
    seen: set[int] = set()
    for ci, cell in enumerate(s.topology.cells):
        if not cell.racks:
            errors.append(Violation("EmptyCell", ci, "cell has no racks"))
        if cell.wavelength_capacity_mbps <= 0:
            errors.append(Violation("NonPositiveCapacity", ci, "wavelength capacity must be > 0"))
        for rack in cell.racks:
            if not rack.servers:
                errors.append(Violation("EmptyRack", ci, "rack has no servers"))
            for srv in rack.servers:
                if srv.id in seen:
                    errors.append(Violation("DuplicateServerId", srv.id, "server id repeated"))
                seen.add(srv.id)
                if min(srv.cpu_capacity, srv.mem_capacity_mb, srv.onu_rate_mbps) <= 0:
                    errors.append(Violation("NonPositiveCapacity", srv.id, "server capacities must be > 0"))
                if srv.onu_power_w <= 0 or srv.idle_power_w <= 0:
                    errors.append(Violation("NonPositivePower", srv.id, "power figures must be > 0"))
                if srv.max_power_w <= srv.idle_power_w:
                    errors.append(Violation("InvalidPowerRange", srv.id, "max_power_w must exceed idle_power_w"))
    if seen and seen != set(range(len(seen))):
        errors.append(Violation("NonDenseServerIds", None, "server ids must be exactly 0..n-1"))

    vm_ids: set[int] = set()
    for vm in s.vms:
        if vm.id in vm_ids:
            errors.append(Violation("DuplicateVmId", vm.id, "vm id repeated"))
        vm_ids.add(vm.id)
        if not 0 < vm.cpu_demand <= 1 or vm.mem_demand_mb < 1:
            errors.append(Violation("NonPositiveDemand", vm.id, "cpu_demand must be in (0,1], mem >= 1"))

    merged: dict[tuple[int, int], int] = {}
    for t in s.traffic:
        if t.src == t.dst:
            errors.append(Violation("DanglingOrSelfLoop", t.src, "traffic src equals dst"))
            continue
        bad = [e for e in (t.src, t.dst) if e not in vm_ids]
        for e in bad:
            errors.append(Violation("DanglingTrafficEndpoint", e, "traffic references unknown vm"))
        if t.rate_mbps <= 0:
            errors.append(Violation("NonPositiveDemand", t.src, f"traffic {t.src}->{t.dst} rate must be > 0"))
        if bad or t.rate_mbps <= 0:
            continue
        merged[(t.src, t.dst)] = merged.get((t.src, t.dst), 0) + t.rate_mbps

    if errors:
        raise ScenarioError(errors)
    traffic = tuple(TrafficDemand(a, b, r) for (a, b), r in merged.items())
    return Scenario(s.topology, tuple(s.vms), traffic, s.seed, s.provenance)


def derived_activation(p: Placement, s: Scenario) -> dict[int, dict[str, int]]:
    counts = {srv.id: 0 for srv in s.topology.servers}
    for vm in s.vms:
        counts[p[vm.id]] += 1
    return {sid: {"active": int(n > 0), "vm_count": n} for sid, n in counts.items()}


def colocation(p: Placement, i: int, f: int) -> int:
    return int(p[i] == p[f])


# -- JSON ------------------------------------------------------------------

def topology_to_dict(t: Topology) -> dict:
    return {
        "cells": [
            {
                "wavelength_capacity_mbps": c.wavelength_capacity_mbps,
                "racks": [{"servers": [vars(s).copy() for s in r.servers]} for r in c.racks],
            }
            for c in t.cells
        ]
    }


def topology_from_dict(d: Mapping[str, Any]) -> Topology:
    cells = []
    for c in d["cells"]:
        racks = tuple(
            Rack(tuple(
                Server(
                    id=int(s["id"]),
                    cpu_capacity=float(s["cpu_capacity"]),
                    mem_capacity_mb=int(s["mem_capacity_mb"]),
                    onu_rate_mbps=int(s["onu_rate_mbps"]),
                    onu_power_w=float(s["onu_power_w"]),
                    idle_power_w=float(s["idle_power_w"]),
                    max_power_w=float(s["max_power_w"]),
                )
                for s in r["servers"]
            ))
            for r in c["racks"]
        )
        cells.append(Cell(int(c["wavelength_capacity_mbps"]), racks))
    return Topology(tuple(cells))


def scenario_to_dict(s: Scenario) -> dict:
    d: dict[str, Any] = {
        "topology": topology_to_dict(s.topology),
        "vms": [vars(v).copy() for v in s.vms],
        "traffic": [vars(t).copy() for t in s.traffic],
        "seed": s.seed,
    }
    if s.provenance is not None:
        d["provenance"] = dict(s.provenance)
    return d


def scenario_from_dict(d: Mapping[str, Any]) -> Scenario:
    return Scenario(
        topology=topology_from_dict(d["topology"]),
        vms=tuple(VmRequest(int(v["id"]), float(v["cpu_demand"]), int(v["mem_demand_mb"])) for v in d["vms"]),
        traffic=tuple(TrafficDemand(int(t["src"]), int(t["dst"]), int(t["rate_mbps"])) for t in d["traffic"]),
        seed=int(d.get("seed", 0)),
        provenance=d.get("provenance"),
    )


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def loads_scenario(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))


def placement_to_dict(p: Placement) -> dict[str, int]:
    return {str(k): v for k, v in sorted(p.assignment.items())}
