"""Server and ONU power evaluation for a concrete placement."""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Mapping

from .errors import UnknownServer
from .model import Placement, Scenario, Server, Topology, VmRequest, derived_activation


@dataclass(frozen=True)
class PowerBreakdown:
    spc_w: float
    onu_w: float
    total_w: float
    active_servers: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def zero(cls) -> PowerBreakdown:
        return cls(0.0, 0.0, 0.0, 0)


@dataclass(frozen=True)
class TrafficLoad:
    inter_server_mbps: Mapping[tuple[int, int], int]
    per_server_mbps: Mapping[int, int]


def processing_fraction(vm: VmRequest, server: Server, p: Placement) -> float:
    """Share of ``server``'s CPU consumed by ``vm``; 0 unless it is placed there."""
    if p[vm.id] != server.id:
        return 0.0
    return vm.cpu_demand / server.cpu_capacity


def traffic_loads(p: Placement, s: Scenario) -> TrafficLoad:
    inter: dict[tuple[int, int], int] = {}
    per = {srv.id: 0 for srv in s.topology.servers}
    for t in s.traffic:
        a, b = p[t.src], p[t.dst]
        if a == b:
            continue
        inter[(a, b)] = inter.get((a, b), 0) + t.rate_mbps
        # egress at a, ingress at b: both ONUs carry it
        per[a] += t.rate_mbps
        per[b] += t.rate_mbps
    return TrafficLoad(inter, per)


def server_power(server: Server, p: Placement, sc: Scenario) -> float:
    hosted = [vm for vm in sc.vms if p[vm.id] == server.id]
    if not hosted:
        return 0.0
    load = sum(processing_fraction(vm, server, p) for vm in hosted)
    return server.idle_power_w + server.dynamic_range_w * load


def onu_power(loads: TrafficLoad, topo: Topology) -> float:
    by_id = {srv.id: srv for srv in topo.servers}
    total = 0.0
    for sid, rate in sorted(loads.per_server_mbps.items()):
        if sid not in by_id:
            raise UnknownServer(sid)
        srv = by_id[sid]
        total += srv.onu_power_w / srv.onu_rate_mbps * rate
    return total


def total_power(p: Placement, s: Scenario) -> PowerBreakdown:
    spc = sum(server_power(srv, p, s) for srv in s.topology.servers)
    onu = onu_power(traffic_loads(p, s), s.topology)
    active = sum(a["active"] for a in derived_activation(p, s).values())
    return PowerBreakdown(spc, onu, spc + onu, active)
