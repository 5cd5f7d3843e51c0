"""Seeded scenario generation and the traffic-oblivious random baseline."""
from __future__ import annotations

import random
from dataclasses import dataclass, asdict, field

from .errors import Infeasible, UnsatisfiableParams
from .milp import check_feasibility
from .model import Cell, Placement, Rack, Scenario, Server, Topology, TrafficDemand, VmRequest, validate_scenario

# Only Random.random() is guaranteed stable across Python releases, so all
# integer draws are derived from it here rather than from randint/sample.
RNG_ID = "mt19937-python-random-float53"

MAX_SERVER_POWER_W = 457.0
IDLE_SERVER_POWER_W = 301.6
SERVER_MEM_MB = 16384
ONU_POWER_W = 2.5
ONU_RATE_MBPS = 10_000
WAVELENGTH_CAPACITY_MBPS = 60_000

GENERATOR_RETRIES = 16
BASELINE_RESTARTS = 64


class Stream:
    """Portable integer draws on top of a seeded Mersenne Twister."""

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def below(self, n: int) -> int:
        return min(int(self._rng.random() * n), n - 1)

    def between(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo + 1)

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def sample(self, seq, k: int) -> list:
        pool = list(seq)
        for j in range(k):
            r = j + self.below(len(pool) - j)
            pool[j], pool[r] = pool[r], pool[j]
        return pool[:k]

    def permutation(self, seq) -> list:
        return self.sample(seq, len(seq))


@dataclass(frozen=True)
class GeneratorParams:
    n_vms: int
    seed: int = 0
    cpu_choices: tuple[float, ...] = (0.1, 0.5, 1.0)
    mem_range_mb: tuple[int, int] = (100, 500)
    rate_range_mbps: tuple[int, int] = (100, 10_000)
    max_partners: int = 4

    def __post_init__(self):
        if self.n_vms < 0 or self.max_partners < 0:
            raise ValueError("n_vms and max_partners must be >= 0")
        if not self.cpu_choices:
            raise ValueError("cpu_choices must be nonempty")
        for lo, hi in (self.mem_range_mb, self.rate_range_mbps):
            if lo > hi or lo < 1:
                raise ValueError(f"invalid range [{lo}, {hi}]")


def default_topology(cells: int = 3, racks_per_cell: int = 2, servers_per_rack: int = 4) -> Topology:
    """Three PON cells of two racks with four servers each, default server model."""
    sid = 0
    out = []
    for _ in range(cells):
        racks = []
        for _ in range(racks_per_cell):
            servers = []
            for _ in range(servers_per_rack):
                servers.append(Server(
                    id=sid, cpu_capacity=1.0, mem_capacity_mb=SERVER_MEM_MB,
                    onu_rate_mbps=ONU_RATE_MBPS, onu_power_w=ONU_POWER_W,
                    idle_power_w=IDLE_SERVER_POWER_W, max_power_w=MAX_SERVER_POWER_W,
                ))
                sid += 1
            racks.append(Rack(tuple(servers)))
        out.append(Cell(WAVELENGTH_CAPACITY_MBPS, tuple(racks)))
    return Topology(tuple(out))


def _draw(params: GeneratorParams, topo: Topology, seed: int) -> Scenario:
    rs = Stream(seed)
    vms = tuple(
        VmRequest(i, rs.choice(params.cpu_choices), rs.between(*params.mem_range_mb))
        for i in range(params.n_vms)
    )
    traffic = []
    for i in range(params.n_vms):
        others = [j for j in range(params.n_vms) if j != i]
        k = min(rs.between(0, params.max_partners), len(others))
        for f in rs.sample(others, k):
            traffic.append(TrafficDemand(i, f, rs.between(*params.rate_range_mbps)))
    provenance = {"rng": RNG_ID, "seed": seed, "requested_seed": params.seed, "params": asdict(params)}
    return validate_scenario(Scenario(topo, vms, tuple(traffic), seed, provenance))


def generate_scenario(params: GeneratorParams, topo: Topology | None = None) -> Scenario:
    topo = topo or default_topology()
    servers = topo.servers
    cpu_cap = sum(x.cpu_capacity for x in servers)
    mem_cap = sum(x.mem_capacity_mb for x in servers)
    for attempt in range(GENERATOR_RETRIES + 1):
        sc = _draw(params, topo, params.seed + attempt)
        if sum(v.cpu_demand for v in sc.vms) <= cpu_cap and sum(v.mem_demand_mb for v in sc.vms) <= mem_cap:
            return sc
    raise UnsatisfiableParams(f"no scenario within capacity after {GENERATOR_RETRIES} retries from seed {params.seed}")


def baseline_place(s: Scenario, seed: int) -> Placement:
    """Random placement honouring CPU/memory while choosing; ONU/wavelength checked after.

    Raises Infeasible when every restart fails.
    """
    rs = Stream(seed)
    servers = s.topology.servers
    vms = sorted(s.vms, key=lambda v: v.id)
    for _ in range(BASELINE_RESTARTS + 1):
        cpu = {x.id: 0.0 for x in servers}
        mem = {x.id: 0 for x in servers}
        assignment = {}
        for vm in vms:
            for srv in rs.permutation(servers):
                if cpu[srv.id] + vm.cpu_demand <= srv.cpu_capacity + 1e-9 \
                        and mem[srv.id] + vm.mem_demand_mb <= srv.mem_capacity_mb:
                    break
            else:
                break
            assignment[vm.id] = srv.id
            cpu[srv.id] += vm.cpu_demand
            mem[srv.id] += vm.mem_demand_mb
        if len(assignment) < len(vms):
            continue
        p = Placement(assignment)
        if not check_feasibility(p, s):
            return p
    raise Infeasible(f"baseline found no feasible placement in {BASELINE_RESTARTS} restarts")
