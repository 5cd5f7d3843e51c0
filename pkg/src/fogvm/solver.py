"""Exact placement by depth-first branch-and-bound, plus an enumeration oracle.

The search branches on VM -> server assignments. Objective terms:

* idle power of every opened server,
* dynamic power, which for a fixed server model does not depend on the
  placement at all,
* ONU power, linear in the traffic that crosses server boundaries.

So the bound combines a bin-packing bound on servers still to be opened with
committed ONU power and a per-VM minimum of the ONU power its decided
neighbours will force on it.

Ties are broken towards the lexicographically smallest assignment vector in
VM id order. Phase one finds the optimal value with a packing-friendly
branching order; phase two re-walks the tree in id order with that value as
a cutoff and returns the first placement that meets it.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import TooLargeForOracle
from .model import Placement, Scenario
from .power import PowerBreakdown, total_power

CAP_TOL = 1e-9
IMPROVE_TOL = 1e-9
ORACLE_MAX_VMS = 8
ORACLE_MAX_SERVERS = 6


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NODE_LIMIT = "NodeLimit"


@dataclass(frozen=True)
class SolverConfig:
    node_limit: int = 10**8
    tie_break: str = "lexicographic"
    symmetry_breaking: bool = True

    def __post_init__(self):
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")
        if self.tie_break != "lexicographic":
            raise ValueError("only lexicographic tie-break is supported")


@dataclass(frozen=True)
class SolveResult:
    status: Status
    placement: Placement | None
    power: PowerBreakdown
    nodes_explored: int
    bound_at_root_w: float
    proven: bool = field(default=True)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "assignment": (
                {str(k): v for k, v in sorted(self.placement.assignment.items())}
                if self.placement is not None else None
            ),
            "power": self.power.to_dict(),
            "nodes_explored": self.nodes_explored,
            "bound_at_root_w": self.bound_at_root_w,
        }


class _NodeLimit(Exception):
    pass


class _Search:
    """Mutable search state over VM positions 0..n-1 (scenario order by id)."""

    def __init__(self, s: Scenario, symmetry_breaking: bool = True):
        self.scenario = s
        servers = sorted(s.topology.servers, key=lambda x: x.id)
        self.servers = servers
        self.m = len(servers)
        vms = sorted(s.vms, key=lambda v: v.id)
        self.vm_ids = [v.id for v in vms]
        self.n = len(vms)
        pos = {vid: k for k, vid in enumerate(self.vm_ids)}

        self.cpu = [v.cpu_demand for v in vms]
        self.mem = [v.mem_demand_mb for v in vms]
        self.cap_cpu = [srv.cpu_capacity for srv in servers]
        self.cap_mem = [srv.mem_capacity_mb for srv in servers]
        self.rate = [srv.onu_rate_mbps for srv in servers]
        self.idle = [srv.idle_power_w for srv in servers]
        self.dyn = [srv.dynamic_range_w / srv.cpu_capacity for srv in servers]
        self.onu_w_per_mbps = [srv.onu_power_w / srv.onu_rate_mbps for srv in servers]
        rack_of = s.topology.rack_of()
        self.rack = [rack_of[srv.id] for srv in servers]
        self.rack_cap = s.topology.rack_capacities()

        # undirected weights: a pair crosses iff its endpoints differ
        w: dict[tuple[int, int], int] = {}
        for t in s.traffic:
            a, b = sorted((pos[t.src], pos[t.dst]))
            w[(a, b)] = w.get((a, b), 0) + t.rate_mbps
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for (a, b), r in sorted(w.items()):
            self.adj[a].append((b, r))
            self.adj[b].append((a, r))

        max_cpu, max_mem = max(self.cap_cpu, default=0.0), max(self.cap_mem, default=0)
        self.apart = [
            {g for g, _ in self.adj[f]
             if self.cpu[f] + self.cpu[g] > max_cpu + CAP_TOL or self.mem[f] + self.mem[g] > max_mem}
            for f in range(self.n)
        ]
        self.min_dyn = [min(d * c for d in self.dyn) for c in self.cpu]
        self.min_price = min(self.onu_w_per_mbps, default=0.0)

        self.server_class = self._server_classes(symmetry_breaking)

        self.assign = [-1] * self.n
        self.load_cpu = [0.0] * self.m
        self.load_mem = [0] * self.m
        self.count = [0] * self.m
        self.onu = [0] * self.m
        self.wl = [0] * len(self.rack_cap)
        self.nodes = 0

    def _server_classes(self, enabled: bool) -> list[object]:
        """Static interchangeability data; see ``empty_key``."""
        if not enabled:
            self.wavelength_slack = False
            self.rack_signature = None
            return list(range(self.m))
        per_rack_rate: dict[int, int] = {}
        for k in range(self.m):
            per_rack_rate[self.rack[k]] = per_rack_rate.get(self.rack[k], 0) + self.rate[k]
        # rack boundary traffic is bounded by the ONU rates inside the rack
        self.wavelength_slack = all(per_rack_rate[g] <= cap for g, cap in enumerate(self.rack_cap))
        keys = [
            (x.cpu_capacity, x.mem_capacity_mb, x.onu_rate_mbps, x.onu_power_w, x.idle_power_w, x.max_power_w)
            for x in self.servers
        ]
        self.rack_members = [[k for k in range(self.m) if self.rack[k] == g] for g in range(len(self.rack_cap))]
        # whole empty racks are interchangeable only if racks are id-contiguous blocks
        contiguous = all(not mem or mem[-1] - mem[0] + 1 == len(mem) for mem in self.rack_members)
        self.rack_signature = None
        if contiguous:
            self.rack_signature = [
                (self.rack_cap[g], tuple(keys[k] for k in self.rack_members[g])) for g in range(len(self.rack_cap))
            ]
        return keys

    def empty_key(self, k: int) -> object:
        """Key under which empty server k is interchangeable with other empty servers."""
        spec = self.server_class[k]
        if not isinstance(spec, tuple) or self.wavelength_slack:
            return spec
        g = self.rack[k]
        if self.rack_signature is not None and not any(self.count[j] for j in self.rack_members[g]):
            return ("fresh", self.rack_signature[g], spec)
        return ("rack", g, spec)

    # -- state updates ------------------------------------------------------

    def fits(self, f: int, k: int) -> bool:
        return (self.load_cpu[k] + self.cpu[f] <= self.cap_cpu[k] + CAP_TOL
                and self.load_mem[k] + self.mem[f] <= self.cap_mem[k])

    def place(self, f: int, k: int):
        """Assign VM f to server k; returns an undo record or None if infeasible."""
        undo = (self.load_cpu[k], list(self.onu), list(self.wl))
        self.assign[f] = k
        self.load_cpu[k] += self.cpu[f]
        self.load_mem[k] += self.mem[f]
        self.count[k] += 1
        ok = True
        for g, r in self.adj[f]:
            t = self.assign[g]
            if t < 0 or t == k:
                continue
            self.onu[k] += r
            self.onu[t] += r
            if self.rack[k] != self.rack[t]:
                self.wl[self.rack[k]] += r
                self.wl[self.rack[t]] += r
            if self.onu[t] > self.rate[t]:
                ok = False
        if self.onu[k] > self.rate[k] or any(x > c for x, c in zip(self.wl, self.rack_cap)):
            ok = False
        return undo, ok

    def unplace(self, f: int, k: int, undo) -> None:
        self.load_cpu[k], self.onu, self.wl = undo
        self.load_mem[k] -= self.mem[f]
        self.count[k] -= 1
        self.assign[f] = -1

    # -- objective and bound ------------------------------------------------

    def committed(self) -> float:
        """Exact objective of the decided part: opened servers, placed VMs, crossing pairs."""
        total = 0.0
        for k in range(self.m):
            if self.count[k]:
                total += self.idle[k] + self.dyn[k] * self.load_cpu[k]
            if self.onu[k]:
                total += self.onu_w_per_mbps[k] * self.onu[k]
        return total

    def bound(self) -> float:
        """Admissible lower bound on any completion; inf when none is feasible."""
        lb = self.committed()
        assign = self.assign
        free = [f for f in range(self.n) if assign[f] < 0]
        if not free:
            return lb
        count, rate, onu, price = self.count, self.rate, self.onu, self.onu_w_per_mbps
        empty = [k for k in range(self.m) if count[k] == 0]
        open_ = [k for k in range(self.m) if count[k]]
        spare_cpu = [self.cap_cpu[k] - self.load_cpu[k] + CAP_TOL for k in range(self.m)]
        spare_mem = [self.cap_mem[k] - self.load_mem[k] for k in range(self.m)]
        if empty:
            c_empty = min(price[k] for k in empty)
            rate_empty = max(rate[k] for k in empty)
            cpu_empty = max(self.cap_cpu[k] for k in empty) + CAP_TOL
            mem_empty = max(self.cap_mem[k] for k in empty)
        else:
            c_empty = math.inf
        c_open = min((price[k] for k in open_), default=math.inf)

        forced_in = [0] * self.m
        onu_lb = 0.0
        for f in free:
            lb += self.min_dyn[f]
            cpu_f, mem_f = self.cpu[f], self.mem[f]
            apart_traffic = 0
            total_r = 0
            base = 0.0
            on: dict[int, int] = {}
            for g, r in self.adj[f]:
                t = assign[g]
                if t >= 0:
                    total_r += r
                    base += r * price[t]
                    on[t] = on.get(t, 0) + r
                elif g in self.apart[f]:
                    apart_traffic += r
                    if g > f:
                        onu_lb += r * 2 * self.min_price

            best = math.inf
            if empty and cpu_f <= cpu_empty and mem_f <= mem_empty \
                    and total_r + apart_traffic <= rate_empty:
                best = c_empty * total_r + base
            for k, r_on in on.items():
                if cpu_f > spare_cpu[k] or mem_f > spare_mem[k]:
                    forced_in[k] += r_on
                    continue
                cross = total_r - r_on
                if onu[k] + cross + apart_traffic <= rate[k]:
                    best = min(best, price[k] * (cross - r_on) + base)
            if best == math.inf or c_open < c_empty:
                for k in open_:
                    if k in on or cpu_f > spare_cpu[k] or mem_f > spare_mem[k]:
                        continue
                    if onu[k] + total_r + apart_traffic <= rate[k]:
                        best = min(best, price[k] * total_r + base)
            if best == math.inf:
                return math.inf
            onu_lb += best
        for k in range(self.m):
            if forced_in[k] and onu[k] + forced_in[k] > rate[k]:
                return math.inf

        extra = self._extra_servers(free, open_)
        if extra > len(empty):
            return math.inf
        if extra:
            lb += sum(sorted(self.idle[k] for k in empty)[:extra])
        return lb + onu_lb

    def _extra_servers(self, free: list[int], open_: list[int]) -> int:
        cap = max(self.cap_cpu)
        mcap = max(self.cap_mem)
        need_cpu = sum(self.cpu[f] for f in free) - sum(self.cap_cpu[k] - self.load_cpu[k] for k in open_)
        need_mem = sum(self.mem[f] for f in free) - sum(self.cap_mem[k] - self.load_mem[k] for k in open_)
        extra = max(0, math.ceil(need_cpu / cap - CAP_TOL), math.ceil(need_mem / mcap))
        big = [self.cpu[f] for f in free if self.cpu[f] > cap / 2 + CAP_TOL]
        if big:
            smallest = min(big)
            absorb = sum(1 for k in open_ if self.cap_cpu[k] - self.load_cpu[k] + CAP_TOL >= smallest)
            extra = max(extra, len(big) - absorb)
        return extra

    # -- search -------------------------------------------------------------

    def candidates(self, f: int) -> list[int]:
        opened = [k for k in range(self.m) if self.count[k] and self.fits(f, k)]
        seen: set[object] = set()
        fresh = []
        for k in range(self.m):
            if self.count[k] == 0:
                key = self.empty_key(k)
                if key in seen:
                    continue
                seen.add(key)
                if self.fits(f, k):
                    fresh.append(k)
        return opened + fresh


def _branch_order(st: _Search) -> list[int]:
    traffic = [sum(r for _, r in st.adj[f]) for f in range(st.n)]
    return sorted(range(st.n), key=lambda f: (-st.cpu[f], -traffic[f], st.vm_ids[f]))


def solve_exact(s: Scenario, cfg: SolverConfig | None = None) -> SolveResult:
    cfg = cfg or SolverConfig()
    st = _Search(s, cfg.symmetry_breaking)
    root = st.bound()
    if st.n == 0:
        return SolveResult(Status.OPTIMAL, Placement({}), PowerBreakdown.zero(), 1, 0.0)
    if root == math.inf:
        return SolveResult(Status.INFEASIBLE, None, PowerBreakdown.zero(), 1, root)

    best_val = math.inf
    best_assign: list[int] | None = None
    order = _branch_order(st)

    def dive(depth: int) -> None:
        nonlocal best_val, best_assign
        st.nodes += 1
        if st.nodes > cfg.node_limit:
            raise _NodeLimit
        if depth == st.n:
            val = st.committed()
            if val < best_val - IMPROVE_TOL:
                best_val, best_assign = val, list(st.assign)
            return
        f = order[depth]
        for k in st.candidates(f):
            undo, ok = st.place(f, k)
            if ok and st.bound() < best_val - IMPROVE_TOL:
                dive(depth + 1)
            st.unplace(f, k, undo)

    try:
        dive(0)
    except _NodeLimit:
        if best_assign is None:
            return SolveResult(Status.NODE_LIMIT, None, PowerBreakdown.zero(), st.nodes, root, proven=False)
        p = _to_placement(st, best_assign)
        return SolveResult(Status.NODE_LIMIT, p, total_power(p, s), st.nodes, root, proven=False)

    if best_assign is None:
        return SolveResult(Status.INFEASIBLE, None, PowerBreakdown.zero(), st.nodes, root)

    lex = _lexicographic_first(st, best_val + IMPROVE_TOL, cfg.node_limit)
    if lex is None:
        # value is optimal but the tie-break walk ran out of budget
        p = _to_placement(st, best_assign)
        return SolveResult(Status.NODE_LIMIT, p, total_power(p, s), st.nodes, root, proven=False)
    p = _to_placement(st, lex)
    return SolveResult(Status.OPTIMAL, p, total_power(p, s), st.nodes, root)


def _lexicographic_first(st: _Search, cutoff: float, node_limit: int) -> list[int] | None:
    """First placement in VM-id/server-index order whose power is <= cutoff."""
    found: list[int] | None = None

    def walk(f: int) -> bool:
        nonlocal found
        st.nodes += 1
        if st.nodes > node_limit:
            raise _NodeLimit
        if f == st.n:
            if st.committed() <= cutoff:
                found = list(st.assign)
                return True
            return False
        for k in sorted(st.candidates(f)):
            undo, ok = st.place(f, k)
            hit = ok and st.bound() <= cutoff and walk(f + 1)
            st.unplace(f, k, undo)
            if hit:
                return True
        return False

    try:
        walk(0)
    except _NodeLimit:
        return None
    return found


def _to_placement(st: _Search, assign: list[int]) -> Placement:
    return Placement({st.vm_ids[f]: st.servers[k].id for f, k in enumerate(assign)})


def lower_bound(partial: Mapping[int, int], s: Scenario) -> float:
    """Admissible bound on total power over completions of ``partial`` (vm id -> server id)."""
    st = _Search(s, symmetry_breaking=False)
    pos = {vid: k for k, vid in enumerate(st.vm_ids)}
    index = {srv.id: k for k, srv in enumerate(st.servers)}
    for vid, sid in sorted(partial.items()):
        f, k = pos[vid], index[sid]
        if not st.fits(f, k):
            return math.inf
        _, ok = st.place(f, k)
        if not ok:
            return math.inf
    return st.bound()


def brute_force_oracle(s: Scenario) -> SolveResult:
    """Enumerate every placement; independent of the branch-and-bound code path."""
    vms = sorted(s.vms, key=lambda v: v.id)
    servers = sorted(s.topology.servers, key=lambda x: x.id)
    n, m = len(vms), len(servers)
    if n > ORACLE_MAX_VMS or m > ORACLE_MAX_SERVERS:
        raise TooLargeForOracle(f"{n} vms x {m} servers exceeds {ORACLE_MAX_VMS} x {ORACLE_MAX_SERVERS}")
    if n == 0:
        return SolveResult(Status.OPTIMAL, Placement({}), PowerBreakdown.zero(), 1, 0.0)

    pos = {v.id: k for k, v in enumerate(vms)}
    cpu = np.array([v.cpu_demand for v in vms])
    mem = np.array([v.mem_demand_mb for v in vms])
    cap_cpu = np.array([x.cpu_capacity for x in servers])
    cap_mem = np.array([x.mem_capacity_mb for x in servers])
    rate = np.array([x.onu_rate_mbps for x in servers])
    idle = np.array([x.idle_power_w for x in servers])
    rng = np.array([x.max_power_w - x.idle_power_w for x in servers])
    per_mbps = np.array([x.onu_power_w / x.onu_rate_mbps for x in servers])
    rack_of = s.topology.rack_of()
    rack = np.array([rack_of[x.id] for x in servers])
    rack_cap = s.topology.rack_capacities()

    # rows in lexicographic order, VM 0 most significant
    grid = np.array(list(itertools.product(range(m), repeat=n)), dtype=np.int64)
    total = len(grid)
    onehot = grid[:, :, None] == np.arange(m)[None, None, :]  # (rows, n, m)
    load_cpu = np.einsum("rim,i->rm", onehot, cpu)
    load_mem = np.einsum("rim,i->rm", onehot, mem)
    active = onehot.any(axis=1)
    feasible = (load_cpu <= cap_cpu + CAP_TOL).all(axis=1) & (load_mem <= cap_mem).all(axis=1)

    onu = np.zeros((total, m), dtype=np.int64)
    wl = np.zeros((total, len(rack_cap)), dtype=np.int64)
    for t in s.traffic:
        a, b = grid[:, pos[t.src]], grid[:, pos[t.dst]]
        cross = a != b
        onu += t.rate_mbps * cross[:, None] * (onehot[:, pos[t.src], :] | onehot[:, pos[t.dst], :])
        ra, rb = rack[a], rack[b]
        for g in range(len(rack_cap)):
            wl[:, g] += t.rate_mbps * ((ra == g) != (rb == g))
    feasible &= (onu <= rate).all(axis=1)
    feasible &= (wl <= np.array(rack_cap)).all(axis=1)

    power = active @ idle + (load_cpu / cap_cpu) @ rng + onu @ per_mbps
    if not feasible.any():
        return SolveResult(Status.INFEASIBLE, None, PowerBreakdown.zero(), total, math.inf)
    best = power[feasible].min()
    row = int(np.flatnonzero(feasible & (power <= best + IMPROVE_TOL))[0])
    p = Placement({v.id: servers[int(grid[row, k])].id for k, v in enumerate(vms)})
    return SolveResult(Status.OPTIMAL, p, total_power(p, s), total, float(best))
