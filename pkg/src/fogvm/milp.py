"""Solver-agnostic MILP for power-minimal VM placement.

Variables (binary, bounds [0, 1], so the instance is its own LP relaxation):

    W_i{vm}_s{server}              vm placed on server
    A_s{server}                    server active
    Q_i{i}_f{f}_s{s}_d{d}          W[i,s] AND W[f,d], only for pairs with traffic

``Q`` with s == d is co-location of i and f on s. The auxiliary product
variable over an undefined ``sigma`` that appears in some write-ups of this
model is read as this diagonal of ``Q``; no separate variable is created.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import FormulationTooLarge, InconsistentLinearization, NonIntegralSolution, Violation
from .model import Placement, Scenario
from .power import traffic_loads

BIG_L = 1000
DEFAULT_Q_CAP = 2_000_000
INT_TOL = 1e-6


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "binary"  # or "continuous"
    lower: float = 0.0
    upper: float = 1.0


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[int, float], ...]
    sense: str  # "<=", "=", ">="
    rhs: float

    def lhs(self, x: Sequence[float]) -> float:
        return sum(c * x[j] for j, c in self.terms)

    def satisfied(self, x: Sequence[float], tol: float = 1e-6) -> bool:
        v = self.lhs(x)
        if self.sense == "<=":
            return v <= self.rhs + tol
        if self.sense == ">=":
            return v >= self.rhs - tol
        return abs(v - self.rhs) <= tol


@dataclass(frozen=True)
class FormulationStats:
    n_binary: int
    n_constraints: int
    n_traffic_pairs: int


@dataclass(frozen=True)
class MilpInstance:
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[int, float], ...]
    direction: str = "minimize"
    index: Mapping[str, int] = field(default_factory=dict, compare=False, repr=False)

    def var(self, name: str) -> int:
        return self.index[name]

    def objective_value(self, x: Sequence[float]) -> float:
        return sum(c * x[j] for j, c in self.objective)

    def is_feasible(self, x: Sequence[float], tol: float = 1e-6) -> bool:
        if any(not (v.lower - tol <= x[j] <= v.upper + tol) for j, v in enumerate(self.variables)):
            return False
        return all(c.satisfied(x, tol) for c in self.constraints)

    def stats(self) -> FormulationStats:
        n_q = sum(v.name.startswith("Q_") for v in self.variables)
        m = sum(v.name.startswith("A_") for v in self.variables)
        return FormulationStats(
            n_binary=sum(v.kind == "binary" for v in self.variables),
            n_constraints=len(self.constraints),
            n_traffic_pairs=n_q // (m * m) if m else 0,
        )


def w_name(i: int, s: int) -> str:
    return f"W_i{i}_s{s}"


def a_name(s: int) -> str:
    return f"A_s{s}"


def q_name(i: int, f: int, s: int, d: int) -> str:
    return f"Q_i{i}_f{f}_s{s}_d{d}"


class _Builder:
    def __init__(self):
        self.variables: list[Variable] = []
        self.index: dict[str, int] = {}
        self.constraints: list[Constraint] = []

    def add_var(self, name: str) -> int:
        self.index[name] = len(self.variables)
        self.variables.append(Variable(name))
        return self.index[name]

    def add(self, name: str, terms: Iterable[tuple[int, float]], sense: str, rhs: float) -> None:
        merged: dict[int, float] = {}
        for j, c in terms:
            merged[j] = merged.get(j, 0.0) + c
        self.constraints.append(Constraint(name, tuple(merged.items()), sense, float(rhs)))


def build_milp(s: Scenario, q_cap: int = DEFAULT_Q_CAP) -> MilpInstance:
    servers = s.topology.servers
    sids = [srv.id for srv in servers]
    vms = list(s.vms)
    pairs = [(t.src, t.dst, t.rate_mbps) for t in s.traffic if t.rate_mbps > 0]
    m = len(servers)
    if len(pairs) * m * m > q_cap:
        raise FormulationTooLarge(f"{len(pairs)} traffic pairs x {m}^2 servers exceeds cap {q_cap}")

    b = _Builder()
    W = {(vm.id, sid): b.add_var(w_name(vm.id, sid)) for vm in vms for sid in sids}
    A = {sid: b.add_var(a_name(sid)) for sid in sids}
    Q = {
        (i, f, sd, dd): b.add_var(q_name(i, f, sd, dd))
        for i, f, _ in pairs for sd in sids for dd in sids
    }

    for vm in vms:
        b.add(f"assign_i{vm.id}", [(W[vm.id, sid], 1.0) for sid in sids], "=", 1)

    for srv in servers:
        b.add(f"mem_s{srv.id}", [(W[vm.id, srv.id], vm.mem_demand_mb) for vm in vms], "<=", srv.mem_capacity_mb)
    for srv in servers:
        b.add(f"cpu_s{srv.id}", [(W[vm.id, srv.id], vm.cpu_demand) for vm in vms], "<=", srv.cpu_capacity)

    # n <= L gives the same feasible set with a tighter relaxation
    big_l = min(BIG_L, len(vms))
    for sid in sids:
        ws = [(W[vm.id, sid], 1.0) for vm in vms]
        b.add(f"act_up_s{sid}", ws + [(A[sid], -float(big_l))], "<=", 0)
        b.add(f"act_lo_s{sid}", [(A[sid], 1.0)] + [(j, -c) for j, c in ws], "<=", 0)

    for i, f, _ in pairs:
        for sd in sids:
            for dd in sids:
                q = Q[i, f, sd, dd]
                tag = f"i{i}_f{f}_s{sd}_d{dd}"
                b.add(f"and1_{tag}", [(q, 1.0), (W[i, sd], -1.0)], "<=", 0)
                b.add(f"and2_{tag}", [(q, 1.0), (W[f, dd], -1.0)], "<=", 0)
                b.add(f"and3_{tag}", [(q, 1.0), (W[i, sd], -1.0), (W[f, dd], -1.0)], ">=", -1)

    def onu_terms(sid: int) -> list[tuple[int, float]]:
        terms = []
        for i, f, r in pairs:
            for dd in sids:
                if dd != sid:
                    terms.append((Q[i, f, sid, dd], float(r)))
                    terms.append((Q[i, f, dd, sid], float(r)))
        return terms

    for srv in servers:
        b.add(f"onu_s{srv.id}", onu_terms(srv.id), "<=", srv.onu_rate_mbps)

    rack_of = s.topology.rack_of()
    for g, cap in enumerate(s.topology.rack_capacities()):
        terms = [
            (Q[i, f, sd, dd], float(r))
            for i, f, r in pairs for sd in sids for dd in sids
            if (rack_of[sd] == g) != (rack_of[dd] == g)
        ]
        b.add(f"wavelength_g{g}", terms, "<=", cap)

    obj: dict[int, float] = {}
    for srv in servers:
        obj[A[srv.id]] = srv.idle_power_w
        for vm in vms:
            obj[W[vm.id, srv.id]] = srv.dynamic_range_w * vm.cpu_demand / srv.cpu_capacity
        coeff = srv.onu_power_w / srv.onu_rate_mbps
        for j, r in onu_terms(srv.id):
            obj[j] = obj.get(j, 0.0) + coeff * r

    return MilpInstance(tuple(b.variables), tuple(b.constraints), tuple(obj.items()), "minimize", b.index)


def placement_point(inst: MilpInstance, p: Placement, s: Scenario) -> list[float]:
    """The integral MILP point induced by a total placement."""
    x = [0.0] * len(inst.variables)
    for vm in s.vms:
        x[inst.var(w_name(vm.id, p[vm.id]))] = 1.0
    for sid in set(p[vm.id] for vm in s.vms):
        x[inst.var(a_name(sid))] = 1.0
    for t in s.traffic:
        name = q_name(t.src, t.dst, p[t.src], p[t.dst])
        if name in inst.index:
            x[inst.var(name)] = 1.0
    return x


def extract_placement(inst: MilpInstance, values: Mapping[str, float] | Sequence[float], s: Scenario) -> Placement:
    if isinstance(values, Mapping):
        x = [float(values.get(v.name, 0.0)) for v in inst.variables]
    else:
        x = [float(v) for v in values]
    for j, v in enumerate(inst.variables):
        if v.kind == "binary" and min(abs(x[j]), abs(x[j] - 1.0)) > INT_TOL:
            raise NonIntegralSolution(f"{v.name} = {x[j]}")
    bit = [round(v) for v in x]

    sids = [srv.id for srv in s.topology.servers]
    assignment = {}
    for vm in s.vms:
        on = [sid for sid in sids if bit[inst.var(w_name(vm.id, sid))] == 1]
        if len(on) != 1:
            raise NonIntegralSolution(f"vm {vm.id} assigned to {len(on)} servers")
        assignment[vm.id] = on[0]

    for name, j in inst.index.items():
        if not name.startswith("Q_"):
            continue
        i, f, sd, dd = (int(part[1:]) for part in name[2:].split("_"))
        expected = int(assignment[i] == sd and assignment[f] == dd)
        if bit[j] != expected:
            raise InconsistentLinearization(f"{name} = {bit[j]}, expected {expected}")
    return Placement(assignment)


def check_feasibility(p: Placement, s: Scenario) -> list[Violation]:
    """Every capacity violation of a total placement; empty means feasible."""
    out: list[Violation] = []
    cpu: dict[int, float] = {}
    mem: dict[int, int] = {}
    for vm in s.vms:
        sid = p[vm.id]
        cpu[sid] = cpu.get(sid, 0.0) + vm.cpu_demand
        mem[sid] = mem.get(sid, 0) + vm.mem_demand_mb
    loads = traffic_loads(p, s)
    for srv in s.topology.servers:
        used_mem = mem.get(srv.id, 0)
        if used_mem > srv.mem_capacity_mb:
            out.append(Violation("memory", srv.id, "memory capacity exceeded", srv.mem_capacity_mb - used_mem))
        used_cpu = cpu.get(srv.id, 0.0)
        if used_cpu > srv.cpu_capacity + 1e-9:
            out.append(Violation("cpu", srv.id, "cpu capacity exceeded", srv.cpu_capacity - used_cpu))
        t = loads.per_server_mbps[srv.id]
        if t > srv.onu_rate_mbps:
            out.append(Violation("onu", srv.id, "onu data rate exceeded", srv.onu_rate_mbps - t))
    rack_of = s.topology.rack_of()
    for g, cap in enumerate(s.topology.rack_capacities()):
        crossing = sum(r for (a, b), r in loads.inter_server_mbps.items() if (rack_of[a] == g) != (rack_of[b] == g))
        if crossing > cap:
            out.append(Violation("wavelength", g, "rack wavelength capacity exceeded", cap - crossing))
    return out


# -- LP format ---------------------------------------------------------------

def _fmt(c: float) -> str:
    if c == 0:
        c = 0.0
    return repr(float(c)) if not float(c).is_integer() else str(int(c))


def _expr(terms: Sequence[tuple[int, float]], variables: Sequence[Variable]) -> str:
    if not terms:
        return "0 " + variables[0].name if variables else "0"
    parts = []
    for k, (j, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = _fmt(abs(c))
        if k == 0:
            parts.append(f"{'-' if c < 0 else ''}{mag} {variables[j].name}")
        else:
            parts.append(f"{sign} {mag} {variables[j].name}")
    lines, cur = [], ""
    for part in parts:
        if len(cur) + len(part) > 240:
            lines.append(cur)
            cur = "   "
        cur += (" " if cur.strip() else "") + part
    lines.append(cur)
    return "\n".join(lines)


def write_lp(inst: MilpInstance) -> str:
    """Render the instance in CPLEX LP text format."""
    out = ["\\ fogvm placement model", "Minimize"]
    out.append(" obj: " + _expr([t for t in inst.objective if t[1] != 0], inst.variables))
    out.append("Subject To")
    for c in inst.constraints:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        terms = [t for t in c.terms if t[1] != 0]
        out.append(f" {c.name}: {_expr(terms, inst.variables)} {sense} {_fmt(c.rhs)}")
    out.append("Bounds")
    for v in inst.variables:
        out.append(f" {_fmt(v.lower)} <= {v.name} <= {_fmt(v.upper)}")
    binaries = [v.name for v in inst.variables if v.kind == "binary"]
    if binaries:
        out.append("Binary")
        for k in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"

