"""Solution containers shared by the exact solver, TAFS and the no-TA baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from tars.instance import PlacementInstance

CAPACITY_TOL = 1e-9


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIMED_OUT = "TimedOut"


@dataclass(frozen=True)
class FlowOutcome:
    delay: float  # ms
    deployment: float  # $/s
    penalty: float  # $/s


@dataclass
class Solution:
    """Per-flow ``(path index, TA node)`` choices; the fictive id means no TA."""

    assignment: dict[int, tuple[int, int]]
    open_tas: frozenset[int]
    objective_value: Optional[float]
    status: Status
    per_flow: dict[int, FlowOutcome] = field(default_factory=dict)
    rejected: tuple[int, ...] = ()
    instance_id: str = ""
    solver: str = ""
    runtime: float = 0.0

    @property
    def has_assignment(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.FEASIBLE) or (
            self.status is Status.TIMED_OUT and bool(self.assignment)
        )

    @property
    def avg_epdd(self) -> float:
        if not self.per_flow:
            return float("nan")
        return sum(o.delay for o in self.per_flow.values()) / len(self.per_flow)

    @property
    def total_deployment(self) -> float:
        return sum(o.deployment for o in self.per_flow.values())

    @property
    def total_penalty(self) -> float:
        return sum(o.penalty for o in self.per_flow.values())

    @property
    def total_cost(self) -> float:
        return self.total_deployment + self.total_penalty


@dataclass
class TafsSolution(Solution):
    ta_set: frozenset[int] = frozenset()  # nodes opened up front, possibly idle
    variant: str = ""


def flow_outcome(inst: "PlacementInstance", f: int, pidx: int, n: int) -> FlowOutcome:
    flow = inst.flows[f]
    d = inst.delta(f, pidx, n)
    return FlowOutcome(
        delay=d,
        deployment=inst.graph.node_cost(n) * flow.bandwidth,
        penalty=flow.penalty_rate * max(d - flow.sla_bound, 0.0),
    )


def make_solution(
    inst: "PlacementInstance",
    assignment: dict[int, tuple[int, int]],
    status: Status,
    objective_value: Optional[float] = None,
    rejected=(),
    solver: str = "",
    runtime: float = 0.0,
    cls=Solution,
    **extra,
) -> Solution:
    n_star = inst.graph.fictive_node_id
    assignment = dict(sorted(assignment.items()))
    per_flow = {f: flow_outcome(inst, f, p, n) for f, (p, n) in assignment.items()}
    open_tas = frozenset(n for _, n in assignment.values() if n != n_star)
    return cls(
        assignment=assignment,
        open_tas=open_tas,
        objective_value=objective_value,
        status=status,
        per_flow=per_flow,
        rejected=tuple(sorted(rejected)),
        instance_id=inst.instance_id,
        solver=solver,
        runtime=runtime,
        **extra,
    )


def check_constraints(inst: "PlacementInstance", sol: Solution, require_all: bool = True) -> list[str]:
    """Constraint violations of ``sol`` against the joint routing/placement model.

    ``require_all=False`` tolerates flows listed in ``sol.rejected`` (TAFS);
    the exact model has no rejection.
    """
    g = inst.graph
    n_star = g.fictive_node_id
    problems = []
    node_load: dict[int, float] = {}
    link_load: dict[int, float] = {}
    for f, flow in enumerate(inst.flows):
        if f not in sol.assignment:
            if require_all or f not in sol.rejected:
                problems.append(f"flow {f}: not assigned")
            continue
        pidx, n = sol.assignment[f]
        paths = inst.paths[f]
        if not 0 <= pidx < len(paths):
            problems.append(f"flow {f}: path index {pidx} out of range")
            continue
        p = paths[pidx]
        if not p.node_member(n):
            problems.append(f"flow {f}: TA node {n} is not on its path")
            continue
        if n != n_star:
            if n not in sol.open_tas:
                problems.append(f"flow {f}: TA node {n} is not open")
            node_load[n] = node_load.get(n, 0.0) + flow.bandwidth
        for lid in p.link_seq:
            link_load[lid] = link_load.get(lid, 0.0) + flow.bandwidth
    used = {n for _, n in sol.assignment.values() if n != n_star}
    for n in sorted(sol.open_tas - used):
        problems.append(f"node {n}: TA open but serving no flow")
    if len(sol.open_tas) > inst.mu:
        problems.append(f"{len(sol.open_tas)} TAs open, bound is {inst.mu}")
    for n, load in sorted(node_load.items()):
        cap = g.nodes[n].capacity
        if load > cap + CAPACITY_TOL * max(1.0, cap):
            problems.append(f"node {n}: load {load:.6g} exceeds capacity {cap:.6g}")
    for lid, load in sorted(link_load.items()):
        cap = g.links[lid].bandwidth
        if load > cap + CAPACITY_TOL * max(1.0, cap):
            link = g.links[lid]
            problems.append(f"link {link.u}-{link.v}: load {load:.6g} exceeds bandwidth {cap:.6g}")
    return problems
