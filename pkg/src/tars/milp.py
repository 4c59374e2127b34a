"""ILP models for joint routing and TA placement, exact solvers and LP export.

Variables are ``x_n`` (a TA runs on real node ``n``) and ``y_{f,p}^n`` (flow
``f`` uses path ``p`` with its TA on ``n``, the fictive node meaning no TA).
Rows:

* ``assign_f``     sum_{p,n} y = 1 for every flow
* ``couple_*``     y_{f,p}^n <= x_n for every real on-path ``n``
* ``open_n``       x_n <= sum_{f,p} y_{f,p}^n
* ``nodecap_n``    sum b_f y_{f,p}^n <= C_n
* ``linkcap_l``    sum b_f y_{f,p}^n over paths using ``l`` <= bandwidth
* ``mu``           sum_n x_n <= mu (real nodes only)

Objective 1 weighs ``y`` by ``delta / |F|``; objective 2 by
``alpha_n b_f + theta_f max(delta - sla, 0)``, a constant per variable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from tars.instance import PlacementInstance, Scenario, flow_order, no_ta_baseline
from tars.solution import Solution, Status, check_constraints, make_solution

OBJ_TOL = 1e-12


@dataclass(frozen=True)
class Row:
    name: str
    terms: tuple[tuple[int, float], ...]  # (column, coefficient)
    sense: str  # "<=", "="
    rhs: float


@dataclass
class IlpModel:
    instance: PlacementInstance
    objective_kind: int  # 1 or 2
    x_nodes: list[int]
    y_vars: list[tuple[int, int, int]]  # (flow, path index, node)
    cost: np.ndarray  # objective coefficient per column (x columns are 0)
    rows: list[Row]
    fictive_capacity: float = 0.0
    _y_index: dict = field(default=None, repr=False)

    def __post_init__(self):
        self._y_index = {key: self.num_x + i for i, key in enumerate(self.y_vars)}

    @property
    def num_x(self) -> int:
        return len(self.x_nodes)

    @property
    def num_cols(self) -> int:
        return self.num_x + len(self.y_vars)

    def x_col(self, n: int) -> int:
        return self.x_nodes.index(n)

    def y_col(self, f: int, pidx: int, n: int) -> int:
        return self._y_index[(f, pidx, n)]

    def col_name(self, col: int) -> str:
        if col < self.num_x:
            return f"x_n{self.x_nodes[col]}"
        f, p, n = self.y_vars[col - self.num_x]
        return f"y_f{f}_p{p}_n{n}"

    def objective_of(self, assignment: dict[int, tuple[int, int]]) -> float:
        return float(sum(self.cost[self.y_col(f, p, n)] for f, (p, n) in assignment.items()))


def objective_coefficient(inst: PlacementInstance, kind: int, f: int, pidx: int, n: int) -> float:
    d = inst.delta(f, pidx, n)
    if kind == 1:
        return d / len(inst.flows)
    flow = inst.flows[f]
    return inst.graph.node_cost(n) * flow.bandwidth + flow.penalty_rate * max(d - flow.sla_bound, 0.0)


def _build(inst: PlacementInstance, kind: int) -> IlpModel:
    g = inst.graph
    n_star = g.fictive_node_id
    x_nodes = list(g.real_nodes)
    y_vars = [(f, p, n) for f in range(len(inst.flows)) for p, n in inst.options(f)]
    nx_ = len(x_nodes)
    cost = np.zeros(nx_ + len(y_vars))
    for i, (f, p, n) in enumerate(y_vars):
        cost[nx_ + i] = objective_coefficient(inst, kind, f, p, n)

    rows: list[Row] = []
    assign: dict[int, list] = {}
    node_terms: dict[int, list] = {n: [] for n in x_nodes}
    node_use: dict[int, list] = {n: [] for n in x_nodes}
    link_terms: dict[int, list] = {l: [] for l in range(len(g.links))}
    couple = []
    for i, (f, p, n) in enumerate(y_vars):
        col = nx_ + i
        b = inst.flows[f].bandwidth
        assign.setdefault(f, []).append((col, 1.0))
        if n != n_star:
            couple.append(Row(f"couple_f{f}_p{p}_n{n}", ((col, 1.0), (n, -1.0)), "<=", 0.0))
            node_terms[n].append((col, b))
            node_use[n].append((col, -1.0))
        for lid in inst.paths[f][p].link_seq:
            link_terms[lid].append((col, b))
    for f in range(len(inst.flows)):
        rows.append(Row(f"assign_f{f}", tuple(assign[f]), "=", 1.0))
    rows.extend(couple)
    for n in x_nodes:
        rows.append(Row(f"open_n{n}", ((n, 1.0), *node_use[n]), "<=", 0.0))
    for n in x_nodes:
        rows.append(Row(f"nodecap_n{n}", tuple(node_terms[n]), "<=", float(g.nodes[n].capacity)))
    for lid, link in enumerate(g.links):
        rows.append(Row(f"linkcap_l{lid}", tuple(link_terms[lid]), "<=", float(link.bandwidth)))
    rows.append(Row("mu", tuple((n, 1.0) for n in x_nodes), "<=", float(inst.mu)))
    return IlpModel(
        instance=inst,
        objective_kind=kind,
        x_nodes=x_nodes,
        y_vars=y_vars,
        cost=cost,
        rows=rows,
        fictive_capacity=sum(fl.bandwidth for fl in inst.flows) + 1.0,
    )


def build_ilp1(inst: PlacementInstance) -> IlpModel:
    """Minimize the average EPDD over all flows."""
    return _build(inst, 1)


def build_ilp2(inst: PlacementInstance) -> IlpModel:
    """Minimize TA deployment cost plus SLA penalties."""
    return _build(inst, 2)


def build_model(inst: PlacementInstance, scenario=None) -> IlpModel:
    scenario = Scenario(scenario or inst.scenario)
    return build_ilp1(inst) if scenario is Scenario.BEST_EFFORT else build_ilp2(inst)


# ----------------------------------------------------------------------------
# depth-first branch and bound


def _flow_choices(model: IlpModel):
    """Per flow (descending bandwidth): options sorted by coefficient, no-TA first on ties."""
    inst = model.instance
    n_star = inst.fictive
    out = []
    for f in flow_order(inst):
        opts = []
        for p, n in inst.options(f):
            c = model.cost[model.y_col(f, p, n)]
            opts.append((c, n != n_star, n, inst.paths[f][p].node_seq, p))
        opts.sort()
        out.append((f, inst.flows[f].bandwidth, [(c, p, n, inst.paths[f][p].link_seq) for c, _, n, _, p in opts]))
    return out


def _solve_bnb(model: IlpModel, time_limit: Optional[float]) -> tuple[Status, Optional[dict]]:
    inst = model.instance
    g = inst.graph
    n_star = inst.fictive
    mu = inst.mu
    choices = _flow_choices(model)
    k = len(choices)
    # suffix sums of each flow's cheapest coefficient: capacity- and budget-relaxed bound
    min_cost = [opts[0][0] for _, _, opts in choices]
    suffix = [0.0] * (k + 1)
    for i in range(k - 1, -1, -1):
        suffix[i] = suffix[i + 1] + min_cost[i]

    link_rem = [l.bandwidth for l in g.links]
    node_rem = {n: g.nodes[n].capacity for n in g.real_nodes}
    open_count: dict[int, int] = {}
    picked: list[tuple[int, int]] = [None] * k
    best = {"cost": math.inf, "picks": None}
    deadline = None if time_limit is None else time.monotonic() + time_limit
    timed_out = False
    visits = 0

    def bound(i: int, partial: float) -> float:
        if len(open_count) < mu:
            return partial + suffix[i]
        # budget exhausted: remaining flows may only use open TAs or none
        total = partial
        for _, _, opts in choices[i:]:
            total += next(c for c, _, n, _ in opts if n == n_star or n in open_count)
        return total

    def dfs(i: int, partial: float) -> None:
        nonlocal timed_out, visits
        if timed_out:
            return
        visits += 1
        if deadline is not None and visits % 256 == 0 and time.monotonic() > deadline:
            timed_out = True
            return
        if i == k:
            if partial < best["cost"] - OBJ_TOL:
                best["cost"] = partial
                best["picks"] = list(picked)
            return
        if bound(i, partial) >= best["cost"] - OBJ_TOL:
            return
        f, b, opts = choices[i]
        for c, p, n, links in opts:
            if partial + c + suffix[i + 1] >= best["cost"] - OBJ_TOL:
                break  # options are sorted, nothing later can do better
            if any(link_rem[l] < b for l in links):
                continue
            real = n != n_star
            if real:
                if node_rem[n] < b:
                    continue
                if n not in open_count and len(open_count) >= mu:
                    continue
                node_rem[n] -= b
                open_count[n] = open_count.get(n, 0) + 1
            for l in links:
                link_rem[l] -= b
            picked[i] = (f, p, n)
            dfs(i + 1, partial + c)
            for l in links:
                link_rem[l] += b
            if real:
                node_rem[n] += b
                open_count[n] -= 1
                if not open_count[n]:
                    del open_count[n]
        picked[i] = None

    dfs(0, 0.0)
    if best["picks"] is None:
        return (Status.TIMED_OUT if timed_out else Status.INFEASIBLE), None
    assignment = {f: (p, n) for f, p, n in best["picks"]}
    return (Status.TIMED_OUT if timed_out else Status.OPTIMAL), assignment


# ----------------------------------------------------------------------------
# HiGHS backend


def _solve_highs(model: IlpModel, time_limit: Optional[float], mip_rel_gap: float) -> tuple[Status, Optional[dict]]:
    import highspy

    n = model.num_cols
    starts, index, value, lower, upper = [], [], [], [], []
    for row in model.rows:
        starts.append(len(index))
        for c, v in row.terms:
            index.append(c)
            value.append(v)
        lower.append(row.rhs if row.sense == "=" else -highspy.kHighsInf)
        upper.append(row.rhs)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", mip_rel_gap)
    h.setOptionValue("mip_abs_gap", 0.0)
    # root relaxations of these models are usually integral; presolve costs more than it saves
    h.setOptionValue("presolve", "off")
    h.setOptionValue("threads", 1)
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    cols = np.arange(n, dtype=np.int32)
    h.addVars(n, np.zeros(n), np.ones(n))
    # objective-2 coefficients are ~1e-5 $/s, close to the default dual
    # tolerance; solve the rescaled problem (same argmin) instead
    cost = np.asarray(model.cost, dtype=float)
    scale = float(np.max(np.abs(cost))) if n else 0.0
    h.changeColsCost(n, cols, cost / scale if scale > 0 else cost)
    h.changeColsIntegrality(n, cols, np.full(n, highspy.HighsVarType.kInteger))
    h.addRows(
        len(model.rows),
        np.asarray(lower, dtype=float),
        np.asarray(upper, dtype=float),
        len(index),
        np.asarray(starts, dtype=np.int32),
        np.asarray(index, dtype=np.int32),
        np.asarray(value, dtype=float),
    )
    h.run()
    ms = h.getModelStatus()
    if ms == highspy.HighsModelStatus.kInfeasible:
        return Status.INFEASIBLE, None
    has_solution = h.getInfo().primal_solution_status == 2  # kSolutionStatusFeasible
    if not has_solution:
        return Status.TIMED_OUT, None
    x = np.asarray(h.getSolution().col_value)
    assignment = {}
    for i in np.flatnonzero(x[model.num_x:] > 0.5):
        f, p, node = model.y_vars[i]
        assignment[f] = (p, node)
    status = Status.OPTIMAL if ms == highspy.HighsModelStatus.kOptimal else Status.TIMED_OUT
    return status, assignment


def _canonicalize(model: IlpModel, assignment: dict) -> dict:
    """Replace TAs that change nothing (same coefficient as no TA on the same path) by no TA.

    A TA at a path endpoint reproduces the no-TA delay exactly; solvers may
    still pick it on ties.  Dropping it frees capacity and TA budget and keeps
    the objective unchanged.
    """
    n_star = model.instance.fictive
    out = {}
    for f, (p, n) in assignment.items():
        if n != n_star and model.cost[model.y_col(f, p, n)] >= model.cost[model.y_col(f, p, n_star)]:
            n = n_star
        out[f] = (p, n)
    return out


BNB_MAX_FLOWS = 12


def solve_exact(
    model: IlpModel,
    time_limit: Optional[float] = None,
    backend: str = "auto",
    mip_rel_gap: float = 1e-9,
) -> Solution:
    """Solve ``model`` to proven optimality (or best incumbent on timeout).

    ``backend`` is ``"bnb"`` (in-repo depth-first branch and bound),
    ``"highs"`` (HiGHS through highspy) or ``"auto"``: branch and bound up to
    ``BNB_MAX_FLOWS`` flows, HiGHS beyond.
    """
    inst = model.instance
    if backend == "auto":
        backend = "bnb" if len(inst.flows) <= BNB_MAX_FLOWS else "highs"
    start = time.perf_counter()
    if backend == "bnb":
        status, assignment = _solve_bnb(model, time_limit)
    elif backend == "highs":
        status, assignment = _solve_highs(model, time_limit, mip_rel_gap)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    runtime = time.perf_counter() - start
    if assignment is None:
        return make_solution(inst, {}, status, None, solver=f"exact-{backend}", runtime=runtime)
    assignment = _canonicalize(model, assignment)
    return make_solution(
        inst, assignment, status, model.objective_of(assignment), solver=f"exact-{backend}", runtime=runtime
    )


# ----------------------------------------------------------------------------
# LP export


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _terms(model: IlpModel, terms, per_line: int = 6) -> list[str]:
    parts = []
    for i, (c, v) in enumerate(terms):
        sign = "-" if v < 0 else "+"
        body = f"{_fmt(abs(v))} {model.col_name(c)}" if abs(v) != 1 else model.col_name(c)
        if i == 0:
            parts.append(f"{'-' if v < 0 else ''}{body}")
        else:
            parts.append(f"{sign} {body}")
    lines = [" ".join(parts[i : i + per_line]) for i in range(0, len(parts), per_line)]
    return lines or ["0 " + model.col_name(0)]


def lp_text(model: IlpModel) -> str:
    out = [f"\\ tars ILP{model.objective_kind} instance {model.instance.instance_id}", "Minimize"]
    obj = [(c, float(model.cost[c])) for c in range(model.num_x, model.num_cols) if model.cost[c] != 0]
    lines = _terms(model, obj)
    out.append(" obj: " + lines[0])
    out.extend("   " + ln for ln in lines[1:])
    out.append("Subject To")
    for row in model.rows:
        terms = row.terms if row.terms else ((0, 0.0),)
        lines = _terms(model, terms)
        lines[-1] += f" {row.sense} {_fmt(row.rhs)}"
        out.append(f" {row.name}: " + lines[0])
        out.extend("   " + ln for ln in lines[1:])
    out.append("Binary")
    names = [model.col_name(c) for c in range(model.num_cols)]
    for i in range(0, len(names), 8):
        out.append(" " + " ".join(names[i : i + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: IlpModel, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(lp_text(model))


# ----------------------------------------------------------------------------
# evaluation


@dataclass
class Metrics:
    avg_epdd: float
    baseline_avg_epdd: float
    improvement_pct: float
    deployment_cost: float
    penalty_cost: float
    total_cost: float
    baseline_total_cost: float
    savings_pct: float
    n_flows: int
    n_assigned: int
    n_rejected: int
    n_tas: int
    flow_improvement_pct: dict[int, float]
    violations: list[str]
    rejection_penalty: float = 0.0


def rejection_penalty(inst: PlacementInstance, rejected) -> float:
    """theta_f times the worst no-TA EPDD among the flow's paths, summed over ``rejected``."""
    n_star = inst.fictive
    total = 0.0
    for f in rejected:
        cap = max(inst.delta(f, p, n_star) for p in range(len(inst.paths[f])))
        total += inst.flows[f].penalty_rate * cap
    return total


def evaluate(inst: PlacementInstance, sol: Solution, baseline: Optional[Solution] = None) -> Metrics:
    """Delay/cost metrics of ``sol`` and its improvement over the no-TA baseline.

    Rejected flows are excluded from averages; the per-flow improvement covers
    flows assigned in both solutions.
    """
    if baseline is None:
        baseline = no_ta_baseline(inst)
    violations = check_constraints(inst, sol, require_all=False)
    improvements = {}
    for f, out in sol.per_flow.items():
        ref = baseline.per_flow.get(f)
        if ref is not None and ref.delay > 0:
            improvements[f] = 100.0 * (ref.delay - out.delay) / ref.delay
    avg = sol.avg_epdd
    base = baseline.avg_epdd
    total = sol.total_cost
    base_total = baseline.total_cost
    return Metrics(
        avg_epdd=avg,
        baseline_avg_epdd=base,
        improvement_pct=100.0 * (base - avg) / base if base > 0 else 0.0,
        deployment_cost=sol.total_deployment,
        penalty_cost=sol.total_penalty,
        total_cost=total,
        baseline_total_cost=base_total,
        savings_pct=100.0 * (base_total - total) / base_total if base_total > 0 else 0.0,
        n_flows=len(inst.flows),
        n_assigned=len(sol.assignment),
        n_rejected=len(sol.rejected),
        n_tas=len(sol.open_tas),
        flow_improvement_pct=improvements,
        violations=violations,
        rejection_penalty=rejection_penalty(inst, sol.rejected),
    )
