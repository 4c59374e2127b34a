"""TAFS: greedy joint routing and TA selection over benefit-sorted (path, node) pairs.

TAFS1 ranks pairs by EPDD reduction, TAFS2 by SLA-penalty reduction.  The
top-``mu`` nodes by average benefit are opened up front; flows are then served
largest first, each taking the first pair in its list that fits the residual
link and node capacities.  Flows that fit nowhere are rejected.

A benefit compares a (path, node) choice against a no-TA reference:

``path``
    no TA on the same path, i.e. the gain of the TA alone;
``best``
    no TA on the flow's best path.  Sorting pairs by this benefit is sorting
    by the resulting EPDD (or penalty), so routing and placement are judged on
    one scale.  This is what lets the greedy pass track the ILP optimum.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

from tars.instance import PlacementInstance, flow_order
from tars.solution import Status, TafsSolution, make_solution


class Variant(str, Enum):
    TAFS1 = "tafs1"
    TAFS2 = "tafs2"


class Reference(str, Enum):
    PATH = "path"  # no TA on the same path
    BEST = "best"  # the flow's best no-TA path


@dataclass(frozen=True)
class TafsOptions:
    """Knobs for the benefit definitions.

    Both pair sorting and node ranking use the best-path reference by
    default, and TAFS2 nets out the deployment cost ``alpha_n * b_f``.
    ``LITERAL`` gives the same-path, gross-benefit definitions.
    """

    pair_reference: Reference = Reference.BEST
    rank_reference: Reference = Reference.BEST
    net_of_cost: bool = True  # TAFS2 only
    per: str = "pairs"  # node-ranking average: "pairs" or "flows"

    def __post_init__(self):
        object.__setattr__(self, "pair_reference", Reference(self.pair_reference))
        object.__setattr__(self, "rank_reference", Reference(self.rank_reference))
        if self.per not in ("pairs", "flows"):
            raise ValueError(f"unknown averaging mode {self.per!r}")


DEFAULT_OPTIONS = TafsOptions()
LITERAL = TafsOptions(Reference.PATH, Reference.PATH, net_of_cost=False)


def no_ta_delay(inst: PlacementInstance, f: int, p: int, reference=Reference.PATH) -> float:
    n_star = inst.fictive
    if Reference(reference) is Reference.PATH:
        return inst.delta(f, p, n_star)
    return min(inst.delta(f, q, n_star) for q in range(len(inst.paths[f])))


def benefit1(inst: PlacementInstance, f: int, p: int, n: int, reference=Reference.PATH) -> float:
    """EPDD reduction (ms) of routing ``f`` on ``p`` with its TA on ``n``."""
    return no_ta_delay(inst, f, p, reference) - inst.delta(f, p, n)


def benefit2(
    inst: PlacementInstance, f: int, p: int, n: int, reference=Reference.PATH, net_of_cost: bool = False
) -> float:
    """SLA-penalty reduction ($/s), clamped at zero.

    With ``net_of_cost`` the TA's deployment cost ``alpha_n * b_f`` is
    subtracted before clamping.
    """
    flow = inst.flows[f]
    theta, sla = flow.penalty_rate, flow.sla_bound
    without = theta * max(0.0, no_ta_delay(inst, f, p, reference) - sla)
    with_ta = theta * max(0.0, inst.delta(f, p, n) - sla)
    if net_of_cost:
        with_ta += inst.graph.node_cost(n) * flow.bandwidth
    return max(0.0, without - with_ta)


def _benefit(inst, variant, f, p, n, reference, opts: TafsOptions) -> float:
    if variant is Variant.TAFS1:
        return benefit1(inst, f, p, n, reference)
    return benefit2(inst, f, p, n, reference, opts.net_of_cost)


@dataclass(frozen=True)
class Pair:
    path: int
    node: int
    benefit: float


def pair_list(inst: PlacementInstance, f: int, variant, opts: TafsOptions = DEFAULT_OPTIONS) -> list[Pair]:
    """All (path, node) pairs of ``f`` by descending benefit.

    Ties prefer no TA, then (TAFS2 only) the cheaper deployment, then lower
    EPDD, lower node id and the lexicographically smaller path.
    """
    variant = Variant(variant)
    n_star = inst.fictive
    bw = inst.flows[f].bandwidth
    keyed = []
    for p, n in inst.options(f):
        b = _benefit(inst, variant, f, p, n, opts.pair_reference, opts)
        deploy = inst.graph.node_cost(n) * bw if variant is Variant.TAFS2 else 0.0
        key = (-b, n != n_star, deploy, inst.delta(f, p, n), n, inst.paths[f][p].node_seq)
        keyed.append((key, Pair(p, n, b)))
    keyed.sort(key=lambda kv: kv[0])
    return [pair for _, pair in keyed]


def node_average_benefits(inst: PlacementInstance, variant, opts: TafsOptions = DEFAULT_OPTIONS) -> dict[int, float]:
    """Average benefit of hosting a TA on each real node.

    ``opts.per == "pairs"`` averages over every (flow, path) whose path
    visits the node; ``"flows"`` first averages per flow, then over flows.
    Nodes on no candidate path average 0.
    """
    variant = Variant(variant)
    sums = {n: 0.0 for n in inst.graph.real_nodes}
    counts = {n: 0 for n in inst.graph.real_nodes}
    for f in range(len(inst.flows)):
        per_flow: dict[int, list[float]] = {}
        for p, path in enumerate(inst.paths[f]):
            for n in path.node_seq:
                b = _benefit(inst, variant, f, p, n, opts.rank_reference, opts)
                # against the best path a detour scores negative; a site only
                # earns credit for the improvement it can actually deliver
                per_flow.setdefault(n, []).append(max(b, 0.0))
        for n, vals in per_flow.items():
            if opts.per == "pairs":
                sums[n] += sum(vals)
                counts[n] += len(vals)
            else:
                sums[n] += sum(vals) / len(vals)
                counts[n] += 1
    return {n: (sums[n] / counts[n] if counts[n] else 0.0) for n in sums}


def rank_ta_nodes(inst: PlacementInstance, variant, opts: TafsOptions = DEFAULT_OPTIONS) -> list[int]:
    """Real nodes by descending average benefit, ties to the lower id.

    Nodes on no candidate path come last: with the best-path reference an
    average can be negative, so their 0 alone would not put them there.
    """
    avg = node_average_benefits(inst, variant, opts)
    on_path = {n for paths in inst.paths.values() for p in paths for n in p.node_seq}
    return sorted(avg, key=lambda n: (n not in on_path, -avg[n], n))


def run_tafs(inst: PlacementInstance, variant, opts: TafsOptions = DEFAULT_OPTIONS) -> TafsSolution:
    variant = Variant(variant)
    start = time.perf_counter()
    g = inst.graph
    n_star = inst.fictive
    link_rem = [l.bandwidth for l in g.links]
    node_rem = {n: g.nodes[n].capacity for n in g.real_nodes}
    tas = frozenset(rank_ta_nodes(inst, variant, opts)[: inst.mu])
    assignment, rejected = {}, []
    for f in flow_order(inst):
        b = inst.flows[f].bandwidth
        for pair in pair_list(inst, f, variant, opts):
            n = pair.node
            if n != n_star and n not in tas:
                continue
            links = inst.paths[f][pair.path].link_seq
            if any(link_rem[l] < b for l in links):
                continue
            if n != n_star:
                if node_rem[n] < b:
                    continue
                node_rem[n] -= b
            for l in links:
                link_rem[l] -= b
            assignment[f] = (pair.path, n)
            break
        else:
            rejected.append(f)
    runtime = time.perf_counter() - start
    sol = make_solution(
        inst,
        assignment,
        Status.FEASIBLE,
        rejected=rejected,
        solver=variant.value,
        runtime=runtime,
        cls=TafsSolution,
        ta_set=tas,
        variant=variant.value,
    )
    sol.objective_value = objective(inst, sol, 1 if variant is Variant.TAFS1 else 2)
    return sol


def objective(inst: PlacementInstance, sol, kind: int) -> float:
    """ILP objective evaluated on ``sol``'s assigned flows.

    Objective 1 divides by the number of assigned flows so that rejections do
    not make the average look better.
    """
    if kind == 1:
        return sol.avg_epdd
    return sol.total_cost
