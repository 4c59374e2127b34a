"""Small-instance builders and brute-force oracles shared by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from tars.epdd import DEFAULT_DELAY_MODEL
from tars.instance import Flow, PlacementInstance, Scenario, compute_delta_table
from tars.network import LinkSpec, NetworkGraph, NodeSpec
from tars.paths import build_path, k_shortest_paths
from tars.solution import check_constraints, make_solution, Status


def graph(n_nodes, links, capacity=100.0, cost=1e-4):
    """``links``: iterable of ``(u, v, bandwidth, delay, loss)``."""
    caps = capacity if isinstance(capacity, (list, tuple)) else [capacity] * n_nodes
    costs = cost if isinstance(cost, (list, tuple)) else [cost] * n_nodes
    nodes = tuple(NodeSpec(i, f"n{i}", None, caps[i], costs[i]) for i in range(n_nodes))
    return NetworkGraph(nodes, tuple(LinkSpec(*l) for l in links))


def triangle(loss=0.0):
    return graph(3, [(0, 1, 100.0, 5.0, loss), (1, 2, 100.0, 5.0, loss), (0, 2, 100.0, 11.0, loss)])


def instance(g, flows, paths=None, mu=None, scenario=Scenario.BEST_EFFORT, k=3, cfg=DEFAULT_DELAY_MODEL):
    """``flows``: ``(src, dst, bw[, sla[, theta]])``; ``paths`` maps flow -> node sequences."""
    fl = []
    for i, spec in enumerate(flows):
        s, d, bw = spec[:3]
        sla = spec[3] if len(spec) > 3 else 1e9
        theta = spec[4] if len(spec) > 4 else 0.0
        fl.append(Flow(i, s, d, bw, sla, theta))
    ps = {}
    for f in fl:
        if paths and f.id in paths:
            ps[f.id] = tuple(build_path(g, seq) for seq in paths[f.id])
        else:
            ps[f.id] = tuple(k_shortest_paths(g, f.src, f.dst, k))
    table = compute_delta_table(g, fl, ps, cfg)
    return PlacementInstance(g, fl, ps, table, g.num_nodes if mu is None else mu, Scenario(scenario), cfg)


def random_connected_graph(rng, n_nodes, extra_links, cap_range=(1.0, 6.0), link_bw_range=(1.0, 6.0)):
    """Spanning tree plus ``extra_links`` random chords."""
    pairs = set()
    for v in range(1, n_nodes):
        pairs.add((int(rng.integers(0, v)), v))
    all_pairs = [(u, v) for u in range(n_nodes) for v in range(u + 1, n_nodes) if (u, v) not in pairs]
    rng.shuffle(all_pairs)
    pairs.update(all_pairs[:extra_links])
    links = [
        (u, v, float(rng.uniform(*link_bw_range)), float(rng.uniform(1.0, 10.0)), float(rng.uniform(0.0, 0.2)))
        for u, v in sorted(pairs)
    ]
    caps = [float(rng.uniform(*cap_range)) for _ in range(n_nodes)]
    costs = [float(rng.uniform(1e-5, 1e-4)) for _ in range(n_nodes)]
    return graph(n_nodes, links, caps, costs)


def random_micro_instance(seed, max_nodes=6, max_flows=4, max_paths=3):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, max_nodes + 1))
    g = random_connected_graph(rng, n, int(rng.integers(0, n)))
    flows = []
    for _ in range(int(rng.integers(1, max_flows + 1))):
        s, d = (int(x) for x in rng.choice(n, size=2, replace=False))
        flows.append((s, d, float(rng.uniform(0.5, 3.0)), float(rng.uniform(2.0, 30.0)), float(rng.uniform(0, 1e-4))))
    scenario = Scenario.QOS if rng.random() < 0.5 else Scenario.BEST_EFFORT
    return instance(g, flows, mu=int(rng.integers(0, n + 1)), scenario=scenario, k=int(rng.integers(1, max_paths + 1)))


def enumerate_optimum(model):
    """Brute force over every assignment: ``(objective, assignment)`` or ``(None, None)``."""
    inst = model.instance
    per_flow = [list(inst.options(f)) for f in range(len(inst.flows))]
    best, best_assign = math.inf, None
    for combo in itertools.product(*per_flow):
        assignment = dict(enumerate(combo))
        sol = make_solution(inst, assignment, Status.FEASIBLE)
        if check_constraints(inst, sol):
            continue
        obj = model.objective_of(assignment)
        if obj < best - 1e-15:
            best, best_assign = obj, assignment
    if best_assign is None:
        return None, None
    return best, best_assign
