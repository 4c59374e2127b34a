import math
import re

import pytest

from tars.instance import generate_instance, GeneratorConfig, no_ta_baseline
from tars.milp import (
    build_ilp1,
    build_ilp2,
    build_model,
    evaluate,
    export_lp,
    lp_text,
    objective_coefficient,
    solve_exact,
)
from tars.network import abilene
from tars.solution import Status, check_constraints

from helpers import enumerate_optimum, graph, instance, random_micro_instance


def two_path_instance(loss=0.05, mu=None):
    # two 3-node paths 0-1-3 and 0-2-3
    g = graph(4, [(0, 1, 10.0, 5.0, loss), (1, 3, 10.0, 5.0, loss), (0, 2, 10.0, 6.0, loss), (2, 3, 10.0, 6.0, loss)])
    return instance(g, [(0, 3, 1.0)], paths={0: [(0, 1, 3), (0, 2, 3)]}, mu=mu)


def test_ilp1_variable_counts():
    inst = two_path_instance()
    m = build_ilp1(inst)
    assert m.num_x == 4
    # every on-path node (3 per path) plus the fictive node, per path
    assert len(m.y_vars) == 2 * (3 + 1)
    assert sum(1 for r in m.rows if r.name.startswith("assign_")) == 1
    assert sum(1 for r in m.rows if r.name.startswith("nodecap_")) == 4
    assert sum(1 for r in m.rows if r.name.startswith("linkcap_")) == 4
    couple = [r for r in m.rows if r.name.startswith("couple_")]
    assert len(couple) == 6  # none for the fictive node
    mu_row = next(r for r in m.rows if r.name == "mu")
    assert {c for c, _ in mu_row.terms} == set(range(4))  # real nodes only


def test_ilp1_coefficients_are_delta_over_flows():
    inst = instance(graph(3, [(0, 1, 9.0, 3.0, 0.1), (1, 2, 9.0, 4.0, 0.1)]), [(0, 2, 1.0), (2, 0, 2.0)])
    m = build_ilp1(inst)
    for col, (f, p, n) in enumerate(m.y_vars, start=m.num_x):
        assert m.cost[col] == inst.delta(f, p, n) / 2


def test_mu_zero_forces_best_no_ta_path():
    inst = two_path_instance(mu=0)
    sol = solve_exact(build_ilp1(inst))
    assert sol.status is Status.OPTIMAL
    assert sol.assignment[0] == (0, inst.fictive)
    assert sol.open_tas == frozenset()


def test_lossless_optimum_is_shortest_path_regardless_of_mu():
    for mu in (0, 2, 4):
        inst = two_path_instance(loss=0.0, mu=mu)
        sol = solve_exact(build_ilp1(inst))
        assert sol.objective_value == 10.0
        assert sol.open_tas == frozenset()


def test_ta_helps_with_loss():
    inst = two_path_instance(loss=0.05, mu=1)
    sol = solve_exact(build_ilp1(inst))
    assert sol.assignment[0] == (0, 1)
    assert sol.objective_value < inst.delta(0, 0, inst.fictive)


def test_ilp2_meeting_sla_costs_nothing():
    g = graph(3, [(0, 1, 10.0, 5.0, 0.01), (1, 2, 10.0, 5.0, 0.01)], cost=1e-4)
    inst = instance(g, [(0, 2, 1.0, 100.0, 5e-5)], scenario="qos")
    sol = solve_exact(build_ilp2(inst))
    assert sol.assignment[0][1] == inst.fictive
    assert sol.objective_value == 0.0


def test_ilp2_zero_penalty_deploys_nothing():
    g = graph(3, [(0, 1, 10.0, 5.0, 0.2), (1, 2, 10.0, 5.0, 0.2)], cost=1e-4)
    inst = instance(g, [(0, 2, 1.0, 1.0, 0.0), (2, 0, 2.0, 1.0, 0.0)], scenario="qos")
    sol = solve_exact(build_ilp2(inst))
    assert sol.open_tas == frozenset()
    assert sol.objective_value == 0.0


def test_ilp2_ta_chosen_when_penalty_saving_exceeds_cost():
    # 10 ms over the SLA without a TA (penalty 5e-4 $/s); with a TA the SLA
    # is met and the deployment costs alpha * b = 3e-4 $/s
    g = graph(3, [(0, 1, 10.0, 50.0, 0.1), (1, 2, 10.0, 50.0, 0.1)], cost=[0.0, 3e-4, 0.0])
    inst = instance(g, [(0, 2, 1.0)], scenario="qos")
    no_ta = inst.delta(0, 0, inst.fictive)
    with_ta = inst.delta(0, 0, 1)
    sla = no_ta - 10.0
    assert with_ta < sla
    inst = instance(g, [(0, 2, 1.0, sla, 5e-5)], scenario="qos")
    assert objective_coefficient(inst, 2, 0, 0, inst.fictive) == pytest.approx(5e-4, rel=1e-9)
    assert objective_coefficient(inst, 2, 0, 0, 1) == pytest.approx(3e-4, rel=1e-12)
    sol = solve_exact(build_ilp2(inst))
    assert sol.assignment[0] == (0, 1)
    assert sol.objective_value == pytest.approx(3e-4)
    # and not chosen when the TA costs more than the penalty it saves
    g2 = graph(3, [(0, 1, 10.0, 50.0, 0.1), (1, 2, 10.0, 50.0, 0.1)], cost=[0.0, 6e-4, 0.0])
    inst2 = instance(g2, [(0, 2, 1.0, sla, 5e-5)], scenario="qos")
    assert solve_exact(build_ilp2(inst2)).assignment[0] == (0, inst2.fictive)


def test_infeasible_when_capacity_too_small():
    g = graph(2, [(0, 1, 1.0, 1.0, 0.0)])
    inst = instance(g, [(0, 1, 0.7), (1, 0, 0.7)])
    for backend in ("bnb", "highs"):
        sol = solve_exact(build_ilp1(inst), backend=backend)
        assert sol.status is Status.INFEASIBLE
        assert not sol.has_assignment


@pytest.mark.parametrize("backend", ["bnb", "highs"])
def test_exact_matches_enumeration(backend):
    for seed in range(60):
        inst = random_micro_instance(seed)
        model = build_model(inst)
        best, _ = enumerate_optimum(model)
        sol = solve_exact(model, backend=backend)
        if best is None:
            assert sol.status is Status.INFEASIBLE, seed
            continue
        assert sol.status is Status.OPTIMAL, seed
        assert sol.objective_value == pytest.approx(best, rel=1e-9, abs=1e-15), seed
        assert check_constraints(inst, sol) == [], seed


def test_optimum_non_increasing_in_mu():
    for seed in range(15):
        inst = random_micro_instance(seed)
        n = inst.graph.num_nodes
        prev = math.inf
        for mu in range(n + 1):
            sol = solve_exact(build_model(inst.with_mu(mu)))
            if not sol.has_assignment:
                continue
            assert sol.objective_value <= prev + 1e-12
            prev = sol.objective_value
        slack = solve_exact(build_model(inst.with_mu(n + 10)))
        full = solve_exact(build_model(inst.with_mu(n)))
        assert slack.objective_value == full.objective_value


def test_time_limit_returns_incumbent_or_timeout():
    inst = generate_instance(abilene(), GeneratorConfig(flows_per_pair=1, k_paths=3, mu=3))
    sol = solve_exact(build_ilp1(inst), time_limit=0.05, backend="bnb")
    assert sol.status in (Status.TIMED_OUT, Status.OPTIMAL)
    if sol.has_assignment:
        assert check_constraints(inst, sol) == []


def test_canonical_open_tas_serve_flows():
    inst = random_micro_instance(5)
    sol = solve_exact(build_model(inst))
    used = {n for _, n in sol.assignment.values() if n != inst.fictive}
    assert sol.open_tas == used


def test_lp_export_structure(tmp_path):
    inst = two_path_instance(mu=1)
    m = build_ilp1(inst)
    text = lp_text(m)
    assert text.splitlines()[1] == "Minimize"
    assert "Subject To" in text and "Binary" in text and text.rstrip().endswith("End")
    assert len(re.findall(r"^ assign_f\d+:", text, re.M)) == 1
    assert "x_n0" in text and f"y_f0_p0_n{inst.fictive}" in text
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    export_lp(m, str(a))
    export_lp(build_ilp1(inst), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_lp_export_parsed_by_highs(tmp_path):
    highspy = pytest.importorskip("highspy")
    for seed in range(3):
        inst = random_micro_instance(100 + seed)
        m = build_model(inst)
        sol = solve_exact(m, backend="bnb")
        path = tmp_path / f"m{seed}.lp"
        export_lp(m, str(path))
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        assert h.readModel(str(path)) == highspy.HighsStatus.kOk
        h.run()
        if sol.status is Status.INFEASIBLE:
            assert h.getModelStatus() == highspy.HighsModelStatus.kInfeasible
        else:
            assert h.getInfo().objective_function_value == pytest.approx(sol.objective_value, rel=1e-6, abs=1e-9)


def test_evaluate_all_no_ta_and_hand_improvement():
    # two flows on a 2-link line; one gets a mid-path TA
    g = graph(3, [(0, 1, 10.0, 10.0, 0.1), (1, 2, 10.0, 10.0, 0.1)])
    inst = instance(g, [(0, 2, 1.0), (2, 0, 1.0)])
    base = no_ta_baseline(inst)
    m0 = evaluate(inst, base, base)
    assert m0.deployment_cost == 0.0 and m0.improvement_pct == 0.0 and m0.violations == []
    sol = solve_exact(build_ilp1(inst))
    m = evaluate(inst, sol)
    assert m.violations == []
    with_ta = 2 * 10 * (1 + 2 * 0.1 / 0.9)
    q = 1 - 0.9 * 0.9
    no_ta = 20 * (1 + 2 * q / (1 - q))
    assert m.avg_epdd == pytest.approx(with_ta, rel=1e-9)
    assert m.improvement_pct == pytest.approx(100 * (no_ta - with_ta) / no_ta, rel=1e-9)
    assert m.deployment_cost == pytest.approx(2 * 1.0 * 1e-4)


def test_ilp1_optimum_at_most_baseline():
    inst = generate_instance(abilene(), GeneratorConfig(flows_per_pair=1, k_paths=3, seed=2))
    sol = solve_exact(build_ilp1(inst))
    base = no_ta_baseline(inst)
    assert sol.status is Status.OPTIMAL
    assert sol.objective_value <= base.avg_epdd + 1e-12
    assert evaluate(inst, sol, base).violations == []
