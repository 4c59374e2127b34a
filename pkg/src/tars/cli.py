"""Command line interface: ``tars gen|solve|tafs|bench|export-lp|validate``.

Exit codes: 0 success, 2 infeasible instance (or validation failures), 1 any
other error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from tars import __version__
from tars.bench import OUTPUT_DIR_ENV, ExperimentConfig, run_experiment
from tars.instance import (
    GeneratorConfig,
    InstanceError,
    PlacementInstance,
    Scenario,
    flows_csv,
    generate_instance,
    load_instance,
    save_instance,
)
from tars.milp import build_model, evaluate, export_lp, solve_exact
from tars.network import TopologyError, load_topology, resolve_topology, validate
from tars.paths import PathError
from tars.solution import Solution, Status, check_constraints
from tars.tafs import Variant, run_tafs

log = logging.getLogger("tars")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
SOLUTION_FORMAT = "tars-solution"
SOLUTION_VERSION = 1


def solution_to_dict(inst: PlacementInstance, sol: Solution) -> dict:
    n_star = inst.fictive
    return {
        "format": SOLUTION_FORMAT,
        "version": SOLUTION_VERSION,
        "instance_id": sol.instance_id,
        "solver": sol.solver,
        "status": sol.status.value,
        "objective": sol.objective_value,
        "runtime_s": sol.runtime,
        "open_tas": sorted(sol.open_tas),
        "rejected": list(sol.rejected),
        "assignment": [
            {
                "flow": f,
                "path": p,
                "ta": None if n == n_star else n,
                "node_seq": list(inst.paths[f][p].node_seq),
                "epdd_ms": sol.per_flow[f].delay,
            }
            for f, (p, n) in sol.assignment.items()
        ],
    }


def solution_from_dict(inst: PlacementInstance, data: dict) -> Solution:
    from tars.solution import make_solution

    if data.get("format") != SOLUTION_FORMAT or data.get("version") != SOLUTION_VERSION:
        raise InstanceError(f"not a {SOLUTION_FORMAT} v{SOLUTION_VERSION} file")
    assignment = {
        int(a["flow"]): (int(a["path"]), inst.fictive if a["ta"] is None else int(a["ta"])) for a in data["assignment"]
    }
    sol = make_solution(
        inst,
        assignment,
        Status(data["status"]),
        data.get("objective"),
        rejected=data.get("rejected", ()),
        solver=data.get("solver", ""),
        runtime=data.get("runtime_s", 0.0),
    )
    sol.instance_id = data.get("instance_id", "")
    return sol


def _apply_overrides(inst: PlacementInstance, args) -> PlacementInstance:
    if getattr(args, "scenario", None):
        inst = inst.with_scenario(args.scenario)
    if getattr(args, "mu", None) is not None:
        inst = inst.with_mu(args.mu)
    if getattr(args, "penalty", None) is not None:
        inst = inst.with_penalty(args.penalty)
    return inst


def _print_metrics(inst, sol) -> None:
    m = evaluate(inst, sol)
    print(f"status           {sol.status.value}")
    print(f"solver           {sol.solver}  ({sol.runtime:.3f} s)")
    print(f"objective        {sol.objective_value!r}")
    print(f"flows            {m.n_assigned}/{m.n_flows} assigned, {m.n_rejected} rejected")
    print(f"TAs open         {m.n_tas} (mu={inst.mu}): {sorted(sol.open_tas)}")
    print(f"avg EPDD (ms)    {m.avg_epdd:.4f}  no-TA {m.baseline_avg_epdd:.4f}  improvement {m.improvement_pct:.2f}%")
    print(f"total cost ($/s) {m.total_cost:.6g}  no-TA {m.baseline_total_cost:.6g}  savings {m.savings_pct:.2f}%")
    if m.violations:
        print(f"VIOLATIONS       {len(m.violations)}: {m.violations[:5]}")


def _write_solution(inst, sol, path) -> None:
    if not path:
        return
    with open(path, "w") as fh:
        json.dump(solution_to_dict(inst, sol), fh, indent=1)
        fh.write("\n")


# ----------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    cfg = GeneratorConfig.from_dict(data)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.flows_per_pair is not None:
        overrides["flows_per_pair"] = args.flows_per_pair
    if args.mu is not None:
        overrides["mu"] = args.mu
    if args.scenario:
        overrides["scenario"] = Scenario(args.scenario)
    if args.load is not None:
        overrides["load_factor"] = args.load
    if args.k_paths is not None:
        overrides["k_paths"] = args.k_paths
    cfg = replace(cfg, **overrides)
    inst = generate_instance(resolve_topology(args.topology), cfg)
    save_instance(inst, args.output, include_delta=not args.no_delta)
    if args.flows_csv:
        with open(args.flows_csv, "w") as fh:
            fh.write(flows_csv(inst))
    n_paths = sum(len(p) for p in inst.paths.values())
    print(f"{args.output}: {len(inst.flows)} flows, {n_paths} paths, mu={inst.mu}, id={inst.instance_id}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _apply_overrides(load_instance(args.instance), args)
    sol = solve_exact(build_model(inst), time_limit=args.time_limit, backend=args.backend)
    if not sol.has_assignment:
        print(f"status           {sol.status.value}")
        return EXIT_INFEASIBLE if sol.status is Status.INFEASIBLE else EXIT_ERROR
    _print_metrics(inst, sol)
    _write_solution(inst, sol, args.output)
    return EXIT_OK


def cmd_tafs(args) -> int:
    inst = _apply_overrides(load_instance(args.instance), args)
    variant = args.variant or (Variant.TAFS1 if inst.scenario is Scenario.BEST_EFFORT else Variant.TAFS2)
    sol = run_tafs(inst, variant)
    _print_metrics(inst, sol)
    print(f"TA set           {sorted(sol.ta_set)}")
    _write_solution(inst, sol, args.output)
    return EXIT_OK


def cmd_export_lp(args) -> int:
    inst = _apply_overrides(load_instance(args.instance), args)
    model = build_model(inst)
    export_lp(model, args.output)
    print(f"{args.output}: {model.num_cols} binaries, {len(model.rows)} rows")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.seeds is not None:
        overrides["seeds"] = list(range(args.seed or 0, (args.seed or 0) + args.seeds))
    elif args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.scenario:
        overrides["scenario"] = Scenario(args.scenario)
    if args.mu:
        overrides["mu_sweep"] = args.mu
    if args.solvers:
        overrides["solvers"] = args.solvers
    if args.no_plots:
        overrides["plots"] = False
    if overrides:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **{k: v for k, v in overrides.items()}})

    def progress(cell, runs):
        parts = " ".join(f"{r['solver']}={r.get('objective', float('nan')):.6g}" for r in runs if r.get("objective") is not None)
        log.info("seed=%s load=%s penalty=%s mu=%s %s", cell["seed"], cell["load"], cell["penalty"], cell["mu"], parts)

    result = run_experiment(cfg, progress)
    with open(os.path.join(result.output_dir, "report.txt")) as fh:
        sys.stdout.write(fh.read())
    print(f"wrote {result.output_dir}/{{runs,cdf,summary,timings}}.csv, report.txt")
    for path in result.figures:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    path = args.file
    problems: list[str] = []
    with open(path) as fh:
        head = fh.read(4096).lstrip()
    if head.startswith("{"):
        inst = _apply_overrides(load_instance(path), args)
        problems += [f"graph: {p}" for p in validate(inst.graph)]
        what = f"instance {inst.instance_id}: {len(inst.flows)} flows"
        if args.solution:
            with open(args.solution) as fh:
                sol = solution_from_dict(inst, json.load(fh))
            if sol.instance_id and sol.instance_id != inst.instance_id:
                problems.append(f"solution is for instance {sol.instance_id}")
            problems += check_constraints(inst, sol, require_all=not sol.rejected)
            what += f", solution by {sol.solver or '?'}"
    else:
        g = load_topology(path)
        problems += validate(g)
        what = f"topology {g.name or path}: {g.num_nodes} nodes, {len(g.links)} links"
    for p in problems:
        print(f"  {p}")
    print(f"{what}: {'OK' if not problems else f'{len(problems)} problem(s)'}")
    return EXIT_OK if not problems else EXIT_INFEASIBLE


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tars", description="Joint TCP routing and Transport Assistant placement.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    scenarios = [s.value for s in Scenario]

    def instance_flags(p):
        p.add_argument("instance", help="instance JSON written by 'tars gen'")
        p.add_argument("--mu", type=int, help="override the TA count bound")
        p.add_argument("--scenario", choices=scenarios, help="override the objective")
        p.add_argument("--penalty", type=float, help="override every flow's penalty rate ($/ms)")

    p = sub.add_parser("gen", help="generate a seeded instance")
    p.add_argument("--topology", default="abilene", help="builtin name (abilene) or topology file")
    p.add_argument("--config", help="generator options as JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--mu", type=int)
    p.add_argument("--scenario", choices=scenarios)
    p.add_argument("--flows-per-pair", type=int)
    p.add_argument("--k-paths", type=int)
    p.add_argument("--load", type=float, help="traffic load factor")
    p.add_argument("--no-delta", action="store_true", help="omit the delay table (recomputed on load)")
    p.add_argument("--flows-csv", help="also write the flow table as CSV")
    p.add_argument("-o", "--output", default="instance.json")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve an instance exactly")
    instance_flags(p)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--backend", choices=["auto", "bnb", "highs"], default="auto")
    p.add_argument("-o", "--output", help="write the solution JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tafs", help="run the TAFS heuristic")
    instance_flags(p)
    p.add_argument("--variant", choices=[v.value for v in Variant], help="default follows the scenario")
    p.add_argument("-o", "--output", help="write the solution JSON here")
    p.set_defaults(func=cmd_tafs)

    p = sub.add_parser("bench", help="run an experiment sweep")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--output-dir", help=f"defaults to ${OUTPUT_DIR_ENV} or ./tars-out")
    p.add_argument("--seed", type=int, help="single seed, or first seed with --seeds")
    p.add_argument("--seeds", type=int, help="number of consecutive seeds")
    p.add_argument("--mu", type=int, nargs="+", help="mu sweep values")
    p.add_argument("--scenario", choices=scenarios)
    p.add_argument("--solvers", choices=["exact", "tafs", "both"])
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export-lp", help="write the ILP in LP format")
    instance_flags(p)
    p.add_argument("-o", "--output", default="model.lp")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("validate", help="check a topology, instance or solution file")
    p.add_argument("file", help="topology file or instance JSON")
    p.add_argument("--solution", help="solution JSON to check against the instance")
    p.add_argument("--mu", type=int, help="the override the solution was computed with")
    p.add_argument("--scenario", choices=scenarios)
    p.add_argument("--penalty", type=float)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (TopologyError, InstanceError, PathError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"tars {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
