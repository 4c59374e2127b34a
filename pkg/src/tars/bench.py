"""Experiment harness: sweeps over mu, penalty rate and traffic load.

One *cell* is a (seed, load factor, penalty rate, mu) point.  For every cell
the selected solvers run on the same instance and one row per solver goes to
``runs.csv``.  Wall-clock times go to ``timings.csv`` so that ``runs.csv``,
``cdf.csv`` and ``summary.csv`` are byte-identical across re-runs of the same
config.  ``report.txt`` only contains aggregates of those files.

CSV files start with a ``# schema <name>/<version>`` comment line (read with
``comment="#"`` in pandas; gnuplot skips it natively) and use header names
without whitespace.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from tars.instance import GeneratorConfig, PlacementInstance, Scenario, generate_instance, no_ta_baseline
from tars.milp import build_model, evaluate, solve_exact
from tars.network import resolve_topology
from tars.solution import Solution
from tars.tafs import TafsOptions, Variant, run_tafs

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "TARS_OUTPUT_DIR"
RUNS_SCHEMA = "tars-runs/1"
CDF_SCHEMA = "tars-cdf/1"
SUMMARY_SCHEMA = "tars-summary/1"
TIMINGS_SCHEMA = "tars-timings/1"
Z95 = 1.959963984540054

RUN_COLUMNS = [
    "seed", "load", "penalty", "mu", "mu_pct", "solver", "status", "objective",
    "avg_epdd", "baseline_avg_epdd", "improvement_pct",
    "deployment_cost", "penalty_cost", "total_cost", "baseline_total_cost", "savings_pct",
    "n_flows", "n_assigned", "n_rejected", "n_tas", "gap_pct",
]
SUMMARY_METRICS = ["avg_epdd", "improvement_pct", "total_cost", "savings_pct", "n_rejected", "gap_pct"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    topology: str = "abilene"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    mu_sweep: list = field(default_factory=lambda: [0, 2, 4, 6, 8, 10, 12])
    penalty_sweep: list = field(default_factory=lambda: [5e-5])  # $/ms
    load_factors: list = field(default_factory=lambda: [1.0])
    scenario: Scenario = Scenario.BEST_EFFORT
    solvers: str = "both"  # exact, tafs or both
    time_limit: Optional[float] = None  # seconds per exact solve
    output_dir: Optional[str] = None  # falls back to $TARS_OUTPUT_DIR, then ./tars-out
    seeds: list = field(default_factory=lambda: list(range(10)))
    mu_as_percent: bool = False  # mu_sweep entries are % of real nodes
    plots: bool = True

    def __post_init__(self):
        self.scenario = Scenario(self.scenario)
        if isinstance(self.generator, dict):
            self.generator = GeneratorConfig.from_dict(self.generator)
        for name in ("mu_sweep", "penalty_sweep", "load_factors", "seeds"):
            values = list(getattr(self, name))
            if not values:
                raise ConfigError(f"{name} must not be empty")
            setattr(self, name, values)
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.solvers not in ("exact", "tafs", "both"):
            raise ConfigError(f"solvers must be exact, tafs or both, got {self.solvers!r}")
        if any(m < 0 for m in self.mu_sweep):
            raise ConfigError("mu values must be >= 0")
        if self.mu_as_percent and any(m > 100 for m in self.mu_sweep):
            raise ConfigError("mu percentages must lie in [0, 100]")
        if any(p < 0 for p in self.penalty_sweep):
            raise ConfigError("penalty rates must be >= 0")
        if any(x <= 0 for x in self.load_factors):
            raise ConfigError("load factors must be > 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ConfigError("time_limit must be > 0")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment option(s): {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["generator"] = self.generator.to_dict()
        d["scenario"] = self.scenario.value
        return d

    def resolved_output_dir(self) -> str:
        return self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "tars-out"

    def mu_values(self, n_nodes: int) -> list[tuple[int, Optional[float]]]:
        """``(mu, percent)`` pairs; percent is None for absolute sweeps."""
        if not self.mu_as_percent:
            return [(int(m), None) for m in self.mu_sweep]
        return [(int(round(p * n_nodes / 100.0)), float(p)) for p in self.mu_sweep]


# ----------------------------------------------------------------------------
# comparison


class CompareError(ValueError):
    pass


@dataclass
class GapReport:
    gap_pct: float  # (a - b) / b in %, b being the reference
    differing_flows: list[int]
    runtime_ratio: float


def gap_pct(value: float, reference: float) -> float:
    if reference == 0:
        return 0.0 if value == 0 else math.inf
    return 100.0 * (value - reference) / abs(reference)


def compare(sol_a: Solution, sol_b: Solution, inst: PlacementInstance) -> GapReport:
    """Gap of ``sol_a`` relative to ``sol_b`` (typically heuristic vs exact)."""
    for s in (sol_a, sol_b):
        if s.instance_id != inst.instance_id:
            raise CompareError(f"solution belongs to instance {s.instance_id!r}, not {inst.instance_id!r}")
    if sol_a.objective_value is None or sol_b.objective_value is None:
        raise CompareError("both solutions need an objective value")
    diff = [f for f in range(len(inst.flows)) if sol_a.assignment.get(f) != sol_b.assignment.get(f)]
    ratio = sol_a.runtime / sol_b.runtime if sol_b.runtime > 0 else math.inf
    return GapReport(gap_pct(sol_a.objective_value, sol_b.objective_value), diff, ratio)


# ----------------------------------------------------------------------------
# statistics


def mean_ci95(values) -> tuple[float, float, int]:
    """Mean and normal-approximation 95% half-width over finite values."""
    x = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    if x.size == 0:
        return math.nan, math.nan, 0
    if x.size == 1:
        return float(x[0]), 0.0, 1
    return float(x.mean()), float(Z95 * x.std(ddof=1) / math.sqrt(x.size)), int(x.size)


# ----------------------------------------------------------------------------
# running


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _run_row(cell: dict, solver: str, inst, sol: Solution, baseline: Solution) -> tuple[dict, dict]:
    row = dict(cell, solver=solver, status=sol.status.value, n_flows=len(inst.flows))
    improvements = {}
    if sol.has_assignment:
        m = evaluate(inst, sol, baseline)
        row.update(
            objective=sol.objective_value,
            avg_epdd=m.avg_epdd,
            baseline_avg_epdd=m.baseline_avg_epdd,
            improvement_pct=m.improvement_pct,
            deployment_cost=m.deployment_cost,
            penalty_cost=m.penalty_cost,
            total_cost=m.total_cost,
            baseline_total_cost=m.baseline_total_cost,
            savings_pct=m.savings_pct,
            n_assigned=m.n_assigned,
            n_rejected=m.n_rejected,
            n_tas=m.n_tas,
        )
        improvements = m.flow_improvement_pct
    return row, improvements


def run_cells(cfg: ExperimentConfig, progress=None):
    """Yield ``(run rows, cdf rows, timing rows)`` per cell in deterministic order."""
    graph = resolve_topology(cfg.topology)
    mus = cfg.mu_values(graph.num_nodes)
    exact_on = cfg.solvers in ("exact", "both")
    tafs_on = cfg.solvers in ("tafs", "both")
    variant = Variant.TAFS1 if cfg.scenario is Scenario.BEST_EFFORT else Variant.TAFS2
    for seed in cfg.seeds:
        for load in cfg.load_factors:
            gen = replace(cfg.generator, seed=seed, load_factor=load, scenario=cfg.scenario)
            base_inst = generate_instance(graph, gen)
            for penalty in cfg.penalty_sweep:
                pinst = base_inst.with_penalty(penalty)
                baseline = no_ta_baseline(pinst)
                for mu, pct in mus:
                    inst = pinst.with_mu(mu)
                    cell = dict(seed=seed, load=float(load), penalty=float(penalty), mu=mu, mu_pct=pct)
                    results = []
                    if exact_on:
                        results.append(("exact", solve_exact(build_model(inst), time_limit=cfg.time_limit)))
                    if tafs_on:
                        results.append((variant.value, run_tafs(inst, variant, TafsOptions())))
                    exact_obj = results[0][1].objective_value if exact_on else None
                    runs, cdf, timings = [], [], []
                    for name, sol in results:
                        row, improvements = _run_row(cell, name, inst, sol, baseline)
                        if name != "exact" and exact_obj is not None and sol.objective_value is not None:
                            row["gap_pct"] = gap_pct(sol.objective_value, exact_obj)
                        runs.append(row)
                        cdf.extend(dict(cell, solver=name, flow=f, improvement_pct=v) for f, v in improvements.items())
                        timings.append(dict(cell, solver=name, status=sol.status.value, runtime_s=sol.runtime))
                    if progress:
                        progress(cell, runs)
                    yield runs, cdf, timings


class _CsvSink:
    def __init__(self, path: str, schema: str, columns: list[str]):
        self.fh = open(path, "w", newline="")
        self.fh.write(f"# schema {schema}\n")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(columns)
        self.columns = columns

    def write(self, row: dict) -> None:
        self.writer.writerow([_fmt(row.get(c)) for c in self.columns])

    def close(self) -> None:
        self.fh.close()


CELL_COLUMNS = ["seed", "load", "penalty", "mu", "mu_pct", "solver"]


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and 95% CI across seeds per (load, penalty, mu, solver)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["load"], r["penalty"], r["mu"], r.get("mu_pct"), r["solver"]), []).append(r)
    out = []
    for (load, penalty, mu, pct, solver), rs in groups.items():
        s = dict(load=load, penalty=penalty, mu=mu, mu_pct=pct, solver=solver, n_seeds=len(rs))
        for metric in SUMMARY_METRICS:
            mean, half, n = mean_ci95(r.get(metric) for r in rs)
            s[f"{metric}_mean"] = mean
            s[f"{metric}_ci95"] = half
        out.append(s)
    return out


SUMMARY_COLUMNS = ["load", "penalty", "mu", "mu_pct", "solver", "n_seeds"] + [
    f"{m}_{k}" for m in SUMMARY_METRICS for k in ("mean", "ci95")
]


def _report(cfg: ExperimentConfig, summary: list[dict], timings: list[dict]) -> str:
    lines = [
        "tars bench report",
        f"topology={cfg.topology} scenario={cfg.scenario.value} solvers={cfg.solvers} seeds={len(cfg.seeds)}",
        "values: mean +/- normal 95% CI half-width across seeds (source: summary.csv, timings.csv)",
        "",
        f"{'load':>6} {'penalty':>9} {'mu':>4} {'solver':>7} {'avg_epdd_ms':>20} {'improve_%':>16} "
        f"{'total_cost':>24} {'savings_%':>16} {'gap_%':>14}",
    ]

    def cell(s, metric, fmt):
        m, h = s[f"{metric}_mean"], s[f"{metric}_ci95"]
        if m is None or math.isnan(m):
            return "-"
        return f"{m:{fmt}}+/-{h:{fmt}}"

    for s in summary:
        lines.append(
            f"{s['load']:>6g} {s['penalty']:>9.3g} {s['mu']:>4d} {s['solver']:>7} "
            f"{cell(s, 'avg_epdd', '.3f'):>20} {cell(s, 'improvement_pct', '.2f'):>16} "
            f"{cell(s, 'total_cost', '.4g'):>24} {cell(s, 'savings_pct', '.2f'):>16} {cell(s, 'gap_pct', '.2f'):>14}"
        )
    lines += ["", "runtime (s) per solve"]
    by_solver: dict[str, list[float]] = {}
    for t in timings:
        by_solver.setdefault(t["solver"], []).append(t["runtime_s"])
    for solver, vals in by_solver.items():
        m, h, n = mean_ci95(vals)
        lines.append(f"  {solver:>7}: {m:.4f} +/- {h:.4f} (n={n}, max {max(vals):.4f})")
    timed_out = [t for t in timings if t["status"] == "TimedOut"]
    if timed_out:
        lines.append(f"  {len(timed_out)} solve(s) hit the time limit")
    return "\n".join(lines) + "\n"


@dataclass
class ExperimentResult:
    output_dir: str
    runs: list[dict]
    summary: list[dict]
    timings: list[dict]
    figures: list[str]


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    out = cfg.resolved_output_dir()
    os.makedirs(out, exist_ok=True)
    runs_sink = _CsvSink(os.path.join(out, "runs.csv"), RUNS_SCHEMA, RUN_COLUMNS)
    cdf_sink = _CsvSink(os.path.join(out, "cdf.csv"), CDF_SCHEMA, CELL_COLUMNS + ["flow", "improvement_pct"])
    time_sink = _CsvSink(os.path.join(out, "timings.csv"), TIMINGS_SCHEMA, CELL_COLUMNS + ["status", "runtime_s"])
    all_runs, all_timings = [], []
    try:
        for runs, cdf, timings in run_cells(cfg, progress):
            for r in runs:
                runs_sink.write(r)
            for r in cdf:
                cdf_sink.write(r)
            for r in timings:
                time_sink.write(r)
            all_runs += runs
            all_timings += timings
    finally:
        for sink in (runs_sink, cdf_sink, time_sink):
            sink.close()
    summary = summarize(all_runs)
    sum_sink = _CsvSink(os.path.join(out, "summary.csv"), SUMMARY_SCHEMA, SUMMARY_COLUMNS)
    for s in summary:
        sum_sink.write(s)
    sum_sink.close()
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(_report(cfg, summary, all_timings))
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    figures = []
    if cfg.plots:
        from tars.plotting import render_figures

        figures = render_figures(out, all_runs, summary, cdf_path=os.path.join(out, "cdf.csv"))
    return ExperimentResult(out, all_runs, summary, all_timings, figures)


def read_csv(path: str) -> list[dict]:
    """Rows of a bench CSV with numeric fields converted back to numbers."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = []
    for raw in csv.DictReader(lines):
        row = {}
        for k, v in raw.items():
            if v == "":
                row[k] = None
                continue
            try:
                row[k] = int(v)
            except ValueError:
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
        rows.append(row)
    return rows
