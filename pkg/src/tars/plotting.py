"""PNG figures for bench output, drawn from the same rows written to the CSVs.

Figures (only those whose sweep has more than one point are drawn):

* ``epdd_vs_mu.png`` and ``improvement_vs_mu.png``: mean with 95% CI bars
* ``improvement_cdf.png``: per-flow improvement CDF at the largest mu
* ``cost_vs_penalty.png``: total cost with TAs against the no-TA baseline
* ``cost_vs_load.png``: the same across traffic load factors
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}
MARKERS = {"exact": "o", "tafs1": "s", "tafs2": "^", "no-TA": "x"}


def _finite(v) -> bool:
    return v is not None and np.isfinite(v)


def _series(summary, x_key, metric, fixed):
    """``{solver: (xs, means, cis)}`` for summary rows matching ``fixed``."""
    out = {}
    for s in summary:
        if any(s[k] != v for k, v in fixed.items()) or not _finite(s.get(f"{metric}_mean")):
            continue
        xs, ms, cs = out.setdefault(s["solver"], ([], [], []))
        xs.append(s[x_key])
        ms.append(s[f"{metric}_mean"])
        cs.append(s[f"{metric}_ci95"])
    return out


def _save(fig, out_dir, name, written):
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    written.append(path)


def _errorbars(ax, series):
    for solver, (xs, ms, cs) in sorted(series.items()):
        ax.errorbar(xs, ms, yerr=cs, marker=MARKERS.get(solver, "."), capsize=3, label=solver)


def _baseline_line(summary, x_key, fixed):
    """Mean no-TA baseline total cost per ``x_key`` (identical across solvers)."""
    acc: dict = {}
    for r in summary:
        if any(r[k] != v for k, v in fixed.items()):
            continue
        acc.setdefault(r[x_key], []).append(r["_baseline"])
    xs = sorted(acc)
    return xs, [float(np.mean(acc[x])) for x in xs]


def _with_baseline(runs, summary):
    """Attach the seed-mean baseline total cost to each summary row."""
    acc: dict = {}
    for r in runs:
        if _finite(r.get("baseline_total_cost")):
            acc.setdefault((r["load"], r["penalty"], r["mu"], r["solver"]), []).append(r["baseline_total_cost"])
    rows = []
    for s in summary:
        vals = acc.get((s["load"], s["penalty"], s["mu"], s["solver"]))
        if vals:
            rows.append(dict(s, _baseline=float(np.mean(vals))))
    return rows


def _read_cdf(path):
    from tars.bench import read_csv

    return read_csv(path) if path and os.path.exists(path) else []


def render_figures(out_dir: str, runs: list[dict], summary: list[dict], cdf_path=None) -> list[str]:
    written: list[str] = []
    if not summary:
        return written
    loads = sorted({s["load"] for s in summary})
    penalties = sorted({s["penalty"] for s in summary})
    mus = sorted({s["mu"] for s in summary})
    use_pct = all(s.get("mu_pct") is not None for s in summary)
    mu_key = "mu_pct" if use_pct else "mu"
    mu_label = "nodes with TAs (%)" if use_pct else "number of TAs (mu)"
    ref = dict(load=loads[-1], penalty=penalties[0])

    with plt.rc_context(STYLE):
        if len(mus) > 1:
            fig, ax = plt.subplots()
            _errorbars(ax, _series(summary, mu_key, "avg_epdd", ref))
            ax.set_xlabel(mu_label)
            ax.set_ylabel("average EPDD (ms)")
            ax.legend()
            _save(fig, out_dir, "epdd_vs_mu.png", written)

            fig, ax = plt.subplots()
            _errorbars(ax, _series(summary, mu_key, "improvement_pct", ref))
            ax.set_xlabel(mu_label)
            ax.set_ylabel("improvement over no TA (%)")
            ax.legend()
            _save(fig, out_dir, "improvement_vs_mu.png", written)

        cdf = _read_cdf(cdf_path)
        top = dict(ref, mu=mus[-1])
        samples: dict[str, list[float]] = {}
        for r in cdf:
            if all(r[k] == v for k, v in top.items()) and _finite(r["improvement_pct"]):
                samples.setdefault(r["solver"], []).append(r["improvement_pct"])
        if samples:
            fig, ax = plt.subplots()
            for solver, vals in sorted(samples.items()):
                x = np.sort(vals)
                ax.step(x, np.arange(1, x.size + 1) / x.size, where="post", label=solver)
            ax.set_xlabel(f"per-flow EPDD improvement (%) at mu={mus[-1]}")
            ax.set_ylabel("CDF")
            ax.legend()
            _save(fig, out_dir, "improvement_cdf.png", written)

        enriched = _with_baseline(runs, summary)
        for x_key, values, name, xlabel in (
            ("penalty", penalties, "cost_vs_penalty.png", "penalty rate ($/ms)"),
            ("load", loads, "cost_vs_load.png", "traffic load factor"),
        ):
            if len(values) < 2:
                continue
            fixed = dict(mu=mus[-1])
            if x_key == "penalty":
                fixed["load"] = loads[-1]
            else:
                fixed["penalty"] = penalties[0]
            fig, ax = plt.subplots()
            _errorbars(ax, _series(enriched, x_key, "total_cost", fixed))
            bx, by = _baseline_line(enriched, x_key, fixed)
            ax.plot(bx, by, marker=MARKERS["no-TA"], linestyle="--", color="0.4", label="no-TA")
            ax.set_xlabel(xlabel)
            ax.set_ylabel("total cost ($/s)")
            ax.ticklabel_format(style="sci", scilimits=(-3, 4))
            ax.legend()
            _save(fig, out_dir, name, written)
    return written
