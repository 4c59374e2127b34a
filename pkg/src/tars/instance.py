"""Seeded problem instances: flows, SLAs, node/link attributes, paths and the delay table."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Optional

import numpy as np

from tars.epdd import DEFAULT_DELAY_MODEL, DelayModelConfig, epdd
from tars.network import LinkSpec, NetworkGraph, NodeSpec, validate
from tars.paths import PathCandidate, build_path, k_shortest_paths
from tars.solution import Solution, Status, make_solution

FORMAT_NAME = "tars-instance"
FORMAT_VERSION = 1


class InstanceError(ValueError):
    pass


class InstanceFormatError(InstanceError):
    """Unreadable, truncated or version-mismatched instance file."""


class Scenario(str, Enum):
    BEST_EFFORT = "best-effort"
    QOS = "qos"


@dataclass(frozen=True)
class Flow:
    id: int
    src: int
    dst: int
    bandwidth: float  # Mbps
    sla_bound: float  # ms
    penalty_rate: float  # $/ms

    def __post_init__(self):
        if self.src == self.dst:
            raise InstanceError(f"flow {self.id}: source equals destination")
        if not self.bandwidth > 0 or not self.sla_bound > 0:
            raise InstanceError(f"flow {self.id}: bandwidth and SLA bound must be > 0")
        if not self.penalty_rate >= 0:
            raise InstanceError(f"flow {self.id}: penalty rate must be >= 0")


def _interval(value) -> tuple[float, float]:
    lo, hi = (float(v) for v in value)
    return lo, hi


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    flows_per_pair: int = 5
    bw_range: tuple[float, float] = (0.2, 1.0)
    capacity_range: tuple[float, float] = (200.0, 350.0)
    cost_range: tuple[float, float] = (7e-5, 11e-5)
    loss_range: tuple[float, float] = (0.01, 0.08)
    link_bw_range: tuple[float, float] = (150.0, 300.0)
    sla_factor_range: tuple[float, float] = (0.9, 1.1)
    penalty_rate: float = 5e-5
    k_paths: int = 5
    max_hops: Optional[int] = None
    load_factor: float = 1.0
    sla_reference: str = "epdd"  # or "propagation"
    mu: Optional[int] = None  # None: every real node may host a TA
    scenario: Scenario = Scenario.BEST_EFFORT
    rto_multiplier: float = DEFAULT_DELAY_MODEL.rto_multiplier

    def __post_init__(self):
        for f in ("bw_range", "capacity_range", "cost_range", "loss_range", "link_bw_range", "sla_factor_range"):
            lo, hi = _interval(getattr(self, f))
            object.__setattr__(self, f, (lo, hi))
            if lo > hi:
                raise InstanceError(f"{f}: low {lo} exceeds high {hi}")
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.flows_per_pair < 1:
            raise InstanceError("flows_per_pair must be >= 1")
        if self.k_paths < 1:
            raise InstanceError("k_paths must be >= 1")
        if not (0 <= self.loss_range[0] and self.loss_range[1] < 1):
            raise InstanceError("loss_range must lie in [0, 1)")
        if self.bw_range[0] <= 0 or self.capacity_range[0] <= 0 or self.link_bw_range[0] <= 0:
            raise InstanceError("bandwidths and capacities must be > 0")
        if self.cost_range[0] < 0 or self.penalty_rate < 0:
            raise InstanceError("costs and penalty rate must be >= 0")
        if self.load_factor <= 0:
            raise InstanceError("load_factor must be > 0")
        if self.sla_reference not in ("epdd", "propagation"):
            raise InstanceError("sla_reference must be 'epdd' or 'propagation'")
        if self.mu is not None and self.mu < 0:
            raise InstanceError("mu must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InstanceError(f"unknown generator option(s): {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class PlacementInstance:
    graph: NetworkGraph
    flows: list[Flow]
    paths: dict[int, tuple[PathCandidate, ...]]
    delta_table: dict[tuple[int, int, int], float]
    mu: int
    scenario: Scenario = Scenario.BEST_EFFORT
    delay_model: DelayModelConfig = DEFAULT_DELAY_MODEL
    generator: Optional[GeneratorConfig] = None
    instance_id: str = field(default="")

    def __post_init__(self):
        if not self.instance_id:
            self.instance_id = fingerprint(self)

    @property
    def fictive(self) -> int:
        return self.graph.fictive_node_id

    def delta(self, f: int, pidx: int, n: int) -> float:
        return self.delta_table[(f, pidx, n)]

    def options(self, f: int):
        """Every ``(path index, node)`` of flow ``f``: on-path nodes in path order, then the fictive node."""
        n_star = self.fictive
        for pidx, p in enumerate(self.paths[f]):
            for n in p.node_seq:
                yield pidx, n
            yield pidx, n_star

    def with_mu(self, mu: int) -> "PlacementInstance":
        return replace(self, mu=mu, instance_id="")

    def with_penalty(self, rate: float) -> "PlacementInstance":
        flows = [replace(fl, penalty_rate=rate) for fl in self.flows]
        return replace(self, flows=flows, instance_id="")

    def with_scenario(self, scenario) -> "PlacementInstance":
        return replace(self, scenario=Scenario(scenario), instance_id="")


def compute_delta_table(graph, flows, paths, cfg: DelayModelConfig) -> dict[tuple[int, int, int], float]:
    n_star = graph.fictive_node_id
    cache: dict[int, dict[int, float]] = {}  # keyed by id() of shared path objects
    table = {}
    for fl in flows:
        for pidx, p in enumerate(paths[fl.id]):
            per_node = cache.get(id(p))
            if per_node is None:
                per_node = {n: epdd(p, n, cfg) for n in (*p.node_seq, n_star)}
                cache[id(p)] = per_node
            for n, d in per_node.items():
                table[(fl.id, pidx, n)] = d
    return table


def _complete_graph(g: NetworkGraph, cfg: GeneratorConfig, rng: np.random.Generator) -> NetworkGraph:
    nodes = []
    for n in g.nodes:
        cap = n.capacity if n.capacity is not None else float(rng.uniform(*cfg.capacity_range))
        cost = n.unit_cost if n.unit_cost is not None else float(rng.uniform(*cfg.cost_range))
        nodes.append(replace(n, capacity=cap, unit_cost=cost))
    links = []
    for link in g.links:
        loss = link.loss if link.loss is not None else float(rng.uniform(*cfg.loss_range))
        bw = link.bandwidth if link.bandwidth is not None else float(rng.uniform(*cfg.link_bw_range))
        links.append(replace(link, loss=loss, bandwidth=bw))
    return g.with_attributes(nodes=nodes, links=links)


def generate_instance(g: NetworkGraph, cfg: GeneratorConfig = GeneratorConfig(), delay_model=None) -> PlacementInstance:
    """Complete ``g`` and build flows, candidate paths and the delay table.

    Everything is drawn from one RNG stream in a fixed order (nodes, links,
    then flows by ordered pair), so ``(g, cfg)`` determines the instance.
    """
    problems = validate(g)
    if problems:
        raise InstanceError("invalid topology: " + "; ".join(problems))
    if g.num_nodes < 2:
        raise InstanceError("need at least two nodes")
    if delay_model is None:
        delay_model = replace(DEFAULT_DELAY_MODEL, rto_multiplier=cfg.rto_multiplier)
    rng = np.random.default_rng(cfg.seed)
    graph = _complete_graph(g, cfg, rng)
    n_star = graph.fictive_node_id
    flows: list[Flow] = []
    paths: dict[int, tuple[PathCandidate, ...]] = {}
    bw_lo, bw_hi = cfg.bw_range
    for s in graph.real_nodes:
        for d in graph.real_nodes:
            if s == d:
                continue
            pair_paths = tuple(k_shortest_paths(graph, s, d, cfg.k_paths, cfg.max_hops))
            if not pair_paths:
                raise InstanceError(f"no admissible path from {s} to {d} within {cfg.max_hops} hops")
            shortest = pair_paths[0]
            if cfg.sla_reference == "epdd":
                reference = epdd(shortest, n_star, delay_model)
            else:
                reference = shortest.total_delay
            for _ in range(cfg.flows_per_pair):
                fid = len(flows)
                bw = float(rng.uniform(bw_lo, bw_hi)) * cfg.load_factor
                factor = float(rng.uniform(*cfg.sla_factor_range))
                flows.append(Flow(fid, s, d, bw, factor * reference, cfg.penalty_rate))
                paths[fid] = pair_paths
    table = compute_delta_table(graph, flows, paths, delay_model)
    mu = graph.num_nodes if cfg.mu is None else cfg.mu
    return PlacementInstance(
        graph=graph,
        flows=flows,
        paths=paths,
        delta_table=table,
        mu=mu,
        scenario=cfg.scenario,
        delay_model=delay_model,
        generator=cfg,
    )


# ----------------------------------------------------------------------------
# serialization


def _graph_to_dict(g: NetworkGraph) -> dict:
    return {
        "name": g.name,
        "nodes": [
            {"id": n.id, "name": n.name, "coords": list(n.coords) if n.coords else None,
             "capacity": n.capacity, "unit_cost": n.unit_cost}
            for n in g.nodes
        ],
        "links": [
            {"u": l.u, "v": l.v, "bandwidth": l.bandwidth, "delay": l.delay, "loss": l.loss}
            for l in g.links
        ],
    }


def _graph_from_dict(d: dict) -> NetworkGraph:
    nodes = tuple(
        NodeSpec(id=n["id"], name=n["name"], coords=tuple(n["coords"]) if n["coords"] else None,
                 capacity=n["capacity"], unit_cost=n["unit_cost"])
        for n in d["nodes"]
    )
    links = tuple(LinkSpec(u=l["u"], v=l["v"], bandwidth=l["bandwidth"], delay=l["delay"], loss=l["loss"]) for l in d["links"])
    return NetworkGraph(nodes=nodes, links=links, name=d.get("name", ""))


def instance_to_dict(inst: PlacementInstance, include_delta: bool = True) -> dict:
    # flows of one ordered pair share their path list; store each list once
    pair_paths: dict[tuple[int, int], list[list[int]]] = {}
    for fl in inst.flows:
        key = (fl.src, fl.dst)
        if key not in pair_paths:
            pair_paths[key] = [list(p.node_seq) for p in inst.paths[fl.id]]
    out = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "instance_id": inst.instance_id,
        "scenario": inst.scenario.value,
        "mu": inst.mu,
        "delay_model": asdict(inst.delay_model),
        "generator": inst.generator.to_dict() if inst.generator else None,
        "graph": _graph_to_dict(inst.graph),
        "flows": [[fl.id, fl.src, fl.dst, fl.bandwidth, fl.sla_bound, fl.penalty_rate] for fl in inst.flows],
        "paths": [{"src": s, "dst": d, "paths": ps} for (s, d), ps in pair_paths.items()],
    }
    if include_delta:
        out["delta"] = [[f, p, n, v] for (f, p, n), v in inst.delta_table.items()]
    return out


def instance_from_dict(data: dict) -> PlacementInstance:
    if not isinstance(data, dict) or data.get("format") != FORMAT_NAME:
        raise InstanceFormatError("not a tars instance file")
    if data.get("version") != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported instance version {data.get('version')!r} (expected {FORMAT_VERSION})")
    try:
        graph = _graph_from_dict(data["graph"])
        flows = [Flow(int(r[0]), int(r[1]), int(r[2]), float(r[3]), float(r[4]), float(r[5])) for r in data["flows"]]
        by_pair = {}
        for entry in data["paths"]:
            by_pair[(entry["src"], entry["dst"])] = tuple(build_path(graph, seq) for seq in entry["paths"])
        paths = {fl.id: by_pair[(fl.src, fl.dst)] for fl in flows}
        delay_model = DelayModelConfig(**data["delay_model"])
        gen = GeneratorConfig.from_dict(data["generator"]) if data.get("generator") else None
        if "delta" in data:
            table = {(int(f), int(p), int(n)): float(v) for f, p, n, v in data["delta"]}
        else:
            table = compute_delta_table(graph, flows, paths, delay_model)
        inst = PlacementInstance(
            graph=graph,
            flows=flows,
            paths=paths,
            delta_table=table,
            mu=int(data["mu"]),
            scenario=Scenario(data["scenario"]),
            delay_model=delay_model,
            generator=gen,
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InstanceFormatError(f"corrupt instance file: {exc!r}") from exc
    stored = data.get("instance_id")
    if stored and stored != inst.instance_id:
        raise InstanceFormatError(f"instance id mismatch: file says {stored}, content hashes to {inst.instance_id}")
    return inst


def fingerprint(inst: PlacementInstance) -> str:
    """Content hash over everything except the delay table (derivable) and provenance."""
    d = instance_to_dict(inst, include_delta=False)
    for k in ("instance_id", "generator", "format", "version"):
        d.pop(k)
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_instance(inst: PlacementInstance, path: str, include_delta: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(inst, include_delta), fh, separators=(",", ":"))
        fh.write("\n")


def load_instance(path: str) -> PlacementInstance:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: not valid JSON ({exc.msg} at char {exc.pos})") from None
    return instance_from_dict(data)


def flows_csv(inst: PlacementInstance) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["flow", "src", "dst", "bandwidth_mbps", "sla_bound_ms", "penalty_per_ms", "n_paths", "shortest_delay_ms"])
    for fl in inst.flows:
        w.writerow([fl.id, fl.src, fl.dst, repr(fl.bandwidth), repr(fl.sla_bound), repr(fl.penalty_rate),
                    len(inst.paths[fl.id]), repr(inst.paths[fl.id][0].total_delay)])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# baseline


def flow_order(inst: PlacementInstance) -> list[int]:
    """Flows by descending bandwidth, lower id first on ties."""
    return sorted(range(len(inst.flows)), key=lambda f: (-inst.flows[f].bandwidth, f))


def no_ta_baseline(inst: PlacementInstance) -> Solution:
    """Greedy routing without TAs: each flow (largest first) takes its lowest-EPDD
    path that still fits every link; flows that fit nowhere are rejected."""
    n_star = inst.fictive
    link_rem = [l.bandwidth for l in inst.graph.links]
    assignment, rejected = {}, []
    for f in flow_order(inst):
        b = inst.flows[f].bandwidth
        order = sorted(range(len(inst.paths[f])), key=lambda p: (inst.delta(f, p, n_star), inst.paths[f][p].node_seq))
        for pidx in order:
            links = inst.paths[f][pidx].link_seq
            if all(link_rem[l] >= b for l in links):
                for l in links:
                    link_rem[l] -= b
                assignment[f] = (pidx, n_star)
                break
        else:
            rejected.append(f)
    status = Status.FEASIBLE if not rejected else Status.INFEASIBLE
    return make_solution(inst, assignment, status, rejected=rejected, solver="no-ta")
