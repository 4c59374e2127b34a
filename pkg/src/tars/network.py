"""Physical network model and topology loaders.

Two input formats are supported:

* SNDlib native files (``NODES ( ... )`` / ``LINKS ( ... )`` sections).  Only
  topology is consumed; link delay is derived from node coordinates and every
  other attribute is left unset for the instance generator to fill.
* A plain line-oriented format::

      # comment
      node <id> <name> [<lat> <lon>] [capacity=<Mbps>] [cost=<$/Mbps>]
      link <u> <v> <bandwidth Mbps> <delay ms> <loss prob>

The graph also carries a fictive node with id ``N`` (one past the last real
node).  It stands for "no TA deployed": unbounded capacity, zero cost and no
incident links.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

EARTH_RADIUS_KM = 6371.0
FIBER_KM_PER_MS = 200.0
MIN_DELAY_MS = 0.1


class TopologyError(ValueError):
    """Raised for malformed or invalid topology input."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class NodeSpec:
    id: int
    name: str
    coords: Optional[tuple[float, float]] = None  # (lat, lon) degrees
    capacity: Optional[float] = None  # Mbps
    unit_cost: Optional[float] = None  # $/Mbps


@dataclass(frozen=True)
class LinkSpec:
    u: int
    v: int
    bandwidth: Optional[float] = None  # Mbps, shared by both directions
    delay: float = MIN_DELAY_MS  # ms, one way
    loss: Optional[float] = None  # per traversal

    @property
    def endpoints(self) -> frozenset[int]:
        return frozenset((self.u, self.v))

    def other(self, node: int) -> int:
        return self.v if node == self.u else self.u


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    name: str = ""
    _adj: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[int, list[tuple[int, int]]] = {n.id: [] for n in self.nodes}
        for lid, link in enumerate(self.links):
            adj.setdefault(link.u, []).append((link.v, lid))
            adj.setdefault(link.v, []).append((link.u, lid))
        for nbrs in adj.values():
            nbrs.sort()
        object.__setattr__(self, "_adj", adj)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def fictive_node_id(self) -> int:
        return len(self.nodes)

    @property
    def real_nodes(self) -> range:
        return range(len(self.nodes))

    def neighbors(self, node: int) -> list[tuple[int, int]]:
        """Sorted ``(neighbor, link_id)`` pairs of ``node``."""
        return self._adj.get(node, [])

    def link_between(self, u: int, v: int) -> int:
        for w, lid in self.neighbors(u):
            if w == v:
                return lid
        raise KeyError(f"no link between {u} and {v}")

    def node_capacity(self, node: int) -> float:
        if node == self.fictive_node_id:
            return math.inf
        return self.nodes[node].capacity

    def node_cost(self, node: int) -> float:
        if node == self.fictive_node_id:
            return 0.0
        return self.nodes[node].unit_cost

    def components(self) -> list[list[int]]:
        """Connected components over real nodes, each sorted, ordered by first node."""
        seen: set[int] = set()
        comps = []
        for start in self.real_nodes:
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                n = stack.pop()
                comp.append(n)
                for w, _ in self.neighbors(n):
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(sorted(comp))
        return comps

    def with_attributes(self, nodes=None, links=None) -> "NetworkGraph":
        return NetworkGraph(
            nodes=tuple(nodes) if nodes is not None else self.nodes,
            links=tuple(links) if links is not None else self.links,
            name=self.name,
        )


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def propagation_delay_ms(a: tuple[float, float], b: tuple[float, float]) -> float:
    # canonical argument order keeps delay(u, v) == delay(v, u) bit for bit
    a, b = sorted((a, b))
    return max(MIN_DELAY_MS, haversine_km(a, b) / FIBER_KM_PER_MS)


def _check_unique_links(links: Iterable[LinkSpec], lines: Iterable[Optional[int]]) -> None:
    seen = set()
    for link, line in zip(links, lines):
        if link.u == link.v:
            raise TopologyError(f"self-loop on node {link.u}", line)
        key = link.endpoints
        if key in seen:
            raise TopologyError(f"duplicate link {link.u}-{link.v}", line)
        seen.add(key)


_SECTION_RE = re.compile(r"^([A-Z_]+)\s*\(\s*$")
_SND_NODE_RE = re.compile(r"^(\S+)\s*\(\s*(\S+)\s+(\S+)\s*\)\s*$")
_SND_LINK_RE = re.compile(r"^(\S+)\s*\(\s*(\S+)\s+(\S+)\s*\)(.*)$")


def load_sndlib(text: str, name: str = "") -> NetworkGraph:
    """Parse an SNDlib native network file.

    Node coordinates are given as ``(longitude latitude)`` in SNDlib and are
    stored here as ``(lat, lon)``.
    """
    section = None
    nodes: list[NodeSpec] = []
    index: dict[str, int] = {}
    links: list[LinkSpec] = []
    link_lines: list[int] = []
    found = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("?"):
            continue
        if section is None:
            m = _SECTION_RE.match(line)
            if m:
                section = m.group(1)
                found.add(section)
                continue
            raise TopologyError(f"unexpected content outside a section: {line!r}", lineno)
        if line == ")":
            section = None
            continue
        if section == "NODES":
            m = _SND_NODE_RE.match(line)
            if not m:
                raise TopologyError(f"malformed node record: {line!r}", lineno)
            node_name = m.group(1)
            if node_name in index:
                raise TopologyError(f"duplicate node {node_name}", lineno)
            try:
                lon, lat = float(m.group(2)), float(m.group(3))
            except ValueError:
                raise TopologyError(f"bad coordinates: {line!r}", lineno) from None
            index[node_name] = len(nodes)
            nodes.append(NodeSpec(id=len(nodes), name=node_name, coords=(lat, lon)))
        elif section == "LINKS":
            m = _SND_LINK_RE.match(line)
            if not m:
                raise TopologyError(f"malformed link record: {line!r}", lineno)
            src, dst = m.group(2), m.group(3)
            for end in (src, dst):
                if end not in index:
                    raise TopologyError(f"link references unknown node {end}", lineno)
            u, v = index[src], index[dst]
            delay = propagation_delay_ms(nodes[u].coords, nodes[v].coords)
            links.append(LinkSpec(u=u, v=v, delay=delay))
            link_lines.append(lineno)
    if section is not None:
        raise TopologyError(f"unterminated section {section}")
    missing = {"NODES", "LINKS"} - found
    if "NODES" in missing:
        raise TopologyError("missing NODES section")
    _check_unique_links(links, link_lines)
    return NetworkGraph(nodes=tuple(nodes), links=tuple(links), name=name)


def _parse_float(token: str, what: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise TopologyError(f"bad {what} {token!r}", lineno) from None


def load_plain(text: str, name: str = "") -> NetworkGraph:
    nodes: dict[int, NodeSpec] = {}
    node_lines: dict[int, int] = {}
    links: list[LinkSpec] = []
    link_lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        kind, args = parts[0], parts[1:]
        if kind == "node":
            if len(args) < 2:
                raise TopologyError("node needs <id> <name>", lineno)
            try:
                nid = int(args[0])
            except ValueError:
                raise TopologyError(f"bad node id {args[0]!r}", lineno) from None
            if nid in nodes:
                raise TopologyError(f"duplicate node id {nid}", lineno)
            positional = [a for a in args[2:] if "=" not in a]
            keywords = dict(a.split("=", 1) for a in args[2:] if "=" in a)
            if len(positional) not in (0, 2):
                raise TopologyError("coordinates need both <lat> <lon>", lineno)
            coords = None
            if positional:
                coords = (_parse_float(positional[0], "latitude", lineno), _parse_float(positional[1], "longitude", lineno))
            unknown = set(keywords) - {"capacity", "cost"}
            if unknown:
                raise TopologyError(f"unknown node attribute(s) {sorted(unknown)}", lineno)
            capacity = _parse_float(keywords["capacity"], "capacity", lineno) if "capacity" in keywords else None
            cost = _parse_float(keywords["cost"], "cost", lineno) if "cost" in keywords else None
            if capacity is not None and capacity <= 0:
                raise TopologyError(f"node {nid}: capacity must be > 0", lineno)
            if cost is not None and cost < 0:
                raise TopologyError(f"node {nid}: cost must be >= 0", lineno)
            nodes[nid] = NodeSpec(id=nid, name=args[1], coords=coords, capacity=capacity, unit_cost=cost)
            node_lines[nid] = lineno
        elif kind == "link":
            if len(args) != 5:
                raise TopologyError("link needs <u> <v> <bandwidth> <delay> <loss>", lineno)
            try:
                u, v = int(args[0]), int(args[1])
            except ValueError:
                raise TopologyError("bad link endpoints", lineno) from None
            bw = _parse_float(args[2], "bandwidth", lineno)
            delay = _parse_float(args[3], "delay", lineno)
            loss = _parse_float(args[4], "loss", lineno)
            label = f"link {u}-{v}"
            if bw <= 0:
                raise TopologyError(f"{label}: bandwidth must be > 0", lineno)
            if delay <= 0:
                raise TopologyError(f"{label}: delay must be > 0", lineno)
            if not 0 <= loss < 1:
                raise TopologyError(f"{label}: loss must be < 1 and >= 0", lineno)
            links.append(LinkSpec(u=u, v=v, bandwidth=bw, delay=delay, loss=loss))
            link_lines.append(lineno)
        else:
            raise TopologyError(f"unknown record type {kind!r}", lineno)
    ids = sorted(nodes)
    if ids != list(range(len(ids))):
        raise TopologyError(f"node ids must be dense 0..N-1, got {ids}")
    for link, lineno in zip(links, link_lines):
        for end in (link.u, link.v):
            if end not in nodes:
                raise TopologyError(f"link references unknown node {end}", lineno)
    _check_unique_links(links, link_lines)
    return NetworkGraph(nodes=tuple(nodes[i] for i in ids), links=tuple(links), name=name)


def serialize_plain(g: NetworkGraph) -> str:
    """Inverse of :func:`load_plain`.  Links must have bandwidth and loss set."""
    out = []
    if g.name:
        out.append(f"# {g.name}")
    for n in g.nodes:
        parts = ["node", str(n.id), n.name]
        if n.coords is not None:
            parts += [repr(n.coords[0]), repr(n.coords[1])]
        if n.capacity is not None:
            parts.append(f"capacity={n.capacity!r}")
        if n.unit_cost is not None:
            parts.append(f"cost={n.unit_cost!r}")
        out.append(" ".join(parts))
    for link in g.links:
        if link.bandwidth is None or link.loss is None:
            raise ValueError(f"link {link.u}-{link.v} has unset bandwidth/loss")
        out.append(f"link {link.u} {link.v} {link.bandwidth!r} {link.delay!r} {link.loss!r}")
    return "\n".join(out) + "\n"


def validate(g: NetworkGraph) -> list[str]:
    """Return human-readable invariant violations; empty means valid.

    Unset attributes (``None``) are not violations: SNDlib topologies are
    completed later by the instance generator.
    """
    problems = []
    for i, n in enumerate(g.nodes):
        if n.id != i:
            problems.append(f"node {n.name}: id {n.id} is not dense (expected {i})")
        if n.capacity is not None and not n.capacity > 0:
            problems.append(f"node {n.name}: capacity must be > 0")
        if n.unit_cost is not None and not n.unit_cost >= 0:
            problems.append(f"node {n.name}: unit cost must be >= 0")
    seen = set()
    n_real = g.num_nodes
    for link in g.links:
        label = f"link {link.u}-{link.v}"
        if not (0 <= link.u < n_real and 0 <= link.v < n_real):
            problems.append(f"{label}: endpoint is not a real node")
            continue
        if link.u == link.v:
            problems.append(f"{label}: self-loop")
        if link.endpoints in seen:
            problems.append(f"{label}: duplicate")
        seen.add(link.endpoints)
        if not link.delay > 0:
            problems.append(f"{label}: delay must be > 0")
        if link.loss is not None and not 0 <= link.loss < 1:
            problems.append(f"{label}: loss must be < 1 and >= 0")
        if link.bandwidth is not None and not link.bandwidth > 0:
            problems.append(f"{label}: bandwidth must be > 0")
    comps = g.components()
    if len(comps) > 1:
        main = max(comps, key=len)
        for comp in comps:
            if comp is main:
                continue
            names = ", ".join(g.nodes[i].name for i in comp)
            if len(comp) == 1:
                problems.append(f"node {names} is isolated")
            else:
                problems.append(f"disconnected component: {names}")
    return problems


def load_topology(path: str, fmt: Optional[str] = None) -> NetworkGraph:
    """Load a topology file; ``fmt`` is ``"sndlib"``, ``"plain"`` or sniffed."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if fmt is None:
        fmt = "sndlib" if re.search(r"^\s*NODES\s*\(", text, re.M) else "plain"
    stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    if fmt == "sndlib":
        return load_sndlib(text, name=stem)
    return load_plain(text, name=stem)


def abilene() -> NetworkGraph:
    """The bundled Abilene topology (12 nodes, 15 links)."""
    text = resources.files("tars.data").joinpath("abilene.txt").read_text(encoding="utf-8")
    return load_sndlib(text, name="abilene")


BUILTIN_TOPOLOGIES = {"abilene": abilene}


def resolve_topology(source: str) -> NetworkGraph:
    if source in BUILTIN_TOPOLOGIES:
        return BUILTIN_TOPOLOGIES[source]()
    return load_topology(source)

