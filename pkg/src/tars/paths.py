"""Candidate path enumeration (Dijkstra + Yen) and per-path segment aggregates."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

from tars.network import NetworkGraph


class PathError(ValueError):
    pass


@dataclass(frozen=True)
class PathCandidate:
    """A loopless path with prefix aggregates for O(1) split queries.

    ``prefix_delay[i]`` / ``prefix_survive[i]`` cover the links between
    ``node_seq[0]`` and ``node_seq[i]``.
    """

    node_seq: tuple[int, ...]
    link_seq: tuple[int, ...]
    link_delays: tuple[float, ...]
    link_losses: tuple[float, ...]
    prefix_delay: tuple[float, ...]
    prefix_survive: tuple[float, ...]
    fictive_id: int

    @property
    def total_delay(self) -> float:
        return self.prefix_delay[-1]

    @property
    def total_loss(self) -> float:
        return 1.0 - self.prefix_survive[-1]

    @property
    def source(self) -> int:
        return self.node_seq[0]

    @property
    def destination(self) -> int:
        return self.node_seq[-1]

    @property
    def hops(self) -> int:
        return len(self.link_seq)

    def node_member(self, n: int) -> bool:
        """beta: does the path pass through ``n``?  Always true for the fictive node."""
        return n == self.fictive_id or n in self.node_seq

    def link_used(self, lid: int) -> bool:
        return lid in self.link_seq

    def sort_key(self) -> tuple:
        return (self.total_delay, self.node_seq)


def build_path(g: NetworkGraph, node_seq, default_loss: float = 0.0) -> PathCandidate:
    """Build a :class:`PathCandidate` from a node sequence over ``g``.

    Links with unset loss contribute ``default_loss``.
    """
    node_seq = tuple(int(n) for n in node_seq)
    if len(node_seq) < 2:
        raise PathError("a path needs at least two nodes")
    if len(set(node_seq)) != len(node_seq):
        raise PathError(f"path {node_seq} repeats a node")
    link_seq, delays, losses = [], [], []
    for u, v in zip(node_seq, node_seq[1:]):
        try:
            lid = g.link_between(u, v)
        except KeyError:
            raise PathError(f"no link between {u} and {v}") from None
        link = g.links[lid]
        link_seq.append(lid)
        delays.append(link.delay)
        losses.append(default_loss if link.loss is None else link.loss)
    pd, ps = [0.0], [1.0]
    for d, q in zip(delays, losses):
        pd.append(pd[-1] + d)
        ps.append(ps[-1] * (1.0 - q))
    return PathCandidate(
        node_seq=node_seq,
        link_seq=tuple(link_seq),
        link_delays=tuple(delays),
        link_losses=tuple(losses),
        prefix_delay=tuple(pd),
        prefix_survive=tuple(ps),
        fictive_id=g.fictive_node_id,
    )


def _path_delay(g: NetworkGraph, node_seq) -> float:
    total = 0.0
    for u, v in zip(node_seq, node_seq[1:]):
        total += g.links[g.link_between(u, v)].delay
    return total


def _dijkstra(g, s, d, banned_nodes=frozenset(), banned_links=frozenset()):
    """Minimum (delay, node sequence) path, lexicographically smallest on ties.

    Delays accumulate left to right exactly as in :func:`build_path`, so the
    returned cost equals the candidate's ``total_delay`` bit for bit.
    """
    heap = [(0.0, (s,))]
    done = set()
    while heap:
        dist, seq = heapq.heappop(heap)
        node = seq[-1]
        if node in done:
            continue
        done.add(node)
        if node == d:
            return dist, seq
        for w, lid in g.neighbors(node):
            if w in done or w in banned_nodes or lid in banned_links:
                continue
            heapq.heappush(heap, (dist + g.links[lid].delay, seq + (w,)))
    return None


def _check_endpoints(g: NetworkGraph, s: int, d: int) -> None:
    for n in (s, d):
        if not 0 <= n < g.num_nodes:
            raise PathError(f"node {n} does not exist")
    if s == d:
        raise PathError(f"source and destination are both {s}")


def shortest_path(g: NetworkGraph, s: int, d: int) -> PathCandidate:
    _check_endpoints(g, s, d)
    found = _dijkstra(g, s, d)
    if found is None:
        raise PathError(f"node {d} is unreachable from {s}")
    return build_path(g, found[1])


def k_shortest_paths(
    g: NetworkGraph, s: int, d: int, k: Optional[int] = 5, max_hops: Optional[int] = None
) -> list[PathCandidate]:
    """Yen's loopless k-shortest paths ordered by (total delay, node sequence).

    ``k=None`` enumerates every simple path.  ``max_hops`` filters the output;
    enumeration continues past over-long paths so the first ``k`` admissible
    ones are returned.
    """
    if k is not None and k < 1:
        raise PathError("k must be >= 1")
    _check_endpoints(g, s, d)
    first = _dijkstra(g, s, d)
    if first is None:
        raise PathError(f"node {d} is unreachable from {s}")
    accepted: list[tuple[float, tuple[int, ...]]] = [first]
    seen = {first[1]}
    candidates: list[tuple[float, tuple[int, ...]]] = []
    out = []

    def admit(seq):
        if max_hops is None or len(seq) - 1 <= max_hops:
            out.append(build_path(g, seq))

    admit(first[1])
    while k is None or len(out) < k:
        last = accepted[-1][1]
        for i in range(len(last) - 1):
            root = last[: i + 1]
            spur = root[-1]
            banned_links = set()
            for _, seq in accepted:
                if seq[: i + 1] == root and len(seq) > i + 1:
                    banned_links.add(g.link_between(seq[i], seq[i + 1]))
            banned_nodes = frozenset(root[:-1])
            found = _dijkstra(g, spur, d, banned_nodes, frozenset(banned_links))
            if found is None:
                continue
            seq = root[:-1] + found[1]
            if seq in seen:
                continue
            seen.add(seq)
            heapq.heappush(candidates, (_path_delay(g, seq), seq))
        if not candidates:
            break
        best = heapq.heappop(candidates)
        accepted.append(best)
        admit(best[1])
    return out


def segment_stats(p: PathCandidate, split: int) -> tuple[float, float, float, float]:
    """Delay and loss of the source->split and split->destination segments.

    Returns ``(d1, q1, d2, q2)``.  Splitting at the fictive node puts the whole
    path in the first segment.
    """
    if split == p.fictive_id:
        return p.total_delay, p.total_loss, 0.0, 0.0
    try:
        i = p.node_seq.index(split)
    except ValueError:
        raise PathError(f"node {split} is not on path {p.node_seq}") from None
    d1 = p.prefix_delay[i]
    q1 = 1.0 - p.prefix_survive[i]
    survive = 1.0
    for q in p.link_losses[i:]:
        survive *= 1.0 - q
    # split at the source reproduces the whole-path aggregates exactly
    return d1, q1, p.total_delay - d1, 1.0 - survive
