import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tars.network import abilene
from tars.paths import PathError, build_path, k_shortest_paths, segment_stats, shortest_path

from helpers import graph, random_connected_graph, triangle


def test_triangle_shortest_path():
    p = shortest_path(triangle(), 0, 2)
    assert p.node_seq == (0, 1, 2)
    assert p.total_delay == 10.0


def test_triangle_k2():
    paths = k_shortest_paths(triangle(), 0, 2, k=2)
    assert [(p.node_seq, p.total_delay) for p in paths] == [((0, 1, 2), 10.0), ((0, 2), 11.0)]


def test_k1_is_dijkstra():
    g = abilene()
    for s, d in [(0, 9), (3, 8), (10, 1)]:
        assert k_shortest_paths(g, s, d, k=1)[0].node_seq == shortest_path(g, s, d).node_seq


def test_k_exceeding_path_count_returns_all():
    cycle = graph(4, [(0, 1, 1.0, 1.0, 0.0), (1, 2, 1.0, 1.0, 0.0), (2, 3, 1.0, 1.0, 0.0), (3, 0, 1.0, 1.0, 0.0)])
    paths = k_shortest_paths(cycle, 0, 2, k=10)
    assert len(paths) == 2
    assert [p.node_seq for p in paths] == [(0, 1, 2), (0, 3, 2)]  # equal delay: lexicographic


def test_same_endpoints_rejected():
    with pytest.raises(PathError):
        shortest_path(triangle(), 1, 1)


def test_unreachable_names_pair():
    g = graph(3, [(0, 1, 1.0, 1.0, 0.0)])
    with pytest.raises(PathError, match="2"):
        shortest_path(g, 0, 2)


def test_abilene_returns_a_path():
    g = abilene()
    p = shortest_path(g, 0, 1)
    assert p.source == 0 and p.destination == 1


def test_path_candidate_fields():
    g = graph(3, [(0, 1, 1.0, 5.0, 0.1), (1, 2, 1.0, 7.0, 0.2)])
    p = build_path(g, (0, 1, 2))
    assert p.prefix_delay[-1] == p.total_delay == 12.0
    assert p.total_loss == pytest.approx(1 - 0.9 * 0.8, rel=1e-12)
    assert p.node_member(g.fictive_node_id)
    assert all(p.node_member(n) for n in (0, 1, 2))
    assert p.link_used(0) and p.link_used(1)
    assert segment_stats(p, 1) == pytest.approx((5.0, 0.1, 7.0, 0.2), rel=1e-12)
    assert segment_stats(p, 0) == (0.0, 0.0, 12.0, p.total_loss)
    d1, q1, d2, q2 = segment_stats(p, 2)
    assert (d2, q2) == (0.0, 0.0) and d1 == 12.0
    assert segment_stats(p, g.fictive_node_id) == (12.0, p.total_loss, 0.0, 0.0)
    with pytest.raises(PathError):
        segment_stats(p, 5)


def test_max_hops_filter():
    g = abilene()
    paths = k_shortest_paths(g, 0, 10, k=5, max_hops=4)
    assert all(p.hops <= 4 for p in paths)


def _nx_graph(g):
    G = nx.Graph()
    G.add_nodes_from(g.real_nodes)
    for link in g.links:
        G.add_edge(link.u, link.v)
    return G


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 8), extra=st.integers(0, 10))
def test_yen_matches_exhaustive_enumeration(seed, n, extra):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, extra)
    # integer delays make exact ties likely, exercising the tie-break
    g = g.with_attributes(links=[l.__class__(l.u, l.v, l.bandwidth, float(round(l.delay)) or 1.0, l.loss) for l in g.links])
    s, d = (int(x) for x in rng.choice(n, size=2, replace=False))
    brute = [build_path(g, seq) for seq in nx.all_simple_paths(_nx_graph(g), s, d)]
    brute.sort(key=lambda p: (p.total_delay, p.node_seq))
    yen = k_shortest_paths(g, s, d, k=None)
    assert [p.node_seq for p in yen] == [p.node_seq for p in brute]
    k = int(rng.integers(1, 6))
    assert [p.node_seq for p in k_shortest_paths(g, s, d, k=k)] == [p.node_seq for p in brute[:k]]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_segment_identities(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 7, 6)
    s, d = (int(x) for x in rng.choice(7, size=2, replace=False))
    for p in k_shortest_paths(g, s, d, k=4):
        for n in p.node_seq:
            d1, q1, d2, q2 = segment_stats(p, n)
            assert math.isclose(d1 + d2, p.total_delay, rel_tol=1e-12)
            assert math.isclose((1 - q1) * (1 - q2), 1 - p.total_loss, rel_tol=1e-12)
