import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percolab.graphs import (Complete, Explicit, GraphError, Hamming, Torus, ball_graph,
                             cycle_graph, graph_diameter, graph_from_params, parse_graph,
                             path_graph)

SMALL = [Torus(4, 1), Torus(2, 3), Torus(3, 2), Torus(4, 3), Torus(5, 2), Hamming(1),
         Hamming(2), Hamming(5), Complete(1), Complete(2), Complete(7), Complete(70),
         cycle_graph(6)]


def _all_edges_by_bfs(g):
    ids = set()
    for v in range(g.n):
        for w in g.neighbors(v):
            ids.add(g.edge_id(v, w))
    return ids


def test_family_sizes():
    assert (Torus(4, 3).n, Torus(4, 3).d) == (64, 6)
    assert (Torus(2, 4).n, Torus(2, 4).d) == (16, 4)
    assert (Hamming(10).n, Hamming(10).d) == (1024, 10)
    assert (Complete(9).n, Complete(9).d) == (9, 8)
    for g in SMALL:
        assert g.m * 2 == g.n * g.d


def test_neighbor_examples():
    assert set(Torus(4, 1).neighbors(0)) == {1, 3}
    assert set(Hamming(3).neighbors(0b000)) == {0b001, 0b010, 0b100}
    assert set(Complete(4).neighbors(2)) == {0, 1, 3}


@pytest.mark.parametrize("g", SMALL, ids=lambda g: g.describe())
def test_regular_symmetric_irreflexive(g):
    for v in range(g.n):
        nb = g.neighbors(v)
        assert len(nb) == len(set(nb)) == g.d
        assert v not in nb
        for w in nb:
            assert v in g.neighbors(w)


@pytest.mark.parametrize("g", SMALL, ids=lambda g: g.describe())
def test_edge_ids_bijective(g):
    ids = _all_edges_by_bfs(g)
    assert ids == set(range(g.m))
    u, v = g.edges()
    assert np.all(u < v)
    for e in range(g.m):
        assert g.edge_id(int(u[e]), int(v[e])) == e == g.edge_id(int(v[e]), int(u[e]))


def test_edge_id_examples():
    t = Torus(4, 1)
    assert {t.edge_id(0, 1), t.edge_id(1, 2), t.edge_id(2, 3), t.edge_id(3, 0)} == set(range(4))
    k = Complete(3)
    assert {k.edge_id(0, 1), k.edge_id(0, 2), k.edge_id(1, 2)} == {0, 1, 2}
    h = Hamming(2)
    assert {h.edge_id(a, b) for a in range(4) for b in h.neighbors(a)} == set(range(4))


@settings(max_examples=300, deadline=None)
@given(side=st.integers(2, 9), dim=st.integers(1, 4), data=st.data())
def test_torus_random_vertices(side, dim, data):
    g = Torus(side, dim)
    v = data.draw(st.integers(0, g.n - 1))
    nb = g.neighbors(v)
    assert len(set(nb)) == g.d and v not in nb
    for w in nb:
        e = g.edge_id(v, w)
        a, b = g.edge_endpoints([e])
        assert {int(a[0]), int(b[0])} == {v, w}


@settings(max_examples=300, deadline=None)
@given(dim=st.integers(1, 40), data=st.data())
def test_hamming_random_vertices(dim, data):
    g = Hamming(dim)
    v = data.draw(st.integers(0, g.n - 1))
    for w in g.neighbors(v):
        assert bin(v ^ w).count("1") == 1
        a, b = g.edge_endpoints([g.edge_id(v, w)])
        assert (int(a[0]), int(b[0])) == (min(v, w), max(v, w))


@settings(max_examples=300, deadline=None)
@given(n=st.integers(2, 10**7), data=st.data())
def test_complete_decode_large(n, data):
    g = Complete(n)
    u = data.draw(st.integers(0, n - 1))
    v = data.draw(st.integers(0, n - 1).filter(lambda x: x != u))
    e = g.edge_id(u, v)
    assert 0 <= e < g.m
    a, b = g.edge_endpoints([e])
    assert (int(a[0]), int(b[0])) == (min(u, v), max(u, v))


def test_range_and_adjacency_errors():
    with pytest.raises(GraphError):
        Torus(4, 2).neighbors(16)
    with pytest.raises(GraphError):
        Torus(4, 2).neighbors(-1)
    with pytest.raises(GraphError):
        Torus(6, 1).edge_id(0, 3)
    with pytest.raises(GraphError):
        Hamming(3).edge_id(0, 3)
    with pytest.raises(GraphError):
        Complete(3).edge_id(1, 1)
    with pytest.raises(GraphError):
        Torus(1, 2)


def test_ball_graph_examples():
    assert ball_graph(Torus(6, 1), 0, 2) == {0, 1, 2, 4, 5}
    assert ball_graph(Hamming(4), 5, 0) == {5}
    assert ball_graph(Complete(5), 3, 1) == set(range(5))
    for g in SMALL:
        assert ball_graph(g, 0, graph_diameter(g)) == set(range(g.n))


def test_explicit_validation_and_file_roundtrip(tmp_path):
    with pytest.raises(GraphError):
        Explicit(3, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Explicit(3, [(1, 1)])
    with pytest.warns(UserWarning):
        g = Explicit(3, [(0, 1), (1, 2)])
    assert not g.regular and g.d == 2
    c = cycle_graph(5)
    f = tmp_path / "c5.txt"
    c.to_file(f)
    back = Explicit.from_file(f)
    assert back.m == 5 and back.regular
    assert {back.edge_id(a, b) for a in range(5) for b in back.neighbors(a)} == set(range(5))
    bad = tmp_path / "bad.txt"
    bad.write_text("3 2\n0 1\n1 1\n")
    with pytest.raises(GraphError):
        Explicit.from_file(bad)
    bad.write_text("3 2\n0 1\n0 1\n")
    with pytest.raises(GraphError):
        Explicit.from_file(bad)
    bad.write_text("3 2\n0 1\n2 1\n")
    with pytest.raises(GraphError):
        Explicit.from_file(bad)


def test_path_graph_is_quiet_and_irregular():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        g = path_graph(3)
    assert g.m == 2 and not g.regular


def test_parse_and_params():
    assert parse_graph("torus", 4, 3) == Torus(4, 3)
    assert parse_graph("hamming", dim=10) == Hamming(10)
    assert parse_graph("complete", 12) == Complete(12)
    assert graph_from_params("torus", side=4, dim=3) == Torus(4, 3)
    with pytest.raises(GraphError):
        parse_graph("torus", 4)
    with pytest.raises(GraphError):
        parse_graph("lattice", 4, 2)
    assert Torus(4, 3) != Torus(4, 2)
    assert len({Torus(4, 3), Torus(4, 3), Hamming(3)}) == 2


def test_dense_flag():
    assert not Complete(65).dense
    assert Complete(66).dense
    assert not Hamming(20).dense
