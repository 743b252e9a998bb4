import numpy as np
import pytest

from percolab import geometry as geo
from percolab.graphs import Complete, Torus, cycle_graph, path_graph
from percolab.perc import CouplingSeed, explore_cluster, largest_cluster


def _path(k):
    return geo.ClusterGraph(range(k), [(i, i + 1) for i in range(k - 1)])


def _cycle(k):
    return geo.ClusterGraph(range(k), [(i, (i + 1) % k) for i in range(k)])


def _random_clusters(count, seed=0):
    out = []
    g = Torus(8, 2)
    rep = 0
    while len(out) < count:
        cl = explore_cluster(g, CouplingSeed(seed, rep), 0.55)
        rep += 1
        if cl.size >= 2:
            out.append(geo.ClusterGraph.from_cluster(cl))
    return out


def test_cluster_graph_basics():
    c = geo.ClusterGraph([10, 4, 7], [(4, 7), (7, 10)])
    assert list(c.vertices) == [4, 7, 10]
    assert c.edge_count == 2 and c.degrees.sum() == 2 * c.edge_count
    with pytest.raises(geo.GeometryError):
        geo.ClusterGraph([0, 1, 2], [(0, 1)])
    with pytest.raises(geo.GeometryError):
        geo.ClusterGraph([], [])
    cl = explore_cluster(Torus(6, 2), CouplingSeed(1), 1.0, cap=5)
    with pytest.raises(geo.GeometryError):
        geo.ClusterGraph.from_cluster(cl)


def test_diameter_examples():
    assert geo.diameter(geo.ClusterGraph([3], [])) == (0, "exact")
    assert geo.diameter(_path(3)) == (2, "exact")
    assert geo.diameter(_cycle(6)) == (3, "exact")
    big = _path(30)
    assert geo.diameter(big, exact_limit=10) == (29, "double_sweep")


def test_double_sweep_is_a_lower_bound():
    clusters = _random_clusters(1000)
    agree = 0
    for c in clusters:
        exact, _ = geo.diameter(c)
        lower = geo.double_sweep(c)
        assert lower <= exact <= 2 * lower
        agree += lower == exact
    assert agree >= 0.95 * len(clusters)


def test_stationary_distribution():
    assert np.array_equal(geo.stationary_distribution(geo.ClusterGraph([0], [])), [1.0])
    assert np.allclose(geo.stationary_distribution(_path(2)), [0.5, 0.5])
    assert np.allclose(geo.stationary_distribution(_path(3)), [0.25, 0.5, 0.25])
    for c in _random_clusters(30, seed=4):
        pi = geo.stationary_distribution(c)
        assert abs(pi.sum() - 1.0) < 1e-12
        P = geo.lazy_transition(c)
        flow = pi[:, None] * P
        assert np.max(np.abs(flow - flow.T)) < 1e-12
        assert np.allclose(P.sum(axis=1), 1.0)


def test_mixing_examples():
    single = geo.mixing_time(geo.ClusterGraph([5], []))
    assert (single.t_mix, single.method, single.tv_at_t_mix) == (0, "exact_tv", 0.0)
    k2 = geo.mixing_time(_path(2))
    assert k2.t_mix == 1 and k2.tv_at_t_mix == 0.0
    assert k2.convention == geo.CONVENTION


@pytest.mark.parametrize("c", [_cycle(4), _cycle(9), _path(7), _path(40)]
                         + _random_clusters(40, seed=2),
                         ids=lambda c: f"k{len(c)}")
def test_mixing_matches_direct_iteration(c):
    res = geo.mixing_time(c)
    tv = geo.tv_profile(c, res.t_mix + 1)
    assert tv[res.t_mix] <= geo.TV_THRESHOLD
    if res.t_mix > 0:
        assert tv[res.t_mix - 1] > geo.TV_THRESHOLD
    assert res.tv_at_t_mix == pytest.approx(tv[res.t_mix], abs=1e-12)
    assert np.all(np.diff(tv) <= 1e-12)


def test_four_cycle_pinned_by_dense_oracle():
    c = _cycle(4)
    P = np.array([[0.5, 0.25, 0, 0.25], [0.25, 0.5, 0.25, 0],
                  [0, 0.25, 0.5, 0.25], [0.25, 0, 0.25, 0.5]])
    pi = np.full(4, 0.25)
    t, M = 0, np.eye(4)
    while 0.5 * np.abs(M - pi).sum(axis=1).max() > 0.25:
        M, t = M @ P, t + 1
    assert geo.mixing_time(c).t_mix == t


def test_mixing_relabel_invariance():
    rng = np.random.default_rng(5)
    for c in _random_clusters(10, seed=7):
        perm = rng.permutation(1000)[: len(c)]
        mapping = dict(zip(c.vertices.tolist(), perm.tolist()))
        rows, cols = c.adj.nonzero()
        edges = [(mapping[int(c.vertices[a])], mapping[int(c.vertices[b])])
                 for a, b in zip(rows, cols) if a < b]
        d = geo.ClusterGraph(perm, edges)
        assert geo.mixing_time(d).t_mix == geo.mixing_time(c).t_mix
        assert geo.diameter(d) == geo.diameter(c)


def test_spectral_proxy():
    c = _cycle(30)
    res = geo.mixing_time(c, size_limit=10)
    assert res.method == "spectral_bound" and res.convention == "proxy, not TV"
    # lazy walk on the n-cycle: lambda_2 = (1 + cos(2 pi / n)) / 2
    lam2 = 0.5 * (1 + np.cos(2 * np.pi / 30))
    assert res.t_rel == pytest.approx(1 / (1 - lam2), rel=1e-6)
    big = _cycle(200)
    lam2 = 0.5 * (1 + np.cos(2 * np.pi / 200))
    assert geo.relaxation_time(big) == pytest.approx(1 / (1 - lam2), rel=1e-6)
    with pytest.raises(geo.GeometryError):
        geo.mixing_time(c, size_limit=10, spectral=False)


def test_largest_cluster_geometry_on_graph():
    g = Complete(400)
    cl = largest_cluster(g, CouplingSeed(3), 1.0 / 399)
    c = geo.ClusterGraph.from_cluster(cl)
    assert len(c) == cl.size
    d, how = geo.diameter(c)
    assert how == "exact" and d >= max(cl.dist.values())
    full = geo.ClusterGraph.from_cluster(explore_cluster(cycle_graph(8), CouplingSeed(1), 1.0))
    assert geo.diameter(full) == (4, "exact")
    p3 = geo.ClusterGraph.from_cluster(explore_cluster(path_graph(3), CouplingSeed(1), 1.0))
    assert geo.diameter(p3) == (2, "exact")
