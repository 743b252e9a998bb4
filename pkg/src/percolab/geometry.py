"""Diameter and lazy random walk mixing time of a percolation cluster.

Mixing convention: lazy walk (hold with probability 1/2, else step to a
uniform open neighbor), worst-case start, total variation threshold 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import eigsh

from .perc import Cluster

TV_THRESHOLD = 0.25
EXACT_DIAMETER_LIMIT = 5000
DOUBLE_SWEEPS = 20
MIXING_SIZE_LIMIT = 2000
CONVENTION = "lazy(1/2) walk, worst start, TV <= 1/4"


class GeometryError(ValueError):
    pass


class ClusterGraph:
    """A connected cluster as a standalone graph on local indices ``0 .. k-1``.

    ``vertices[i]`` is the original vertex of local index ``i``.
    """

    def __init__(self, vertices, edges):
        self.vertices = np.asarray(sorted(int(v) for v in vertices), dtype=np.int64)
        k = len(self.vertices)
        if k == 0:
            raise GeometryError("empty cluster")
        local = {int(v): i for i, v in enumerate(self.vertices)}
        pairs = {(min(local[a], local[b]), max(local[a], local[b])) for a, b in edges}
        if any(a == b for a, b in pairs):
            raise GeometryError("self-loop in cluster")
        if pairs:
            rows, cols = np.array(sorted(pairs), dtype=np.int64).T
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
        self.edge_count = len(rows)
        data = np.ones(2 * len(rows))
        self.adj = sparse.csr_matrix(
            (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(k, k))
        self.degrees = np.asarray(self.adj.sum(axis=1)).ravel().astype(np.int64)
        if k > 1:
            ncomp, _ = csgraph.connected_components(self.adj, directed=False)
            if ncomp != 1:
                raise GeometryError(f"cluster is not connected ({ncomp} components)")

    @classmethod
    def from_cluster(cls, cl: Cluster) -> "ClusterGraph":
        if cl.truncated:
            raise GeometryError("cluster was truncated")
        return cls(cl.dist.keys(), [(a, b) for a, b, _ in cl.edges])

    def __len__(self):
        return len(self.vertices)


def _bfs_dist(adj, src):
    return csgraph.shortest_path(adj, directed=False, unweighted=True, indices=src)


def diameter(c: ClusterGraph, exact_limit: int = EXACT_DIAMETER_LIMIT,
             sweeps: int = DOUBLE_SWEEPS) -> tuple[int, str]:
    """``(diameter, method)``; method is ``"exact"`` or ``"double_sweep"`` (a lower bound)."""
    k = len(c)
    if k == 1:
        return 0, "exact"
    if k <= exact_limit:
        best = 0
        step = max(1, (1 << 22) // k)
        for s in range(0, k, step):
            d = _bfs_dist(c.adj, np.arange(s, min(k, s + step)))
            best = max(best, int(d.max()))
        return best, "exact"
    return double_sweep(c, sweeps), "double_sweep"


def double_sweep(c: ClusterGraph, sweeps: int = DOUBLE_SWEEPS, start: int = 0) -> int:
    """Lower bound on the diameter from iterated double sweeps.

    Each sweep runs BFS from a start vertex and again from the farthest
    vertex found.  The next start is the vertex farthest from every BFS
    source used so far, which pushes later sweeps toward unexplored
    periphery.
    """
    k = len(c)
    best = 0
    near = np.full(k, np.inf)
    v = start
    for _ in range(sweeps):
        d = _bfs_dist(c.adj, v)
        far = int(np.argmax(d))
        d2 = _bfs_dist(c.adj, far)
        best = max(best, int(d.max()), int(d2.max()))
        near = np.minimum(near, np.minimum(d, d2))
        if near.max() == 0:
            break
        v = int(np.argmax(near))
    return best


def stationary_distribution(c: ClusterGraph) -> np.ndarray:
    """``deg(v) / (2 * edges)``; a single vertex is a point mass."""
    if c.edge_count == 0:
        return np.ones(len(c))
    return c.degrees / (2.0 * c.edge_count)


def lazy_transition(c: ClusterGraph) -> np.ndarray:
    k = len(c)
    if k == 1:
        return np.ones((1, 1))
    P = c.adj.toarray() / c.degrees[:, None]
    return 0.5 * np.eye(k) + 0.5 * P


@dataclass(frozen=True)
class MixingResult:
    t_mix: int
    method: str
    tv_at_t_mix: float
    start_policy: str
    convention: str = CONVENTION
    t_rel: float | None = None


def worst_tv(Pt: np.ndarray, pi: np.ndarray) -> float:
    return float(0.5 * np.abs(Pt - pi[None, :]).sum(axis=1).max())


def mixing_time(c: ClusterGraph, size_limit: int = MIXING_SIZE_LIMIT,
                spectral: bool = True) -> MixingResult:
    """Mixing time of the lazy walk on ``c``.

    Up to ``size_limit`` vertices the worst-start TV distance is evaluated
    exactly on powers of the transition matrix: doubling finds a power of two
    past the threshold, then a binary search over sums of smaller powers
    pins the first ``t`` with TV <= 1/4.  Larger clusters get the relaxation
    time of the lazy chain as a proxy (not a TV statement).
    """
    k = len(c)
    if k == 1:
        return MixingResult(0, "exact_tv", 0.0, "all_starts")
    if k > size_limit:
        if not spectral:
            raise GeometryError(f"cluster of {k} vertices exceeds the exact limit {size_limit}")
        t_rel = relaxation_time(c)
        return MixingResult(int(math.ceil(t_rel)), "spectral_bound", float("nan"),
                            "all_starts", convention="proxy, not TV", t_rel=t_rel)
    pi = stationary_distribution(c)
    P = lazy_transition(c)
    trace = [(0, worst_tv(np.eye(k), pi))]
    if trace[0][1] <= TV_THRESHOLD:
        return MixingResult(0, "exact_tv", trace[0][1], "all_starts")
    # powers[j] = P^(2^j)
    powers = [P]
    while True:
        tv = worst_tv(powers[-1], pi)
        trace.append((1 << (len(powers) - 1), tv))
        if tv <= TV_THRESHOLD:
            break
        powers.append(powers[-1] @ powers[-1])
    # first t in (2^(J-1), 2^J] with TV <= 1/4; Q holds P^lo with TV(lo) > 1/4
    J = len(powers) - 1
    if J == 0:
        _check_monotone(trace)
        return MixingResult(1, "exact_tv", tv, "all_starts")
    lo, Q = 1 << (J - 1), powers[J - 1]
    for j in range(J - 2, -1, -1):
        cand = Q @ powers[j]
        tv_c = worst_tv(cand, pi)
        trace.append((lo + (1 << j), tv_c))
        if tv_c > TV_THRESHOLD:
            lo, Q = lo + (1 << j), cand
    t = lo + 1
    tv_t = worst_tv(Q @ P, pi)
    trace.append((t, tv_t))
    _check_monotone(trace)
    return MixingResult(t, "exact_tv", tv_t, "all_starts")


def _check_monotone(trace):
    pts = sorted(trace)
    for (t0, a), (t1, b) in zip(pts, pts[1:]):
        if b > a + 1e-9:
            raise AssertionError(f"TV increased from t={t0} ({a}) to t={t1} ({b})")


def tv_profile(c: ClusterGraph, t_max: int) -> np.ndarray:
    """Worst-start TV distance for ``t = 0 .. t_max`` by direct iteration."""
    pi = stationary_distribution(c)
    P = lazy_transition(c)
    M = np.eye(len(c))
    out = [worst_tv(M, pi)]
    for _ in range(t_max):
        M = M @ P
        out.append(worst_tv(M, pi))
    return np.array(out)


def relaxation_time(c: ClusterGraph) -> float:
    """``1 / (1 - lambda_2)`` of the lazy walk, from the symmetrized operator."""
    k = len(c)
    if k == 1:
        return 0.0
    dinv = 1.0 / np.sqrt(c.degrees)
    A = sparse.diags(dinv) @ c.adj @ sparse.diags(dinv)
    S = 0.5 * sparse.identity(k) + 0.5 * A
    if k <= 64:
        vals = np.linalg.eigvalsh(S.toarray())
    else:
        vals = eigsh(S.tocsc(), k=2, which="LA", tol=1e-9, maxiter=100000,
                     return_eigenvectors=False)
    lam2 = float(np.sort(vals)[-2])
    return 1.0 / (1.0 - lam2)
