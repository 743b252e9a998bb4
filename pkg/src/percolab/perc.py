"""Coupled bond percolation: edge labels, cluster and ball exploration.

Every edge ``e`` carries a label ``X_e`` uniform on ``[0, 1)`` and is open at
level ``p`` iff ``X_e < p``.  Labels depend only on ``(master_seed,
replica_index, edge id)``, so one seed realizes every ``p`` at once and
results never depend on evaluation order or worker count.

Two label sources implement this:

``HashLabels``
    ``X_e`` is a splitmix64 hash of the key and the edge id.  Used for every
    graph of moderate degree.

``RevealLabels``
    For dense graphs (large complete graphs) hashing all ``n*(n-1)/2`` edges
    per replica is out of reach.  Only edges with ``X_e < p_max`` are ever
    materialized; they are revealed vertex by vertex with labels uniform on
    ``[0, p_max)``, which is the exact conditional law.  The realization is a
    deterministic function of the seed, ``p_max`` and the (deterministic)
    order of queries.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .graphs import Complete, GraphError, TransitiveGraph

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SALT_KEY = 0x5851F42D4C957F2D
_SALT_RNG = 0x2545F4914F6CDD1D
_TWO_M53 = 2.0**-53

#: label arrays of this many entries are materialized per replica chunk
_CHUNK_ENTRIES = 1 << 21
#: clusters may be explored without a cap up to this many vertices
MAX_UNCAPPED = 10**6


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return z ^ (z >> 31)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class CouplingSeed:
    master_seed: int
    replica_index: int = 0

    def __post_init__(self):
        if self.replica_index < 0:
            raise ValueError("replica_index must be >= 0")

    @property
    def key(self) -> int:
        return stream_key(self.master_seed, self.replica_index)


def stream_key(master_seed: int, replica_index: int) -> int:
    """64-bit key of one replica's label stream."""
    z = _mix((master_seed & _M64) ^ _SALT_KEY)
    return _mix((z + (replica_index + 1) * _GOLDEN) & _M64)


def stream_keys(master_seed: int, replicas) -> np.ndarray:
    z = np.uint64(_mix((master_seed & _M64) ^ _SALT_KEY))
    r = np.asarray(replicas, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix_np(z + (r + np.uint64(1)) * np.uint64(_GOLDEN))


def edge_label(seed: CouplingSeed, e: int) -> float:
    """The uniform label ``X_e`` of edge id ``e``."""
    return _label(seed.key, e)


def _label(key: int, e: int) -> float:
    return (_mix((key + (e + 1) * _GOLDEN) & _M64) >> 11) * _TWO_M53


def edge_labels(master_seed: int, replicas, edge_ids) -> np.ndarray:
    """Labels for every (replica, edge) pair, shape ``(len(replicas), len(edge_ids))``.

    Bit-identical to :func:`edge_label`.
    """
    keys = stream_keys(master_seed, replicas)[:, None]
    e = np.asarray(edge_ids, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        bits = _mix_np(keys + (e + np.uint64(1)) * np.uint64(_GOLDEN))
    return (bits >> np.uint64(11)).astype(np.float64) * _TWO_M53


def edge_open(seed: CouplingSeed, e: int, p: float) -> bool:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return edge_label(seed, e) < p


# ----------------------------------------------------------------------------
# label sources


class HashLabels:
    """Per-edge hashed labels; valid for every ``p``."""

    p_max = 1.0

    def __init__(self, g: TransitiveGraph, seed: CouplingSeed):
        self.g = g
        self.seed = seed
        self._key = seed.key

    def label(self, e: int) -> float:
        return _label(self._key, e)

    def open_incident(self, v: int, p: float) -> list[tuple[int, float]]:
        """``(neighbor, label)`` for the open edges at ``v``."""
        key = self._key
        out = []
        for w, e in self.g.incident(v):
            x = (_mix((key + (e + 1) * _GOLDEN) & _M64) >> 11) * _TWO_M53
            if x < p:
                out.append((w, x))
        return out

    def all_open(self, p: float):
        u, v = self.g.edges()
        x = edge_labels(self.seed.master_seed, [self.seed.replica_index], np.arange(self.g.m))[0]
        keep = x < p
        return u[keep], v[keep], x[keep]


class RevealLabels:
    """Lazily revealed labels below ``p_max`` on a complete graph."""

    def __init__(self, g: Complete, seed: CouplingSeed, p_max: float):
        if not isinstance(g, Complete):
            raise GraphError("reveal sampling is implemented for complete graphs only")
        if not 0.0 <= p_max <= 1.0:
            raise ValueError("p_max must lie in [0, 1]")
        self.g = g
        self.seed = seed
        self.p_max = float(p_max)
        key = _mix(seed.key ^ _SALT_RNG)
        self._rng = random.Random(key)
        self._np_seed = key
        # unrevealed vertices are pool[0:size]; both maps store only entries
        # moved away from the identity permutation
        self._pool: dict[int, int] = {}
        self._pos: dict[int, int] = {}
        self._size = g.n
        self._adj: dict[int, list[tuple[int, float]]] = {}
        self._pending: dict[int, list[tuple[int, float]]] = {}
        self._bulk = False

    def _reveal(self, v: int) -> list[tuple[int, float]]:
        pool, pos = self._pool, self._pos
        # swap-remove v from the unrevealed pool
        i = pos.get(v, v)
        last = self._size - 1
        tail = pool.get(last, last)
        pool[i], pool[last] = tail, v
        pos[tail], pos[v] = i, last
        self._size = last
        size = last
        pm = self.p_max
        rnd = self._rng.random
        nbrs = self._pending.pop(v, [])
        fresh = []
        if pm >= 1.0:
            fresh = [(pool.get(j, j), rnd()) for j in range(size)]
        elif pm > 0.0 and size:
            logq = math.log1p(-pm)
            j = -1
            while True:
                j += 1 + int(math.log(1.0 - rnd()) / logq)
                if j >= size:
                    break
                fresh.append((pool.get(j, j), rnd() * pm))
        pending = self._pending
        for w, x in fresh:
            pending.setdefault(w, []).append((v, x))
        nbrs.extend(fresh)
        self._adj[v] = nbrs
        return nbrs

    def open_incident(self, v: int, p: float) -> list[tuple[int, float]]:
        if p > self.p_max:
            raise ValueError(f"p={p} exceeds this sample's p_max={self.p_max}")
        nbrs = self._adj.get(v)
        if nbrs is None:
            nbrs = self._reveal(v)
        if p >= self.p_max:
            return nbrs
        return [(w, x) for w, x in nbrs if x < p]

    def all_open(self, p: float):
        """Every edge with label below ``p``, realizing the whole graph at once."""
        if p > self.p_max:
            raise ValueError(f"p={p} exceeds this sample's p_max={self.p_max}")
        if not self._bulk:
            self._realize_all()
        keep = self._bx < p
        return self._bu[keep], self._bv[keep], self._bx[keep]

    def _realize_all(self):
        g = self.g
        if self._adj:
            # partially revealed: finish lazily so earlier answers stay valid
            for v in range(g.n):
                if v not in self._adj:
                    self._reveal(v)
            us, vs, xs = [], [], []
            for v, nbrs in self._adj.items():
                for w, x in nbrs:
                    if v < w:
                        us.append(v)
                        vs.append(w)
                        xs.append(x)
            order = np.lexsort((np.array(vs, dtype=np.int64), np.array(us, dtype=np.int64)))
            self._bu = np.array(us, dtype=np.int64)[order]
            self._bv = np.array(vs, dtype=np.int64)[order]
            self._bx = np.array(xs, dtype=np.float64)[order]
        else:
            rng = np.random.default_rng(self._np_seed)
            k = int(rng.binomial(g.m, self.p_max)) if g.m else 0
            ids = np.sort(rng.choice(g.m, size=k, replace=False)) if k else np.zeros(0, np.int64)
            self._bu, self._bv = g.edge_endpoints(ids)
            self._bx = rng.random(k) * self.p_max
            adj: dict[int, list[tuple[int, float]]] = {v: [] for v in range(g.n)}
            for a, b, x in zip(self._bu.tolist(), self._bv.tolist(), self._bx.tolist()):
                adj[a].append((b, x))
                adj[b].append((a, x))
            self._adj = adj
            self._pending = {}
            self._size = 0
        self._bulk = True


def make_labels(g: TransitiveGraph, seed: CouplingSeed, p_max: float = 1.0):
    """Label source for ``g``: hashed unless the graph is dense."""
    if g.dense:
        return RevealLabels(g, seed, p_max)
    return HashLabels(g, seed)


# ----------------------------------------------------------------------------
# single-replica exploration


@dataclass
class Cluster:
    """Explored open cluster with intrinsic distances from ``origin``.

    ``edges`` lists the open edges between explored vertices as ``(u, v,
    label)``; ``open_edges_within`` is its length.  When ``truncated`` the
    exploration stopped once more than ``cap`` vertices were found.
    """

    origin: int
    dist: dict[int, int]
    edges: list[tuple[int, int, float]] = field(default_factory=list)
    truncated: bool = False

    @property
    def members(self) -> set[int]:
        return set(self.dist)

    @property
    def size(self) -> int:
        return len(self.dist)

    @property
    def open_edges_within(self) -> int:
        return len(self.edges)


@dataclass
class BallSnapshot:
    radius: int
    ball: frozenset
    boundary: frozenset
    edge_count: int


@dataclass
class SprinkleReport:
    p_low: float
    p_high: float
    sprinkled_count: int


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")


def _bfs(labels, p, origin, cap=None, r_max=None) -> Cluster:
    """BFS over open edges.

    Each open edge between scanned vertices is recorded once, when its later
    endpoint is scanned.  With ``r_max`` the vertices at distance ``r_max``
    are scanned for edges but not expanded.
    """
    dist = {origin: 0}
    scanned = set()
    edges = []
    queue = deque([origin])
    truncated = False
    while queue:
        v = queue.popleft()
        dv = dist[v]
        for w, x in labels.open_incident(v, p):
            if w in scanned:
                edges.append((w, v, x) if w < v else (v, w, x))
            elif w not in dist and (r_max is None or dv < r_max):
                dist[w] = dv + 1
                queue.append(w)
                if cap is not None and len(dist) > cap:
                    truncated = True
                    break
        scanned.add(v)
        if truncated:
            break
    return Cluster(origin, dist, edges, truncated)


def _default_cap(g, cap):
    if cap is None:
        if g.n > MAX_UNCAPPED:
            raise ValueError(f"graphs above {MAX_UNCAPPED} vertices need an explicit cap")
        return None
    if cap < 1:
        raise ValueError("cap must be >= 1")
    return None if cap >= g.n else int(cap)


def explore_cluster(g: TransitiveGraph, seed: CouplingSeed, p: float, origin: int = 0,
                    cap: int | None = None, labels=None) -> Cluster:
    """Open cluster of ``origin`` at level ``p``."""
    _check_p(p)
    g._check_vertex(origin)
    cap = _default_cap(g, cap)
    labels = labels or make_labels(g, seed, p)
    return _bfs(labels, p, origin, cap=cap)


def _snapshots(cl: Cluster, r_max: int) -> list[BallSnapshot]:
    by_level: dict[int, list[int]] = {}
    for v, k in cl.dist.items():
        by_level.setdefault(k, []).append(v)
    edge_level = [0] * (r_max + 1)
    for a, b, _ in cl.edges:
        lvl = max(cl.dist[a], cl.dist[b])
        if lvl <= r_max:
            edge_level[lvl] += 1
    out = []
    ball: set[int] = set()
    edges = 0
    for r in range(r_max + 1):
        shell = by_level.get(r, [])
        ball.update(shell)
        edges += edge_level[r]
        out.append(BallSnapshot(r, frozenset(ball), frozenset(shell), edges))
    return out


def grow_ball(g: TransitiveGraph, seed: CouplingSeed, p: float, origin: int = 0,
              r_max: int = 0, labels=None) -> list[BallSnapshot]:
    """Intrinsic balls ``B_p(origin, r)`` for ``r = 0 .. r_max``."""
    _check_p(p)
    if r_max < 0:
        raise ValueError("r_max must be >= 0")
    g._check_vertex(origin)
    labels = labels or make_labels(g, seed, p)
    cl = _bfs(labels, p, origin, r_max=r_max)
    return _snapshots(cl, r_max)


def _components(n, u, v):
    if len(u) == 0:
        return n, np.arange(n)
    a = sparse.coo_matrix((np.ones(len(u), dtype=np.int8), (u, v)), shape=(n, n))
    return csgraph.connected_components(a, directed=False)


def _pick_largest(labels_arr: np.ndarray):
    """Size and smallest vertex of the largest component (ties: smallest vertex)."""
    n = len(labels_arr)
    sizes = np.bincount(labels_arr)
    first = np.full(len(sizes), n, dtype=np.int64)
    np.minimum.at(first, labels_arr, np.arange(n))
    big = sizes.max()
    rep = int(first[sizes == big].min())
    return int(big), rep


def largest_component(g: TransitiveGraph, seed: CouplingSeed, p: float, labels=None):
    """``(|C1|, representative)``; the representative is C1's smallest vertex."""
    _check_p(p)
    labels = labels or make_labels(g, seed, p)
    u, v, _ = labels.all_open(p)
    _, comp = _components(g.n, u, v)
    return _pick_largest(comp)


def largest_cluster(g: TransitiveGraph, seed: CouplingSeed, p: float, labels=None) -> Cluster:
    """C1 as a :class:`Cluster` rooted at its representative vertex."""
    _check_p(p)
    labels = labels or make_labels(g, seed, p)
    u, v, x = labels.all_open(p)
    _, comp = _components(g.n, u, v)
    _, rep = _pick_largest(comp)
    inside = comp[u] == comp[rep]
    eu, ev, ex = u[inside], v[inside], x[inside]
    members = np.flatnonzero(comp == comp[rep])
    if len(eu):
        a = sparse.coo_matrix((np.ones(len(eu)), (eu, ev)), shape=(g.n, g.n)).tocsr()
        d = csgraph.shortest_path(a, directed=False, unweighted=True, indices=rep)
        dist = {int(w): int(d[w]) for w in members}
    else:
        dist = {rep: 0}
    edges = list(zip(eu.tolist(), ev.tolist(), ex.tolist()))
    return Cluster(rep, dist, edges, False)


def coupled_sweep(g: TransitiveGraph, seed: CouplingSeed, origin: int, r_max: int, p_list):
    """Balls at every ``p`` in ``p_list`` from one set of labels.

    Returns ``(balls, sprinkles)``: ``balls[i]`` is the snapshot sequence at
    ``p_list[i]`` and ``sprinkles[i]`` counts the edges explored at
    ``p_list[i+1]`` whose label lies in ``[p_list[i], p_list[i+1])``.
    """
    ps = [float(p) for p in p_list]
    for p in ps:
        _check_p(p)
    if any(b < a for a, b in zip(ps, ps[1:])):
        raise ValueError("p_list must be ascending")
    if r_max < 0:
        raise ValueError("r_max must be >= 0")
    g._check_vertex(origin)
    labels = make_labels(g, seed, max(ps) if ps else 0.0)
    clusters = [_bfs(labels, p, origin, r_max=r_max) for p in ps]
    balls = [_snapshots(cl, r_max) for cl in clusters]
    sprinkles = []
    for lo, hi, cl in zip(ps, ps[1:], clusters[1:]):
        count = sum(1 for _, _, x in cl.edges if lo <= x < hi)
        # edges leaving the explored region are touched too
        inside = cl.dist
        for v in inside:
            for w, x in labels.open_incident(v, hi):
                if w not in inside and lo <= x:
                    count += 1
        sprinkles.append(SprinkleReport(lo, hi, count))
    return balls, sprinkles


# ----------------------------------------------------------------------------
# many replicas at once


@dataclass
class Profiles:
    """Per-replica summaries of the origin's cluster.

    ``sizes`` is ``|C(origin)|`` (``cap + 1`` when truncated).  ``shells`` and
    ``ball_edges`` have one column per radius ``0 .. r_max``: the number of
    vertices at exactly that intrinsic distance and the number of open edges
    inside the ball of that radius.
    """

    replicas: np.ndarray
    sizes: np.ndarray | None = None
    truncated: np.ndarray | None = None
    shells: np.ndarray | None = None
    ball_edges: np.ndarray | None = None


def _chunks(replicas: np.ndarray, width: int):
    step = max(1, _CHUNK_ENTRIES // max(width, 1))
    for i in range(0, len(replicas), step):
        yield replicas[i:i + step]


def _block_graph(n, u, v, mask):
    """Block-diagonal union of the open subgraphs of several replicas."""
    rows, cols = np.nonzero(mask)
    off = rows.astype(np.int64) * n
    return off + u[cols], off + v[cols], rows, cols


def _use_blocks(g, engine):
    if engine == "lazy":
        return False
    if engine == "block":
        if g.dense:
            raise ValueError("block engine needs per-edge labels; dense graph given")
        return True
    return not g.dense and g.m <= _CHUNK_ENTRIES


def origin_profiles(g: TransitiveGraph, master_seed: int, replicas, p: float, origin: int = 0,
                    r_max: int | None = None, cap: int | None = None,
                    engine: str = "auto") -> Profiles:
    """Explore the origin's cluster in many replicas.

    With ``r_max`` only the ball of that radius is explored and ``shells`` /
    ``ball_edges`` are filled; otherwise the whole cluster (up to ``cap``) is
    explored and ``sizes`` / ``truncated`` are filled.  Results depend only on
    the replica indices, not on the engine.
    """
    _check_p(p)
    g._check_vertex(origin)
    replicas = np.asarray(replicas, dtype=np.int64)
    R = len(replicas)
    cap = _default_cap(g, cap) if r_max is None else None
    prof = Profiles(replicas)
    if r_max is None:
        prof.sizes = np.zeros(R, dtype=np.int64)
        prof.truncated = np.zeros(R, dtype=bool)
    else:
        prof.shells = np.zeros((R, r_max + 1), dtype=np.int64)
        prof.ball_edges = np.zeros((R, r_max + 1), dtype=np.int64)

    if _use_blocks(g, engine):
        _profiles_block(g, master_seed, replicas, p, origin, r_max, cap, prof)
        return prof

    for i, rep in enumerate(replicas.tolist()):
        labels = make_labels(g, CouplingSeed(master_seed, rep), p)
        if r_max is None:
            cl = _bfs(labels, p, origin, cap=cap)
            prof.sizes[i] = cl.size
            prof.truncated[i] = cl.truncated
        else:
            cl = _bfs(labels, p, origin, r_max=r_max)
            for k in cl.dist.values():
                prof.shells[i, k] += 1
            for a, b, _ in cl.edges:
                prof.ball_edges[i, max(cl.dist[a], cl.dist[b])] += 1
    if r_max is not None:
        np.cumsum(prof.ball_edges, axis=1, out=prof.ball_edges)
    return prof


def _profiles_block(g, master_seed, replicas, p, origin, r_max, cap, prof):
    n = g.n
    eu, ev = g.edges()
    ids = np.arange(g.m)
    pos = 0
    for chunk in _chunks(replicas, g.m):
        R = len(chunk)
        sl = slice(pos, pos + R)
        pos += R
        mask = edge_labels(master_seed, chunk, ids) < p
        a, b, rows, _ = _block_graph(n, eu, ev, mask)
        if r_max is None:
            _, comp = _components(R * n, a, b)
            comp = comp.reshape(R, n)
            root = comp[:, origin][:, None]
            sizes = (comp == root).sum(axis=1)
            trunc = np.zeros(R, dtype=bool) if cap is None else sizes > cap
            if cap is not None:
                sizes = np.where(trunc, cap + 1, sizes)
            prof.sizes[sl] = sizes
            prof.truncated[sl] = trunc
        else:
            dist = _block_distances(n, R, a, b, origin)
            within = dist <= r_max
            lvl = np.where(within, dist, 0)
            row = np.broadcast_to(np.arange(R)[:, None], dist.shape)
            np.add.at(prof.shells[sl], (row[within], lvl[within]), 1)
            flat = dist.reshape(-1)
            du, dv = flat[a], flat[b]
            elvl = np.maximum(du, dv)
            ok = elvl <= r_max
            np.add.at(prof.ball_edges[sl], (rows[ok], elvl[ok]), 1)
    if r_max is not None:
        np.cumsum(prof.ball_edges, axis=1, out=prof.ball_edges)


_FAR = np.iinfo(np.int64).max // 4


def _block_distances(n, R, a, b, origin):
    """Intrinsic distances from ``origin`` in each block; ``_FAR`` if unreachable."""
    src = R * n
    roots = np.arange(R, dtype=np.int64) * n + origin
    rows = np.concatenate([a, np.full(R, src)])
    cols = np.concatenate([b, roots])
    mat = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(src + 1, src + 1)).tocsr()
    d = csgraph.shortest_path(mat, directed=False, unweighted=True, indices=src)[:src]
    out = np.full(src, _FAR, dtype=np.int64)
    fin = np.isfinite(d)
    out[fin] = d[fin].astype(np.int64) - 1
    return out.reshape(R, n)


def component_labels(g: TransitiveGraph, master_seed: int, replicas, p: float,
                     engine: str = "auto") -> np.ndarray:
    """Component label of every vertex in every replica, shape ``(R, n)``.

    Labels are integers unique across the whole batch.
    """
    _check_p(p)
    replicas = np.asarray(replicas, dtype=np.int64)
    n = g.n
    out = np.zeros((len(replicas), n), dtype=np.int64)
    if _use_blocks(g, engine):
        eu, ev = g.edges()
        ids = np.arange(g.m)
        pos, base = 0, 0
        for chunk in _chunks(replicas, g.m):
            R = len(chunk)
            mask = edge_labels(master_seed, chunk, ids) < p
            a, b, _, _ = _block_graph(n, eu, ev, mask)
            k, comp = _components(R * n, a, b)
            out[pos:pos + R] = comp.reshape(R, n) + base
            base += k
            pos += R
        return out
    base = 0
    for i, rep in enumerate(replicas.tolist()):
        labels = make_labels(g, CouplingSeed(master_seed, rep), p)
        u, v, _ = labels.all_open(p)
        k, comp = _components(n, u, v)
        out[i] = comp + base
        base += k
    return out


def largest_sizes(g: TransitiveGraph, master_seed: int, replicas, p: float,
                  engine: str = "auto") -> np.ndarray:
    """``|C1|`` for each replica."""
    _check_p(p)
    replicas = np.asarray(replicas, dtype=np.int64)
    if _use_blocks(g, engine):
        out = []
        for chunk in _chunks(replicas, g.m):
            comp = component_labels(g, master_seed, chunk, p, engine="block")
            flat = comp.reshape(-1) - comp.min()
            sizes = np.bincount(flat)
            out.append(sizes[comp - comp.min()].max(axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
    return np.array([largest_component(g, CouplingSeed(master_seed, r), p)[0]
                     for r in replicas.tolist()], dtype=np.int64)
