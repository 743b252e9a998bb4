"""Implicit finite transitive graphs.

Every built-in family answers neighbor and edge-id queries by arithmetic on
the vertex index, so nothing proportional to the edge count is stored.  Edge
ids are a bijection onto ``[0, m)`` with ``m = n*d/2``; the percolation
labels of :mod:`percolab.perc` are keyed on them.

Vertex numbering:

* ``Torus(side, dim)``: mixed radix, coordinate ``k`` has weight ``side**k``.
* ``Hamming(dim)``: the bitmask itself.
* ``Complete(n)``: ``0 .. n-1``.
* ``Explicit``: as given in the edge-list file.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Bad graph parameters, vertex indices or edge queries."""


class TransitiveGraph:
    """Common interface of the graph families.

    Subclasses set ``n`` (vertex count), ``d`` (degree) and ``m`` (edge
    count) and implement the neighbor/edge-id arithmetic.
    """

    family: str = "abstract"
    n: int
    d: int
    m: int
    regular: bool = True

    def neighbors(self, v: int) -> list[int]:
        self._check_vertex(v)
        return self._neighbors(v)

    def edge_id(self, u: int, v: int) -> int:
        self._check_vertex(u)
        self._check_vertex(v)
        if u == v:
            raise GraphError(f"{u} and {v} are not adjacent")
        return self._edge_id(u, v)

    def incident(self, v: int) -> list[tuple[int, int]]:
        """``(neighbor, edge id)`` pairs at ``v``; no range check (hot path)."""
        return [(w, self._edge_id(v, w)) for w in self._neighbors(v)]

    def edge_endpoints(self, ids) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized decode of edge ids to ``(u, v)`` with ``u < v``."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.m):
            raise GraphError(f"edge id out of range [0, {self.m})")
        return self._edge_endpoints(ids)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of every edge, indexed by edge id."""
        return self.edge_endpoints(np.arange(self.m, dtype=np.int64))

    @property
    def dense(self) -> bool:
        """True when per-edge label hashing is too costly (very high degree)."""
        return False

    @property
    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.family}({args})"

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise GraphError(f"vertex {v} out of range [0, {self.n})")

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    def __repr__(self):
        return self.describe()

    # subclass hooks
    def _neighbors(self, v: int) -> list[int]:
        raise NotImplementedError

    def _edge_id(self, u: int, v: int) -> int:
        raise NotImplementedError

    def _edge_endpoints(self, ids: np.ndarray):
        raise NotImplementedError


class Torus(TransitiveGraph):
    """The discrete torus ``Z_side^dim``.

    With ``side == 2`` the two directions along an axis coincide, so the
    degree is ``dim`` rather than ``2*dim``.
    """

    family = "torus"

    def __init__(self, side: int, dim: int):
        if side < 2 or dim < 1:
            raise GraphError("torus needs side >= 2 and dim >= 1")
        self.side = int(side)
        self.dim = int(dim)
        self.n = self.side**self.dim
        self.d = self.dim if self.side == 2 else 2 * self.dim
        self.m = self.n * self.d // 2
        self._weights = [self.side**k for k in range(self.dim)]

    @property
    def params(self):
        return {"side": self.side, "dim": self.dim}

    def _digit(self, v, k):
        return (v // self._weights[k]) % self.side

    def _neighbors(self, v):
        out = []
        s = self.side
        for k, w in enumerate(self._weights):
            c = (v // w) % s
            up = v + w if c + 1 < s else v - c * w
            out.append(up)
            if s > 2:
                out.append(v - w if c > 0 else v + (s - 1) * w)
        return out

    def incident(self, v):
        s, dim = self.side, self.dim
        out = []
        for k, w in enumerate(self._weights):
            c = (v // w) % s
            up = v + w if c + 1 < s else v - c * w
            if s == 2:
                low = v if c == 0 else up
                out.append((up, k * (self.n >> 1) + (low // (w * 2)) * w + low % w))
            else:
                down = v - w if c > 0 else v + (s - 1) * w
                out.append((up, v * dim + k))
                out.append((down, down * dim + k))
        return out

    def _edge_id(self, u, v):
        s = self.side
        diff = [k for k in range(self.dim) if self._digit(u, k) != self._digit(v, k)]
        if len(diff) != 1:
            raise GraphError(f"{u} and {v} are not adjacent")
        k = diff[0]
        cu, cv = self._digit(u, k), self._digit(v, k)
        if s == 2:
            low = u if cu == 0 else v
            return k * (self.n // 2) + self._drop_digit(low, k)
        if (cu + 1) % s == cv:
            return u * self.dim + k
        if (cv + 1) % s == cu:
            return v * self.dim + k
        raise GraphError(f"{u} and {v} are not adjacent")

    def _drop_digit(self, v, k):
        w = self._weights[k]
        return (v // (w * 2)) * w + v % w

    def _edge_endpoints(self, ids):
        s = self.side
        if s == 2:
            half = self.n // 2
            k = ids // half
            rest = ids % half
            w = np.asarray(self._weights, dtype=np.int64)[k]
            low = (rest // w) * (2 * w) + rest % w
            a, b = low, low + w
        else:
            a = ids // self.dim
            k = ids % self.dim
            w = np.asarray(self._weights, dtype=np.int64)[k]
            c = (a // w) % s
            b = np.where(c + 1 < s, a + w, a - c * w)
        return np.minimum(a, b), np.maximum(a, b)


class Hamming(TransitiveGraph):
    """The hypercube ``{0,1}^dim``; vertices are bitmasks."""

    family = "hamming"

    def __init__(self, dim: int):
        if dim < 1:
            raise GraphError("hamming needs dim >= 1")
        if dim > 40:
            raise GraphError("hamming dim above 40 is not supported")
        self.dim = int(dim)
        self.n = 1 << self.dim
        self.d = self.dim
        self.m = self.dim << (self.dim - 1)

    @property
    def params(self):
        return {"dim": self.dim}

    def _neighbors(self, v):
        return [v ^ (1 << k) for k in range(self.dim)]

    def incident(self, v):
        h = self.dim - 1
        out = []
        for k in range(self.dim):
            low = v & ~(1 << k)
            out.append((v ^ (1 << k), (k << h) + ((low >> (k + 1)) << k) + (low & ((1 << k) - 1))))
        return out

    def _edge_id(self, u, v):
        x = u ^ v
        if x & (x - 1):
            raise GraphError(f"{u} and {v} are not adjacent")
        k = x.bit_length() - 1
        low = min(u, v)
        return (k << (self.dim - 1)) + ((low >> (k + 1)) << k) + (low & ((1 << k) - 1))

    def _edge_endpoints(self, ids):
        k = ids >> (self.dim - 1)
        rest = ids & ((1 << (self.dim - 1)) - 1)
        low_mask = (np.int64(1) << k) - 1
        low = ((rest >> k) << (k + 1)) | (rest & low_mask)
        return low, low | (np.int64(1) << k)


class Complete(TransitiveGraph):
    """The complete graph ``K_n``.

    Edge ``{u, v}`` with ``u < v`` has id ``v*(v-1)/2 + u``.
    """

    family = "complete"
    #: above this degree the per-edge hashing path is replaced by lazy reveal
    DENSE_DEGREE = 64

    def __init__(self, n: int):
        if n < 1:
            raise GraphError("complete graph needs n >= 1")
        self.n = int(n)
        self.d = self.n - 1
        self.m = self.n * (self.n - 1) // 2

    @property
    def params(self):
        return {"n": self.n}

    @property
    def dense(self):
        return self.d > self.DENSE_DEGREE

    def _neighbors(self, v):
        return [u for u in range(self.n) if u != v]

    def incident(self, v):
        out = [(u, v * (v - 1) // 2 + u) for u in range(v)]
        out.extend((w, w * (w - 1) // 2 + v) for w in range(v + 1, self.n))
        return out

    def _edge_id(self, u, v):
        u, v = min(u, v), max(u, v)
        return v * (v - 1) // 2 + u

    def _edge_endpoints(self, ids):
        v = ((1.0 + np.sqrt(1.0 + 8.0 * ids.astype(np.float64))) / 2.0).astype(np.int64)
        # float rounding can be off by one either way
        v = np.where(v * (v - 1) // 2 > ids, v - 1, v)
        v = np.where((v + 1) * v // 2 <= ids, v + 1, v)
        return ids - v * (v - 1) // 2, v


class Explicit(TransitiveGraph):
    """A graph given by an explicit edge list.

    Irregular inputs are accepted (``regular`` is False and ``d`` is the
    maximum degree); estimators that rely on transitivity refuse them unless
    forced.
    """

    family = "explicit"

    def __init__(self, n: int, edges, name: str = ""):
        self.n = int(n)
        if self.n < 1:
            raise GraphError("explicit graph needs n >= 1")
        self.name = name
        seen = {}
        ends = []
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen[key] = len(ends)
            ends.append(key)
        self._ids = seen
        self._ends = np.array(ends, dtype=np.int64).reshape(-1, 2)
        self.m = len(ends)
        self._adj = [[] for _ in range(self.n)]
        self._inc = [[] for _ in range(self.n)]
        for i, (u, v) in enumerate(ends):
            self._adj[u].append(v)
            self._adj[v].append(u)
            self._inc[u].append((v, i))
            self._inc[v].append((u, i))
        degs = [len(a) for a in self._adj]
        self.d = max(degs)
        self.regular = min(degs) == self.d
        if not self.regular:
            warnings.warn(f"explicit graph {name or ''} is not regular", stacklevel=2)

    @classmethod
    def from_file(cls, path) -> "Explicit":
        """Read ``n m`` then ``m`` lines ``u v`` with ``u < v``."""
        path = Path(path)
        lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
        if not lines or len(lines[0]) != 2:
            raise GraphError(f"{path}: first line must be 'n m'")
        n, m = (int(t) for t in lines[0])
        body = lines[1:]
        if len(body) != m:
            raise GraphError(f"{path}: header promises {m} edges, found {len(body)}")
        edges = []
        for i, toks in enumerate(body, start=2):
            if len(toks) != 2:
                raise GraphError(f"{path}:{i}: expected 'u v'")
            u, v = int(toks[0]), int(toks[1])
            if not u < v:
                raise GraphError(f"{path}:{i}: need u < v, got {u} {v}")
            edges.append((u, v))
        return cls(n, edges, name=path.name)

    def to_file(self, path) -> None:
        rows = [f"{self.n} {self.m}"] + [f"{u} {v}" for u, v in self._ends.tolist()]
        Path(path).write_text("\n".join(rows) + "\n")

    @property
    def params(self):
        return {"n": self.n, "edges": tuple(map(tuple, self._ends.tolist()))}

    def describe(self):
        return f"explicit({self.name or 'n=%d' % self.n}, m={self.m})"

    def _neighbors(self, v):
        return list(self._adj[v])

    def incident(self, v):
        return list(self._inc[v])

    def _edge_id(self, u, v):
        try:
            return self._ids[(min(u, v), max(u, v))]
        except KeyError:
            raise GraphError(f"{u} and {v} are not adjacent") from None

    def _edge_endpoints(self, ids):
        return self._ends[ids, 0], self._ends[ids, 1]


def path_graph(k: int) -> Explicit:
    """Path on ``k`` vertices (irregular; used for oracle tests)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Explicit(k, [(i, i + 1) for i in range(k - 1)], name=f"path{k}")


def cycle_graph(k: int) -> Explicit:
    return Explicit(k, [(i, (i + 1) % k) for i in range(k)], name=f"cycle{k}")


def ball_graph(g: TransitiveGraph, v: int, r: int) -> set[int]:
    """Vertices within graph distance ``r`` of ``v`` (every edge open)."""
    if r < 0:
        raise GraphError("radius must be >= 0")
    g._check_vertex(v)
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if dist[u] == r:
            continue
        for w in g.neighbors(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return set(dist)


def graph_diameter(g: TransitiveGraph) -> int:
    """Exact diameter by BFS from every vertex.  Small graphs only."""
    best = 0
    for s in range(g.n):
        ball = {s: 0}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.neighbors(u):
                if w not in ball:
                    ball[w] = ball[u] + 1
                    queue.append(w)
        if len(ball) < g.n:
            return math.inf
        best = max(best, max(ball.values()))
    return best


def parse_graph(spec: str, side: int | None = None, dim: int | None = None) -> TransitiveGraph:
    """Build a graph from CLI-style arguments.

    ``spec`` is ``torus``, ``hamming``, ``complete`` or ``file:PATH``.  The
    complete graph takes its vertex count from ``side``.
    """
    if spec.startswith("file:"):
        return Explicit.from_file(spec[5:])
    if spec == "torus":
        if side is None or dim is None:
            raise GraphError("torus needs --side and --dim")
        return Torus(side, dim)
    if spec == "hamming":
        if dim is None:
            raise GraphError("hamming needs --dim")
        return Hamming(dim)
    if spec == "complete":
        if side is None:
            raise GraphError("complete needs --side (vertex count)")
        return Complete(side)
    raise GraphError(f"unknown graph family {spec!r}")


def graph_from_params(family: str, **params) -> TransitiveGraph:
    if family == "torus":
        return Torus(params["side"], params["dim"])
    if family == "hamming":
        return Hamming(params["dim"])
    if family == "complete":
        return Complete(params["n"])
    if family == "explicit":
        if "path" in params:
            return Explicit.from_file(params["path"])
        return Explicit(params["n"], params["edges"])
    raise GraphError(f"unknown graph family {family!r}")
