"""Exact percolation functionals on tiny graphs by full enumeration.

All ``2**m`` open/closed configurations are enumerated once per graph.  Each
per-configuration quantity is aggregated by the number of open edges ``k``,
so any functional is a polynomial ``sum_k A_k p**k (1-p)**(m-k)`` that is
then evaluated for whatever ``p`` is asked.  The code here shares nothing
with :mod:`percolab.perc`; it is the ground truth the samplers are checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graphs import TransitiveGraph

MAX_EDGES = 24
_CHUNK = 1 << 14
_UNREACHED = 1 << 30

QUANTITIES = (
    "tau", "chi", "nabla", "ball_mean", "ball_edges", "one_arm",
    "c1_mean", "c1_distribution", "tail",
)


class OracleLimitError(ValueError):
    pass


class NoSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class ExactResult:
    quantity: str
    value: float | tuple
    p: float
    configurations: int


def _configs(m):
    total = 1 << m
    bits = np.arange(m, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        cfg = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        yield cfg, ((cfg[:, None] >> bits) & 1).astype(bool)


def _popcount(cfg):
    c = cfg.copy()
    out = np.zeros_like(c)
    while c.any():
        out += c & 1
        c >>= 1
    return out


def _labels(n, eu, ev, open_):
    """Min-vertex component labels by propagation, shape ``(C, n)``."""
    lab = np.broadcast_to(np.arange(n), (open_.shape[0], n)).copy()
    changed = True
    while changed:
        changed = False
        for j in range(len(eu)):
            a, b = eu[j], ev[j]
            on = open_[:, j]
            low = np.minimum(lab[:, a], lab[:, b])
            upd = on & ((lab[:, a] != low) | (lab[:, b] != low))
            if upd.any():
                lab[upd, a] = low[upd]
                lab[upd, b] = low[upd]
                changed = True
    return lab


def _distances(n, eu, ev, open_, x):
    """Intrinsic distance from ``x`` by edge relaxation, shape ``(C, n)``."""
    dist = np.full((open_.shape[0], n), _UNREACHED, dtype=np.int64)
    dist[:, x] = 0
    changed = True
    while changed:
        changed = False
        for j in range(len(eu)):
            a, b = eu[j], ev[j]
            on = open_[:, j]
            via_a = np.where(on, dist[:, a] + 1, _UNREACHED)
            via_b = np.where(on, dist[:, b] + 1, _UNREACHED)
            ub = via_a < dist[:, b]
            ua = via_b < dist[:, a]
            if ub.any() or ua.any():
                dist[:, b] = np.minimum(dist[:, b], via_a)
                dist[:, a] = np.minimum(dist[:, a], via_b)
                changed = True
    return dist


class ExactPercolation:
    """Popcount-aggregated enumeration tables of one graph."""

    def __init__(self, g: TransitiveGraph):
        if g.m > MAX_EDGES:
            raise OracleLimitError(
                f"exact enumeration is limited to {MAX_EDGES} edges; graph has {g.m}")
        self.g = g
        self.n = g.n
        self.m = g.m
        eu, ev = g.edges()
        self._eu = eu.tolist()
        self._ev = ev.tolist()
        self._same = None
        self._c1 = None
        self._dist_cache = {}

    @property
    def configurations(self) -> int:
        return 1 << self.m

    def _agg(self, k, values):
        return np.bincount(k, weights=values, minlength=self.m + 1)

    def _connectivity(self):
        if self._same is None:
            n, m = self.n, self.m
            same = np.zeros((m + 1, n, n))
            c1 = np.zeros((m + 1, n + 1))
            for cfg, open_ in _configs(m):
                k = _popcount(cfg)
                lab = _labels(n, self._eu, self._ev, open_)
                eq = lab[:, :, None] == lab[:, None, :]
                for a in range(n):
                    for b in range(n):
                        same[:, a, b] += self._agg(k, eq[:, a, b])
                sizes = eq.sum(axis=2).max(axis=1)
                np.add.at(c1, (k, sizes), 1.0)
            self._same, self._c1 = same, c1
        return self._same, self._c1

    def _dist_tables(self, x):
        """Per-popcount sums of shell counts, ball-edge counts and one-arm indicators."""
        if x not in self._dist_cache:
            n, m = self.n, self.m
            shells = np.zeros((m + 1, n + 1))
            bedges = np.zeros((m + 1, n + 1))
            arm = np.zeros((m + 1, n + 1))
            eu = np.array(self._eu, dtype=np.int64)
            ev = np.array(self._ev, dtype=np.int64)
            for cfg, open_ in _configs(m):
                k = _popcount(cfg)
                dist = _distances(n, self._eu, self._ev, open_, x)
                for r in range(n + 1):
                    at_r = (dist == r).sum(axis=1)
                    shells[:, r] += self._agg(k, at_r)
                    arm[:, r] += self._agg(k, (at_r > 0).astype(float))
                if m:
                    lvl = np.maximum(dist[:, eu], dist[:, ev])
                    lvl = np.where(open_, lvl, _UNREACHED)
                    for r in range(n + 1):
                        bedges[:, r] += self._agg(k, (lvl == r).sum(axis=1))
            self._dist_cache[x] = (shells, bedges, arm)
        return self._dist_cache[x]

    def poly(self, coeffs, p):
        """``sum_k coeffs[k] p**k (1-p)**(m-k)`` with exactly rounded summation."""
        m = self.m
        terms = [c * p**k * (1.0 - p) ** (m - k) for k, c in enumerate(np.asarray(coeffs).tolist()) if c]
        return math.fsum(terms)

    # individual quantities ------------------------------------------------

    def tau(self, p, x, y):
        same, _ = self._connectivity()
        return self.poly(same[:, x, y], p)

    def tau_matrix(self, p):
        same, _ = self._connectivity()
        n = self.n
        return np.array([[self.poly(same[:, a, b], p) for b in range(n)] for a in range(n)])

    def chi_coeffs(self, x):
        same, _ = self._connectivity()
        return same[:, x, :].sum(axis=1)

    def chi(self, p, x):
        return self.poly(self.chi_coeffs(x), p)

    def nabla(self, p, x, y):
        t = self.tau_matrix(p)
        return math.fsum((t[x, :, None] * t * t[None, :, y]).ravel().tolist())

    def ball_mean(self, p, x, r):
        shells, _, _ = self._dist_tables(x)
        return self.poly(shells[:, : min(r, self.n) + 1].sum(axis=1), p)

    def ball_edges(self, p, x, r):
        _, bedges, _ = self._dist_tables(x)
        return self.poly(bedges[:, : min(r, self.n) + 1].sum(axis=1), p)

    def one_arm(self, p, x, r):
        _, _, arm = self._dist_tables(x)
        if r > self.n:
            return 0.0
        return self.poly(arm[:, r], p)

    def c1_distribution(self, p):
        _, c1 = self._connectivity()
        return tuple(self.poly(c1[:, s], p) for s in range(self.n + 1))

    def c1_mean(self, p):
        _, c1 = self._connectivity()
        return self.poly((c1 * np.arange(self.n + 1)).sum(axis=1), p)

    def tail(self, p, x, k):
        return self.poly(self._tail_coeffs(x)[:, min(max(k, 0), self.n + 1)], p)

    @lru_cache(maxsize=None)
    def _tail_coeffs(self, x):
        n, m = self.n, self.m
        at_least = np.zeros((m + 1, n + 2))
        for cfg, open_ in _configs(m):
            k = _popcount(cfg)
            lab = _labels(n, self._eu, self._ev, open_)
            size = (lab == lab[:, [x]]).sum(axis=1)
            for s in range(n + 2):
                at_least[:, s] += self._agg(k, (size >= s).astype(float))
        return at_least


@lru_cache(maxsize=64)
def _tables(g: TransitiveGraph) -> ExactPercolation:
    return ExactPercolation(g)


def exact(g: TransitiveGraph, p: float, quantity: str, *args) -> ExactResult:
    """Exact value of ``quantity`` at level ``p``.

    Arguments by quantity: ``tau(x, y)``, ``chi(x)``, ``nabla(x, y)``,
    ``ball_mean(x, r)``, ``ball_edges(x, r)``, ``one_arm(x, r)``,
    ``tail(x, k)``, ``c1_mean()``, ``c1_distribution()``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; choose from {', '.join(QUANTITIES)}")
    t = _tables(g)
    args = tuple(int(a) for a in args)
    value = getattr(t, quantity)(p, *args)
    return ExactResult(quantity, value, p, t.configurations)


def exact_pc(g: TransitiveGraph, lam: float, tol: float = 1e-12) -> float:
    """The ``p`` with ``chi(p) = lam * n**(1/3)``, by bisection on the exact polynomial."""
    t = _tables(g)
    n = g.n
    target = lam * n ** (1.0 / 3.0)
    coeffs = t.chi_coeffs(0)
    hi_val = t.poly(coeffs, 1.0)
    if not 1.0 <= target <= hi_val:
        raise NoSolutionError(
            f"lambda*n^(1/3) = {target:g} outside [1, {hi_val:g}]; "
            f"feasible lambda in [{n ** (-1 / 3):g}, {hi_val * n ** (-1 / 3):g}]")
    if target >= hi_val:
        return 1.0
    if target <= 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if t.poly(coeffs, mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
