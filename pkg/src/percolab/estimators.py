"""Monte Carlo estimators with confidence intervals.

Single-origin estimators fix the origin at vertex 0; on a transitive graph
the choice does not matter.  Replica ``i`` of an estimator with master seed
``s`` always uses the coupling seed ``(s, first_replica + i)``, so two
estimators called with the same seed at different ``p`` see the same labels
(on hashed graphs) and agree replica by replica with the monotone coupling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import perc
from .graphs import TransitiveGraph
from .oracle import NoSolutionError

Z99 = 2.576
#: reference threshold for the triangle excess, reported but never asserted
A0_THRESHOLD = 0.25
TRIANGLE_MAX_N = 10**5


class TruncationError(RuntimeError):
    """A cluster exceeded the exploration cap where exact sizes are required."""


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    samples: int
    ci99: tuple[float, float]
    wilson99: tuple[float, float] | None = None
    flags: tuple[str, ...] = ()

    @classmethod
    def from_samples(cls, values, indicator: bool = False, flags=()) -> "Estimate":
        x = np.asarray(values, dtype=np.float64)
        k = len(x)
        if k < 1:
            raise ValueError("an estimate needs at least one sample")
        mean = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        wilson = wilson_interval(mean, k) if indicator else None
        return cls(mean, se, k, (mean - Z99 * se, mean + Z99 * se), wilson, tuple(flags))

    def contains(self, value: float) -> bool:
        return self.ci99[0] <= value <= self.ci99[1]

    def within(self, value: float, k: float = 4.0) -> bool:
        """``|mean - value| <= k * std_error`` (exact match when the error is zero)."""
        return abs(self.mean - value) <= k * self.std_error + 1e-12 * max(1.0, abs(value))


def wilson_interval(phat: float, k: int, z: float = Z99) -> tuple[float, float]:
    denom = 1.0 + z * z / k
    center = (phat + z * z / (2 * k)) / denom
    half = z * math.sqrt(phat * (1 - phat) / k + z * z / (4 * k * k)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class WindowSpec:
    """The scaling window ``p_center +- A / (d * n**(1/3))`` clamped to ``[0, 1]``."""

    A: float
    p_center: float
    d: int
    n: int

    @property
    def half_width(self) -> float:
        return self.A / (self.d * self.n ** (1.0 / 3.0))

    @property
    def interval(self) -> tuple[float, float]:
        h = self.half_width
        return (max(0.0, self.p_center - h), min(1.0, self.p_center + h))

    def grid(self, points: int = 5) -> list[tuple[float, float]]:
        """``(offset in units of A, p)`` pairs spanning the window."""
        if points < 1:
            raise ValueError("need at least one grid point")
        if points == 1:
            offs = [0.0]
        else:
            offs = [-1.0 + 2.0 * i / (points - 1) for i in range(points)]
        lo, hi = self.interval
        return [(o, min(hi, max(lo, self.p_center + o * self.half_width))) for o in offs]


def _origin(g: TransitiveGraph, origin, force=False):
    if origin is None:
        if not g.regular and not force:
            raise ValueError(
                f"{g.describe()} is not regular; pass an explicit origin (or force=True)")
        return 0
    return int(origin)


def _replicas(replicas, first=0, minimum=1):
    if replicas < minimum:
        raise ValueError(f"need at least {minimum} replicas, got {replicas}")
    return np.arange(first, first + replicas, dtype=np.int64)


def estimate_chi(g: TransitiveGraph, p: float, replicas: int, seed: int, origin=None,
                 cap: int | None = None, tail_safe: bool = False, first_replica: int = 0,
                 force: bool = False) -> Estimate:
    """Mean cluster size of the origin.

    Truncated clusters raise :class:`TruncationError` unless ``tail_safe``;
    then they count as ``cap + 1`` and the estimate is flagged biased low.
    """
    origin = _origin(g, origin, force)
    reps = _replicas(replicas, first_replica, minimum=2)
    prof = perc.origin_profiles(g, seed, reps, p, origin=origin, cap=cap)
    flags = ()
    if prof.truncated.any():
        count = int(prof.truncated.sum())
        if not tail_safe:
            raise TruncationError(f"{count} of {replicas} clusters exceeded cap={cap}")
        warnings.warn(f"{count} truncated clusters counted at the cap; chi is biased low",
                      stacklevel=2)
        flags = (f"truncated:{count}",)
    return Estimate.from_samples(prof.sizes, flags=flags)


@dataclass(frozen=True)
class CriticalPoint:
    p_c_hat: float
    lam: float
    target: float
    bracket: tuple[float, float]
    chi_at_p_c_hat: Estimate
    samples_per_probe: int
    probes: int
    indistinguishable: bool
    consistent: bool


def solve_pc(g: TransitiveGraph, lam: float, tolerance: float, replicas_per_probe: int,
             seed: int, retry_cap: int = 4, origin=None, force: bool = False) -> CriticalPoint:
    """Noisy bisection for ``E_p |C(0)| = lam * n**(1/3)``.

    Each probe draws fresh replica indices.  The bracket moves only when the
    target lies outside the probe's 99% interval; otherwise the probe budget
    doubles, up to ``retry_cap`` times, after which the bracket is returned
    flagged ``indistinguishable``.  A final estimate at the midpoint with fresh
    replicas and the largest budget checks self-consistency.
    """
    origin = _origin(g, origin, force)
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if replicas_per_probe < 2:
        raise ValueError("need at least 2 replicas per probe")
    target = lam * g.n ** (1.0 / 3.0)
    if not 1.0 < target < g.n:
        raise NoSolutionError(
            f"lambda*n^(1/3) = {target:g} must lie in (1, {g.n}); "
            f"feasible lambda in ({g.n ** (-1 / 3):g}, {g.n ** (2 / 3):g})")
    lo, hi = 0.0, 1.0
    next_rep = 0
    probes = 0
    stuck = False
    cap = max(64, int(16 * target))
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        budget = replicas_per_probe
        for _ in range(retry_cap + 1):
            reps = np.arange(next_rep, next_rep + budget, dtype=np.int64)
            next_rep += budget
            probes += 1
            side = _probe_side(g, mid, reps, seed, origin, target, cap)
            if side:
                break
            budget *= 2
        if side > 0:
            hi = mid
        elif side < 0:
            lo = mid
        else:
            stuck = True
            break
    p_hat = 0.5 * (lo + hi)
    check_n = replicas_per_probe * 2**retry_cap
    check = estimate_chi(g, p_hat, check_n, seed, origin=origin, first_replica=next_rep,
                         force=force)
    return CriticalPoint(p_hat, lam, target, (lo, hi), check, replicas_per_probe, probes,
                         stuck, check.contains(target))


def _probe_side(g, p, reps, seed, origin, target, cap):
    """+1 if chi(p) is above target, -1 if below, 0 if undecided."""
    prof = perc.origin_profiles(g, seed, reps, p, origin=origin, cap=cap)
    est = Estimate.from_samples(prof.sizes)
    # capped sizes are lower bounds, so "above" is safe to decide on them
    if est.ci99[0] > target:
        return 1
    if prof.truncated.any():
        prof = perc.origin_profiles(g, seed, reps, p, origin=origin)
        est = Estimate.from_samples(prof.sizes)
        if est.ci99[0] > target:
            return 1
    if est.ci99[1] < target:
        return -1
    return 0


@dataclass
class TriangleResult:
    pairs: list[tuple[int, int]]
    estimates: list[Estimate]
    excess: float
    threshold: float = A0_THRESHOLD

    @property
    def below_threshold(self) -> bool:
        return self.excess <= self.threshold


def estimate_triangle(g: TransitiveGraph, p: float, vertex_pairs, replicas: int, seed: int,
                      first_replica: int = 0) -> TriangleResult:
    """Unbiased estimates of the triangle diagram ``nabla_p(x, y)``.

    Replica ``i`` draws three independent configurations (coupling replicas
    ``3i, 3i+1, 3i+2``) and scores ``sum_{u in C1(x)} |C2(u) & C3(y)|``,
    whose mean is ``sum_{u,v} tau(x,u) tau(u,v) tau(v,y)``.
    """
    if g.n > TRIANGLE_MAX_N:
        raise ValueError(f"triangle estimation is limited to n <= {TRIANGLE_MAX_N}; n = {g.n}")
    pairs = [(int(x), int(y)) for x, y in vertex_pairs]
    for x, y in pairs:
        g._check_vertex(x)
        g._check_vertex(y)
    reps = _replicas(replicas, first_replica, minimum=2)
    if g.dense:
        scores = _triangle_lazy(g, p, pairs, reps, seed)
    else:
        scores = _triangle_block(g, p, pairs, reps, seed)
    ests = [Estimate.from_samples(s) for s in scores]
    excess = max(e.mean - (1.0 if x == y else 0.0) for e, (x, y) in zip(ests, pairs))
    return TriangleResult(pairs, ests, excess)


def _triangle_block(g, p, pairs, reps, seed):
    scores = [np.zeros(len(reps)) for _ in pairs]
    step = max(1, (1 << 20) // g.n)
    for i in range(0, len(reps), step):
        chunk = reps[i:i + step]
        c1, c2, c3 = (perc.component_labels(g, seed, 3 * chunk + k, p) for k in range(3))
        R = len(chunk)
        for j, (x, y) in enumerate(pairs):
            in1 = c1 == c1[:, [x]]
            in3 = (c3 == c3[:, [y]]).astype(np.float64)
            # per ω2-component, how many of its vertices lie in C3(y)
            cnt = np.bincount(c2.ravel(), weights=in3.ravel(), minlength=int(c2.max()) + 1)
            scores[j][i:i + R] = (in1 * cnt[c2]).sum(axis=1)
    return scores


def _triangle_lazy(g, p, pairs, reps, seed):
    scores = [np.zeros(len(reps)) for _ in pairs]
    for i, rep in enumerate(reps.tolist()):
        lab = [perc.make_labels(g, perc.CouplingSeed(seed, 3 * rep + k), p) for k in range(3)]
        for j, (x, y) in enumerate(pairs):
            s1 = perc._bfs(lab[0], p, x).dist
            s3 = perc._bfs(lab[2], p, y).dist
            seen: dict[int, int] = {}
            total = 0
            for u in s1:
                if u not in seen:
                    comp = perc._bfs(lab[1], p, u).dist
                    hits = sum(1 for v in comp if v in s3)
                    for v in comp:
                        seen[v] = hits
                total += seen[u]
            scores[j][i] = total
    return scores


@dataclass
class BallGrowth:
    """Ball volumes and edge counts per radius, with the raw replica table."""

    radii: list[int]
    volume: list[Estimate]
    edges: list[Estimate]
    samples: np.ndarray = field(repr=False)

    def max_ratio(self) -> tuple[float, int]:
        """``max_{r>=1} G(r)/r`` and the radius attaining it."""
        best, arg = -math.inf, 0
        for r, e in zip(self.radii, self.volume):
            if r >= 1 and e.mean / r > best:
                best, arg = e.mean / r, r
        return best, arg


def estimate_ball_growth(g: TransitiveGraph, p: float, r_max: int, replicas: int, seed: int,
                         origin=None, first_replica: int = 0, force: bool = False) -> BallGrowth:
    """``G(r) = E|B_p(0, r)|`` and ``E|E(B_p(0, r))|`` for ``r = 0 .. r_max``."""
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    origin = _origin(g, origin, force)
    reps = _replicas(replicas, first_replica, minimum=2)
    prof = perc.origin_profiles(g, seed, reps, p, origin=origin, r_max=r_max)
    vol = np.cumsum(prof.shells, axis=1)
    radii = list(range(r_max + 1))
    return BallGrowth(
        radii,
        [Estimate.from_samples(vol[:, r]) for r in radii],
        [Estimate.from_samples(prof.ball_edges[:, r]) for r in radii],
        vol,
    )


@dataclass(frozen=True)
class VolRecurCheck:
    r: int
    lhs: float
    rhs: float
    joint_std_error: float

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs - 4.0 * self.joint_std_error


def volrecur_checks(growth: BallGrowth) -> list[VolRecurCheck]:
    """``G(2r) >= G(r)**2 / (4r)`` for every ``r`` with ``2r`` in range.

    The joint standard error is the delta-method error of
    ``mean|B(2r)| - mean|B(r)|**2 / (4r)`` using the replica covariance.
    """
    vol = growth.samples.astype(np.float64)
    k = vol.shape[0]
    out = []
    for r in range(1, (vol.shape[1] - 1) // 2 + 1):
        x, y = vol[:, 2 * r], vol[:, r]
        gy = y.mean()
        c = gy / (2.0 * r)
        cov = np.cov(np.vstack([x, y]), ddof=1)
        var = (cov[0, 0] + c * c * cov[1, 1] - 2.0 * c * cov[0, 1]) / k
        out.append(VolRecurCheck(r, float(x.mean()), float(gy * gy / (4.0 * r)),
                                 float(math.sqrt(max(var, 0.0)))))
    return out


def estimate_one_arm(g: TransitiveGraph, p: float, r_list, replicas: int, seed: int,
                     origin=None, first_replica: int = 0, force: bool = False) -> dict[int, Estimate]:
    """``P(H_p(r))``: the origin's cluster reaches intrinsic distance ``r``."""
    r_list = [int(r) for r in r_list]
    if not r_list or min(r_list) < 1:
        raise ValueError("radii must be >= 1")
    origin = _origin(g, origin, force)
    reps = _replicas(replicas, first_replica)
    prof = perc.origin_profiles(g, seed, reps, p, origin=origin, r_max=max(r_list))
    return {r: Estimate.from_samples(prof.shells[:, r] > 0, indicator=True) for r in r_list}


def estimate_tail(g: TransitiveGraph, p: float, k_list, replicas: int, seed: int,
                  origin=None, first_replica: int = 0, force: bool = False) -> dict[int, Estimate]:
    """``P(|C(0)| >= k)``; exploration stops once a cluster exceeds ``max(k_list)``."""
    k_list = [int(k) for k in k_list]
    if not k_list or min(k_list) < 1:
        raise ValueError("k values must be >= 1")
    origin = _origin(g, origin, force)
    reps = _replicas(replicas, first_replica)
    prof = perc.origin_profiles(g, seed, reps, p, origin=origin, cap=max(k_list))
    return {k: Estimate.from_samples(prof.sizes >= k, indicator=True) for k in k_list}


@dataclass
class C1Summary:
    estimate: Estimate
    median: float
    q05: float
    q95: float
    sizes: np.ndarray = field(repr=False)

    def scaled(self, n: int) -> dict[str, float]:
        """Median and 5%/95% quantiles of ``|C1| / n**(2/3)``."""
        s = n ** (2.0 / 3.0)
        return {"median": self.median / s, "q05": self.q05 / s, "q95": self.q95 / s}


def estimate_c1(g: TransitiveGraph, p: float, replicas: int, seed: int,
                first_replica: int = 0) -> C1Summary:
    """Size of the largest component, from a full component scan per replica."""
    reps = _replicas(replicas, first_replica, minimum=2)
    sizes = perc.largest_sizes(g, seed, reps, p)
    q05, med, q95 = np.quantile(sizes, [0.05, 0.5, 0.95])
    return C1Summary(Estimate.from_samples(sizes), float(med), float(q05), float(q95), sizes)
