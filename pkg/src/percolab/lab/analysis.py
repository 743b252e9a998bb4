"""Scaling fits, window-stability reports and CSV export over run records."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

LEADING_COLUMNS = ("family", "n", "d", "p", "p_label", "statistic", "index_name", "index",
                   "mean", "std_error", "samples", "ci99_low", "ci99_high", "median",
                   "seed", "replicas", "wall_ms")


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    stderr: float
    r2: float


def ols(x, y) -> LineFit:
    """Least-squares line through ``(x, y)``; stderr of the slope needs 3+ points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = len(x)
    if k < 2:
        raise ValueError("a line fit needs at least two points")
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("all x values coincide")
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ssr = float((resid**2).sum())
    sst = float(((y - ym) ** 2).sum())
    stderr = math.sqrt(ssr / (k - 2) / sxx) if k > 2 else math.nan
    if sst == 0.0:
        r2 = 1.0 if ssr <= 1e-24 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ssr / sst))
    return LineFit(slope, intercept, stderr, r2)


@dataclass(frozen=True)
class ScalingFit:
    statistic: str
    exponent_hat: float
    stderr: float
    r2: float
    points: tuple  # ((n, value), ...) actually used
    excluded: int = 0
    summary: str = "median"
    prefactor: float = math.nan


def _value(rec: dict, summary: str):
    v = rec.get(summary)
    if v is None:
        v = rec.get("mean")
    return v


def _select(records, statistic, p_label=None, index=None):
    out = [r for r in records
           if r.get("statistic") == statistic
           and (p_label is None or r.get("p_label") == p_label)
           and (index is None or r.get("index") == index)]
    return out


def fit_scaling(records, statistic: str, summary: str = "median", p_label=None,
                index=None, min_points: int = 3) -> ScalingFit:
    """Slope of ``log(summary value)`` against ``log n`` over the size ladder.

    Records lacking the requested summary fall back to their mean.  Points
    with a nonpositive value are dropped and counted in ``excluded``.
    """
    if summary not in ("mean", "median"):
        raise ValueError("summary must be 'mean' or 'median'")
    rows = _select(records, statistic, p_label, index)
    by_n = defaultdict(list)
    for r in rows:
        by_n[r["n"]].append(r)
    if any(len(v) > 1 for v in by_n.values()):
        raise ValueError(f"several {statistic} records per size; pass p_label or index")
    pts, excluded = [], 0
    for n in sorted(by_n):
        v = _value(by_n[n][0], summary)
        if v is None or not math.isfinite(v) or v <= 0:
            excluded += 1
            continue
        pts.append((n, float(v)))
    if excluded:
        log.warning("fit_scaling(%s): %d nonpositive points excluded", statistic, excluded)
    if len(pts) < min_points:
        raise ValueError(f"need {min_points} sizes with positive {statistic}, have {len(pts)}")
    n, v = np.array(pts).T
    fit = ols(np.log(n), np.log(v))
    return ScalingFit(statistic, fit.slope, fit.stderr, fit.r2, tuple(pts), excluded, summary,
                      math.exp(fit.intercept))


def window_offset(label) -> float | None:
    """Window offset encoded in a ``w<offset>`` p label, else None."""
    if not isinstance(label, str) or not label.startswith("w"):
        return None
    try:
        return float(label[1:])
    except ValueError:
        return None


@dataclass
class WindowReport:
    statistic: str
    summary: str
    ratios: dict = field(default_factory=dict)     # offset -> [(n, endpoint / center)]
    exponents: dict = field(default_factory=dict)  # offset -> slope of log ratio vs log n
    partial: bool = False
    missing: list = field(default_factory=list)

    @property
    def max_abs_exponent(self) -> float:
        vals = [abs(e) for e in self.exponents.values() if math.isfinite(e)]
        return max(vals) if vals else math.nan


def check_window_stability(records, statistic: str, summary: str = "median",
                           index=None) -> WindowReport:
    """Endpoint / center ratios of a window-grid statistic, per size, and their trend in n."""
    rep = WindowReport(statistic, summary)
    grid = defaultdict(dict)
    for r in _select(records, statistic, index=index):
        off = window_offset(r.get("p_label"))
        if off is not None:
            grid[r["n"]][off] = _value(r, summary)
    if not grid:
        rep.partial = True
        rep.missing.append("no window-grid records")
        return rep
    offsets = sorted({o for g in grid.values() for o in g})
    ends = sorted({offsets[0], offsets[-1]})
    for n in sorted(grid):
        g = grid[n]
        center = g.get(0.0)
        if center is None or not center or center <= 0:
            rep.partial = True
            rep.missing.append(f"n={n}: center")
            continue
        for off in ends:
            if g.get(off) is None:
                rep.partial = True
                rep.missing.append(f"n={n}: offset {off:+g}")
                continue
            rep.ratios.setdefault(off, []).append((n, g[off] / center))
    for off, pts in rep.ratios.items():
        good = [(n, q) for n, q in pts if q > 0]
        if len(good) >= 2:
            n, q = np.array(good).T
            rep.exponents[off] = ols(np.log(n), np.log(q)).slope
        else:
            rep.partial = True
            rep.exponents[off] = math.nan
    if len(grid) < 2:
        rep.partial = True
        rep.missing.append("fewer than 2 sizes")
    return rep


def _cell(v):
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


def export_csv(records, path) -> int:
    """Flatten records into a CSV file; returns the number of rows written."""
    records = list(records)
    keys = set()
    for r in records:
        keys.update(r)
    cols = [c for c in LEADING_COLUMNS if c in keys] + sorted(keys - set(LEADING_COLUMNS))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in records:
            w.writerow({k: _cell(r.get(k)) for k in cols})
    return len(records)
