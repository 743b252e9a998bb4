"""Sweep runner: ladder sizes x p points x statistics -> JSON-lines records.

Work is split into cells.  A cell's records depend only on the config
fingerprint and the cell key, never on scheduling: cells may run in worker
processes, but records are appended in cell order by a single writer.  A
rerun with the same config skips cells already complete in the output file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import estimators as est
from .. import geometry, perc
from ..oracle import NoSolutionError
from .config import SCHEMA_VERSION, ExperimentConfig

log = logging.getLogger(__name__)

#: fields excluded when comparing reruns
VOLATILE_FIELDS = ("wall_ms",)


@dataclass(frozen=True)
class Cell:
    size_index: int
    statistic: str
    p_label: str = ""
    p: float | None = None

    @property
    def key(self) -> str:
        return f"{self.size_index}:{self.statistic}:{self.p_label}"


def cell_seed(master_seed: int, family: str, size: dict, statistic: str) -> int:
    """Seed of a (size, statistic) cell; shared by every p so the coupling holds across p."""
    blob = json.dumps([master_seed, family, size, statistic], sort_keys=True)
    return int.from_bytes(hashlib.sha256(blob.encode()).digest()[:8], "little") >> 1


def _estimate_fields(e: est.Estimate) -> dict:
    out = {"mean": e.mean, "std_error": e.std_error, "samples": e.samples,
           "ci99_low": e.ci99[0], "ci99_high": e.ci99[1]}
    if e.wilson99 is not None:
        out["wilson99_low"], out["wilson99_high"] = e.wilson99
    if e.flags:
        out["flags"] = list(e.flags)
    return out


def _row(statistic, e=None, index_name=None, index=None, **extra):
    row = {"statistic": statistic, "index_name": index_name, "index": index}
    if e is not None:
        row.update(_estimate_fields(e))
    row.update(extra)
    return row


def _solve_pc(cfg: ExperimentConfig, size_index: int) -> list[dict]:
    g = cfg.graph(cfg.sizes[size_index])
    seed = cell_seed(cfg.master_seed, cfg.family, cfg.sizes[size_index], "pc")
    tol = cfg.pc_tolerance / (g.d * g.n ** (1.0 / 3.0))
    cp = est.solve_pc(g, cfg.lam, tol, cfg.pc_replicas, seed, retry_cap=cfg.pc_retry_cap)
    flags = []
    if cp.indistinguishable:
        flags.append("indistinguishable")
    if not cp.consistent:
        flags.append("inconsistent")
    return [_row("pc", cp.chi_at_p_c_hat, p_c_hat=cp.p_c_hat, lam=cp.lam, target=cp.target,
                 bracket=list(cp.bracket), probes=cp.probes, seed=seed,
                 method="noisy_bisection", pc_flags=flags)]


def _default_r_max(g):
    return max(1, math.ceil(g.n ** (1.0 / 3.0)))


def _stat_records(cfg: ExperimentConfig, cell: Cell) -> list[dict]:
    size = cfg.sizes[cell.size_index]
    g = cfg.graph(size)
    p = cell.p
    R = cfg.replicas
    seed = cell_seed(cfg.master_seed, cfg.family, size, cell.statistic)
    s = cell.statistic
    rows = []
    if s == "chi":
        rows.append(_row("chi", est.estimate_chi(g, p, R, seed), method="bfs"))
    elif s == "triangle":
        rng = np.random.default_rng(seed)
        pairs = [(0, 0)] + [tuple(int(v) for v in rng.integers(0, g.n, 2))
                            for _ in range(cfg.triangle_pairs)]
        tri = est.estimate_triangle(g, p, pairs, R, seed)
        for i, ((x, y), e) in enumerate(zip(tri.pairs, tri.estimates)):
            rows.append(_row("triangle", e, "pair", i, x=x, y=y))
        rows.append(_row("triangle_excess", None, mean=tri.excess, threshold=tri.threshold,
                         below_threshold=tri.below_threshold))
    elif s == "ball":
        r_max = cfg.r_max or _default_r_max(g)
        gr = est.estimate_ball_growth(g, p, r_max, R, seed)
        for r in gr.radii:
            rows.append(_row("ball", gr.volume[r], "r", r))
        for r in gr.radii:
            rows.append(_row("ball_edges", gr.edges[r], "r", r))
        ratio, arg = gr.max_ratio()
        rows.append(_row("ball_max_ratio", None, mean=ratio, argmax_r=arg))
        checks = est.volrecur_checks(gr)
        for c in checks:
            rows.append(_row("volrecur", None, "r", c.r, lhs=c.lhs, rhs=c.rhs,
                             joint_std_error=c.joint_std_error, holds=c.holds))
    elif s == "onearm":
        r_list = cfg.r_list or [2**j for j in range(int(math.log2(_default_r_max(g))) + 1)]
        for r, e in est.estimate_one_arm(g, p, r_list, R, seed).items():
            rows.append(_row("onearm", e, "r", r))
    elif s == "tail":
        top = max(1, int(g.n ** (2.0 / 3.0)))
        k_list = cfg.k_list or [2**j for j in range(int(math.log2(top)) + 1)]
        for k, e in est.estimate_tail(g, p, k_list, R, seed).items():
            rows.append(_row("tail", e, "k", k))
    elif s == "c1":
        c1 = est.estimate_c1(g, p, R, seed)
        scaled = c1.scaled(g.n)
        rows.append(_row("c1", c1.estimate, median=c1.median, q05=c1.q05, q95=c1.q95,
                         median_scaled=scaled["median"], q05_scaled=scaled["q05"],
                         q95_scaled=scaled["q95"], method="components"))
    elif s in ("diam", "tmix"):
        rows.extend(_geometry_rows(g, p, R, seed, s, cfg.mixing_limit))
    else:
        raise ValueError(f"statistic {s!r} has no cell runner")
    for r in rows:
        r["seed"] = seed
    return rows


def c1_geometry(g, p, replicas, seed, statistic, mixing_limit=geometry.MIXING_SIZE_LIMIT,
                first_replica=0):
    """Per-replica C1 diameter or mixing time.

    Returns ``(values, methods, sizes)``; for ``tmix`` the values of clusters
    past ``mixing_limit`` are relaxation-time proxies.
    """
    values, methods, sizes = [], [], []
    for i in range(first_replica, first_replica + replicas):
        cl = perc.largest_cluster(g, perc.CouplingSeed(seed, i), p)
        cg = geometry.ClusterGraph.from_cluster(cl)
        sizes.append(len(cg))
        if statistic == "diam":
            v, m = geometry.diameter(cg)
        else:
            res = geometry.mixing_time(cg, size_limit=mixing_limit)
            v, m = res.t_mix, res.method
        values.append(v)
        methods.append(m)
    return np.array(values), methods, np.array(sizes)


def _geometry_rows(g, p, R, seed, s, mixing_limit):
    values, methods, sizes = c1_geometry(g, p, R, seed, s, mixing_limit)
    good = np.array([m in ("exact", "exact_tv") for m in methods])
    counts = {m: methods.count(m) for m in sorted(set(methods))}
    if s == "diam":
        # double-sweep values are lower bounds and still informative
        use = values
    else:
        use = values[good]
    extra = {"method_counts": counts, "c1_median": float(np.median(sizes))}
    if s == "tmix":
        extra["convention"] = geometry.CONVENTION
        extra["method"] = "exact_tv"
        if "spectral_bound" in counts:
            # proxy clusters are reported but left out of the summary
            extra["method"] = "exact_tv; spectral_bound excluded (proxy, not TV)"
    else:
        extra["method"] = "exact" if "double_sweep" not in counts else "exact+double_sweep"
    if len(use) >= 2:
        e = est.Estimate.from_samples(use)
        q05, med, q95 = np.quantile(use, [0.05, 0.5, 0.95])
        return [_row(s, e, median=float(med), q05=float(q05), q95=float(q95), **extra)]
    return [_row(s, None, error="fewer than 2 usable clusters", **extra)]


def _run_cell(cfg_dict: dict, cell: Cell) -> tuple[list[dict], float]:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    t0 = time.perf_counter()
    if cell.statistic == "pc":
        rows = _solve_pc(cfg, cell.size_index)
    else:
        rows = _stat_records(cfg, cell)
    return rows, (time.perf_counter() - t0) * 1000.0


def _cfg_dict(cfg: ExperimentConfig) -> dict:
    d = dict(vars(cfg))
    d["lambda"] = d.pop("lam")
    return d


def _load_existing(path: Path, fingerprint: str):
    """Records of complete cells with this fingerprint, plus all foreign lines."""
    keep, done, foreign = [], set(), []
    if not path.exists():
        return keep, done, foreign
    by_cell: dict[str, list[dict]] = {}
    for line in path.read_text().splitlines():
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            continue
        if rec.get("fingerprint") != fingerprint:
            foreign.append(line)
            continue
        by_cell.setdefault(rec["cell"], []).append(rec)
    for key, recs in by_cell.items():
        if len(recs) == recs[0].get("cell_records"):
            done.add(key)
            keep.extend(recs)
    return keep, done, foreign


class Runner:
    """Executes a config and appends its records to ``cfg.output``."""

    def __init__(self, cfg: ExperimentConfig, workers: int | None = None):
        self.cfg = cfg
        self.workers = workers or cfg.workers
        self.fingerprint = cfg.fingerprint()
        self.path = Path(cfg.output) if cfg.output else None

    def _finish(self, cell: Cell, rows: list[dict], wall: float, g) -> list[dict]:
        out = []
        for row in rows:
            rec = {"v": SCHEMA_VERSION, "fingerprint": self.fingerprint, "cell": cell.key,
                   "cell_records": len(rows), "family": self.cfg.family,
                   "params": self.cfg.sizes[cell.size_index], "n": g.n, "d": g.d,
                   "p": cell.p, "p_label": cell.p_label or None,
                   "replicas": self.cfg.replicas, "master_seed": self.cfg.master_seed}
            rec.update(row)
            rec["wall_ms"] = round(wall, 3)
            out.append(rec)
        return out

    def _points(self, size_index: int, pc_rows) -> list[tuple[str, float]]:
        cfg = self.cfg
        if cfg.p_mode == "explicit":
            return [(f"p={p!r}", float(p)) for p in cfg.p_list]
        if not pc_rows or "p_c_hat" not in pc_rows[0]:
            return []
        p_hat = pc_rows[0]["p_c_hat"]
        if cfg.p_mode == "at_pc_hat":
            return [("pc_hat", p_hat)]
        g = cfg.graph(cfg.sizes[size_index])
        window = est.WindowSpec(cfg.A, p_hat, g.d, g.n)
        return [(f"w{off:+g}", p) for off, p in window.grid(cfg.window_points)]

    def run(self):
        """Run every missing cell; yield records (old and new) in cell order."""
        cfg = self.cfg
        old = {}
        if self.path is not None:
            keep, _, foreign = _load_existing(self.path, self.fingerprint)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            for rec in keep:
                old.setdefault(rec["cell"], []).append(rec)
            # rewrite without partial cells, then append
            with self.path.open("w") as fh:
                for line in foreign:
                    fh.write(line + "\n")
                for recs in old.values():
                    for rec in recs:
                        fh.write(json.dumps(rec) + "\n")
        graphs = [cfg.graph(s) for s in cfg.sizes]
        need_pc = cfg.p_mode != "explicit" or "pc" in cfg.statistics
        stats = [s for s in cfg.statistics if s != "pc"]
        pool = ProcessPoolExecutor(self.workers) if self.workers > 1 else None
        try:
            pc_cells = [Cell(i, "pc") for i in range(len(cfg.sizes))] if need_pc else []
            pc_rows = {}
            for cell, rows in self._execute(pc_cells, old, graphs, pool):
                pc_rows[cell.size_index] = rows
                yield from rows
            cells = []
            for i in range(len(cfg.sizes)):
                pts = self._points(i, [r for r in pc_rows.get(i, []) if r["statistic"] == "pc"])
                cells.extend(Cell(i, s, label, p) for label, p in pts for s in stats)
            for _, rows in self._execute(cells, old, graphs, pool):
                yield from rows
        finally:
            if pool is not None:
                pool.shutdown()

    def _execute(self, cells, old, graphs, pool):
        cfg_dict = _cfg_dict(self.cfg)
        todo = [c for c in cells if c.key not in old]
        futures = {}
        if pool is not None:
            futures = {c.key: pool.submit(_run_cell, cfg_dict, c) for c in todo}
        for cell in cells:
            if cell.key in old:
                yield cell, old[cell.key]
                continue
            try:
                if pool is not None:
                    rows, wall = futures[cell.key].result()
                else:
                    rows, wall = _run_cell(cfg_dict, cell)
            except NoSolutionError as exc:
                rows, wall = [_row("error", None, error=str(exc), kind="infeasible")], 0.0
            recs = self._finish(cell, rows, wall, graphs[cell.size_index])
            if self.path is not None:
                with self.path.open("a") as fh:
                    fh.write("".join(json.dumps(r) + "\n" for r in recs))
            log.info("cell %s: %d records in %.0f ms", cell.key, len(recs), wall)
            yield cell, recs


def run(config: ExperimentConfig, workers: int | None = None):
    """Stream of records for ``config``; also appended to ``config.output`` when set."""
    yield from Runner(config, workers).run()


def load_records(path) -> list[dict]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def strip_volatile(rec: dict) -> dict:
    return {k: v for k, v in rec.items() if k not in VOLATILE_FIELDS}
