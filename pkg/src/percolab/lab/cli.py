"""``percolab`` command line.

Exit codes: 0 success, 2 usage error, 3 infeasible parameter, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .. import oracle
from ..graphs import GraphError, parse_graph
from . import analysis
from .config import ConfigError, ExperimentConfig
from .runner import load_records, run

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4
ESTIMATE_STATS = ("chi", "pc", "triangle", "ball", "onearm", "tail", "c1")
GEOMETRY_STATS = ("diam", "tmix")


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _graph_args(sp):
    sp.add_argument("--graph", required=True, help="torus | hamming | complete | file:PATH")
    sp.add_argument("--side", type=int, help="torus side, or vertex count of complete")
    sp.add_argument("--dim", type=int)


def _point_args(sp):
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--p", type=float, help="edge probability")
    grp.add_argument("--lambda", dest="lam", type=float,
                     help="solve p_c for chi = lambda n^(1/3) and evaluate there")
    sp.add_argument("--replicas", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--out", help="append JSON-lines records here (default: stdout only)")
    sp.add_argument("--pc-replicas", type=int, default=2000, help="replicas per bisection probe")
    sp.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="percolab",
                                 description="Critical bond percolation on finite transitive graphs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("estimate", help="Monte Carlo estimate of one statistic")
    _graph_args(sp)
    _point_args(sp)
    sp.add_argument("--stat", required=True, choices=ESTIMATE_STATS)
    sp.add_argument("--r-max", type=int, help="largest ball radius")
    sp.add_argument("--r-list", type=_int_list, help="one-arm radii, comma separated")
    sp.add_argument("--k-list", type=_int_list, help="tail thresholds, comma separated")

    sp = sub.add_parser("geometry", help="diameter or mixing time of the largest cluster")
    _graph_args(sp)
    _point_args(sp)
    sp.add_argument("--stat", required=True, choices=GEOMETRY_STATS)
    sp.add_argument("--mixing-limit", type=int, default=2000,
                    help="largest cluster for exact TV; bigger ones get the spectral proxy")

    sp = sub.add_parser("sweep", help="run a TOML experiment config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--workers", type=int)

    sp = sub.add_parser("oracle", help="exact value by enumerating every edge configuration")
    _graph_args(sp)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--quantity", required=True, choices=oracle.QUANTITIES)
    sp.add_argument("--x", type=int, default=0)
    sp.add_argument("--y", type=int, default=0)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--k", type=int, default=1)

    sp = sub.add_parser("fit", help="log-log scaling fit over the size ladder")
    sp.add_argument("--records", required=True)
    sp.add_argument("--stat", required=True)
    sp.add_argument("--summary", choices=("median", "mean"), default="median")
    sp.add_argument("--p-label")
    sp.add_argument("--index", type=int)

    sp = sub.add_parser("window", help="endpoint / center ratios over the window grid")
    sp.add_argument("--records", required=True)
    sp.add_argument("--stat", required=True)
    sp.add_argument("--summary", choices=("median", "mean"), default="median")

    sp = sub.add_parser("export", help="flatten JSON-lines records to CSV")
    sp.add_argument("--records", required=True)
    sp.add_argument("--csv", required=True)
    return ap


def _family_params(args):
    if args.graph.startswith("file:"):
        return "explicit", {"path": args.graph[5:]}
    parse_graph(args.graph, args.side, args.dim)  # validates the arguments
    return args.graph, _size_of(args)


def _size_of(args):
    if args.graph == "torus":
        return {"side": args.side, "dim": args.dim}
    if args.graph == "hamming":
        return {"dim": args.dim}
    return {"n": args.side}


def _point_config(args, stat, **extra) -> ExperimentConfig:
    family, size = _family_params(args)
    d = dict(family=family, sizes=[size], statistics=[stat], replicas=args.replicas,
             master_seed=args.seed, output=args.out, pc_replicas=args.pc_replicas,
             workers=args.workers)
    if args.lam is not None:
        d.update(lam=args.lam, p_mode="at_pc_hat")
    else:
        if not 0.0 <= args.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {args.p}")
        d.update(p_mode="explicit", p_list=[args.p])
    d.update({k: v for k, v in extra.items() if v is not None})
    return ExperimentConfig.from_dict(d)


def _emit(cfg, workers=None) -> int:
    status = EXIT_OK
    for rec in run(cfg, workers):
        print(json.dumps(rec))
        if rec.get("statistic") == "error":
            status = EXIT_INFEASIBLE
    return status


def _cmd_estimate(args):
    return _emit(_point_config(args, args.stat, r_max=args.r_max, r_list=args.r_list,
                               k_list=args.k_list))


def _cmd_geometry(args):
    return _emit(_point_config(args, args.stat, mixing_limit=args.mixing_limit))


def _cmd_sweep(args):
    cfg = ExperimentConfig.from_file(args.config)
    return _emit(cfg, args.workers)


def _cmd_oracle(args):
    g = parse_graph(args.graph, args.side, args.dim)
    q = args.quantity
    extra = {"tau": (args.x, args.y), "nabla": (args.x, args.y), "chi": (args.x,),
             "ball_mean": (args.x, args.r), "ball_edges": (args.x, args.r),
             "one_arm": (args.x, args.r), "tail": (args.x, args.k)}.get(q, ())
    res = oracle.exact(g, args.p, q, *extra)
    value = res.value
    if hasattr(value, "tolist"):
        value = value.tolist()
    print(json.dumps({"quantity": q, "args": list(extra), "p": args.p, "value": value,
                      "configurations": res.configurations}))
    return EXIT_OK


def _cmd_fit(args):
    fit = analysis.fit_scaling(load_records(args.records), args.stat, args.summary,
                               p_label=args.p_label, index=args.index)
    print(json.dumps({"statistic": fit.statistic, "exponent_hat": fit.exponent_hat,
                      "stderr": fit.stderr, "r2": fit.r2, "points": fit.points,
                      "excluded": fit.excluded, "summary": fit.summary}))
    return EXIT_OK


def _cmd_window(args):
    rep = analysis.check_window_stability(load_records(args.records), args.stat, args.summary)
    print(json.dumps({"statistic": rep.statistic, "summary": rep.summary,
                      "ratios": {f"{k:+g}": v for k, v in rep.ratios.items()},
                      "exponents": {f"{k:+g}": v for k, v in rep.exponents.items()},
                      "partial": rep.partial, "missing": rep.missing}))
    return EXIT_OK


def _cmd_export(args):
    rows = analysis.export_csv(load_records(args.records), args.csv)
    print(f"wrote {rows} rows to {args.csv}")
    return EXIT_OK


COMMANDS = {"estimate": _cmd_estimate, "geometry": _cmd_geometry, "sweep": _cmd_sweep,
            "oracle": _cmd_oracle, "fit": _cmd_fit, "window": _cmd_window,
            "export": _cmd_export}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (GraphError, ConfigError) as exc:
        print(f"percolab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (oracle.NoSolutionError, oracle.OracleLimitError, ValueError) as exc:
        print(f"percolab: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"percolab: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
