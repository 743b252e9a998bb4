"""Experiment configuration.

A config file is TOML.  Recognized keys (all top level)::

    family      = "complete"            # torus | hamming | complete | explicit
    sizes       = [{n = 2000}, {n = 4000}]   # family parameters per ladder rung
    lambda      = 1.0                   # target chi = lambda * n^(1/3)
    A           = 1.0                   # window half-width in units of 1/(d n^(1/3))
    p_mode      = "at_pc_hat"           # at_pc_hat | window_grid | explicit
    window_points = 5                   # grid size for window_grid
    p_list      = [0.5]                 # for explicit
    statistics  = ["c1", "diam"]        # chi pc triangle ball onearm tail c1 diam tmix
    replicas    = 200
    master_seed = 1
    output      = "runs/c1.jsonl"

Optional tuning keys: ``pc_replicas`` (per probe, default 2000),
``pc_retry_cap`` (4), ``pc_tolerance`` (in window units, 0.02), ``r_max``
(ball radius, default ceil(n^(1/3))), ``r_list`` (one-arm radii), ``k_list``
(tail thresholds), ``triangle_pairs`` (random pairs, default 10),
``mixing_limit`` (2000), ``workers`` (1).
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..graphs import TransitiveGraph, graph_from_params

STATISTICS = ("chi", "pc", "triangle", "ball", "onearm", "tail", "c1", "diam", "tmix")
P_MODES = ("at_pc_hat", "window_grid", "explicit")
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    family: str
    sizes: list[dict]
    statistics: list[str]
    replicas: int
    master_seed: int
    output: str | None = "results.jsonl"
    lam: float = 1.0
    A: float = 1.0
    p_mode: str = "explicit"
    window_points: int = 5
    p_list: list[float] = field(default_factory=list)
    pc_replicas: int = 2000
    pc_retry_cap: int = 4
    pc_tolerance: float = 0.02
    r_max: int | None = None
    r_list: list[int] | None = None
    k_list: list[int] | None = None
    triangle_pairs: int = 10
    mixing_limit: int = 2000
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.sizes:
            raise ConfigError("size ladder is empty")
        if self.replicas < 2:
            raise ConfigError("replicas must be >= 2")
        bad = [s for s in self.statistics if s not in STATISTICS]
        if bad or not self.statistics:
            raise ConfigError(f"unknown statistics {bad}; choose from {', '.join(STATISTICS)}")
        if self.p_mode not in P_MODES:
            raise ConfigError(f"p_mode must be one of {', '.join(P_MODES)}")
        if self.p_mode == "explicit":
            if not self.p_list:
                raise ConfigError("explicit p_mode needs p_list")
            if any(not 0.0 <= p <= 1.0 for p in self.p_list):
                raise ConfigError("p_list entries must lie in [0, 1]")
        if self.p_mode == "window_grid" and self.window_points < 1:
            raise ConfigError("window_points must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for s in self.sizes:
            self.graph(s)

    def graph(self, size: dict) -> TransitiveGraph:
        try:
            return graph_from_params(self.family, **size)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad size entry {size} for family {self.family}: {exc}") from None

    def fingerprint(self) -> str:
        """Hash of every field that affects record contents."""
        d = asdict(self)
        for k in ("output", "workers"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        cfg = cls.from_dict(data)
        out = Path(cfg.output) if cfg.output else None
        if out is not None and not out.is_absolute():
            cfg.output = str(path.parent / out)
        return cfg
