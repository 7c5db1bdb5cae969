"""Benchmark orchestration: config files, replicate loop, result files.

A config is a flat ``key = value`` text file::

    # interlocking benchmark
    structure = interlocking
    m = 50
    d = 10
    n = 500
    replicates = 10
    methods = ogl, sep, wlasso

Each replicate draws its data from its own random substream, then every
method line-searches its lambda range and solves a warm-started path.

Outputs (all carry the config hash):

* ``results.csv``  -- one row per (replicate, method); deterministic, no timings
* ``timings.csv``  -- wall-clock seconds for the path and the line searches
* ``results.json`` -- config, records (with timings) and per-method summary
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .exceptions import SepGLError
from .metrics import ReplicateSummary, summarize
from .path import best_metrics, regularization_path
from .penalties import OverlappingGroupLasso, Penalty, SeparableGroupLasso, WeightedLasso
from .simgen import SimData, SimSpec, alt_weights, build_covariance, simulate
from .solver import Problem, SolveConfig

log = logging.getLogger(__name__)

SCHEMA = 1
METHODS = ("ogl", "sep", "wlasso", "sep_uniform", "sep_size")
CSV_COLUMNS = (
    "config_hash", "replicate", "method", "seed", "best_rel_error", "best_support_discrepancy",
    "lambda_max", "lambda_min", "lambda_min_floored", "grid_size",
)
TIMING_COLUMNS = ("config_hash", "replicate", "method", "path_seconds", "search_seconds")


@dataclass
class ExperimentConfig:
    structure: str = "interlocking"
    m: int = 5
    d: int = 10
    overlap_frac: float = 0.2
    step: int = 4
    n: int = 100
    sigma2: float = 3.0
    zero_frac: float = 0.9
    weight_rule: str = ""
    seed: int = 0
    replicates: int = 2
    methods: tuple = ("ogl", "sep", "wlasso")
    tol: float = 1e-5
    max_iter: int = 20_000
    prox_tol: float = 1e-10
    grid_size: int = 50

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = tuple(s.strip() for s in self.methods.split(",") if s.strip())
        self.methods = tuple(self.methods)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if not self.weight_rule:
            self.weight_rule = "sqrt" if self.structure == "interlocking" else "inverse"
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        self.sim_spec()

    def sim_spec(self) -> SimSpec:
        return SimSpec(structure=self.structure, m=self.m, d=self.d, overlap_frac=self.overlap_frac,
                       step=self.step, n=self.n, sigma2=self.sigma2, zero_frac=self.zero_frac,
                       weight_rule=self.weight_rule, seed=self.seed)

    def solve_config(self) -> SolveConfig:
        return SolveConfig(tol=self.tol, max_iter=self.max_iter, prox_tol=self.prox_tol)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        from .exceptions import ParseError

        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(lineno, "expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ParseError(lineno, f"unknown key {key!r}")
            kind = types[key]
            try:
                if kind == "int":
                    kwargs[key] = int(value)
                elif kind == "float":
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = value
            except ValueError:
                raise ParseError(lineno, f"bad value {value!r} for {key}") from None
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ParseError(0, str(exc)) from None


def make_penalty(method: str, data: SimData, weight_rule: str = "sqrt") -> Penalty:
    if method == "ogl":
        return OverlappingGroupLasso(data.gs)
    if method == "sep":
        return SeparableGroupLasso(data.part)
    if method == "wlasso":
        return WeightedLasso.from_groups(data.gs)
    if method == "sep_uniform":
        return SeparableGroupLasso(data.part.with_weights(alt_weights(data.part, "uniform")))
    if method == "sep_size":
        base = "inverse" if weight_rule == "inverse" else "sqrt"
        return SeparableGroupLasso(data.part.with_weights(alt_weights(data.part, "size", base)))
    raise ValueError(f"unknown method {method!r}")


@dataclass
class Record:
    config_hash: str
    replicate: int
    method: str
    seed: int
    best_rel_error: float
    best_support_discrepancy: float
    lambda_max: float
    lambda_min: float
    lambda_min_floored: bool
    grid_size: int
    path_seconds: float
    search_seconds: float
    grid: list = field(default_factory=list, repr=False)

    def summary(self) -> ReplicateSummary:
        return ReplicateSummary(self.method, self.path_seconds, self.best_rel_error,
                                self.best_support_discrepancy, self.seed, self.replicate)


class ExperimentError(SepGLError):
    def __init__(self, replicate, method, cause, partial=None):
        super().__init__(f"replicate {replicate}, method {method}: {cause}")
        self.replicate = replicate
        self.method = method
        self.cause = cause
        self.partial = partial or []


def run_replicate(config: ExperimentConfig, replicate: int) -> List[Record]:
    """Generate one replicate and run every configured method on it."""
    data = simulate(config.sim_spec(), replicate)
    problem = Problem(data.X, data.y)
    records = []
    for method in config.methods:
        try:
            penalty = make_penalty(method, data, config.weight_rule)
            path = regularization_path(problem, penalty, config.solve_config(), k=config.grid_size)
            err, disc = best_metrics(path, data.beta_star)
        except SepGLError as exc:
            raise ExperimentError(replicate, method, exc, records) from exc
        log.info("replicate %d %-12s err=%.4f disc=%.4f path=%.2fs", replicate, method, err, disc,
                 path.total_time)
        records.append(Record(config.hash, replicate, method, config.seed, err, disc, path.lambda_max,
                              path.lambda_min, path.lambda_min_floored, config.grid_size, path.total_time,
                              path.search_time, path.lambdas.tolist()))
    return records


def _run_replicate_args(args):
    return run_replicate(*args)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: List[Record]

    def summary(self) -> Optional[Dict]:
        if self.config.replicates < 2:
            return None
        return summarize(r.summary() for r in self.records)

    def results_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return out.getvalue()

    def timings_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for r in self.records:
            w.writerow([_cell(getattr(r, c)) for c in TIMING_COLUMNS])
        return out.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema": SCHEMA,
            "config_hash": self.config.hash,
            "config": dataclasses.asdict(self.config),
            "ci": "mean +/- 1.96 sd / sqrt(R) (normal approximation)",
            "covariance": _covariance_metadata(self.config),
            "records": [dataclasses.asdict(r) for r in self.records],
            "summary": self.summary(),
        }
        return json.dumps(doc, indent=2, default=_json_default)

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        for name, text in (("results.csv", self.results_csv()), ("timings.csv", self.timings_csv()),
                           ("results.json", self.to_json())):
            with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


def _covariance_metadata(config: ExperimentConfig) -> Dict:
    # the projected covariance is not rescaled, so its diagonal can drift off 1
    spec = config.sim_spec()
    diag = np.diag(build_covariance(spec.groups(), mode=spec.structure))
    return {"renormalized": False, "diag_min": float(diag.min()), "diag_max": float(diag.max())}


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None, threads: int = 1) -> ExperimentResult:
    """Run every replicate and method; write result files to ``out_dir`` if given.

    Replicates run in up to ``threads`` worker processes; records are always
    ordered by (replicate, method). On failure the records finished so far
    are written before the error propagates.
    """
    records: List[Record] = []
    jobs = [(config, r) for r in range(config.replicates)]
    try:
        if threads > 1 and config.replicates > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                for recs in pool.map(_run_replicate_args, jobs):
                    records.extend(recs)
        else:
            for job in jobs:
                records.extend(run_replicate(*job))
    except ExperimentError as exc:
        records.extend(exc.partial)
        if out_dir is not None:
            ExperimentResult(config, records).write(out_dir)
        raise
    result = ExperimentResult(config, records)
    if out_dir is not None:
        result.write(out_dir)
    return result
