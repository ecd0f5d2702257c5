"""Monte Carlo coverage and width studies for the quantile-ratio intervals.

Replication ``r`` draws its sample from ``replication_rng(master_seed, stream, r)``
(stream 0 for the single / first sample, 1 for the second sample of a
two-sample run). Every quantile pair in a run is evaluated on the same
replicated samples. Replications are processed in fixed-size chunks that can be
farmed out to worker processes; results are reassembled in replication order,
so output does not depend on the number of workers.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from typing import Callable, Optional

import jsonschema
import numpy as np

from .distributions import ZeroSpikeMixture, parse_distribution, replication_rng
from .errors import ConfigError
from .quantile_density import DEFAULT_BANDWIDTH, BandwidthSpec
from .ratio_inference import (
    OK,
    STATUS_NAMES,
    BatchPlugins,
    QuantilePair,
    batch_intervals,
    critical_value,
    log_ratio_nvar,
)

log = logging.getLogger(__name__)

METHODS = ("vst", "stud")
TWO_SAMPLE_METHOD = "logdiff"

CSV_COLUMNS = (
    "family", "params", "epsilon", "n", "m", "p", "q", "method", "reps", "cp",
    "mean_width", "degenerate_count", "true_rho", "seed", "median_width",
)


@dataclass
class CoverageConfig:
    distribution: object
    n: int
    pairs: list
    reps: int = 1000
    conf: float = 0.95
    methods: tuple = METHODS
    master_seed: int = 0
    bandwidth: BandwidthSpec = DEFAULT_BANDWIDTH
    m: Optional[int] = None
    distribution_y: Optional[object] = None
    workers: int = 1
    chunk_size: int = 250

    def __post_init__(self):
        self.pairs = [pq if isinstance(pq, QuantilePair) else QuantilePair(*pq) for pq in self.pairs]
        self.methods = tuple(self.methods)
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.n < 2 or (self.m is not None and self.m < 2):
            raise ConfigError("sample sizes must be at least 2")
        if not self.pairs:
            raise ConfigError("no quantile pairs requested")
        if not 0.0 < self.conf < 1.0:
            raise ConfigError("conf must lie in (0, 1)")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be positive")
        if self.is_two_sample and (self.m is None or self.distribution_y is None):
            raise ConfigError("two-sample runs need both m and distribution_y")

    @property
    def is_two_sample(self):
        return self.m is not None or self.distribution_y is not None

    @property
    def epsilon(self):
        d = self.distribution
        return d.epsilon if isinstance(d, ZeroSpikeMixture) else 0.0

    @classmethod
    def from_dict(cls, d):
        """Validate against the shipped JSON schema and build a config."""
        try:
            jsonschema.validate(d, load_schema("coverage_config"))
        except jsonschema.ValidationError as exc:
            where = "/".join(str(k) for k in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid coverage config at {where}: {exc.message}") from None
        d = dict(d)
        dist = parse_distribution(d.pop("distribution"))
        dist_y = d.pop("distribution_y", None)
        if dist_y is not None:
            dist_y = parse_distribution(dist_y)
        grid = d.pop("grid", None)
        pairs = d.pop("pairs", None)
        if grid is not None:
            pairs = grid_pairs(grid.get("start", 0.05), grid.get("stop", 0.95), grid["step"])
        bw = d.pop("bandwidth", None) or {}
        return cls(
            distribution=dist,
            distribution_y=dist_y,
            pairs=pairs,
            bandwidth=BandwidthSpec(**bw),
            **d,
        )

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d)


def load_schema(name):
    return json.loads((resources.files("qratio") / "schemas" / f"{name}.schema.json").read_text())


def grid_pairs(start=0.05, stop=0.95, step=0.01):
    """All ordered pairs ``p != q`` on ``start, start + step, ..., stop``."""
    k = (stop - start) / step
    if k < 0 or abs(k - round(k)) > 1e-9:
        raise ConfigError(f"grid step {step} does not divide [{start}, {stop}]")
    probs = [round(start + i * step, 10) for i in range(int(round(k)) + 1)]
    return [QuantilePair(p, q) for p, q in itertools.product(probs, probs) if p != q]


@dataclass
class CoverageRow:
    family: str
    params: str
    epsilon: float
    n: int
    m: Optional[int]
    p: float
    q: float
    method: str
    reps: int
    cp: float
    mean_width: float
    degenerate_count: int
    true_rho: float
    seed: int
    median_width: float
    degenerate_reasons: dict = field(default_factory=dict)

    def csv_values(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class CoverageResult:
    rows: list
    runtime: float = 0.0

    def row(self, method, p, q):
        for r in self.rows:
            if r.method == method and r.p == p and r.q == q:
                return r
        raise KeyError((method, p, q))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in r.csv_values()])
        return buf.getvalue()


# -- per-chunk workers (module level so they pickle)

def _draw_block(dist, n, master_seed, stream, reps):
    x = np.empty((len(reps), n))
    for i, r in enumerate(reps):
        x[i] = dist.draw(replication_rng(master_seed, stream, r), n)
    x.sort(axis=1)
    return x


def _probs(pairs):
    return sorted({v for pq in pairs for v in (pq.p, pq.q)})


def _one_sample_chunk(cfg, reps):
    x = _draw_block(cfg.distribution, cfg.n, cfg.master_seed, 0, reps)
    plug = BatchPlugins.compute(x, _probs(cfg.pairs), cfg.bandwidth)
    out = []
    for pq in cfg.pairs:
        res = batch_intervals(plug, pq, cfg.conf)
        out.append({m: (res[m][0], res[m][1], res["status_" + m]) for m in cfg.methods})
    return out


def _two_sample_chunk(cfg, reps):
    x = _draw_block(cfg.distribution, cfg.n, cfg.master_seed, 0, reps)
    y = _draw_block(cfg.distribution_y, cfg.m, cfg.master_seed, 1, reps)
    probs = _probs(cfg.pairs)
    px = BatchPlugins.compute(x, probs, cfg.bandwidth)
    py = BatchPlugins.compute(y, probs, cfg.bandwidth)
    z = critical_value(cfg.conf)
    out = []
    for pq in cfg.pairs:
        terms = []
        for plug, size in ((px, cfg.n), (py, cfg.m)):
            rho, xp, xq, gp, gq, status = plug.pair_terms(pq)
            with np.errstate(divide="ignore", invalid="ignore"):
                var = log_ratio_nvar(pq.p, pq.q, xp, xq, gp, gq) / size
                theta = np.log(rho)
            terms.append((theta, var, status))
        (tx, vx, sx), (ty, vy, sy) = terms
        status = np.where(sx != OK, sx, sy)
        with np.errstate(invalid="ignore"):
            se = np.sqrt(vx + vy)
        status = np.where((status == OK) & ~(se > 0), np.int8(3), status)
        diff = tx - ty
        lo, hi = diff - z * se, diff + z * se
        bad = status != OK
        lo[bad] = np.nan
        hi[bad] = np.nan
        out.append({TWO_SAMPLE_METHOD: (lo, hi, status)})
    return out


def _chunks(reps, size):
    return [range(s, min(s + size, reps)) for s in range(0, reps, size)]


def _run_chunks(fn, cfg, progress):
    chunks = _chunks(cfg.reps, cfg.chunk_size)
    workers = cfg.workers or os.cpu_count() or 1
    results = []
    if workers <= 1 or len(chunks) == 1:
        for i, c in enumerate(chunks):
            results.append(fn(cfg, c))
            if progress:
                progress(i + 1, len(chunks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(fn, itertools.repeat(cfg), chunks)):
                results.append(res)
                if progress:
                    progress(i + 1, len(chunks))
    return results


def _aggregate(cfg, chunk_results, truths, dist):
    rows = []
    for k, pq in enumerate(cfg.pairs):
        for method in chunk_results[0][k]:
            lo = np.concatenate([c[k][method][0] for c in chunk_results])
            hi = np.concatenate([c[k][method][1] for c in chunk_results])
            status = np.concatenate([c[k][method][2] for c in chunk_results])
            good = status == OK
            truth = truths[k]
            covered = (lo[good] <= truth) & (truth <= hi[good])
            widths = hi[good] - lo[good]
            reasons = {STATUS_NAMES[int(s)]: int(np.sum(status == s)) for s in np.unique(status[~good])}
            valid = int(good.sum())
            rows.append(CoverageRow(
                family=dist.family,
                params=dist.params_label(),
                epsilon=cfg.epsilon,
                n=cfg.n,
                m=cfg.m,
                p=pq.p,
                q=pq.q,
                method=method,
                reps=cfg.reps,
                cp=float(covered.mean()) if valid else math.nan,
                mean_width=float(widths.mean()) if valid else math.nan,
                degenerate_count=cfg.reps - valid,
                true_rho=float(math.exp(truth)) if method == TWO_SAMPLE_METHOD else float(truth),
                seed=cfg.master_seed,
                median_width=float(np.median(widths)) if valid else math.nan,
                degenerate_reasons=reasons,
            ))
    return rows


def _true_rho(dist, pq):
    return float(dist.quantile(pq.p) / dist.quantile(pq.q))


def run_coverage(cfg: CoverageConfig, progress: Optional[Callable] = None):
    """Coverage probability and mean width of each requested interval.

    Replications whose plug-ins are unusable (zero denominator quantile,
    non-positive density estimate, ...) are excluded from ``cp`` and counted
    in ``degenerate_count``. Containment is judged on the closed interval.
    """
    if cfg.is_two_sample:
        raise ConfigError("use run_two_sample_coverage for two-sample configs")
    start = time.perf_counter()
    pairs = cfg.pairs
    eps = cfg.epsilon
    if eps > 0:
        kept = [pq for pq in pairs if pq.p > eps and pq.q > eps]
        if len(kept) < len(pairs):
            log.warning("skipping %d pair(s) whose true quantile is 0 under epsilon=%g",
                        len(pairs) - len(kept), eps)
        if not kept:
            raise ConfigError("every pair involves a quantile at or below epsilon")
        if len(kept) < len(pairs):
            cfg = _replace(cfg, pairs=kept)
    for pq in cfg.pairs:
        pq.require_distinct()
    truths = [_true_rho(cfg.distribution, pq) for pq in cfg.pairs]
    chunk_results = _run_chunks(_one_sample_chunk, cfg, progress)
    rows = _aggregate(cfg, chunk_results, truths, cfg.distribution)
    return CoverageResult(rows, time.perf_counter() - start)


def run_coverage_mixture(cfg: CoverageConfig, progress: Optional[Callable] = None):
    """Coverage under a zero-spike mixture; truth is the mixture's own quantile ratio.

    Pairs involving a quantile at or below ``epsilon`` (whose true value is 0)
    are skipped.
    """
    if not isinstance(cfg.distribution, ZeroSpikeMixture):
        raise ConfigError("run_coverage_mixture needs a ZeroSpikeMixture distribution")
    return run_coverage(cfg, progress)


def run_two_sample_coverage(cfg: CoverageConfig, progress: Optional[Callable] = None):
    """Coverage of ``ln rho_x - ln rho_y`` by the log-difference interval.

    ``true_rho`` in the output is the true ratio of ratios ``rho_x / rho_y``;
    widths are on the log scale.
    """
    if not cfg.is_two_sample:
        raise ConfigError("two-sample coverage needs m and distribution_y")
    start = time.perf_counter()
    truths = [
        math.log(_true_rho(cfg.distribution, pq)) - math.log(_true_rho(cfg.distribution_y, pq))
        for pq in cfg.pairs
    ]
    chunk_results = _run_chunks(_two_sample_chunk, cfg, progress)
    rows = _aggregate(cfg, chunk_results, truths, cfg.distribution)
    for r in rows:
        r.params = f"{r.params}|{cfg.distribution_y.family}({cfg.distribution_y.params_label()})"
    return CoverageResult(rows, time.perf_counter() - start)


def run_contour_grid(cfg: CoverageConfig, start=0.05, stop=0.95, step=0.01,
                     progress: Optional[Callable] = None):
    """One row per off-diagonal ``(p, q)`` cell of the grid and per method."""
    return run_coverage(_replace(cfg, pairs=grid_pairs(start, stop, step)), progress)


def run(cfg: CoverageConfig, progress: Optional[Callable] = None):
    """Dispatch on the kind of config."""
    if cfg.is_two_sample:
        return run_two_sample_coverage(cfg, progress)
    return run_coverage(cfg, progress)


def _replace(cfg, **changes):
    kw = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    kw.update(changes)
    return CoverageConfig(**kw)
