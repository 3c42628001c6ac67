"""Check every arm against the dense oracle, then time them on identical inputs."""
from __future__ import annotations

import logging
import platform
import statistics
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable

import numpy as np
from pydantic import BaseModel

from bench.config import BenchConfig, Impl
from services.ablation import ablation_forward, variants
from services.dense_oracle import oracle_forward
from services.errors import EquivalenceError
from services.fused import fused_rome
from services.rome import ExtensionMaps, StructuredMap, build_extension_maps, build_m, rome_ext_forward, rome_forward
from services.rope_reference import rope_reference, rope_reference_nd
from services.tensor_core import PairingMode, Precision, RopeTables, build_tables
from workers.pipeline import pipelined_rome

logger = logging.getLogger(__name__)

TOLERANCE = {Precision.FP32: 1e-5, Precision.FP64: 1e-12}

# a timed sample shorter than this many clock ticks is repeated until it is not
MIN_TICKS_PER_SAMPLE = 1000

Forward = Callable[[np.ndarray], np.ndarray]


class BenchRow(BaseModel):
    impl: str
    mode: str
    dims: tuple[int, ...]
    B: int
    N: int
    S: int
    D: int
    precision: str
    iters: int
    mean_ms: float
    median_ms: float
    stddev_ms: float
    speedup_times: float
    speedup_pct: float
    repeats: int = 1


class EnvInfo(BaseModel):
    host: str
    platform: str
    python: str
    numpy: str
    precision: str
    seed: int
    grid: tuple[int, ...]
    include_setup: bool
    checked: bool
    timestamp: str


class BenchReport(BaseModel):
    rows: list[BenchRow]
    env: EnvInfo

    @property
    def baseline(self) -> BenchRow:
        return self.rows[0]


def speedup(t0: float, t: float) -> tuple[float, float]:
    """(times faster, fraction of baseline time saved) for baseline time t0 and arm time t."""
    if t0 <= 0 or t <= 0:
        raise ValueError(f"timings must be positive, got baseline {t0} and {t}")
    return t0 / t, 1.0 - t / t0


@dataclass(frozen=True, eq=False)
class Prepared:
    tables: RopeTables
    map: StructuredMap | ExtensionMaps


def prepare(cfg: BenchConfig, cached: bool = True) -> Prepared:
    builder = build_tables if cached else build_tables.__wrapped__
    tables = builder(cfg.shape[2], cfg.dims, cfg.mode, cfg.base, cfg.grid, cfg.precision)
    if cfg.mode is PairingMode.INTERLEAVE_HALF:
        map = build_extension_maps(cfg.shape[3], cfg.dims)
    else:
        map = build_m(cfg.mode, cfg.dims)
    return Prepared(tables, map)


def arm(impl: Impl, cfg: BenchConfig, prep: Prepared) -> Forward:
    full, map = prep.tables.full, prep.map
    ext = isinstance(map, ExtensionMaps)

    if impl is Impl.REFERENCE:
        return lambda x: rope_reference(x, full, cfg.mode)
    if impl is Impl.REFERENCE_ND:
        return lambda x: rope_reference_nd(x, prep.tables.per_axis, cfg.dims, cfg.mode)
    if impl in (Impl.ROME_GATHER, Impl.ROME_MATMUL):
        path = "gather" if impl is Impl.ROME_GATHER else "matmul"
        if ext:
            return lambda x: rome_ext_forward(x, full, map, path=path)
        return lambda x: rome_forward(x, full, map, path=path)
    if impl is Impl.ROME_FUSED:
        return lambda x: fused_rome(x, full, map)
    if impl is Impl.ROME_PIPELINED:
        pipeline = cfg.pipeline
        return lambda x: pipelined_rome(x, full, map, pipeline)
    if impl is Impl.DENSE_ORACLE:
        return lambda x: oracle_forward(x, full.theta, map, tile_rows=cfg.oracle_tile_rows)
    raise ValueError(f"no arm for {impl!r}")


def build_arms(cfg: BenchConfig) -> dict[str, Forward]:
    """Arm name -> forward, baseline first."""
    arms: dict[str, Forward] = {}
    for impl in cfg.impls:
        if cfg.include_setup:
            arms[impl.value] = lambda x, impl=impl: arm(impl, cfg, prepare(cfg, cached=False))(x)
        else:
            arms[impl.value] = arm(impl, cfg, prepare(cfg))
    if cfg.ablation:
        tables = prepare(cfg).tables
        for v in variants(cfg.mode, len(cfg.dims)):
            arms[v.label] = lambda x, v=v: ablation_forward(x, tables, cfg.mode, v)
    return arms


def make_input(cfg: BenchConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(-1.0, 1.0, size=cfg.shape).astype(cfg.precision.dtype)


def check_equivalence(name: str, out: np.ndarray, expected: np.ndarray, tol: float) -> float:
    """Largest |out - expected|; raises EquivalenceError past tol. NaN counts as a failure."""
    delta = np.abs(np.asarray(out, dtype=np.float64) - expected)
    bad = ~(delta <= tol)
    if bad.any():
        flat = int(np.flatnonzero(bad)[0])
        index = tuple(int(i) for i in np.unravel_index(flat, delta.shape))
        raise EquivalenceError(name, float(np.where(np.isnan(delta), np.inf, delta).max()), index, tol)
    return float(delta.max(initial=0.0))


def _calibrate(fn: Forward, x: np.ndarray) -> int:
    floor = MIN_TICKS_PER_SAMPLE * time.get_clock_info("perf_counter").resolution
    repeats = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(x)
        if time.perf_counter() - t0 >= floor:
            return repeats
        repeats *= 2


def time_arm(fn: Forward, x: np.ndarray, iters: int, warmup: int) -> tuple[list[float], int]:
    """Per-call milliseconds for iters samples, after warmup untimed calls."""
    for _ in range(warmup):
        fn(x)
    repeats = _calibrate(fn, x)
    if repeats > 1:
        logger.warning("Call is near timer resolution; timing %d calls per sample", repeats)
    samples = []
    for _ in range(iters):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(x)
        samples.append((time.perf_counter() - t0) * 1e3 / repeats)
    return samples, repeats


def run_bench(cfg: BenchConfig) -> BenchReport:
    x = make_input(cfg)
    arms = build_arms(cfg)
    prep = prepare(cfg)

    if cfg.check:
        tol = TOLERANCE[cfg.precision]
        expected = oracle_forward(x, prep.tables.full.theta, prep.map, tile_rows=cfg.oracle_tile_rows)
        for name, fn in arms.items():
            if name == Impl.DENSE_ORACLE.value:
                continue
            worst = check_equivalence(name, fn(x), expected, tol)
            logger.info("%s matches the oracle (max |delta| %.3e)", name, worst)
        del expected

    B, N, S, D = cfg.shape
    timings: dict[str, tuple[list[float], int]] = {}
    for name, fn in arms.items():
        samples, repeats = time_arm(fn, x, cfg.iters, cfg.warmup)
        timings[name] = samples, repeats
        logger.info("Timed %s: mean %.3f ms over %d iters (x%d)", name, statistics.fmean(samples), cfg.iters, repeats)

    t0 = statistics.fmean(timings[cfg.baseline.value][0])
    rows = []
    for name, (samples, repeats) in timings.items():
        mean = statistics.fmean(samples)
        times, pct = speedup(t0, mean)
        rows.append(BenchRow(
            impl=name,
            mode=cfg.mode.value,
            dims=cfg.dims,
            B=B, N=N, S=S, D=D,
            precision=cfg.precision.value,
            iters=cfg.iters,
            mean_ms=mean,
            median_ms=statistics.median(samples),
            stddev_ms=statistics.stdev(samples) if len(samples) > 1 else 0.0,
            speedup_times=times,
            speedup_pct=pct,
            repeats=repeats,
        ))

    env = EnvInfo(
        host=platform.node(),
        platform=platform.platform(),
        python=platform.python_version(),
        numpy=np.__version__,
        precision=cfg.precision.value,
        seed=cfg.seed,
        grid=prep.tables.grid,
        include_setup=cfg.include_setup,
        checked=cfg.check,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    return BenchReport(rows=rows, env=env)


def summarize(report: BenchReport) -> str:
    best = max(report.rows[1:], key=lambda r: r.speedup_times, default=None)
    if best is None:
        return f"{report.baseline.impl}: {report.baseline.mean_ms:.3f} ms"
    return f"fastest: {best.impl} at {best.speedup_times:.2f}x over {report.baseline.impl}"
