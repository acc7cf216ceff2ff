"""Batch experiments: reduction levels and preemptions per job on random sets."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .generator import generate_taskset, seed_sequence
from .reduction import build_forest
from .scheduler import Simulation
from .validation import count_preemptions

CSV_HEADER = ["n", "set", "levels", "jobs", "preemptions", "avg_preempt", "migrations", "misses"]
SEED_ENV = "RUNSCHED_SEED"
DEFAULT_SEED = 2014


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, DEFAULT_SEED))


def default_n_values(m: int = 16) -> list[int]:
    """m+1, m+2, then even steps up to 4m (17, 18, 20, ..., 64 for m=16)."""
    return [m + 1] + list(range(m + 2, 4 * m + 1, 2))


@dataclass
class ExperimentConfig:
    m: int = 16
    n_values: list = field(default_factory=lambda: default_n_values(16))
    sets_per_n: int = 100
    period_range: tuple = (5, 100)
    seed: int = field(default_factory=default_seed)
    horizon_cap: int = 5000
    heuristic: str = "wfd"
    workers: Optional[int] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        lo, hi = self.period_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad period range {self.period_range}")
        for n in self.n_values:
            if n < self.m:
                raise ValueError(f"n={n} is below m={self.m}")


@dataclass
class MetricsRow:
    n: int
    set: int
    levels: int
    jobs: int = 0
    preemptions: int = 0
    avg_preempt: Fraction = Fraction(0)
    migrations: int = 0
    misses: int = 0

    def as_csv(self) -> list:
        return [self.n, self.set, self.levels, self.jobs, self.preemptions,
                f"{float(self.avg_preempt):.6f}", self.migrations, self.misses]


def make_taskset(config: ExperimentConfig, n: int, index: int):
    rng = np.random.default_rng(seed_sequence(config.seed, n, index))
    return generate_taskset(n, config.m, config.period_range, rng=rng,
                            dummy_period_cap=config.horizon_cap)


def evaluate(config: ExperimentConfig, n: int, index: int, simulate: bool = True) -> MetricsRow:
    """Generate, reduce and (optionally) simulate one task set."""
    system = make_taskset(config, n, index)
    forest = build_forest(system, config.heuristic)
    row = MetricsRow(n, index, forest.max_level)
    if not simulate:
        return row
    horizon = min(system.hyperperiod(), Fraction(config.horizon_cap))
    sim = Simulation(forest, system.processors, horizon=horizon)
    trace = sim.run(horizon)
    stats = count_preemptions(trace)
    row.jobs = stats.jobs_completed
    row.preemptions = stats.preemption_points
    row.avg_preempt = stats.average
    row.migrations = stats.migrations
    row.misses = len(trace.misses)
    return row


def _chunk(args):
    config, jobs, simulate = args
    return [evaluate(config, n, i, simulate) for n, i in jobs]


def run_batch(config: ExperimentConfig, simulate: bool = True, progress=None) -> list[MetricsRow]:
    """Evaluate every (n, set) pair, fanning out over worker processes.

    Rows come back in (n, set) order whatever the worker count.
    """
    jobs = [(n, i) for n in config.n_values for i in range(config.sets_per_n)]
    workers = config.workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) < 2:
        rows = []
        for k, (n, i) in enumerate(jobs):
            rows.append(evaluate(config, n, i, simulate))
            if progress:
                progress(k + 1, len(jobs))
    else:
        size = max(1, len(jobs) // (workers * 8))
        chunks = [(config, jobs[k:k + size], simulate) for k in range(0, len(jobs), size)]
        rows = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_chunk, chunks):
                rows.extend(part)
                if progress:
                    progress(len(rows), len(jobs))
    rows.sort(key=lambda r: (r.n, r.set))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def read_csv(path) -> list[MetricsRow]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(MetricsRow(int(rec["n"]), int(rec["set"]), int(rec["levels"]),
                                  int(rec["jobs"]), int(rec["preemptions"]),
                                  Fraction(rec["avg_preempt"]), int(rec["migrations"]),
                                  int(rec["misses"])))
    return out


def level_histogram(rows) -> dict:
    """Per n: fraction of sets needing each number of reduction levels."""
    out: dict = {}
    for r in rows:
        out.setdefault(r.n, {}).setdefault(r.levels, 0)
        out[r.n][r.levels] += 1
    for n, counts in out.items():
        total = sum(counts.values())
        out[n] = {lv: Fraction(c, total) for lv, c in sorted(counts.items())}
    return out


def preemption_summary(rows) -> dict:
    """Per n: min, quartiles and max of the per-set average preemptions."""
    per_n: dict = {}
    for r in rows:
        per_n.setdefault(r.n, []).append(float(r.avg_preempt))
    out = {}
    for n, vals in sorted(per_n.items()):
        q = np.percentile(vals, [0, 25, 50, 75, 100])
        out[n] = dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))
    return out


def run_levels_experiment(config: ExperimentConfig, rows=None) -> dict:
    """Histogram of reduction levels per n (reduction only, no simulation)."""
    if rows is None:
        rows = run_batch(config, simulate=False)
    if config.out:
        write_csv(rows, config.out)
    return level_histogram(rows)


class OptimalityViolation(RuntimeError):
    pass


def run_preemption_experiment(config: ExperimentConfig, rows=None) -> dict:
    """Simulate every set and summarize average preemptions per job per n.

    Any deadline miss aborts: it would contradict optimality.
    """
    if rows is None:
        rows = run_batch(config, simulate=True)
    if config.out:
        write_csv(rows, config.out)
    bad = [r for r in rows if r.misses]
    if bad:
        r = bad[0]
        raise OptimalityViolation(f"{len(bad)} sets missed deadlines, first: n={r.n} set={r.set}")
    return preemption_summary(rows)


def full_scale(config: ExperimentConfig) -> ExperimentConfig:
    """The 1000-sets-per-n batch."""
    return replace(config, sets_per_n=1000)
