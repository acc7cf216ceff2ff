"""Command-line interface: ``runsched <subcommand> ...``.

Exit codes: 0 success, 1 infeasible schedule / deadline miss / invalid trace,
2 usage or input errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction

from .experiments import (ExperimentConfig, default_n_values, default_seed, full_scale,
                          run_batch, level_histogram, preemption_summary, write_csv)
from .generator import generate_taskset, seed_sequence
from .model import TaskSystem
from .reduction import HEURISTICS, build_forest
from .scheduler import Simulation, default_horizon
from .taskfile import TaskFileError, dump_taskset, load_taskset
from .trace import ScheduleTrace, fmt
from .validation import check_counts, check_duality, check_trace, count_preemptions


class UsageError(Exception):
    pass


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _rational(s: str) -> Fraction:
    try:
        x = Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}")
    if x <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def cmd_schedule(args) -> int:
    system = load_taskset(args.taskfile)
    if args.procs is not None and args.procs != system.processors:
        raise UsageError(f"--procs {args.procs} disagrees with the file ({system.processors})")
    forest = build_forest(system, args.heuristic)
    horizon = args.horizon if args.horizon is not None else default_horizon(system, args.cap)
    sim = Simulation(forest, system.processors, horizon=horizon)
    trace = sim.run(horizon)
    report = check_trace(system, trace)
    stats = count_preemptions(trace)
    dual = check_duality(forest, trace)
    lines = [
        f"tasks={len(system.tasks)} dummies={len(system.dummies)} processors={system.processors}",
        f"reduction levels={forest.max_level} roots={len(forest.roots)}",
        f"horizon={fmt(horizon)} events={sim.events}",
        f"jobs={stats.jobs_completed} preemptions={stats.preemption_points} "
        f"avg_preempt={float(stats.average):.4f} migrations={stats.migrations}",
        f"misses={len(trace.misses)} duality_violations={len(dual)}",
        report.summary(),
    ]
    _write(args.out, "\n".join(lines) + "\n")
    if args.trace_out:
        trace.write(args.trace_out)
    if args.svg_out:
        _write(args.svg_out, trace.to_svg())
    if args.dump_tree:
        sys.stdout.write(forest.dump())
    return 0 if report.feasible and not trace.misses and not dual else 1


def cmd_verify(args) -> int:
    try:
        trace = ScheduleTrace.read(args.tracefile)
    except ValueError as e:
        print(f"malformed trace: {e}", file=sys.stderr)
        return 1
    if args.tasks:
        system = load_taskset(args.tasks)
    elif trace.tasks:
        m = trace.processors.get(0)
        if m is None:
            raise UsageError("trace has no level-0 processor count")
        system = TaskSystem([t for t in trace.tasks if not t.dummy], m,
                            [t for t in trace.tasks if t.dummy])
    else:
        raise UsageError("trace carries no task list; pass --tasks")
    report = check_trace(system, trace, horizon=args.horizon)
    extra = []
    if len(trace.processors) > 1 and system.fully_utilized:
        forest = build_forest(system, args.heuristic)
        extra = check_duality(forest, trace) + check_counts(trace)
    lines = [report.summary()]
    for rule, t, ids in extra[:50]:
        lines.append(f"  {rule} at {t}: {ids}")
    if extra:
        lines.append(f"multi-level violations={len(extra)}")
    _write(args.out, "\n".join(lines) + "\n")
    return 0 if report.valid and report.feasible and not extra else 1


def cmd_reduce(args) -> int:
    system = load_taskset(args.taskfile)
    forest = build_forest(system, args.heuristic)
    if args.dump_tree:
        text = forest.dump()
    else:
        lines = [f"levels={forest.max_level} roots={len(forest.roots)}"]
        for s in forest.steps:
            lines.append(f"psi^{s.level}: " + " ".join(fmt(u) for u in s.row("servers")))
            lines.append(f"pack(psi^{s.level}): " + " ".join(fmt(u) for u in s.row("packed")))
        lines.append("root levels: " + " ".join(str(lv) for lv in forest.levels))
        text = "\n".join(lines) + "\n"
    _write(args.out, text)
    return 0


def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.n < args.procs:
        raise UsageError("--n must be at least --procs")
    rng_seed = seed_sequence(seed, args.n, args.index)
    system = generate_taskset(args.n, args.procs, tuple(args.periods), seed=rng_seed)
    _write(args.out, dump_taskset(system, include_dummies=args.dummies))
    return 0


def cmd_experiment(args) -> int:
    m = args.procs
    n_values = args.n_values or default_n_values(m)
    config = ExperimentConfig(
        m=m, n_values=n_values, sets_per_n=args.sets,
        period_range=tuple(args.periods),
        seed=args.seed if args.seed is not None else default_seed(),
        horizon_cap=int(args.horizon) if args.horizon is not None else 5000,
        heuristic=args.heuristic, workers=args.workers, out=args.out)
    if args.full:
        config = full_scale(config)
    simulate = args.kind == "preemptions"
    t0 = time.time()
    rows = run_batch(config, simulate=simulate)
    if config.out:
        write_csv(rows, config.out)
    out = sys.stdout
    if args.kind == "levels":
        for n, h in level_histogram(rows).items():
            out.write(f"n={n} " + " ".join(f"{lv}:{float(f):.3f}" for lv, f in h.items()) + "\n")
    else:
        for n, s in preemption_summary(rows).items():
            out.write(f"n={n} " + " ".join(f"{k}={v:.3f}" for k, v in s.items()) + "\n")
    misses = sum(r.misses for r in rows)
    out.write(f"sets={len(rows)} misses={misses} seconds={time.time() - t0:.1f}\n")
    return 1 if misses else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="runsched",
                                description="Reduce and schedule fully utilized periodic task sets.")
    sub = p.add_subparsers(dest="command", required=True)
    heur = dict(choices=sorted(HEURISTICS), default="wfd", help="packing heuristic (default wfd)")

    s = sub.add_parser("schedule", help="simulate a task-set file")
    s.add_argument("taskfile")
    s.add_argument("--horizon", type=_rational, help="simulation end (default: hyperperiod, capped)")
    s.add_argument("--cap", type=_rational, default=Fraction(5000), help="horizon cap (default 5000)")
    s.add_argument("--procs", type=int)
    s.add_argument("--heuristic", **heur)
    s.add_argument("--out", help="report file (default stdout)")
    s.add_argument("--trace-out", help="write the trace as text")
    s.add_argument("--svg-out", help="write an SVG Gantt chart")
    s.add_argument("--dump-tree", action="store_true", help="also print the reduction tree")
    s.set_defaults(func=cmd_schedule)

    v = sub.add_parser("verify", help="check a trace file")
    v.add_argument("tracefile")
    v.add_argument("--tasks", help="task-set file (default: task list embedded in the trace)")
    v.add_argument("--horizon", type=_rational)
    v.add_argument("--heuristic", **heur)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("reduce", help="show the reduction of a task-set file")
    r.add_argument("taskfile")
    r.add_argument("--heuristic", **heur)
    r.add_argument("--dump-tree", action="store_true")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reduce)

    g = sub.add_parser("generate", help="emit a random task-set file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--procs", type=int, default=16)
    g.add_argument("--seed", type=int)
    g.add_argument("--index", type=int, default=0, help="set index mixed into the seed")
    g.add_argument("--periods", type=int, nargs=2, default=[5, 100], metavar=("LO", "HI"))
    g.add_argument("--dummies", action="store_true", help="include the padding tasks")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("experiment", help="run a batch experiment")
    e.add_argument("kind", choices=["levels", "preemptions"])
    e.add_argument("--procs", type=int, default=16)
    e.add_argument("--sets", type=int, default=100, help="sets per n (default 100)")
    e.add_argument("--full", action="store_true", help="1000 sets per n")
    e.add_argument("--n-values", type=int, nargs="+")
    e.add_argument("--periods", type=int, nargs=2, default=[5, 100], metavar=("LO", "HI"))
    e.add_argument("--seed", type=int)
    e.add_argument("--horizon", type=_rational, help="horizon cap (default 5000)")
    e.add_argument("--heuristic", **heur)
    e.add_argument("--workers", type=int)
    e.add_argument("--out", help="CSV output path")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, TaskFileError, OSError) as e:
        print(f"runsched: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"runsched: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
