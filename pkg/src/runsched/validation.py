"""Trace checking, preemption accounting and a brute-force feasibility oracle."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional, Sequence

from .model import Task, TaskSystem, hyperperiod
from .trace import ScheduleTrace

# rules that make a trace invalid (as opposed to merely infeasible)
VALIDITY_RULES = ("interval", "processor", "unknown-task", "overlap", "parallel",
                  "inactive", "overrun")


@dataclass
class ValidityReport:
    valid: bool
    feasible: bool
    violations: list = field(default_factory=list)  # (rule, instant, ids)
    ledger: dict = field(default_factory=dict)  # (task id, job index) -> executed time

    def summary(self) -> str:
        head = f"valid={self.valid} feasible={self.feasible} violations={len(self.violations)}"
        lines = [head]
        for rule, t, ids in self.violations[:50]:
            lines.append(f"  {rule} at {t}: {ids}")
        if len(self.violations) > 50:
            lines.append(f"  ... {len(self.violations) - 50} more")
        return "\n".join(lines)


@dataclass
class PreemptionStats:
    preemption_points: int
    migrations: int
    jobs_completed: int
    per_job: dict = field(default_factory=dict)  # (task, job) -> preemptions

    @property
    def average(self) -> Fraction:
        if self.jobs_completed == 0:
            return Fraction(0)
        return Fraction(self.preemption_points, self.jobs_completed)

    @property
    def max_per_job(self) -> int:
        return max(self.per_job.values(), default=0)


def _scale_for(tasks: Iterable[Task], base: int) -> int:
    k = base
    for t in tasks:
        for x in (t.period, t.start, t.wcet):
            k = math.lcm(k, x.denominator)
    return k


def _job_pieces(task: Task, a: int, b: int, S: int, T=None, s0=None):
    """Split [a, b) (scaled) at the task's release instants -> (job index, a, b)."""
    if T is None:
        T = int(task.period * S)
        s0 = int(task.start * S)
    if s0 <= a and b <= s0 + ((a - s0) // T + 1) * T:
        return [((a - s0) // T, a, b)]
    out = []
    while a < b:
        if a < s0:
            # before the first release: attributed to job -1 (always inactive)
            cut = min(b, s0)
            out.append((-1, a, cut))
            a = cut
            continue
        k = (a - s0) // T
        cut = min(b, s0 + (k + 1) * T)
        out.append((k, a, cut))
        a = cut
    return out


def check_trace(system, trace: ScheduleTrace, horizon=None) -> ValidityReport:
    """Check a level-0 trace against the task system.

    ``system`` may be a :class:`TaskSystem` or a list of tasks (the processor
    count then comes from the trace).  Jobs due at or before the horizon
    must have received exactly their requirement.  Records must lie inside
    the trace's own ``[0, horizon]``.
    """
    if isinstance(system, TaskSystem):
        tasks, m = system.all_tasks, system.processors
    else:
        tasks, m = list(system), trace.processors.get(0, 0)
    S = _scale_for(tasks, trace.scale)
    f = S // trace.scale
    end = trace.horizon * f
    H = end if horizon is None else int(Fraction(horizon) * S)
    by_id = {t.id: t for t in tasks}
    viol = []
    at = lambda x: Fraction(x, S)

    recs = []
    for lv, p, k, a, b in trace.records:
        if lv != 0:
            continue
        a, b = a * f, b * f
        if not 0 <= a < b <= end:
            viol.append(("interval", at(a), (p, k)))
            continue
        if not 0 <= p < m:
            viol.append(("processor", at(a), (p, k)))
            continue
        if k not in by_id:
            viol.append(("unknown-task", at(a), (k,)))
            continue
        recs.append((p, k, a, b))

    # (i) a processor runs one job at a time
    per_proc = defaultdict(list)
    for p, k, a, b in recs:
        per_proc[p].append((a, b, k))
    for p, lst in per_proc.items():
        lst.sort()
        for (a1, b1, k1), (a2, b2, k2) in zip(lst, lst[1:]):
            if a2 < b1:
                viol.append(("overlap", at(a2), (p, k1, k2)))

    # (ii) a job never runs on two processors at once
    per_task = defaultdict(list)
    for p, k, a, b in recs:
        per_task[k].append((a, b, p))
    for k, lst in per_task.items():
        lst.sort()
        for (a1, b1, p1), (a2, b2, p2) in zip(lst, lst[1:]):
            if a2 < b1:
                viol.append(("parallel", at(a2), (k, p1, p2)))

    # (iii) execution only while the job is released and unfinished
    ledger = defaultdict(int)
    for k, lst in per_task.items():
        task = by_id[k]
        need = int(task.wcet * S)
        for a, b, p in lst:
            for j, x, y in _job_pieces(task, a, b, S):
                if j < 0:
                    viol.append(("inactive", at(x), (k,)))
                    continue
                ledger[(k, j)] += y - x
                if ledger[(k, j)] > need:
                    viol.append(("overrun", at(y), (k, j)))

    # deadlines and exact conservation for every job due by the horizon
    for task in tasks:
        need = int(task.wcet * S)
        T = int(task.period * S)
        s0 = int(task.start * S)
        if H < s0 + T:
            continue
        for j in range((H - s0) // T):
            got = ledger.get((task.id, j), 0)
            if got != need:
                viol.append(("miss", at(s0 + (j + 1) * T), (task.id, j, at(need - got))))

    valid = not any(v[0] in VALIDITY_RULES for v in viol)
    feasible = valid and not any(v[0] == "miss" for v in viol)
    return ValidityReport(valid, feasible, viol, {key: at(v) for key, v in ledger.items()})


def count_preemptions(trace: ScheduleTrace, tasks: Optional[Sequence[Task]] = None,
                      horizon=None) -> PreemptionStats:
    """Preemption points and migrations of the level-0 trace.

    A preemption point is the end of an execution block of a job that has
    not finished yet; abutting pieces (even on different processors) form one
    block.  Only non-dummy jobs due by the horizon are counted.
    """
    tasks = list(trace.tasks if tasks is None else tasks)
    S = _scale_for(tasks, trace.scale)
    f = S // trace.scale
    H = trace.horizon * f if horizon is None else int(Fraction(horizon) * S)
    by_id = {t.id: t for t in tasks}
    pieces = defaultdict(list)  # (task, job) -> [(a, b, p)]
    grid = {t.id: (int(t.period * S), int(t.start * S)) for t in tasks}
    for lv, p, k, a, b in trace.records:
        if lv != 0 or k not in by_id or by_id[k].dummy:
            continue
        T, s0 = grid[k]
        for j, x, y in _job_pieces(by_id[k], a * f, b * f, S, T, s0):
            pieces[(k, j)].append((x, y, p))
    points = migrations = jobs = 0
    per_job = {}
    for task in tasks:
        if task.dummy:
            continue
        T = int(task.period * S)
        s0 = int(task.start * S)
        need = int(task.wcet * S)
        if H < s0 + T:
            continue
        for j in range((H - s0) // T):
            lst = sorted(pieces.get((task.id, j), ()))
            jobs += 1
            done = 0
            count = 0
            for idx, (a, b, p) in enumerate(lst):
                done += b - a
                nxt = lst[idx + 1] if idx + 1 < len(lst) else None
                if nxt is not None and nxt[2] != p:
                    migrations += 1
                if nxt is not None and nxt[0] == b:
                    continue  # block continues without a gap
                if done < need:
                    count += 1
            per_job[(task.id, j)] = count
            points += count
    return PreemptionStats(points, migrations, jobs, per_job)


# --- multi-level checks -----------------------------------------------------------


def timeline(trace: ScheduleTrace):
    """Elementary intervals with the set of executing labels per level."""
    cuts = sorted({x for r in trace.records for x in (r[3], r[4])})
    if not cuts:
        return []
    starts = defaultdict(list)
    ends = defaultdict(list)
    for lv, p, k, a, b in trace.records:
        starts[a].append((lv, k))
        ends[b].append((lv, k))
    running = defaultdict(lambda: defaultdict(int))
    out = []
    for t1, t2 in zip(cuts, cuts[1:]):
        for lv, k in ends.get(t1, ()):
            running[lv][k] -= 1
        for lv, k in starts.get(t1, ()):
            running[lv][k] += 1
        snap = {lv: {k for k, c in d.items() if c > 0} for lv, d in running.items()}
        out.append((t1, t2, snap))
    return out


def check_duality(forest, trace: ScheduleTrace) -> list:
    """Every dual node runs exactly when its child server does not.

    The child server counts as running when one of its clients is drawn in
    the trace at the level below.
    """
    from .servers import DUAL, TASK

    edges = []
    for n in forest.nodes:
        if n.kind != DUAL:
            continue
        server = n.child
        below = [c.task.id if c.kind == TASK else c.id for c in server.children]
        edges.append((n.id, n.level, below))
    viol = []
    for t1, t2, snap in timeline(trace):
        for d, lv, below in edges:
            up = d in snap.get(lv, ())
            down = any(c in snap.get(lv - 1, ()) for c in below)
            if up == down:
                viol.append(("duality", Fraction(t1, trace.scale), (d, up, down)))
    return viol


def check_counts(trace: ScheduleTrace) -> list:
    """Each level keeps all of its (virtual) processors busy."""
    viol = []
    for t1, t2, snap in timeline(trace):
        for lv, c in trace.processors.items():
            got = len(snap.get(lv, ()))
            if got != c:
                viol.append(("count", Fraction(t1, trace.scale), (lv, got, c)))
    return viol


# --- brute-force oracle ------------------------------------------------------------


def brute_force_feasible(system, quantum=1, max_tasks=5, max_processors=2, cap=60) -> bool:
    """Exhaustive search for a quantized schedule meeting every deadline.

    Searches one hyperperiod slot by slot; with integer parameters (in units
    of ``quantum``) the answer is exact.  Only work-conserving choices are
    explored, which loses nothing: idling while work is pending can always be
    swapped for running that work earlier.
    """
    if isinstance(system, TaskSystem):
        tasks, m = system.all_tasks, system.processors
    else:
        tasks, m = system
        tasks = list(tasks)
    q = Fraction(quantum)
    if len(tasks) > max_tasks or m > max_processors:
        raise ValueError(f"instance too large for the oracle ({len(tasks)} tasks, {m} processors)")
    periods, wcets, starts = [], [], []
    for t in tasks:
        for x in (t.period / q, t.wcet / q, t.start / q):
            if x.denominator != 1:
                raise ValueError(f"task {t.id} parameters are not multiples of the quantum")
        periods.append(int(t.period / q))
        wcets.append(int(t.wcet / q))
        starts.append(int(t.start / q))
    H = int(hyperperiod(tasks) / q) + max(starts, default=0)
    if H > cap:
        raise ValueError(f"hyperperiod {H} exceeds the oracle cap {cap}")
    n = len(tasks)
    if any(c > p for c, p in zip(wcets, periods)):
        return False

    def deadline_left(i, s):
        # slots until the current job's deadline
        if s < starts[i]:
            return 0
        return periods[i] - (s - starts[i]) % periods[i]

    failed = set()

    def search(s, rem):
        if s == H:
            return all(r == 0 or (H - starts[i]) % periods[i] != 0 for i, r in enumerate(rem))
        # releases at slot s
        rem = list(rem)
        for i in range(n):
            if s >= starts[i] and (s - starts[i]) % periods[i] == 0:
                if rem[i] > 0:
                    return False
                rem[i] = wcets[i]
        state = (s, tuple(rem))
        if state in failed:
            return False
        for i in range(n):
            if rem[i] > deadline_left(i, s):
                failed.add(state)
                return False
        active = [i for i in range(n) if rem[i] > 0]
        k = min(m, len(active))
        active.sort(key=lambda i: (deadline_left(i, s), i))
        for chosen in combinations(active, k):
            nxt = list(rem)
            for i in chosen:
                nxt[i] -= 1
            if search(s + 1, nxt):
                return True
        failed.add(state)
        return False

    return search(0, tuple([0] * n))
