"""On-line scheduling of a reduction forest.

Every root is a unit server holding its own (virtual) processor.  A granted
pack node runs its earliest-deadline client, a dual node runs exactly when its
child does not, and the leaves selected this way are the tasks executing on the
real processors.

:class:`Simulation` is the production engine.  Time is kept as integers in
units of ``1/scale`` where ``scale`` clears every denominator that can appear
(periods, starts and all node utilizations), so budgets ``mu * (d - t)`` and
job requirements are exact integers.  Budgets are consumed lazily, events
come from two heaps, and dispatch only revisits nodes whose state or grant
changed.  :func:`reference_run` replays the same rules with Fractions on the
node objects themselves and is used to cross-check the engine.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import servers as srv
from .model import TaskSystem, as_rational
from .reduction import ReductionForest, build_forest
from .servers import DUAL, PACK, TASK
from .trace import ScheduleTrace

LEAF, SERVER, DUALK = 0, 1, 2
_KIND = {TASK: LEAF, PACK: SERVER, DUAL: DUALK}


class DeadlineMiss(RuntimeError):
    def __init__(self, task_id, deadline, remaining):
        super().__init__(f"task {task_id} missed its deadline at {deadline} "
                         f"with {remaining} units left")
        self.task_id = task_id
        self.deadline = deadline
        self.remaining = remaining


@dataclass
class DispatchDecision:
    time: Fraction
    executing: dict  # level -> sorted labels (task ids at level 0, node ids above)

    def tasks(self) -> list:
        return self.executing.get(0, [])


def _denominators_lcm(values) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, Fraction(v).denominator)
    return out


def time_scale(forest: ReductionForest, extra=()) -> int:
    """Integer time scale making every event instant and budget integral."""
    tasks = [n.task for n in forest.leaves]
    l0 = _denominators_lcm([t.period for t in tasks] + [t.start for t in tasks] + list(extra))
    lu = _denominators_lcm(n.utilization for n in forest.nodes)
    return l0 * lu


class Simulation:
    """Integer-time event-driven engine over a :class:`ReductionForest`.

    ``processors`` is the physical processor count; it defaults to the number
    of roots' total utilization.  With ``strict=True`` a deadline miss raises
    :class:`DeadlineMiss`; otherwise misses are collected in ``misses``.
    """

    def __init__(self, forest: ReductionForest, processors: Optional[int] = None,
                 horizon=None, strict=False, record=True, lazy=False):
        self.forest = forest
        nodes = forest.nodes
        n = len(nodes)
        self.n = n
        extra = [as_rational(horizon)] if horizon is not None else []
        S = self.scale = time_scale(forest, extra)
        self.strict = strict
        self.recording = record

        self.kind = [_KIND[x.kind] for x in nodes]
        self.parent = [-1 if x.parent is None else x.parent.id for x in nodes]
        self.children = [[c.id for c in x.children] for x in nodes]
        self.size = [0] * n
        for i in range(n - 1, -1, -1):
            self.size[i] = 1 + sum(self.size[c] for c in self.children[i])
        self.key = [x.key for x in nodes]
        self.label = [x.task.id if x.kind == TASK else x.id for x in nodes]
        self.dedicated = [getattr(x, "dedicated", False) for x in nodes]
        self.unum = [x.utilization.numerator for x in nodes]
        self.uden = [x.utilization.denominator for x in nodes]
        # deadline rule per server; see servers.server_deadline
        self.lazy = [x.kind == TASK or lazy or (x.parent is None and not self.dedicated[x.id])
                     for x in nodes]
        self.roots = [r.id for r in forest.roots]
        self.is_root = [False] * n
        for r in self.roots:
            self.is_root[r] = True
        # trace level of each recorded node (None: not drawn)
        self.lvl = [0 if x.kind == TASK else (x.level if x.kind == DUAL else None) for x in nodes]
        self.period = [0] * n
        self.start = [0] * n
        self.wcet = [0] * n
        self.task_of = [None] * n
        for x in nodes:
            if x.kind == TASK:
                t = x.task
                self.task_of[x.id] = t
                self.period[x.id] = int(t.period * S)
                self.start[x.id] = int(t.start * S)
                self.wcet[x.id] = int(t.utilization * t.period * S)

        levels = sorted({v for v in self.lvl if v is not None})
        self.nprocs = {}
        for lv in levels:
            self.nprocs[lv] = forest.virtual_processors(lv)
        if processors is not None:
            if processors < self.nprocs.get(0, 0):
                raise ValueError(f"{processors} processors cannot host utilization {self.nprocs[0]}")
            self.nprocs[0] = processors

        # dynamic state
        self.t = 0
        self.dl = [0] * n
        self.amt = [0] * n  # budget (servers) or remaining work (leaves) as of `since`
        self.since = [0] * n
        self.ex = [False] * n
        self.gr = list(self.is_root)
        self.pick = [-1] * n
        self.ver = [0] * n
        self.jobno = [-1] * n
        for i in range(n):
            if self.kind[i] == LEAF:
                self.dl[i] = self.start[i]
        self.due: dict[int, list] = {}
        self.dheap: list[int] = []
        self.xheap: list = []
        self.dirty: list[int] = []
        self.isdirty = [False] * n
        self.changed: list[int] = []
        self.cache: dict = {}
        for i in range(n):
            self._push_due(i)

        # recording
        self.proc = [-1] * n
        self.opened = [0] * n
        self.free = {lv: list(range(c)) for lv, c in self.nprocs.items()}
        self.records: list = []
        self.misses: list = []
        self.leftover: list = []
        self.events = 0
        self.lookaheads = 0

    # --- helpers -------------------------------------------------------------

    def _push_due(self, i):
        d = self.dl[i]
        lst = self.due.get(d)
        if lst is None:
            self.due[d] = [i]
            heapq.heappush(self.dheap, d)
        else:
            lst.append(i)

    def _amount(self, i, t):
        if self.ex[i]:
            return self.amt[i] - (t - self.since[i])
        return self.amt[i]

    def _active(self, i, t):
        if self.kind[i] != LEAF and self.dedicated[i]:
            return True
        return self._amount(i, t) > 0

    def _mark(self, i):
        if i >= 0 and not self.isdirty[i]:
            self.isdirty[i] = True
            heapq.heappush(self.dirty, i)

    def _set_amount(self, i, value, t):
        """Replace the budget/remaining work; re-arm the exhaustion timer."""
        self.amt[i] = value
        if self.ex[i]:
            self.since[i] = t
            self.ver[i] += 1
            if not self.dedicated[i]:
                heapq.heappush(self.xheap, (t + value, i, self.ver[i]))

    # --- deadline assignment ---------------------------------------------------

    def _pending(self, c, t):
        if self.kind[c] == LEAF:
            if self._amount(c, t) > 0:
                return self.dl[c]
            return self.dl[c] + self.period[c]
        if self._active(c, t):
            return self.dl[c]
        return self._lookahead(c, t)

    def _pack_deadline(self, i, t):
        if self.lazy[i]:
            return min(self._pending(c, t) for c in self.children[i])
        return min(self.dl[c] for c in self.children[i])

    def _lookahead(self, c, t):
        key = (c, self.dl[c])
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        self.lookaheads += 1
        end = self.dl[c]
        S = self.children[c][0] if self.kind[c] == DUALK else -1
        if S >= 0 and all(self.kind[x] == LEAF for x in self.children[S]):
            value = self._lookahead_leaves(S, t, end)
        else:
            sub = self._fork(c, t)
            sub._advance(end)
            sub._settle_at(end)
            value = sub.dl[c]
        self.cache[key] = value
        return value

    def _lookahead_leaves(self, S, t, end):
        """Deadline of the pack ``S`` at ``end`` when it runs alone until then.

        Its dual has no budget left, so ``S`` keeps the processor and runs
        plain EDF over its leaves on whatever budget it still has.
        """
        jobs = []
        for x in self.children[S]:
            jobs.append([self.dl[x], self.key[x], self._amount(x, t), self.period[x], self.wcet[x]])
        avail = end - t if self.dedicated[S] else self._amount(S, t)
        now = t
        while avail > 0 and now < end:
            nxt = end
            best = None
            for j in jobs:
                if j[0] < nxt:
                    nxt = j[0]
                if j[2] > 0 and (best is None or (j[0], j[1]) < (best[0], best[1])):
                    best = j
            # releases strictly inside the window
            if nxt <= now:
                for j in jobs:
                    if j[0] == now:
                        j[0] += j[3]
                        j[2] = j[4]
                continue
            if best is None:
                now = nxt
                continue
            run = min(best[2], nxt - now, avail)
            best[2] -= run
            avail -= run
            now += run
        for j in jobs:
            while j[0] < end:
                # skipped releases (no budget left): the job stays pending
                j[0] += j[3]
                j[2] = j[4]
        lam = None
        for d, _, left, T, _ in jobs:
            cand = d + T if d == end or left == 0 else d
            if lam is None or cand < lam:
                lam = cand
        return lam

    def _fork(self, c, t):
        """Copy of the subtree rooted at ``c`` with ``c`` permanently granted."""
        sub = object.__new__(Simulation)
        for name in ("forest", "n", "scale", "kind", "parent", "children", "size", "key",
                     "label", "dedicated", "unum", "uden", "roots", "lvl", "period", "start",
                     "wcet", "task_of", "nprocs", "lazy"):
            setattr(sub, name, getattr(self, name))
        sub.strict = False
        sub.recording = False
        sub.t = t
        for name in ("dl", "amt", "since", "ex", "gr", "pick", "ver", "jobno", "is_root"):
            setattr(sub, name, list(getattr(self, name)))
        sub.is_root[c] = True
        sub.gr[c] = True
        sub.due, sub.dheap, sub.xheap, sub.dirty = {}, [], [], []
        sub.isdirty = [False] * self.n
        sub.changed = []
        sub.cache = self.cache
        sub.misses, sub.leftover, sub.records = [], [], []
        sub.proc = [-1] * self.n
        sub.opened = [0] * self.n
        sub.free = {}
        sub.events = sub.lookaheads = 0
        for j in range(c, c + self.size[c]):
            sub._push_due(j)
            if sub.ex[j] and not sub.dedicated[j]:
                heapq.heappush(sub.xheap, (sub.since[j] + sub.amt[j], j, sub.ver[j]))
            sub._mark(j)
        sub._dispatch(t)
        return sub

    # --- event processing ----------------------------------------------------

    def _settle(self, i, t):
        k = self.kind[i]
        left = self._amount(i, t)
        if k == LEAF:
            if left > 0 and self.jobno[i] >= 0:
                task = self.task_of[i]
                miss = (task.id, Fraction(t, self.scale), Fraction(left, self.scale))
                self.misses.append(miss)
                if self.strict:
                    raise DeadlineMiss(*miss)
            self.jobno[i] += 1
            lam = t + self.period[i]
            self._set_amount(i, self.wcet[i], t)
        else:
            if left > 0 and not self.dedicated[i]:
                self.leftover.append((i, t, left))
            if k == DUALK:
                lam = self.dl[self.children[i][0]]
            else:
                lam = self._pack_deadline(i, t)
            if not self.dedicated[i]:
                self._set_amount(i, self.unum[i] * (lam - t) // self.uden[i], t)
        self.dl[i] = lam
        self._push_due(i)
        if self.proc[i] >= 0 and self.opened[i] < t:
            # split the record at the job boundary
            self._close(i, t)
            self.opened[i] = t
        self._mark(i)
        self._mark(self.parent[i])

    def _settle_at(self, t):
        if self.dheap and self.dheap[0] == t:
            heapq.heappop(self.dheap)
            due = self.due.pop(t)
            for i in sorted(set(due), reverse=True):
                if self.dl[i] == t:
                    self._settle(i, t)

    def _dispatch(self, t):
        dirty = self.dirty
        kind, gr, ex, amt, since = self.kind, self.gr, self.ex, self.amt, self.since
        unlimited, dl, key, isdirty = self.dedicated, self.dl, self.key, self.isdirty
        pop, push = heapq.heappop, heapq.heappush
        while dirty:
            i = pop(dirty)
            isdirty[i] = False
            g = gr[i]
            k = kind[i]
            if k == LEAF:
                new = g and (amt[i] - (t - since[i]) if ex[i] else amt[i]) > 0
            elif k == DUALK:
                new = g and (amt[i] - (t - since[i]) if ex[i] else amt[i]) > 0
                c = self.children[i][0]
                if gr[c] == new:
                    gr[c] = not new
                    if not isdirty[c]:
                        isdirty[c] = True
                        push(dirty, c)
            else:
                best = -1
                if g and (unlimited[i] or (amt[i] - (t - since[i]) if ex[i] else amt[i]) > 0):
                    bd = bk = None
                    for c in self.children[i]:
                        if unlimited[c] or (amt[c] - (t - since[c]) if ex[c] else amt[c]) > 0:
                            d = dl[c]
                            if best < 0 or d < bd or (d == bd and key[c] < bk):
                                best, bd, bk = c, d, key[c]
                new = best >= 0
                old = self.pick[i]
                if old != best:
                    if old >= 0:
                        gr[old] = False
                        self._mark(old)
                    if best >= 0:
                        gr[best] = True
                        self._mark(best)
                    self.pick[i] = best
            if new != ex[i]:
                if new:
                    since[i] = t
                    ex[i] = True
                    self.ver[i] += 1
                    if not unlimited[i]:
                        push(self.xheap, (t + amt[i], i, self.ver[i]))
                else:
                    amt[i] -= t - since[i]
                    ex[i] = False
                    self.ver[i] += 1
                self.changed.append(i)

    def _close(self, i, t):
        if self.recording and self.opened[i] < t:
            self.records.append((self.lvl[i], self.proc[i], self.label[i], self.opened[i], t))

    def _record(self, t):
        changed = self.changed
        if not changed:
            return
        self.changed = []
        if not self.recording:
            return
        started = []
        for i in set(changed):
            lv = self.lvl[i]
            if lv is None:
                continue
            if self.proc[i] >= 0 and not self.ex[i]:
                self._close(i, t)
                heapq.heappush(self.free[lv], self.proc[i])
                self.proc[i] = -1
            elif self.proc[i] < 0 and self.ex[i]:
                started.append(i)
        started.sort(key=lambda i: self.label[i])
        for i in started:
            free = self.free[self.lvl[i]]
            if not free:
                raise RuntimeError(f"more nodes selected at level {self.lvl[i]} than processors at t={Fraction(t, self.scale)}")
            self.proc[i] = heapq.heappop(free)
            self.opened[i] = t

    def _next_time(self):
        xh = self.xheap
        while xh and xh[0][2] != self.ver[xh[0][1]]:
            heapq.heappop(xh)
        best = xh[0][0] if xh else None
        if self.dheap and (best is None or self.dheap[0] < best):
            best = self.dheap[0]
        return best

    def _step(self, t):
        self.t = t
        self.events += 1
        xh = self.xheap
        while xh and xh[0][0] <= t:
            _, i, v = heapq.heappop(xh)
            if v == self.ver[i]:
                self._mark(i)
                self._mark(self.parent[i])
        self._settle_at(t)
        self._dispatch(t)
        self._record(t)

    def _advance(self, end):
        """Process every event strictly before ``end``."""
        while True:
            t = self._next_time()
            if t is None or t >= end:
                break
            self._step(t)
        self.t = end

    # --- public API ----------------------------------------------------------

    def run(self, horizon) -> ScheduleTrace:
        """Simulate over ``[0, horizon)`` and return the trace."""
        H = as_rational(horizon) * self.scale
        if H.denominator != 1:
            raise ValueError("horizon not representable at this time scale; pass it to the constructor")
        H = int(H)
        if H <= 0:
            raise ValueError("horizon must be positive")
        self._advance(H)
        # jobs due exactly at the horizon are still checked
        for i in range(self.n):
            if self.kind[i] == LEAF and self.dl[i] == H and self.jobno[i] >= 0:
                left = self._amount(i, H)
                if left > 0:
                    task = self.task_of[i]
                    miss = (task.id, Fraction(H, self.scale), Fraction(left, self.scale))
                    self.misses.append(miss)
                    if self.strict:
                        raise DeadlineMiss(*miss)
        for i in range(self.n):
            if self.proc[i] >= 0:
                self._close(i, H)
        self.records.sort(key=lambda r: (r[0], r[3], r[1]))
        return ScheduleTrace(
            scale=self.scale,
            processors=dict(self.nprocs),
            records=self.records,
            horizon=H,
            tasks=sorted((self.task_of[i] for i in range(self.n) if self.kind[i] == LEAF),
                         key=lambda t: t.id),
            misses=list(self.misses),
        )

    def decision(self) -> DispatchDecision:
        """Executing labels per level at the current instant."""
        out: dict = {}
        for i in range(self.n):
            if self.ex[i] and self.lvl[i] is not None:
                out.setdefault(self.lvl[i], []).append(self.label[i])
        for v in out.values():
            v.sort()
        return DispatchDecision(Fraction(self.t, self.scale), out)

    def next_event(self) -> Optional[Fraction]:
        t = self._next_time()
        return None if t is None else Fraction(t, self.scale)

    def start_at_zero(self):
        """Settle and dispatch the initial instant (for step-wise inspection)."""
        self._step(0)
        return self.decision()

    def step(self):
        """Advance to the next event and dispatch there."""
        t = self._next_time()
        if t is None:
            raise RuntimeError("empty system has no events")
        self._step(t)
        return self.decision()


def default_horizon(system: TaskSystem, cap=None) -> Fraction:
    h = system.hyperperiod()
    if cap is not None:
        h = min(h, as_rational(cap))
    return h


def run(system: TaskSystem, horizon=None, heuristic="wfd", strict=False,
        forest: Optional[ReductionForest] = None, cap=5000, lazy=False) -> ScheduleTrace:
    """Reduce ``system`` and simulate it up to ``horizon``.

    The horizon defaults to the hyperperiod, capped at ``cap``.
    """
    if forest is None:
        forest = build_forest(system, heuristic)
    if horizon is None:
        horizon = default_horizon(system, cap)
    sim = Simulation(forest, system.processors, horizon=horizon, strict=strict, lazy=lazy)
    trace = sim.run(horizon)
    trace.leftover = len(sim.leftover)
    return trace


# --- reference implementation (Fractions, recompute everything per event) ------


def assign_processors(previous: dict, selected, processors: int, last: Optional[dict] = None):
    """Map selected labels to processors.

    Labels still selected keep their processor; the others take the free
    processors in ascending (label, processor) order.  ``last`` holds the
    processor each label last ran on and is used to count migrations.
    Returns ``(assignment, migrations)``.
    """
    selected = sorted(selected)
    if len(selected) > processors:
        raise RuntimeError(f"{len(selected)} selected for {processors} processors")
    out = {x: previous[x] for x in selected if x in previous}
    free = sorted(set(range(processors)) - set(out.values()))
    migrations = 0
    for x in selected:
        if x not in out:
            out[x] = free.pop(0)
            if last is not None and x in last and last[x] != out[x]:
                migrations += 1
    return out, migrations


def _reset(forest: ReductionForest):
    for x in forest.nodes:
        if x.kind == TASK:
            x.deadline = x.task.start
            x.release = x.task.start
            x.remaining = Fraction(0)
            x.job_index = -1
        else:
            x.deadline = Fraction(0)
            x.budget = None if getattr(x, "dedicated", False) else Fraction(0)
        x.granted = x.executing = False


def _labels(forest: ReductionForest):
    out: dict = {}
    for x in forest.nodes:
        if x.executing:
            if x.kind == TASK:
                out.setdefault(0, []).append(x.task.id)
            elif x.kind == DUAL:
                out.setdefault(x.level, []).append(x.id)
    for v in out.values():
        v.sort()
    return out


def dispatch_at(forest: ReductionForest, t) -> DispatchDecision:
    """Settle the forest at ``t`` and grant processors top-down (reference)."""
    t = as_rational(t)
    for r in forest.roots:
        srv.settle(r, t)
    for r in forest.roots:
        srv.dispatch(r, t, True)
    return DispatchDecision(t, _labels(forest))


def next_event(forest: ReductionForest, t) -> Fraction:
    """Earliest release, deadline, exhaustion or completion after ``t``."""
    best = None
    for r in forest.roots:
        e = srv.next_local_event(r, t)
        if e is not None and (best is None or e < best):
            best = e
    if best is None:
        raise ValueError("empty system")
    return best


def reference_run(system: TaskSystem, horizon, heuristic="wfd",
                  forest: Optional[ReductionForest] = None, lazy=False) -> ScheduleTrace:
    """Slow Fraction-based run producing one record per event interval."""
    if forest is None:
        forest = build_forest(system, heuristic)
    _reset(forest)
    for x in forest.nodes:
        if x.kind == PACK:
            x.lazy = True if lazy else None
    horizon = as_rational(horizon)
    scale = time_scale(forest, [horizon])
    nprocs = {0: system.processors}
    for x in forest.nodes:
        if x.kind == DUAL and x.level not in nprocs:
            nprocs[x.level] = forest.virtual_processors(x.level)
    assign = {lv: {} for lv in nprocs}
    records = []
    misses: list = []

    def record(t, nxt, roots):
        labels = _labels(forest)
        for lv in nprocs:
            assign[lv], _ = assign_processors(assign[lv], labels.get(lv, []), nprocs[lv])
            for k, p in assign[lv].items():
                records.append((lv, p, k, int(t * scale), int(nxt * scale)))

    srv.simulate(forest.roots, 0, horizon, record=record, misses=misses)
    for x in forest.leaves:
        if x.deadline == horizon and x.remaining > 0:
            misses.append((x.task.id, horizon, x.remaining))
    records.sort(key=lambda r: (r[0], r[3], r[1]))
    return ScheduleTrace(scale=scale, processors=nprocs, records=records,
                         horizon=int(horizon * scale),
                         tasks=sorted((x.task for x in forest.leaves), key=lambda t: t.id), misses=misses)
