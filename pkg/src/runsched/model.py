"""Tasks, jobs and task systems.

All time quantities and utilizations are :class:`fractions.Fraction` values.
A task is periodic: its deadline set is ``{start + j * period : j >= 0}`` and a
job released at ``r`` in that set is due at the next element, requiring exactly
``utilization * (deadline - release)`` units of processor time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

Rational = Fraction


def as_rational(value) -> Fraction:
    """Convert ints, Fractions and ``"p/q"`` strings to a Fraction.

    Floats are rejected: ``0.1`` has no exact binary value and would leak
    rounding error into budget accounting.
    """
    if isinstance(value, float):
        raise TypeError(f"refusing float {value!r}; pass a Fraction or 'p/q' string")
    if isinstance(value, Fraction):
        return value
    return Fraction(value)


@dataclass(frozen=True)
class Task:
    """Fixed-utilization periodic task."""

    id: int
    period: Fraction
    utilization: Fraction
    start: Fraction = Fraction(0)
    dummy: bool = False

    def __post_init__(self):
        object.__setattr__(self, "period", as_rational(self.period))
        object.__setattr__(self, "utilization", as_rational(self.utilization))
        object.__setattr__(self, "start", as_rational(self.start))
        if self.period <= 0:
            raise ValueError(f"task {self.id}: period must be positive, got {self.period}")
        if not 0 < self.utilization <= 1:
            raise ValueError(f"task {self.id}: utilization must lie in (0, 1], got {self.utilization}")
        if self.start < 0:
            raise ValueError(f"task {self.id}: negative start time")

    @classmethod
    def from_wcet(cls, id: int, period, wcet, **kw) -> "Task":
        period = as_rational(period)
        return cls(id, period, as_rational(wcet) / period, **kw)

    @property
    def wcet(self) -> Fraction:
        return self.utilization * self.period

    def __repr__(self):
        tag = ", dummy" if self.dummy else ""
        return f"Task({self.id}, T={self.period}, u={self.utilization}{tag})"


@dataclass(frozen=True)
class Job:
    task: int
    release: Fraction
    deadline: Fraction
    requirement: Fraction
    index: int = 0

    def __post_init__(self):
        if not self.release < self.deadline:
            raise ValueError("job release must precede its deadline")


@dataclass
class TaskSystem:
    tasks: list[Task]
    processors: int
    dummies: list[Task] = field(default_factory=list)

    def __post_init__(self):
        if self.processors < 1:
            raise ValueError("need at least one processor")
        ids = [t.id for t in self.all_tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids")

    @property
    def all_tasks(self) -> list[Task]:
        return list(self.tasks) + list(self.dummies)

    @property
    def utilization(self) -> Fraction:
        return sum((t.utilization for t in self.all_tasks), Fraction(0))

    @property
    def fully_utilized(self) -> bool:
        return self.utilization == self.processors

    def hyperperiod(self) -> Fraction:
        return hyperperiod(self.all_tasks)

    def task(self, task_id: int) -> Task:
        for t in self.all_tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)


def hyperperiod(tasks: Iterable[Task]) -> Fraction:
    """Least common multiple of the task periods (rational periods allowed)."""
    periods = [t.period for t in tasks]
    if not periods:
        return Fraction(0)
    # lcm(a/b, c/d) = lcm(a, c) / gcd(b, d) for fractions in lowest terms
    num = 0
    den = 0
    for p in periods:
        num = p.numerator if num == 0 else math.lcm(num, p.numerator)
        den = p.denominator if den == 0 else math.gcd(den, p.denominator)
    return Fraction(num, den)


def next_deadline(task: Task, t) -> Fraction:
    """Smallest element of the task's deadline set strictly greater than ``t``."""
    t = as_rational(t)
    if t < task.start:
        return task.start
    k = math.floor((t - task.start) / task.period) + 1
    return task.start + k * task.period


def job_at(task: Task, t) -> Job:
    """The job of ``task`` whose window ``[release, deadline)`` contains ``t``."""
    t = as_rational(t)
    if t < task.start:
        raise ValueError(f"task {task.id} has no job before its start time {task.start}")
    k = math.floor((t - task.start) / task.period)
    release = task.start + k * task.period
    deadline = release + task.period
    return Job(task.id, release, deadline, task.utilization * task.period, index=k)


def jobs_until(task: Task, horizon) -> list[Job]:
    """All jobs of ``task`` with deadline <= horizon."""
    horizon = as_rational(horizon)
    out = []
    if horizon < task.start:
        return out
    count = math.floor((horizon - task.start) / task.period)
    for k in range(count):
        r = task.start + k * task.period
        out.append(Job(task.id, r, r + task.period, task.utilization * task.period, index=k))
    return out


def pad_to_full_utilization(
    tasks: Sequence[Task], m: int, dummy_period=None, period_cap=None
) -> TaskSystem:
    """Append dummy tasks so the total utilization is exactly ``m``.

    The residual ``m - sum(u)`` is split into ``ceil(residual)`` dummies: all
    but the last carry utilization 1.  Dummy period defaults to the hyperperiod
    of ``tasks``, optionally capped by ``period_cap``.
    """
    tasks = list(tasks)
    total = sum((t.utilization for t in tasks), Fraction(0))
    if total > m:
        raise ValueError(f"total utilization {total} exceeds {m} processors")
    residual = m - total
    if residual == 0:
        return TaskSystem(tasks, m)
    if dummy_period is None:
        dummy_period = hyperperiod(tasks) if tasks else Fraction(1)
        if period_cap is not None:
            dummy_period = min(dummy_period, as_rational(period_cap))
    dummy_period = as_rational(dummy_period)
    next_id = max((t.id for t in tasks), default=-1) + 1
    dummies = []
    while residual > 0:
        u = min(residual, Fraction(1))
        dummies.append(Task(next_id, dummy_period, u, dummy=True))
        next_id += 1
        residual -= u
    return TaskSystem(tasks, m, dummies)
