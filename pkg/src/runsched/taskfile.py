"""Task-set files.

A task-set file is a JSON document::

    {
      "processors": 2,
      "tasks": [
        {"id": 1, "period": 3, "wcet": 2},
        {"id": 2, "period": 12, "wcet": "36/5", "start": 0}
      ]
    }

``period`` and ``wcet`` are positive integers or ``"p/q"`` strings, ``start``
is optional (default 0) and a task may carry ``"dummy": true``.  Utilization
is ``wcet / period`` and must not exceed one.  Floats are refused.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .model import Task, TaskSystem, pad_to_full_utilization


class TaskFileError(ValueError):
    pass


def _number(value, what) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise TaskFileError(f"{what}: use an integer or a 'p/q' string, not {value!r}")
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise TaskFileError(f"{what}: cannot read {value!r}") from None


def parse_taskset(text: str, pad: bool = True) -> TaskSystem:
    """Parse a task-set document; pad to full utilization unless ``pad=False``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TaskFileError(f"not valid JSON: {e}") from None
    if not isinstance(doc, dict) or "tasks" not in doc or "processors" not in doc:
        raise TaskFileError("expected an object with 'processors' and 'tasks'")
    m = doc["processors"]
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise TaskFileError(f"processors must be a positive integer, got {m!r}")
    tasks, dummies = [], []
    for k, rec in enumerate(doc["tasks"]):
        where = f"task #{k}"
        if not isinstance(rec, dict):
            raise TaskFileError(f"{where}: expected an object")
        try:
            tid = rec["id"]
            period = _number(rec["period"], f"{where} period")
            wcet = _number(rec["wcet"], f"{where} wcet")
        except KeyError as e:
            raise TaskFileError(f"{where}: missing field {e}") from None
        if not isinstance(tid, int) or isinstance(tid, bool):
            raise TaskFileError(f"{where}: id must be an integer")
        start = _number(rec.get("start", 0), f"{where} start")
        if period <= 0 or wcet <= 0:
            raise TaskFileError(f"task {tid}: period and wcet must be positive")
        if start < 0:
            raise TaskFileError(f"task {tid}: start must not be negative")
        if wcet > period:
            raise TaskFileError(f"task {tid}: utilization {wcet / period} exceeds 1")
        task = Task(tid, period, wcet / period, start, dummy=bool(rec.get("dummy", False)))
        (dummies if task.dummy else tasks).append(task)
    try:
        if dummies or not pad:
            system = TaskSystem(tasks, m, dummies)
        else:
            system = pad_to_full_utilization(tasks, m)
    except ValueError as e:
        raise TaskFileError(str(e)) from None
    if system.utilization > m:
        raise TaskFileError(f"total utilization {system.utilization} exceeds {m} processors")
    return system


def load_taskset(path, pad: bool = True) -> TaskSystem:
    with open(path) as fh:
        return parse_taskset(fh.read(), pad)


def _out(x: Fraction):
    return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dump_taskset(system: TaskSystem, include_dummies: bool = False) -> str:
    tasks = system.all_tasks if include_dummies else system.tasks
    recs = []
    for t in tasks:
        rec = {"id": t.id, "period": _out(t.period), "wcet": _out(t.wcet)}
        if t.start:
            rec["start"] = _out(t.start)
        if t.dummy:
            rec["dummy"] = True
        recs.append(rec)
    return json.dumps({"processors": system.processors, "tasks": recs}, indent=1) + "\n"
