import sys
import random
from fractions import Fraction as F
from pathlib import Path

import pytest

from runsched.model import Task, TaskSystem, pad_to_full_utilization

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"


def three_on_two_system():
    return TaskSystem([Task.from_wcet(i, 3, 2) for i in (1, 2, 3)], 2)


def five_on_three_system():
    periods = (12, 6, 4, 3, 2)
    return TaskSystem([Task(i + 1, T, F(3, 5)) for i, T in enumerate(periods)], 3)


def ten_on_six_system():
    us = [F(6, 10)] * 5 + [F(8, 10), F(6, 10), F(6, 10), F(5, 10), F(5, 10)]
    return TaskSystem([Task(i + 1, 10, u) for i, u in enumerate(us)], 6)


def random_system(rng: random.Random, max_n=6, max_m=3, periods=(2, 12), pad=True):
    """Random integer task set with total utilization <= m, padded to m."""
    m = rng.randint(1, max_m)
    n = rng.randint(m, max(m, max_n))
    lo, hi = periods
    tasks = []
    for i in range(n):
        T = rng.randint(lo, hi)
        tasks.append(Task.from_wcet(i + 1, T, rng.randint(1, T)))
    # shrink the biggest task until the set fits; drop it once it is at wcet 1
    while sum(t.utilization for t in tasks) > m:
        k = max(range(len(tasks)), key=lambda j: tasks[j].utilization)
        t = tasks[k]
        if t.wcet <= 1:
            del tasks[k]
        else:
            tasks[k] = Task.from_wcet(t.id, t.period, t.wcet - 1)
    return pad_to_full_utilization(tasks, m) if pad else TaskSystem(tasks, m)


@pytest.fixture
def three_on_two():
    return three_on_two_system()


@pytest.fixture
def five_on_three():
    return five_on_three_system()


@pytest.fixture
def ten_on_six():
    return ten_on_six_system()


# --- trace corruption -----------------------------------------------------------

MUTATIONS = ("drop", "shorten", "stretch", "duplicate", "clone", "retarget", "processor",
             "unknown")


def mutate_trace(trace, kind, rng: random.Random):
    """Copy of ``trace`` with one level-0 record corrupted.

    Every kind produces a trace that must be rejected when the horizon is a
    common multiple of the periods (all jobs due).
    """
    recs = list(trace.records)
    zero = [i for i, r in enumerate(recs) if r[0] == 0]
    i = rng.choice(zero)
    lv, p, k, a, b = recs[i]
    m = trace.processors[0]
    ids = sorted({r[2] for r in recs if r[0] == 0})
    if kind == "drop":
        del recs[i]
    elif kind == "shorten":
        recs[i] = (lv, p, k, a, a + (b - a) // 2) if b - a > 1 else (lv, p, k, a, a)
    elif kind == "stretch":
        recs[i] = (lv, p, k, a, b + 1)  # overlaps the next piece or overruns
    elif kind == "duplicate":
        recs.append(recs[i])  # same job twice on one processor
    elif kind == "clone":
        recs.append((lv, (p + 1) % (m + 1), k, a, b))  # same job on a second processor
    elif kind == "retarget":
        others = [x for x in ids if x != k]
        if not others:
            return mutate_trace(trace, "drop", rng)
        recs[i] = (lv, p, rng.choice(others), a, b)
    elif kind == "processor":
        recs[i] = (lv, m + rng.randint(0, 3), k, a, b)
    elif kind == "unknown":
        recs[i] = (lv, p, max(ids) + 100, a, b)
    else:
        raise ValueError(kind)
    return type(trace)(trace.scale, dict(trace.processors), recs, trace.horizon,
                       list(trace.tasks))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, title, detail = results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} {title}: {detail}")
