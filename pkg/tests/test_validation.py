import random
from fractions import Fraction as F

import pytest

from runsched.model import Task, TaskSystem
from runsched.reduction import build_forest
from runsched.scheduler import run
from runsched.trace import ScheduleTrace
from runsched.validation import (brute_force_feasible, check_counts, check_duality,
                                 check_trace, count_preemptions)

from conftest import MUTATIONS, mutate_trace, random_system


def trace_of(m, rows, horizon, tasks=()):
    """Build a trace from (processor, task, t1, t2) rows with integer times."""
    return ScheduleTrace(1, {0: m}, [(0, p, k, a, b) for p, k, a, b in rows], horizon, list(tasks))


def rules(report):
    return {v[0] for v in report.violations}


TWO = TaskSystem([Task.from_wcet(1, 2, 1), Task.from_wcet(2, 4, 2)], 1)


def test_accepts_valid_hand_trace():
    tr = trace_of(1, [(0, 1, 0, 1), (0, 2, 1, 2), (0, 1, 2, 3), (0, 2, 3, 4)], 4)
    r = check_trace(TWO, tr)
    assert r.valid and r.feasible and r.violations == []
    assert r.ledger[(1, 0)] == 1 and r.ledger[(2, 0)] == 2


@pytest.mark.parametrize("rows, rule", [
    ([(0, 1, 0, 1), (0, 2, 0, 1)], "overlap"),
    ([(0, 9, 0, 1)], "unknown-task"),
    ([(3, 1, 0, 1)], "processor"),
    ([(0, 1, 1, 1)], "interval"),
    ([(0, 1, 0, 2)], "overrun"),
    ([(0, 1, 0, 1)], "miss"),
])
def test_rules(rows, rule):
    r = check_trace(TWO, trace_of(1, rows, 4))
    assert rule in rules(r)
    assert not r.feasible


def test_parallel_rule():
    s = TaskSystem([Task.from_wcet(1, 2, 2), Task.from_wcet(2, 2, 2)], 2)
    tr = trace_of(2, [(0, 1, 0, 1), (1, 1, 0, 1), (0, 2, 1, 2), (1, 2, 1, 2)], 2)
    assert "parallel" in rules(check_trace(s, tr))


def test_inactive_before_first_release():
    s = TaskSystem([Task.from_wcet(1, 2, 1, start=2)], 1, [Task(2, 2, F(1, 2), dummy=True)])
    tr = trace_of(1, [(0, 1, 0, 1)], 4)
    assert "inactive" in rules(check_trace(s, tr))


def test_unfinished_job_at_horizon_is_not_judged():
    r = check_trace(TWO, trace_of(1, [(0, 1, 0, 1), (0, 2, 1, 2)], 2))
    assert r.feasible  # task 2's job is due at 4


def test_mutated_traces_rejected():
    rng = random.Random(11)
    seen = 0
    for _ in range(60):
        s = random_system(rng, max_n=6, max_m=3)
        tr = run(s, s.hyperperiod())
        assert check_trace(s, tr).feasible
        for kind in MUTATIONS:
            bad = mutate_trace(tr, kind, rng)
            r = check_trace(s, bad)
            assert not (r.valid and r.feasible), kind
            seen += 1
    assert seen == 60 * len(MUTATIONS)


def test_preemption_counting_by_hand():
    s = TaskSystem([Task.from_wcet(1, 6, 3), Task.from_wcet(2, 6, 3)], 1)
    # job 1 runs [0,1), [2,3) on another cpu, [3,4): two blocks -> one preemption
    tr = trace_of(2, [(0, 1, 0, 1), (1, 1, 2, 3), (0, 1, 3, 4), (0, 2, 1, 2), (0, 2, 4, 6)], 6)
    st = count_preemptions(tr, s.all_tasks)
    assert st.per_job == {(1, 0): 1, (2, 0): 1}
    assert st.preemption_points == 2 and st.jobs_completed == 2
    assert st.migrations == 2  # 0 -> 1 -> 0
    assert st.average == 1


def test_completion_is_not_a_preemption():
    s = TaskSystem([Task.from_wcet(1, 2, 1)], 1, [Task(2, 2, F(1, 2), dummy=True)])
    tr = trace_of(1, [(0, 1, 0, 1), (0, 2, 1, 2), (0, 1, 2, 3), (0, 2, 3, 4)], 4)
    st = count_preemptions(tr, s.all_tasks)
    assert st.preemption_points == 0 and st.jobs_completed == 2  # dummies not counted


def test_duality_and_count_checks_catch_changes(five_on_three):
    forest = build_forest(five_on_three)
    tr = run(five_on_three, 12, forest=forest)
    top = [i for i, r in enumerate(tr.records) if r[0] == 2]
    recs = list(tr.records)
    del recs[top[0]]
    bad = ScheduleTrace(tr.scale, tr.processors, recs, tr.horizon, tr.tasks)
    assert check_duality(forest, bad) and check_counts(bad)


def test_brute_force_oracle():
    three_on_two = TaskSystem([Task.from_wcet(i, 3, 2) for i in (1, 2, 3)], 2)
    assert brute_force_feasible(three_on_two)
    over = ([Task.from_wcet(1, 2, 2), Task.from_wcet(2, 3, 2), Task.from_wcet(3, 3, 2)], 2)
    assert not brute_force_feasible(over)
    assert brute_force_feasible(([Task.from_wcet(1, 2, 1), Task.from_wcet(2, 3, 1)], 1))
    assert not brute_force_feasible(([Task.from_wcet(1, 2, 1), Task.from_wcet(2, 3, 2)], 1))
    with pytest.raises(ValueError):
        brute_force_feasible(([Task.from_wcet(i, 2, 1) for i in range(6)], 2))
    with pytest.raises(ValueError):
        brute_force_feasible(([Task.from_wcet(1, 61, 1)], 1))


def test_brute_force_agrees_with_utilization():
    # with integer parameters, sum(u) <= m is exactly the feasibility condition
    rng = random.Random(5)
    for _ in range(150):
        m = rng.randint(1, 2)
        n = rng.randint(1, 4)
        tasks = []
        for i in range(n):
            T = rng.choice([2, 3, 4, 5, 6])
            tasks.append(Task.from_wcet(i + 1, T, rng.randint(1, T)))
        try:
            got = brute_force_feasible((tasks, m))
        except ValueError:
            continue
        assert got == (sum(t.utilization for t in tasks) <= m)
