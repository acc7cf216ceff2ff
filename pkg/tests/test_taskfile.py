import json
from fractions import Fraction as F

import pytest

from runsched.taskfile import TaskFileError, dump_taskset, load_taskset, parse_taskset

from conftest import DATA


def doc(tasks, m=2):
    return json.dumps({"processors": m, "tasks": tasks})


def test_parse_and_pad():
    s = parse_taskset(doc([{"id": 1, "period": 4, "wcet": 1}], 1))
    assert s.processors == 1 and len(s.tasks) == 1
    assert s.utilization == 1 and s.dummies[0].dummy


def test_rational_wcet_and_start():
    s = parse_taskset(doc([{"id": 1, "period": 12, "wcet": "36/5", "start": "1/2"}], 1))
    t = s.tasks[0]
    assert t.utilization == F(3, 5) and t.start == F(1, 2)


def test_no_padding():
    s = parse_taskset(doc([{"id": 1, "period": 4, "wcet": 1}], 1), pad=False)
    assert s.dummies == [] and s.utilization == F(1, 4)


@pytest.mark.parametrize("text", [
    "nope",
    "[]",
    doc([{"id": 1, "period": 4}]),
    doc([{"id": 1, "period": 4, "wcet": 0.5}]),
    doc([{"id": 1, "period": 4, "wcet": 5}]),
    doc([{"id": 1, "period": -4, "wcet": 1}]),
    doc([{"id": "a", "period": 4, "wcet": 1}]),
    doc([{"id": 1, "period": 4, "wcet": 1, "start": -1}]),
    doc([{"id": 1, "period": 1, "wcet": 1}] * 1 + [{"id": 2, "period": 1, "wcet": 1}], 1),
    doc([{"id": 1, "period": 4, "wcet": 1}, {"id": 1, "period": 4, "wcet": 1}]),
    json.dumps({"processors": 0, "tasks": []}),
])
def test_rejects(text):
    with pytest.raises(TaskFileError):
        parse_taskset(text)


def test_round_trip():
    s = load_taskset(DATA / "five_on_three.json")
    again = parse_taskset(dump_taskset(s, include_dummies=True))
    key = lambda x: [(t.id, t.period, t.utilization, t.dummy) for t in x.all_tasks]
    assert key(again) == key(s)


def test_example_files_load():
    for name, m, n in [("three_on_two", 2, 3), ("five_on_three", 3, 5), ("ten_on_six", 6, 10), ("server_clients", 1, 3)]:
        s = load_taskset(DATA / f"{name}.json")
        assert s.processors == m and len(s.tasks) == n and s.fully_utilized
