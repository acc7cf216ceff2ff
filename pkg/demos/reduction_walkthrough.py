"""Reduce the ten-task set on six processors and show each level.

Run: python demos/reduction_walkthrough.py
"""

from pathlib import Path

from runsched import build_forest, load_taskset
from runsched.trace import fmt

DATA = Path(__file__).parent / "data"


def show(forest):
    for step in forest.steps:
        print(f"level {step.level}")
        print("  servers :", " ".join(fmt(u) for u in step.row("servers")))
        print("  packed  :", " ".join(fmt(u) for u in step.row("packed")))
    print("unit roots at levels", forest.levels)


system = load_taskset(DATA / "ten_on_six.json")
print("sorting once at the leaves (gives the reference rows):")
show(build_forest(system, "wfd-once"))
print()
print("sorting again at every level, the default:")
show(build_forest(system, "wfd"))
