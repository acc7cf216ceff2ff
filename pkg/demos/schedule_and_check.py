"""Schedule five 3/5 tasks on three processors and audit the result.

Writes an SVG Gantt chart next to this script (one band per level).
"""

from pathlib import Path

from runsched import build_forest, check_trace, count_preemptions, load_taskset, run
from runsched.validation import check_counts, check_duality

here = Path(__file__).parent
system = load_taskset(here / "data" / "five_on_three.json")
forest = build_forest(system)
print(forest.dump())

trace = run(system, 12, forest=forest)
print(check_trace(system, trace).summary())
print("duality violations:", len(check_duality(forest, trace)))
print("idle virtual processors:", len(check_counts(trace)))
stats = count_preemptions(trace)
print(f"{stats.jobs_completed} jobs, {stats.preemption_points} preemptions, "
      f"{stats.migrations} migrations")

out = here / "five_on_three.svg"
out.write_text(trace.to_svg())
print("wrote", out)
