"""A reduced version of the random-set experiment (8 processors, 20 sets per n).

Takes well under a minute.  The full batch is ``runsched experiment preemptions``.
"""

from runsched.experiments import ExperimentConfig, default_n_values, run_batch
from runsched.experiments import level_histogram, preemption_summary

config = ExperimentConfig(m=8, n_values=default_n_values(8)[::3], sets_per_n=20,
                          horizon_cap=500, seed=1)
rows = run_batch(config)
levels = level_histogram(rows)
summary = preemption_summary(rows)
print(" n  levels               median  max   preemptions/job")
for n in config.n_values:
    hist = " ".join(f"{lv}:{float(f):.2f}" for lv, f in levels[n].items())
    s = summary[n]
    print(f"{n:3d}  {hist:20s} {s['median']:.3f}  {s['max']:.3f}")
print("misses:", sum(r.misses for r in rows))
