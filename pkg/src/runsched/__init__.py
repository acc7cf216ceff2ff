"""Optimal multiprocessor scheduling by reduction to uniprocessor EDF servers.

Typical use::

    from runsched import Task, TaskSystem, build_forest, run, check_trace

    system = TaskSystem([Task.from_wcet(i, 3, 2) for i in (1, 2, 3)], processors=2)
    trace = run(system, horizon=3)
    assert check_trace(system, trace).feasible
"""

from .model import (Job, Task, TaskSystem, as_rational, hyperperiod, job_at, jobs_until,
                    next_deadline, pad_to_full_utilization)
from .servers import (DualServer, Server, TaskServer, edf_pick, replenish, scale,
                      server_deadline)
from .reduction import ReductionForest, build_forest, dual, pack, pack_sizes, reduce
from .trace import ScheduleTrace
from .scheduler import (DeadlineMiss, DispatchDecision, Simulation, assign_processors,
                        dispatch_at, next_event, reference_run, run)
from .validation import (PreemptionStats, ValidityReport, brute_force_feasible,
                         check_counts, check_duality, check_trace, count_preemptions)
from .generator import generate_taskset, randfixedsum
from .experiments import (ExperimentConfig, MetricsRow, run_batch, run_levels_experiment,
                          run_preemption_experiment)
from .taskfile import dump_taskset, load_taskset, parse_taskset

__version__ = "0.1.0"
