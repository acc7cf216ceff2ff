"""One EDF server of rate 3/4 feeding three periodic clients over [0, 12).

Prints the realized server deadlines, the budget handed out at each one and
the job pieces.  Ties between equal deadlines are broken by an explicit
priority order (3, then 1, then 2) so the run can be compared with a
reference schedule of the same system.
"""

from fractions import Fraction as F

from runsched.model import Task
from runsched.servers import Server, TaskServer, simulate

prio = {3: 0, 1: 1, 2: 2}
clients = [TaskServer(Task(i, T, F(1, T)), priority=prio[i]) for i, T in ((1, 3), (2, 4), (3, 6))]
server = Server(clients)

seen = []


def record(t, nxt, roots):
    if not seen or seen[-1] != server.deadline:
        seen.append(server.deadline)
        print(f"t={t}: deadline {server.deadline}, budget {server.budget}")
    for c in clients:
        if c.executing:
            print(f"    job {c.task.id}_{c.job_index + 1} runs [{t}, {nxt})")


simulate([server], 0, 12, record=record)
