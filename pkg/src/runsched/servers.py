"""Fixed-utilization EDF servers and their reference semantics.

A scheduling tree is built from three node kinds:

* :class:`TaskServer` -- a leaf wrapping one periodic task and its current job;
* :class:`Server` -- an EDF server over client nodes (a *pack* node);
* :class:`DualServer` -- the dual of one server, utilization ``1 - mu``.

The functions in this module operate directly on node state with exact
Fractions.  They are deliberately simple (state is recomputed from scratch at
every event) and act as the reference against which the integer engine in
:mod:`runsched.scheduler` is checked.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Optional

from .model import Task, as_rational, next_deadline

TASK, PACK, DUAL = "task", "pack", "dual"


class Node:
    kind = ""

    def __init__(self, utilization, id=None):
        self.utilization = as_rational(utilization)
        self.id = id
        self.parent: Optional[Node] = None
        self.level = 0
        # dynamic state
        self.deadline = Fraction(0)
        self.budget: Optional[Fraction] = Fraction(0)
        self.granted = False
        self.executing = False

    @property
    def children(self) -> list:
        return []

    @property
    def key(self):
        """Tie-break key among siblings with equal deadlines.

        A server inherits the smallest task id found below it, so ties are
        broken the same way whatever order the packing produced.
        """
        return min(c.key for c in self.children)

    def walk(self):
        """Pre-order traversal of the subtree."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def active(self) -> bool:
        return self.budget is None or self.budget > 0

    def clone(self) -> "Node":
        """Deep copy of the subtree, detached from its parent."""
        raise NotImplementedError

    def _copy_state(self, other: "Node"):
        other.id = self.id
        other.level = self.level
        other.deadline = self.deadline
        other.budget = self.budget
        other.granted = self.granted
        other.executing = self.executing
        return other


class TaskServer(Node):
    """Leaf node: a task together with the state of its current job."""

    kind = TASK

    def __init__(self, task: Task, id=None, priority=None):
        super().__init__(task.utilization, id)
        self.task = task
        # tie-break key among equal deadlines; the task id unless given
        self.priority = task.id if priority is None else priority
        # before the first release the leaf looks like a completed job due at start
        self.deadline = task.start
        self.release = task.start
        self.remaining = Fraction(0)
        self.budget = None
        self.job_index = -1

    @property
    def key(self):
        return self.priority

    def active(self) -> bool:
        return self.remaining > 0

    def clone(self):
        other = TaskServer(self.task, priority=self.priority)
        other.release = self.release
        other.remaining = self.remaining
        other.job_index = self.job_index
        return self._copy_state(other)

    def __repr__(self):
        return f"TaskServer(task={self.task.id}, u={self.utilization})"


class Server(Node):
    """EDF server over a list of clients.

    ``utilization`` defaults to the clients' total.  A *dedicated* server
    has unlimited budget, which turns it into plain uniprocessor EDF.

    ``lazy`` picks the deadline rule (see :func:`server_deadline`); ``None``
    means lazy only for a budgeted server with no parent.
    """

    kind = PACK

    def __init__(self, clients: Iterable[Node], utilization=None, id=None, dedicated=False,
                 lazy=None):
        clients = list(clients)
        if utilization is None:
            utilization = sum((c.utilization for c in clients), Fraction(0))
        super().__init__(utilization, id)
        self.clients = clients
        for c in clients:
            c.parent = self
        self.dedicated = dedicated
        self.lazy = lazy
        if dedicated:
            self.budget = None
        elif not 0 < self.utilization <= 1:
            raise ValueError(f"server utilization must lie in (0, 1], got {self.utilization}")

    @property
    def children(self):
        return self.clients

    def is_unit(self) -> bool:
        return self.utilization == 1

    def clone(self):
        other = Server([c.clone() for c in self.clients], self.utilization,
                       dedicated=self.dedicated, lazy=self.lazy)
        return self._copy_state(other)

    def __repr__(self):
        return f"Server(id={self.id}, u={self.utilization}, clients={len(self.clients)})"


class DualServer(Node):
    """Dual of a server: complementary utilization, identical deadlines."""

    kind = DUAL

    def __init__(self, child: Node, id=None):
        u = child.utilization
        if not 0 < u < 1:
            raise ValueError(f"dual needs 0 < utilization < 1, got {u}")
        super().__init__(1 - u, id)
        self.child = child
        child.parent = self

    @property
    def children(self):
        return [self.child]

    def clone(self):
        return self._copy_state(DualServer(self.child.clone()))

    def __repr__(self):
        return f"DualServer(id={self.id}, u={self.utilization})"


# --- deadline assignment and budgets -----------------------------------------


def pending_deadline(node: Node, t) -> Fraction:
    """Earliest deadline > t among the node's uncompleted or future jobs."""
    t = as_rational(t)
    if node.kind == TASK:
        if node.remaining > 0:
            return node.deadline
        # current job done (or not yet started): the next job is due one period later
        return next_deadline(node.task, max(node.deadline, t))
    if node.active() and node.deadline > t:
        return node.deadline
    # A completed server job: its next deadline is whatever the server will
    # pick when it replenishes, so play the subtree forward to find out.
    return lookahead_deadline(node, t)


def lookahead_deadline(node: Node, t) -> Fraction:
    """Deadline the server will adopt at its next replenishment.

    Between now and that replenishment the server's job is complete, so the
    subtree evolves independently of the rest of the system: a dual keeps its
    child running, a pack keeps its clients frozen.
    """
    copy = node.clone()
    copy.granted = True
    end = copy.deadline
    simulate([copy], t, end)
    settle(copy, end)
    return copy.deadline


def uses_pending_rule(server: Node) -> bool:
    if server.lazy is not None:
        return server.lazy
    return server.parent is None and not server.dedicated


def server_deadline(server: Node, t) -> Fraction:
    """Deadline a server adopts when it replenishes at ``t``.

    Lazy rule: the earliest deadline among client jobs that are unfinished
    or not yet released, so a client that already finished its job does not
    cut the window short (its next job's deadline counts instead).

    Eager rule: the earliest current deadline of any client.  No client job
    is then released strictly inside a server window.  A server that shares
    its processor with its dual needs this: under the lazy rule it can burn
    its budget on late work before a skipped client is released, or sit on
    budget with no ready client, and either way the level below loses time.
    """
    if server.kind == DUAL:
        return server_deadline(server.child, t)
    if server.kind == TASK:
        return pending_deadline(server, t)
    if uses_pending_rule(server):
        return min(pending_deadline(c, t) for c in server.clients)
    return min(c.deadline for c in server.clients)


def replenish(server: Node, t) -> None:
    """Set deadline and budget at a deadline instant of the server."""
    t = as_rational(t)
    if server.deadline != t:
        raise ValueError(f"replenish at {t} but server {server.id} is due at {server.deadline}")
    if server.kind == DUAL:
        # the child has already been replenished at this instant
        lam = server.child.deadline
    else:
        lam = server_deadline(server, t)
    server.deadline = lam
    if server.budget is not None:
        server.budget = server.utilization * (lam - t)


def edf_pick(server: Server, t=None) -> Optional[Node]:
    """Active client with the earliest deadline; ties go to the lower key."""
    best = None
    for c in server.clients:
        if c.active() and (best is None or (c.deadline, c.key) < (best.deadline, best.key)):
            best = c
    return best


def scale(server: Server, alpha) -> Server:
    """alpha-scaled copy of ``server``: same clients, utilization alpha*mu."""
    alpha = as_rational(alpha)
    if alpha <= 0 or alpha * server.utilization > 1:
        raise ValueError(f"scale factor {alpha} out of range for utilization {server.utilization}")
    return Server([c.clone() for c in server.clients], alpha * server.utilization,
                  id=server.id, dedicated=server.dedicated)


# --- reference event loop ----------------------------------------------------


def settle(node: Node, t, misses: Optional[list] = None) -> None:
    """Process every release/replenishment due at ``t`` in the subtree, bottom-up."""
    for c in node.children:
        settle(c, t, misses)
    if node.deadline != t:
        return
    if node.kind == TASK:
        if node.remaining > 0 and misses is not None:
            misses.append((node.task.id, t, node.remaining))
        task = node.task
        node.release = t
        node.deadline = next_deadline(task, t)
        node.remaining = task.utilization * (node.deadline - t)
        node.job_index += 1
    else:
        replenish(node, t)


def dispatch(node: Node, t, granted: bool) -> None:
    """Top-down grant propagation; sets ``granted``/``executing`` flags."""
    node.granted = granted
    if node.kind == TASK:
        node.executing = granted and node.remaining > 0
    elif node.kind == DUAL:
        node.executing = granted and node.budget > 0
        dispatch(node.child, t, not node.executing)
    else:
        pick = edf_pick(node, t) if granted and node.active() else None
        node.executing = pick is not None
        for c in node.clients:
            dispatch(c, t, c is pick)


def next_local_event(node: Node, t) -> Fraction:
    """Earliest deadline, budget exhaustion or job completion in the subtree."""
    best = None
    for n in node.walk():
        cands = [n.deadline] if n.deadline > t else []
        if n.executing:
            if n.kind == TASK:
                cands.append(t + n.remaining)
            elif n.budget is not None:
                cands.append(t + n.budget)
        for c in cands:
            if best is None or c < best:
                best = c
    return best


def consume(node: Node, dt) -> None:
    for n in node.walk():
        if n.executing:
            if n.kind == TASK:
                n.remaining -= dt
            elif n.budget is not None:
                n.budget -= dt


def simulate(roots: list, t0, t1, record: Optional[Callable] = None,
             misses: Optional[list] = None) -> Fraction:
    """Run the given (always granted) subtrees over [t0, t1).

    ``record(t, t_next, roots)`` is called once per constant interval after
    dispatch.  Settlement at ``t1`` itself is left to the caller.
    """
    t = as_rational(t0)
    t1 = as_rational(t1)
    while t < t1:
        for r in roots:
            settle(r, t, misses)
        for r in roots:
            dispatch(r, t, True)
        nxt = t1
        for r in roots:
            e = next_local_event(r, t)
            if e is not None and e < nxt:
                nxt = e
        if record is not None:
            record(t, nxt, roots)
        for r in roots:
            consume(r, nxt - t)
        t = nxt
    return t
