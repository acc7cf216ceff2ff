"""Off-line reduction of a task system to unit servers.

One reduction step packs the current servers into bins of utilization at most
one, emits full bins as finished roots and replaces every other bin by its
dual.  Repeating this on an integer-utilization system converges (each step
roughly halves the number of servers), giving a forest of unit servers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .model import TaskSystem, as_rational
from .servers import DUAL, PACK, TASK, DualServer, Node, Server, TaskServer

MAX_LEVELS = 64


def dual(node: Node) -> DualServer:
    """Wrap ``node`` in its dual (utilization ``1 - mu``)."""
    d = DualServer(node)
    d.level = node.level + 1
    return d


# --- bin packing --------------------------------------------------------------


def _decreasing(sizes):
    # stable: equal sizes keep their input order
    return sorted(range(len(sizes)), key=lambda i: -sizes[i])


def _place(sizes, order, choose) -> list[list[int]]:
    bins: list[list[int]] = []
    loads: list[Fraction] = []
    for i in order:
        s = sizes[i]
        fits = [b for b in range(len(bins)) if loads[b] + s <= 1]
        if fits:
            b = choose(fits, loads)
            bins[b].append(i)
            loads[b] += s
        else:
            bins.append([i])
            loads.append(s)
    return bins


def _worst(fits, loads):
    # most residual capacity, lowest index on ties
    return min(fits, key=lambda b: (loads[b], b))


def _best(fits, loads):
    return min(fits, key=lambda b: (-loads[b], b))


def _first(fits, loads):
    return fits[0]


HEURISTICS: dict[str, Callable] = {
    "wfd": lambda sizes: _place(sizes, _decreasing(sizes), _worst),
    "bfd": lambda sizes: _place(sizes, _decreasing(sizes), _best),
    "ffd": lambda sizes: _place(sizes, _decreasing(sizes), _first),
    "wf": lambda sizes: _place(sizes, range(len(sizes)), _worst),
    # decreasing order for the tasks only; higher levels keep bin order
    "wfd-once": lambda sizes: _place(sizes, _decreasing(sizes), _worst),
}


def pack_sizes(sizes: Sequence, heuristic: str = "wfd") -> list[list[int]]:
    """Partition item indices into bins of total size <= 1."""
    sizes = [as_rational(s) for s in sizes]
    for s in sizes:
        if not 0 < s <= 1:
            raise ValueError(f"item size {s} outside (0, 1]")
    try:
        fn = HEURISTICS[heuristic]
    except KeyError:
        raise ValueError(f"unknown packing heuristic {heuristic!r}") from None
    return fn(sizes)


def pack(servers: Sequence[Node], heuristic: str = "wfd") -> list[Server]:
    """Group servers into EDF servers (pack nodes) with utilization <= 1."""
    servers = list(servers)
    bins = pack_sizes([s.utilization for s in servers], heuristic)
    out = []
    for b in bins:
        node = Server([servers[i] for i in b])
        node.level = max(servers[i].level for i in b)
        out.append(node)
    return out


# --- reduction ----------------------------------------------------------------


@dataclass
class ReductionStep:
    """One application of pack-then-dual at a given level."""

    level: int
    servers: list  # input of the packing (the level's server set)
    packed: list  # pack nodes, in bin order
    units: list  # pack nodes of utilization exactly one
    duals: list  # duals of the remaining pack nodes (next level input)

    def row(self, which: str) -> list[Fraction]:
        nodes = {"servers": self.servers, "packed": self.packed, "duals": self.duals}[which]
        return [n.utilization for n in nodes]


def reduce(servers: Sequence[Node], heuristic: str = "wfd", level: int = 0) -> ReductionStep:
    """Pack, keep unit bins as roots, dualize the rest."""
    if heuristic == "wfd-once" and level > 0:
        heuristic = "wf"
    packed = pack(servers, heuristic)
    for p in packed:
        p.level = level
    units = [p for p in packed if p.utilization == 1]
    duals = [dual(p) for p in packed if p.utilization != 1]
    return ReductionStep(level, list(servers), packed, units, duals)


@dataclass
class ReductionForest:
    roots: list
    levels: list  # terminal level of each root
    steps: list = field(default_factory=list)
    nodes: list = field(default_factory=list)  # indexed by node id (pre-order)
    heuristic: str = "wfd"

    @property
    def max_level(self) -> int:
        """Number of reduction levels (highest terminal level)."""
        return max(self.levels, default=0)

    @property
    def leaves(self) -> list:
        return [n for n in self.nodes if n.kind == TASK]

    def leaf(self, task_id: int) -> TaskServer:
        for n in self.nodes:
            if n.kind == TASK and n.task.id == task_id:
                return n
        raise KeyError(task_id)

    def level_nodes(self, level: int) -> list:
        """Nodes whose execution is drawn at ``level`` of the trace.

        Level 0 holds the task leaves; level l >= 1 holds the duals created by
        the l-th reduction step.
        """
        if level == 0:
            return self.leaves
        return [n for n in self.nodes if n.kind == DUAL and n.level == level]

    def virtual_processors(self, level: int) -> int:
        """Utilization of the level's server set (an integer)."""
        total = sum((n.utilization for n in self.level_nodes(level)), Fraction(0))
        if total.denominator != 1:
            raise ValueError(f"level {level} has non-integer utilization {total}")
        return int(total)

    def dump(self) -> str:
        return dump_forest(self)


def build_forest(system: TaskSystem, heuristic: str = "wfd") -> ReductionForest:
    """Reduce a fully utilized task system to a forest of unit servers.

    Tasks enter packing in id order, so the tree depends only on the task set.
    """
    total = system.utilization
    if total.denominator != 1 or total == 0:
        raise ValueError(f"total utilization must be a positive integer, got {total}")
    items: list[Node] = [TaskServer(t) for t in sorted(system.all_tasks, key=lambda t: t.id)]
    roots, levels, steps = [], [], []
    level = 0
    while items:
        if level > MAX_LEVELS:
            raise RuntimeError("reduction did not converge")
        step = reduce(items, heuristic, level)
        steps.append(step)
        roots.extend(step.units)
        levels.extend([level] * len(step.units))
        items = step.duals
        level += 1
    forest = ReductionForest(roots, levels, steps, heuristic=heuristic)
    _number(forest)
    return forest


def _number(forest: ReductionForest) -> None:
    nodes = []
    for r in forest.roots:
        for n in r.walk():
            n.id = len(nodes)
            nodes.append(n)
    forest.nodes = nodes


def dump_forest(forest: ReductionForest) -> str:
    """Plain-text dump: reduction rows, then one line per node (pre-order)."""
    fmt = lambda us: " ".join(str(u) for u in us)
    lines = [f"# roots={len(forest.roots)} levels={forest.max_level} heuristic={forest.heuristic}"]
    for s in forest.steps:
        lines.append(f"row {s.level} servers: {fmt(s.row('servers'))}")
        lines.append(f"row {s.level} packed: {fmt(s.row('packed'))}")
    for r, lvl in zip(forest.roots, forest.levels):
        lines.append(f"root {r.id} level {lvl}")
    depth = {}
    for n in forest.nodes:
        d = 0 if n.parent is None else depth[n.parent.id] + 1
        depth[n.id] = d
        kids = ",".join(str(c.id) for c in n.children) or "-"
        extra = f" task={n.task.id}" if n.kind == TASK else ""
        lines.append(f"{'  ' * d}node {n.id} {n.kind} u={n.utilization} level={n.level}"
                     f" children={kids}{extra}")
    return "\n".join(lines) + "\n"
