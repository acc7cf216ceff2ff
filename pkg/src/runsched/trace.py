"""Schedule traces: storage, text round-trip and SVG rendering.

Times are integers in units of ``1/scale``.  A record is
``(level, processor, label, t1, t2)``: at level 0 the label is a task id and
the processor a physical one, at level ``l >= 1`` the label is the node id of
a dual server and the processor a virtual one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .model import Task, as_rational

HEADER = "# runsched trace v1"


def fmt(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass
class ScheduleTrace:
    scale: int
    processors: dict  # level -> processor count
    records: list
    horizon: int
    tasks: list = field(default_factory=list)
    misses: list = field(default_factory=list)
    leftover: int = 0

    @property
    def levels(self) -> list:
        return sorted(self.processors)

    @property
    def end(self) -> Fraction:
        return Fraction(self.horizon, self.scale)

    def intervals(self, level: Optional[int] = None):
        """Records with Fraction times, optionally restricted to one level."""
        S = self.scale
        return [(lv, p, k, Fraction(a, S), Fraction(b, S))
                for lv, p, k, a, b in self.records if level is None or lv == level]

    def rescaled(self, factor: int) -> "ScheduleTrace":
        recs = [(lv, p, k, a * factor, b * factor) for lv, p, k, a, b in self.records]
        return ScheduleTrace(self.scale * factor, dict(self.processors), recs,
                             self.horizon * factor, list(self.tasks), list(self.misses),
                             self.leftover)

    def merged(self) -> list:
        """Records with abutting pieces of the same (level, processor, label) fused."""
        out = []
        last = {}
        for r in sorted(self.records, key=lambda r: (r[0], r[1], r[3])):
            lv, p, k, a, b = r
            j = last.get((lv, p))
            if j is not None and out[j][2] == k and out[j][4] == a:
                out[j] = (lv, p, k, out[j][3], b)
            else:
                last[(lv, p)] = len(out)
                out.append(r)
        return sorted(out, key=lambda r: (r[0], r[3], r[1]))

    # --- text format ---------------------------------------------------------

    def to_text(self) -> str:
        S = self.scale
        lines = [HEADER]
        lines.append("# processors " + " ".join(f"{lv}:{c}" for lv, c in sorted(self.processors.items())))
        lines.append(f"# horizon {fmt(Fraction(self.horizon, S))}")
        for t in self.tasks:
            tag = " dummy" if t.dummy else ""
            lines.append(f"# task {t.id} {fmt(t.period)} {fmt(t.utilization)} {fmt(t.start)}{tag}")
        for tid, d, left in self.misses:
            lines.append(f"# miss {tid} {fmt(d)} {fmt(left)}")
        lines.append("# level processor node t1 t2")
        for lv, p, k, a, b in self.records:
            lines.append(f"{lv} {p} {k} {fmt(Fraction(a, S))} {fmt(Fraction(b, S))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScheduleTrace":
        """Parse :meth:`to_text` output.

        Malformed data lines raise ValueError with the line number; semantic
        problems (overlaps and so on) are left to the validator.
        """
        procs, tasks, misses = {}, [], []
        horizon = None
        raw = []
        for no, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                if line.startswith("#"):
                    parts = line[1:].split()
                    if not parts:
                        continue
                    if parts[0] == "processors":
                        for item in parts[1:]:
                            lv, c = item.split(":")
                            procs[int(lv)] = int(c)
                    elif parts[0] == "horizon":
                        horizon = Fraction(parts[1])
                    elif parts[0] == "task":
                        tid, period, u, start = parts[1:5]
                        tasks.append(Task(int(tid), Fraction(period), Fraction(u), Fraction(start),
                                          dummy="dummy" in parts[5:]))
                    elif parts[0] == "miss":
                        misses.append((int(parts[1]), Fraction(parts[2]), Fraction(parts[3])))
                    continue
                lv, p, k, a, b = line.split()
                raw.append((int(lv), int(p), int(k), Fraction(a), Fraction(b)))
            except (ValueError, IndexError, ZeroDivisionError) as e:
                raise ValueError(f"line {no}: cannot parse {line!r} ({e})") from None
        times = [x for r in raw for x in r[3:]]
        if horizon is None:
            horizon = max(times, default=Fraction(0))
        S = 1
        for x in times + [horizon]:
            S = math.lcm(S, x.denominator)
        recs = [(lv, p, k, int(a * S), int(b * S)) for lv, p, k, a, b in raw]
        if not procs:
            for lv, p, *_ in raw:
                procs[lv] = max(procs.get(lv, 0), p + 1)
        return cls(S, procs, recs, int(horizon * S), tasks, misses)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> "ScheduleTrace":
        with open(path) as fh:
            return cls.from_text(fh.read())

    # --- SVG -------------------------------------------------------------------

    def to_svg(self, width=900, row=22, names: Optional[dict] = None) -> str:
        """Gantt chart with one group of rows per level, highest level on top."""
        S = self.scale
        end = Fraction(self.horizon, S) or Fraction(1)
        left, pad = 70, 18
        levels = sorted(self.processors, reverse=True)
        height = pad + sum(self.processors[lv] * row + pad for lv in levels) + 20
        xs = lambda t: left + float(t / end) * (width - left - 10)
        palette = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                   "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"]
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
               f'font-family="sans-serif" font-size="11">']
        y = pad
        base = {}
        for lv in levels:
            base[lv] = y
            out.append(f'<g id="level-{lv}">')
            out.append(f'<text x="4" y="{y - 4}" font-weight="bold">level {lv}</text>')
            for p in range(self.processors[lv]):
                yy = y + p * row
                out.append(f'<text x="8" y="{yy + row * 0.7:.1f}">P{p}</text>')
                out.append(f'<line x1="{left}" y1="{yy + row}" x2="{width - 10}" y2="{yy + row}" stroke="#ccc"/>')
            for l2, p, k, a, b in self.records:
                if l2 != lv:
                    continue
                x1, x2 = xs(Fraction(a, S)), xs(Fraction(b, S))
                yy = y + p * row + 2
                label = names.get((lv, k), str(k)) if names else str(k)
                out.append(f'<rect x="{x1:.2f}" y="{yy}" width="{max(x2 - x1, 0.5):.2f}" '
                           f'height="{row - 4}" fill="{palette[hash(k) % len(palette)]}" stroke="#222" '
                           f'stroke-width="0.4"><title>{label} [{fmt(Fraction(a, S))}, '
                           f'{fmt(Fraction(b, S))})</title></rect>')
                if x2 - x1 > 14:
                    out.append(f'<text x="{(x1 + x2) / 2:.1f}" y="{yy + row * 0.6:.1f}" '
                               f'text-anchor="middle" fill="white">{label}</text>')
            out.append("</g>")
            y += self.processors[lv] * row + pad
        out.append(f'<text x="{left}" y="{height - 4}">0</text>')
        out.append(f'<text x="{width - 10}" y="{height - 4}" text-anchor="end">{fmt(end)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
