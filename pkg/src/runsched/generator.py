"""Random task-set generation for the batch experiments."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .model import Task, TaskSystem, pad_to_full_utilization


def randfixedsum(n: int, total: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from {x in [0, 1]^n : sum(x) = total}.

    Stafford's algorithm: the feasible polytope is cut into simplices whose
    volumes are tabulated once, then a simplex and a point inside it are drawn.
    """
    if not 0 <= total <= n:
        raise ValueError(f"cannot split {total} into {n} values in [0, 1]")
    if n == 1:
        return np.array([float(total)])
    k = int(np.floor(total))
    if k == n:
        return np.ones(n)
    s = float(total)
    s1 = s - np.arange(k, k - n, -1)
    s2 = np.arange(k + n, k, -1) - s
    tiny = np.finfo(float).tiny
    huge = np.finfo(float).max
    w = np.zeros((n, n + 1))
    w[0, 1] = huge
    t = np.zeros((n - 1, n))
    for i in range(2, n + 1):
        tmp1 = w[i - 2, 1:i + 1] * s1[:i] / i
        tmp2 = w[i - 2, 0:i] * s2[n - i:n] / i
        w[i - 1, 1:i + 1] = tmp1 + tmp2
        tmp3 = w[i - 1, 1:i + 1] + tiny
        up = s2[n - i:n] > s1[:i]
        t[i - 2, :i] = np.where(up, tmp2 / tmp3, 1 - tmp1 / tmp3)

    x = np.zeros(n)
    rt = rng.uniform(size=n - 1)  # which simplex
    rs = rng.uniform(size=n - 1)  # where inside it
    j = k + 1
    sm, pr = 0.0, 1.0
    for i in range(n - 1, 0, -1):
        e = 1 if rt[n - i - 1] <= t[i - 1, j - 1] else 0
        sx = rs[n - i - 1] ** (1.0 / i)
        sm += (1.0 - sx) * pr * s / (i + 1)
        pr *= sx
        x[n - i - 1] = sm + pr * e
        s -= e
        j -= e
    x[n - 1] = sm + pr * s
    return x[rng.permutation(n)]


def seed_sequence(seed: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *map(int, extra)])


def _draw(n, m, lo, hi, rng):
    u = randfixedsum(n, m, rng)
    periods = rng.integers(lo, hi + 1, size=n)
    wcets = []
    for ui, T in zip(u, periods):
        T = int(T)
        wcets.append(min(T, max(1, int(round(float(ui) * T)))))
    periods = [int(T) for T in periods]
    total = sum((Fraction(c, T) for c, T in zip(wcets, periods)), Fraction(0))
    while total > m:
        cands = [i for i in range(n) if wcets[i] > 1]
        if not cands:
            return None
        i = max(cands, key=lambda i: (Fraction(wcets[i], periods[i]), -i))
        total -= Fraction(1, periods[i])
        wcets[i] -= 1
    return periods, wcets


def generate_taskset(n: int, m: int, period_range=(5, 100), seed=None,
                     rng=None, dummy_period_cap=None, retries=100) -> TaskSystem:
    """``n`` random integer tasks with total utilization at most ``m``, padded to ``m``.

    Utilizations are drawn uniformly with fixed sum ``m``, periods uniformly
    from the integer range, and each ``c_i = max(1, round(u_i * T_i))``.
    Rounding may overshoot ``m``; the largest-utilization task that can
    still shrink loses one unit until it fits.  Dummy tasks then absorb the
    residual.  If even all-ones overshoots (tiny periods), the draw is
    repeated, up to ``retries`` times.
    """
    if not (m >= 1 and n >= m):
        raise ValueError(f"need n >= m >= 1, got n={n}, m={m}")
    lo, hi = period_range
    if not 0 < lo <= hi:
        raise ValueError(f"bad period range {period_range}")
    if rng is None:
        rng = np.random.default_rng(seed)
    for _ in range(retries):
        drawn = _draw(n, m, lo, hi, rng)
        if drawn is not None:
            periods, wcets = drawn
            break
    else:
        raise RuntimeError(f"no integer task set with n={n}, m={m} after {retries} draws")
    tasks = [Task.from_wcet(i + 1, periods[i], wcets[i]) for i in range(n)]
    return pad_to_full_utilization(tasks, m, period_cap=dummy_period_cap)
