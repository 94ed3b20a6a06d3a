"""Càdlàg piecewise-constant curves in a finite metric space.

A :class:`StepCurve` takes ``values[k]`` on ``[jump_times[k-1], jump_times[k])``
(with ``jump_times[-1]`` read as 0) and ``values[-1]`` from the last jump
through ``t = 1``. A jump at exactly ``t = 1`` means the curve is not
left-continuous at 1.

Intervals are passed as ``(a, b, kind)`` with ``kind`` one of ``"()"``,
``"[]"``, ``"(]"``, ``"[)"``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .space import MetricSpace

KINDS = ("()", "[]", "(]", "[)")


class CurveError(ValueError):
    pass


def _check_interval(a, b, kind):
    if kind not in KINDS:
        raise CurveError(f"interval kind must be one of {KINDS}, got {kind!r}")
    if not (0.0 <= a <= b <= 1.0):
        raise CurveError(f"need 0 <= a <= b <= 1, got a={a!r}, b={b!r}")


def in_interval(t, a, b, kind) -> bool:
    lo = t >= a if kind[0] == "[" else t > a
    hi = t <= b if kind[1] == "]" else t < b
    return lo and hi


@dataclass(frozen=True)
class StepCurve:
    jump_times: tuple
    values: tuple
    left_continuous_at_1: Optional[bool] = field(default=None, compare=False)

    def __post_init__(self):
        times = tuple(float(t) for t in self.jump_times)
        values = tuple(int(v) for v in self.values)
        if len(values) != len(times) + 1:
            raise CurveError(f"{len(values)} values for {len(times)} jumps")
        if any(not 0.0 < t <= 1.0 for t in times):
            raise CurveError("jump times must lie in (0, 1]")
        if any(s >= t for s, t in zip(times, times[1:])):
            raise CurveError("jump times must be strictly increasing")
        if any(u == v for u, v in zip(values, values[1:])):
            raise CurveError("consecutive values must differ; use StepCurve.normalized")
        lc1 = not (times and times[-1] == 1.0)
        if self.left_continuous_at_1 is not None and bool(self.left_continuous_at_1) != lc1:
            raise CurveError("left_continuous_at_1 flag disagrees with a jump at t=1")
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "left_continuous_at_1", lc1)

    @classmethod
    def normalized(cls, jump_times: Sequence[float], values: Sequence[int]) -> "StepCurve":
        """Drop breakpoints that do not change the value."""
        times, vals = [], [int(values[0])]
        for t, v in zip(jump_times, values[1:]):
            if int(v) != vals[-1]:
                times.append(float(t))
                vals.append(int(v))
        return cls(tuple(times), tuple(vals))

    @classmethod
    def constant(cls, x: int) -> "StepCurve":
        return cls((), (x,))

    @classmethod
    def from_samples(cls, grid: Sequence[float], points: Sequence[int]) -> "StepCurve":
        """Filling map: ``points[i]`` on ``[grid[i], grid[i+1])`` and ``points[-1]`` at 1."""
        if len(grid) != len(points):
            raise CurveError("grid and points must have equal length")
        return cls.normalized(grid[1:], points)

    def __call__(self, t: float) -> int:
        return self.values[bisect.bisect_right(self.jump_times, t)]

    def left_limit(self, t: float) -> int:
        return self.values[bisect.bisect_left(self.jump_times, t)]

    @property
    def start(self) -> int:
        return self.values[0]

    @property
    def end(self) -> int:
        return self.values[-1]

    def jumps(self, space: MetricSpace):
        """``(time, distance)`` for every jump."""
        d = space.dist
        return [(t, float(d[u, v])) for t, u, v in zip(self.jump_times, self.values, self.values[1:])]

    def to_json(self) -> dict:
        return {"jumps": list(self.jump_times), "values": list(self.values),
                "lc1": self.left_continuous_at_1}

    @classmethod
    def from_json(cls, data) -> "StepCurve":
        return cls(tuple(data["jumps"]), tuple(data["values"]), data.get("lc1"))


def pointwise_variation(space: MetricSpace, curve: StepCurve, a: float = 0.0, b: float = 1.0,
                        kind: str = "[]") -> float:
    """Supremum of partition sums of ``d(u(t_i), u(t_{i+1}))`` over points in the interval.

    A jump at ``tau`` is visible exactly when ``a < tau`` and ``tau`` belongs
    to the interval: the right-continuous value at ``a`` already sits past
    any jump at ``a``.
    """
    _check_interval(a, b, kind)
    close_right = kind[1] == "]"
    total = 0.0
    for t, dist in curve.jumps(space):
        if a < t and (t < b or (close_right and t == b)):
            total += dist
    return total


def essential_variation(space: MetricSpace, curve: StepCurve) -> float:
    """Variation of the representative that is left-continuous at 1."""
    return pointwise_variation(space, curve, 0.0, 1.0, "[)")


@dataclass(frozen=True)
class AtomicVariationMeasure:
    atoms: tuple

    def mass(self, a: float = 0.0, b: float = 1.0, kind: str = "[]") -> float:
        _check_interval(a, b, kind)
        return float(sum(m for t, m in self.atoms if in_interval(t, a, b, kind)))

    @property
    def total(self) -> float:
        return float(sum(m for _, m in self.atoms))


def variation_measure(space: MetricSpace, curve: StepCurve) -> AtomicVariationMeasure:
    return AtomicVariationMeasure(tuple(curve.jumps(space)))


def diff_quotient_integral(space: MetricSpace, curve: StepCurve, h: float,
                           a: float = 0.0, b: float = 1.0) -> float:
    """Exact ``int_a^{b-h} d(u(t+h), u(t)) / h dt`` for a step curve.

    The integrand only changes at jump times and jump times shifted by ``-h``,
    so the integral is a finite sum over those pieces.
    """
    if not 0.0 < h < b - a or not 0.0 <= a < b <= 1.0:
        raise CurveError(f"need 0 < h < b - a within [0, 1], got h={h!r}, a={a!r}, b={b!r}")
    hi = b - h
    cuts = {a, hi}
    for t in curve.jump_times:
        for s in (t, t - h):
            if a < s < hi:
                cuts.add(s)
    cuts = sorted(cuts)
    d = space.dist
    total = 0.0
    for lo, up in zip(cuts, cuts[1:]):
        if up <= lo:
            continue
        mid = 0.5 * (lo + up)
        total += d[curve(mid + h), curve(mid)] * (up - lo)
    return total / h


def partition_variation_bruteforce(space: MetricSpace, curve: StepCurve, a: float, b: float,
                                   kind: str, probes: Sequence[float]) -> float:
    """Partition sum over ``probes`` restricted to the interval; a lower bound for the variation."""
    pts = sorted(t for t in set(probes) if in_interval(t, a, b, kind))
    d = space.dist
    vals = [curve(t) for t in pts]
    return float(sum(d[u, v] for u, v in zip(vals, vals[1:])))


@dataclass
class BVReport:
    variation: float
    essential_variation: float
    dyadic_sup: float
    halving_violations: list
    sup_gap: float
    pair_violations: list
    lipschitz_violations: list
    tol: float

    @property
    def ok(self) -> bool:
        return (not self.halving_violations and not self.pair_violations
                and not self.lipschitz_violations
                and self.dyadic_sup <= self.essential_variation + self.tol
                and self.essential_variation <= self.dyadic_sup + self.tol)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "variation": self.variation,
            "essential_variation": self.essential_variation,
            "dyadic_sup": self.dyadic_sup,
            "sup_gap": self.sup_gap,
            "halving_violations": self.halving_violations,
            "pair_violations": self.pair_violations,
            "lipschitz_violations": self.lipschitz_violations,
            "tol": self.tol,
        }


def check_bv_equivalences(space: MetricSpace, curve: StepCurve, tol: float = 1e-6,
                          max_level: int = 16, pair_grid: int = 64) -> BVReport:
    """Numerical cross-checks between the variation and its equivalent characterisations.

    * the difference-quotient integral does not decrease when ``h`` is halved;
    * its supremum over dyadic ``h`` down to ``2**-max_level`` matches the
      essential variation within ``tol``;
    * ``d(u(s), u(t)) <= |Du|([s, t])`` and ``<= |Du|((s, t])`` on a grid of
      pairs augmented with all jump times;
    * for every ``phi = d(., x)`` the jumps of ``phi o u`` are bounded by
      those of ``u``.
    """
    hs = [2.0**-k for k in range(1, max_level + 1)]
    ints = [diff_quotient_integral(space, curve, h) for h in hs]
    halving = [
        {"h": h, "l(h)": lh, "l(h/2)": lh2}
        for h, lh, lh2 in zip(hs, ints, ints[1:])
        if lh > lh2 + tol
    ]
    sup = max(ints)
    ess = essential_variation(space, curve)
    measure = variation_measure(space, curve)
    grid = sorted(set(np.linspace(0.0, 1.0, pair_grid + 1).tolist()) | set(curve.jump_times))
    d = space.dist
    pairs = []
    for ii, s in enumerate(grid):
        us = curve(s)
        for t in grid[ii:]:
            dist = d[us, curve(t)]
            closed = measure.mass(s, t, "[]")
            half = measure.mass(s, t, "(]")
            if dist > closed + tol or dist > half + tol:
                pairs.append({"s": s, "t": t, "d": float(dist), "closed": closed, "half_open": half})
    lip = []
    for x in range(space.size):
        phi = d[:, x]
        for (t, jump), u, v in zip(curve.jumps(space), curve.values, curve.values[1:]):
            if abs(phi[u] - phi[v]) > jump + tol:
                lip.append({"x": x, "t": t})
    return BVReport(
        variation=pointwise_variation(space, curve),
        essential_variation=ess,
        dyadic_sup=sup,
        halving_violations=halving,
        sup_gap=abs(sup - ess),
        pair_violations=pairs,
        lipschitz_violations=lip,
        tol=tol,
    )
