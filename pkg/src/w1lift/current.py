"""Discrete current equation driven by velocity fields read off a lift.

For a grid step ``[t_i, t_i + h]`` the velocity ``v^x(y)`` is the rate at
which mass sitting at ``x`` at time ``t_i`` is found at ``y != x`` at time
``t_i + h``. Mass balance, the speed identity and the a priori bound are
then statements about these rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lift import MARGINAL_TOL, Lift, LiftVerificationError, check_marginals
from .space import MetricSpace, as_weights
from .transport import Coupling, w1_distance
from .wcurves import MeasureCurve

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class VelocityStep:
    """Off-diagonal rates ``(x, y) -> v^x(y)`` for one grid step."""

    t: float
    h: float
    rates: dict
    n: int

    def matrix(self) -> np.ndarray:
        v = np.zeros((self.n, self.n))
        for (x, y), r in self.rates.items():
            v[x, y] = r
        return v

    def perturbed(self, x: int, y: int, delta: float) -> "VelocityStep":
        if x == y:
            raise ValueError("velocities are off-diagonal")
        rates = dict(self.rates)
        rates[(x, y)] = rates.get((x, y), 0.0) + delta
        return VelocityStep(self.t, self.h, rates, self.n)


@dataclass(frozen=True, eq=False)
class VelocityField:
    steps: list

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, i) -> VelocityStep:
        return self.steps[i]


def velocity_from_coupling(coupling: Coupling, mu, t: float, h: float) -> VelocityStep:
    """Rates of a feasible step: ``coupling(x, y) / (h mu(x))`` off the diagonal."""
    if h <= 0:
        raise ValueError("step length must be positive")
    mu = as_weights(mu)
    rates = {}
    for (x, y), m in coupling.entries.items():
        if x != y and m > 0 and mu[x] > 0:
            rates[(x, y)] = float(m / (h * mu[x]))
    return VelocityStep(float(t), float(h), rates, coupling.n)


def extract_velocity(lift: Lift, mc: MeasureCurve, i: int) -> VelocityStep:
    """Velocity at grid step ``i`` by disintegrating the lift at ``t_i``."""
    err = check_marginals(lift, mc)
    if err > MARGINAL_TOL:
        raise LiftVerificationError(f"lift marginals differ from the curve by {err:.3e}")
    t, s = float(mc.grid[i]), float(mc.grid[i + 1])
    return velocity_from_coupling(lift.joint(t, s), mc.measures[i], t, s - t)


def extract_field(lift: Lift, mc: MeasureCurve) -> VelocityField:
    err = check_marginals(lift, mc)
    if err > MARGINAL_TOL:
        raise LiftVerificationError(f"lift marginals differ from the curve by {err:.3e}")
    steps = []
    for i, joint in enumerate(lift.joints(mc.grid)):
        t, s = float(mc.grid[i]), float(mc.grid[i + 1])
        steps.append(velocity_from_coupling(joint, mc.measures[i], t, s - t))
    return VelocityField(steps)


def _flux(mu: np.ndarray, v: VelocityStep) -> np.ndarray:
    """``F[x, y] = mu(x) v^x(y)``."""
    return mu[:, None] * v.matrix()


def current_residual(mc: MeasureCurve, v: VelocityStep, i: int) -> np.ndarray:
    """``d mu / dt - (inflow - outflow)`` at every point, for grid step ``i``."""
    mu, nu = mc.measures[i], mc.measures[i + 1]
    h = float(mc.grid[i + 1] - mc.grid[i])
    f = _flux(mu, v)
    return (nu - mu) / h - (f.sum(axis=0) - f.sum(axis=1))


def speed_identity(mc: MeasureCurve, v: VelocityStep, i: int):
    """``(W1 rate, sum d(x, y) v^x(y) mu(x))`` for grid step ``i``."""
    mu, nu = mc.measures[i], mc.measures[i + 1]
    h = float(mc.grid[i + 1] - mc.grid[i])
    lhs = w1_distance(mc.space, mu, nu) / h
    rhs = float((mc.space.dist * _flux(mu, v)).sum())
    return lhs, rhs


def action(mc: MeasureCurve, field: VelocityField) -> float:
    """``sum_i h sum d(x, y) v_i^x(y) mu_{t_i}(x)``."""
    total = 0.0
    for i, v in enumerate(field.steps):
        h = float(mc.grid[i + 1] - mc.grid[i])
        total += h * float((mc.space.dist * _flux(mc.measures[i], v)).sum())
    return total


@dataclass
class FieldReport:
    max_residual: float
    residuals: list
    speed: list
    max_speed_gap: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_residual": self.max_residual,
            "max_speed_gap": self.max_speed_gap,
            "residuals": self.residuals,
            "speed": self.speed,
            "tol": self.tol,
        }


def verify_field(mc: MeasureCurve, field: VelocityField, tol: float = RESIDUAL_TOL) -> FieldReport:
    res, speed = [], []
    for i, v in enumerate(field.steps):
        r = float(np.max(np.abs(current_residual(mc, v, i))))
        lhs, rhs = speed_identity(mc, v, i)
        res.append(r)
        speed.append({"t": v.t, "w1_rate": lhs, "field_rate": rhs})
    gap = max((abs(s["w1_rate"] - s["field_rate"]) for s in speed), default=0.0)
    return FieldReport(max(res, default=0.0), res, speed, gap, tol)


@dataclass
class Candidate:
    name: str
    curve: MeasureCurve
    field: VelocityField


def candidate_from_lift(name: str, lift: Lift, mc: MeasureCurve) -> Candidate:
    return Candidate(name, mc, extract_field(lift, mc))


def benamou_brenier_compare(space: MetricSpace, mu0, mu1, candidates: Sequence[Candidate],
                            tol: float = 1e-8) -> dict:
    """Action of every admissible candidate against ``W1(mu0, mu1)``.

    A candidate is rejected if its endpoints differ from ``mu0``, ``mu1`` or
    its field leaves a residual above ``tol`` at some step.
    """
    a, b = as_weights(mu0), as_weights(mu1)
    target = w1_distance(space, a, b)
    rows, rejected = [], []
    for c in candidates:
        mc = c.curve
        ends = max(float(np.abs(mc.measures[0] - a).max()), float(np.abs(mc.measures[-1] - b).max()))
        rep = verify_field(mc, c.field, tol)
        if ends > tol or not rep.ok:
            rejected.append({"name": c.name, "endpoint_error": ends, "max_residual": rep.max_residual})
            continue
        rows.append({"name": c.name, "action": action(mc, c.field)})
    best = min((r["action"] for r in rows), default=None)
    attained = [r["name"] for r in rows if abs(r["action"] - target) <= tol]
    ok = best is not None and best >= target - tol and bool(attained)
    return {
        "ok": ok,
        "w1": target,
        "min_action": best,
        "attained_by": attained,
        "candidates": rows,
        "rejected": rejected,
        "tol": tol,
    }


def edge_filter(field: VelocityField, mc: MeasureCurve, edges) -> dict:
    """Share of the transported mass that moves along the given undirected edges.

    Diagnostic only: it reports how far an extracted field is from jumping
    along a graph, and makes no claim that a graph-respecting lift exists.
    """
    allowed = {(int(x), int(y)) for x, y in edges} | {(int(y), int(x)) for x, y in edges}
    on = off = 0.0
    worst = []
    for i, v in enumerate(field.steps):
        mu = mc.measures[i]
        for (x, y), r in sorted(v.rates.items()):
            m = r * mu[x] * v.h
            if (x, y) in allowed:
                on += m
            else:
                off += m
                worst.append({"t": v.t, "x": x, "y": y, "mass": m})
    total = on + off
    worst.sort(key=lambda w: -w["mass"])
    return {"on_edges": on, "off_edges": off,
            "fraction_on_edges": 1.0 if total == 0 else on / total, "largest_off_edge": worst[:10]}


def field_csv_rows(mc: MeasureCurve, field: VelocityField):
    """``(t_i, x, y, v, d(x, y) v mu(x))`` for every nonzero rate."""
    d = mc.space.dist
    for i, v in enumerate(field.steps):
        mu = mc.measures[i]
        for (x, y), r in sorted(v.rates.items()):
            yield v.t, x, y, r, float(d[x, y] * r * mu[x])
