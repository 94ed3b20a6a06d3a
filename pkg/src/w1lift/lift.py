"""Lifts of measure curves to probability measures on step curves.

``build_lift`` is the dyadic construction: optimal couplings between
consecutive samples, glued into a path measure, each path turned into a
step curve by the filling map. The remaining functions check the
identities such a lift should satisfy against the measure curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .curves import StepCurve, _check_interval
from .space import EPS, MetricSpace
from .transport import Coupling, GluingTooLarge, glue_chain, shuffled_coupling, w1, w1_distance
from .wcurves import CurveSamplingError, MeasureCurve, decompose_variation, dyadic_grid, uniform_grid

WEIGHT_TOL = 1e-9
MARGINAL_TOL = 1e-9
MAX_MARKOV_ATOMS = 20000


class LiftInputError(ValueError):
    pass


class LiftVerificationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Lift:
    """Finitely many weighted step curves on one space.

    ``grid`` records the times the lift was built on (if any); ``source``
    tells the checks whether the chain-equality identity is expected.
    """

    space: MetricSpace
    atoms: list
    grid: Optional[tuple] = None
    source: str = "custom"
    pruned: float = 0.0
    gluing: Optional[str] = None

    def __post_init__(self):
        atoms = [(c, float(w)) for c, w in self.atoms]
        if not atoms:
            raise LiftInputError("a lift needs at least one atom")
        total = 0.0
        for c, w in atoms:
            if not isinstance(c, StepCurve):
                raise LiftInputError("lift atoms must be StepCurve instances")
            if w < 0:
                raise LiftInputError(f"negative atom weight {w!r}")
            if min(c.values) < 0 or max(c.values) >= self.space.size:
                raise LiftInputError("atom curve leaves the space")
            total += w
        if abs(total - 1.0) > WEIGHT_TOL:
            raise LiftInputError(f"atom weights sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(t) for t in self.grid))

    def __len__(self):
        return len(self.atoms)

    def _jump_arrays(self):
        """Per atom: jump times and jump sizes as arrays (cached)."""
        cache = self.__dict__.setdefault("_cache", {})
        if "jumps" not in cache:
            d = self.space.dist
            out = []
            for c, _ in self.atoms:
                v = np.asarray(c.values)
                out.append((np.asarray(c.jump_times), d[v[:-1], v[1:]]))
            cache["jumps"] = out
        return cache["jumps"]

    def jump_table(self):
        """All weighted jumps sorted by time, with cumulative mass (cached)."""
        cache = self.__dict__.setdefault("_cache", {})
        if "table" not in cache:
            arrays = self._jump_arrays()
            times = np.concatenate([t for t, _ in arrays] + [np.zeros(0)])
            mass = np.concatenate([s * w for (_, s), (_, w) in zip(arrays, self.atoms)] + [np.zeros(0)])
            order = np.argsort(times, kind="stable")
            cache["table"] = (times[order], np.concatenate([[0.0], np.cumsum(mass[order])]))
        return cache["table"]

    def variation_mass(self, a: float, b: float, kind: str = "[]") -> float:
        """Weighted lift variation on an interval, same visibility rule as the curves."""
        times, cum = self.jump_table()
        lo = np.searchsorted(times, a, side="right")
        hi = np.searchsorted(times, b, side="right" if kind[1] == "]" else "left")
        return float(cum[max(hi, lo)] - cum[lo])

    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def positions(self, times) -> np.ndarray:
        """Point index of every atom at every time, shape ``(atoms, times)``."""
        times = np.asarray(times, dtype=float)
        out = np.empty((len(self.atoms), times.size), dtype=np.int64)
        for k, (c, _) in enumerate(self.atoms):
            jt = np.asarray(c.jump_times)
            out[k] = np.asarray(c.values)[np.searchsorted(jt, times, side="right")]
        return out

    def marginals(self, times) -> np.ndarray:
        """Time marginals, shape ``(times, points)``."""
        pos, w = self.positions(times), self.weights()
        return np.array([np.bincount(pos[:, k], weights=w, minlength=self.space.size)
                         for k in range(pos.shape[1])]).reshape(pos.shape[1], self.space.size)

    def marginal(self, t: float) -> np.ndarray:
        return self.marginals([t])[0]

    def joint(self, s: float, t: float) -> Coupling:
        """Law of ``(gamma_s, gamma_t)``."""
        pos = self.positions([s, t])
        return _pair_coupling(pos[:, 0], pos[:, 1], self.weights(), self.space.size)

    def joints(self, times) -> list:
        """Laws of ``(gamma_{t_i}, gamma_{t_{i+1}})`` for consecutive times."""
        pos, w, n = self.positions(times), self.weights(), self.space.size
        return [_pair_coupling(pos[:, i], pos[:, i + 1], w, n) for i in range(pos.shape[1] - 1)]

    def same_atoms(self, other: "Lift", tol: float = 1e-12) -> bool:
        a = sorted((c.jump_times, c.values, w) for c, w in self.atoms)
        b = sorted((c.jump_times, c.values, w) for c, w in other.atoms)
        if len(a) != len(b):
            return False
        return all(x[:2] == y[:2] and abs(x[2] - y[2]) <= tol for x, y in zip(a, b))

    def to_json(self) -> dict:
        out = {
            "space": self.space.to_json(),
            "atoms": [{"curve": c.to_json(), "weight": w} for c, w in self.atoms],
            "source": self.source,
            "gluing": self.gluing,
        }
        if self.grid is not None:
            out["grid"] = list(self.grid)
        return out

    @classmethod
    def from_json(cls, data, space: Optional[MetricSpace] = None) -> "Lift":
        if isinstance(data, str):
            data = json.loads(data)
        if isinstance(data, list):
            data = {"atoms": data}
        if space is None:
            if "space" not in data:
                raise LiftInputError("lift JSON without a space needs one supplied")
            space = MetricSpace.from_json(data["space"])
        atoms = [(StepCurve.from_json(a["curve"]), a["weight"]) for a in data["atoms"]]
        return cls(space, atoms, data.get("grid"), data.get("source", "custom"),
                   0.0, data.get("gluing"))


def _pair_coupling(x: np.ndarray, y: np.ndarray, w: np.ndarray, n: int) -> Coupling:
    keys, inv = np.unique(x * n + y, return_inverse=True)
    mass = np.bincount(inv.ravel(), weights=w)
    return Coupling({(int(k // n), int(k % n)): float(m) for k, m in zip(keys, mass)}, n)


def _dyadic_samples(mc: MeasureCurve, level: int):
    times = dyadic_grid(level)
    try:
        return times, [mc.at(t) for t in times]
    except CurveSamplingError as err:
        raise LiftInputError(f"curve cannot be sampled at level {level}: {err}") from None


def chain_couplings(mc: MeasureCurve, level: int):
    """Optimal couplings between consecutive dyadic samples, with the samples."""
    times, samples = _dyadic_samples(mc, level)
    return times, [w1(mc.space, a, b).coupling for a, b in zip(samples, samples[1:])]


def lift_from_chain(space: MetricSpace, times, couplings: Sequence[Coupling], source: str,
                    gluing: str = "auto", max_atoms: int = MAX_MARKOV_ATOMS) -> Lift:
    """Glue the chain and push every path through the filling map.

    ``gluing="auto"`` uses the iterated (Markov) plan unless it would exceed
    ``max_atoms`` paths, in which case the sequential plan is used.
    """
    if gluing == "auto":
        try:
            plan = glue_chain(couplings, max_atoms=max_atoms)
            gluing = "markov"
        except GluingTooLarge:
            plan = glue_chain(couplings, method="sequential")
            gluing = "sequential"
    else:
        plan = glue_chain(couplings, method=gluing)
    atoms = [(StepCurve.from_samples(times, path), m) for path, m in plan.atoms]
    return Lift(space, atoms, tuple(times), source, plan.pruned, gluing)


def build_lift(mc: MeasureCurve, level: int, gluing: str = "auto") -> Lift:
    """Dyadic lift at ``t^i = i / 2**level``.

    Path ``(x_0, ..., x_K)`` of the glued plan becomes the step curve equal to
    ``x_i`` on ``[t^i, t^{i+1})`` and to ``x_K`` at ``t = 1``.
    """
    if level < 0:
        raise LiftInputError("level must be nonnegative")
    times, couplings = chain_couplings(mc, level)
    return lift_from_chain(mc.space, times, couplings, "built", gluing)


def adversarial_lift(mc: MeasureCurve, level: int, step: int = 0, gluing: str = "auto") -> Lift:
    """Marginal-correct lift with chain coupling ``step`` replaced by a shuffled one."""
    times, couplings = chain_couplings(mc, level)
    if not 0 <= step < len(couplings):
        raise LiftInputError(f"step {step} out of range for level {level}")
    c = couplings[step]
    couplings[step] = shuffled_coupling(c.first_marginal(), c.second_marginal())
    return lift_from_chain(mc.space, times, couplings, "adversarial", gluing)


def check_marginals(lift: Lift, mc: MeasureCurve) -> float:
    """Largest total-variation distance between the lift's time marginals and the samples."""
    diff = lift.marginals(mc.grid) - mc.measures
    return float(0.5 * np.abs(diff).sum(axis=1).max())


def lift_variation(lift: Lift, a: float = 0.0, b: float = 1.0, kind: str = "[]"):
    """``sum_k w_k Var(gamma_k)`` on the interval, and the per-atom values."""
    _check_interval(a, b, kind)
    per_atom = []
    for times, sizes in lift._jump_arrays():
        lo = np.searchsorted(times, a, side="right")
        hi = np.searchsorted(times, b, side="right" if kind[1] == "]" else "left")
        per_atom.append(float(sizes[lo:max(hi, lo)].sum()))
    per_atom = np.array(per_atom)
    weights = np.array([w for _, w in lift.atoms])
    return float(per_atom @ weights), per_atom


def pushforward_curve(lift: Lift, grid) -> MeasureCurve:
    from .wcurves import Generator

    gen = Generator("custom", {}, lift.marginal)
    g = uniform_grid(int(grid)) if isinstance(grid, (int, np.integer)) else np.asarray(grid, dtype=float)
    return MeasureCurve(lift.space, g, lift.marginals(g), gen)


def _grid_intervals(grid: np.ndarray):
    """Dyadic tree of grid-index intervals for ``2**k`` cells, else all index pairs."""
    cells = grid.size - 1
    if cells & (cells - 1) == 0:
        out = []
        width = cells
        while width >= 1:
            out.extend((k, k + width) for k in range(0, cells, width))
            width //= 2
        return out
    return [(i, j) for i in range(cells) for j in range(i + 1, cells + 1)]


@dataclass
class SuperpositionReport:
    rows: list
    violations: list
    chain_sum: Optional[float]
    lift_total: float
    equality_gap: Optional[float]
    max_slack: float
    witness: Optional[dict]
    marginal_error: float
    tol: float

    @property
    def ok(self) -> bool:
        if self.violations:
            return False
        return self.equality_gap is None or self.equality_gap <= self.tol

    def to_dict(self, rows: bool = False) -> dict:
        out = {
            "ok": self.ok,
            "violations": self.violations,
            "chain_sum": self.chain_sum,
            "lift_total": self.lift_total,
            "equality_gap": self.equality_gap,
            "max_slack": self.max_slack,
            "witness": self.witness,
            "marginal_error": self.marginal_error,
            "tol": self.tol,
            "intervals_checked": len(self.rows),
        }
        if rows:
            out["rows"] = self.rows
        return out


def check_superposition_bound(lift: Lift, mc: MeasureCurve, intervals=None, tol: float = 1e-8,
                              expect_equality: Optional[bool] = None) -> SuperpositionReport:
    """Compare curve variation with lift variation on grid intervals ``[t_i, t_j]``.

    The curve side is the sum of W1 increments between ``t_i`` and ``t_j``;
    the lift side counts jumps in ``(t_i, t_j]``. When equality is expected
    (by default for built lifts) the chain sum on the lift's own grid must
    also equal the total lift variation.
    """
    merr = check_marginals(lift, mc)
    if merr > MARGINAL_TOL:
        raise LiftVerificationError(f"lift marginals differ from the curve by {merr:.3e}")
    tol = float(tol + lift.pruned)
    grid = mc.grid
    inc = mc.increments()
    csum = np.concatenate([[0.0], np.cumsum(inc)])
    if intervals is None:
        intervals = _grid_intervals(grid)
    rows, bad = [], []
    max_slack, witness = 0.0, None
    for i, j in intervals:
        a, b = float(grid[i]), float(grid[j])
        lhs = float(csum[j] - csum[i])
        rhs = lift.variation_mass(a, b, "[]")
        row = {"a": a, "b": b, "curve": lhs, "lift": rhs, "slack": rhs - lhs}
        rows.append(row)
        if lhs > rhs + tol:
            bad.append(row)
        if rhs - lhs > max_slack:
            max_slack = rhs - lhs
    total, _ = lift_variation(lift)
    chain = gap = None
    if expect_equality is None:
        expect_equality = lift.source == "built"
    if expect_equality:
        samples = [mc.at(t) for t in (lift.grid if lift.grid is not None else grid)]
        chain = float(sum(w1_distance(mc.space, p, q) for p, q in zip(samples, samples[1:])))
        gap = abs(total - chain)
        if gap > tol:
            # smallest interval carrying the excess, for the failure report
            cells = [r for r in rows if r["slack"] > tol]
            witness = min(cells, key=lambda r: (r["b"] - r["a"], -r["slack"])) if cells else None
    return SuperpositionReport(rows, bad, chain, total, gap, max_slack, witness, merr, tol)


def jump_balance(lift: Lift, mc: MeasureCurve, t: float, profile=None, levels: int = 6):
    """``(lhs, rhs)``: jump mass of the curve at ``t`` against the lift's jumps near ``t``.

    ``lhs`` sums the atoms of the variation decomposition whose finest cell
    contains ``t``. ``rhs`` sums the weighted jumps of the lift atoms in
    ``(t_lo, t_hi]``, the lift-grid times enclosing ``t`` strictly.
    """
    if profile is None:
        profile = decompose_variation(mc, levels)
    lhs = float(sum(a["mass"] for a in profile.atom_estimates
                    if a["cell"][0] <= t <= a["cell"][1]))
    grid = np.asarray(lift.grid if lift.grid is not None else mc.grid)
    below, above = grid[grid < t], grid[grid > t]
    t_lo = float(below[-1]) if below.size else 0.0
    t_hi = float(above[0]) if above.size else 1.0
    rhs = lift.variation_mass(t_lo, t_hi, "(]")
    return lhs, rhs


@dataclass
class GeodesicLiftReport:
    fraction: float
    gap: float
    endpoint_w1: float
    mean_endpoint_distance: float
    jump_profile: list
    max_jump_mass: float
    marginal_error: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.fraction >= 1.0 - 1e-12 and self.gap <= self.tol

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "fraction": self.fraction,
            "gap": self.gap,
            "endpoint_w1": self.endpoint_w1,
            "mean_endpoint_distance": self.mean_endpoint_distance,
            "max_jump_mass": self.max_jump_mass,
            "jump_profile": self.jump_profile,
            "marginal_error": self.marginal_error,
            "tol": self.tol,
        }


def geodesic_lift_check(lift: Lift, mc: MeasureCurve, tol: float = 1e-6) -> GeodesicLiftReport:
    """Weight of atoms that are geodesics, and the endpoint-cost gap.

    The jump profile lists, per jump time, the lift-averaged jump size; a
    continuous limit needs these masses to vanish as the level grows.
    """
    d = lift.space.dist
    frac = mean_end = 0.0
    profile = {}
    for (c, w), (times, sizes) in zip(lift.atoms, lift._jump_arrays()):
        var = float(sizes.sum())
        end = float(d[c.start, c.end])
        if abs(var - end) <= tol:
            frac += w
        mean_end += w * end
    times, cum = lift.jump_table()
    for t, m in zip(times, np.diff(cum)):
        profile[float(t)] = profile.get(float(t), 0.0) + float(m)
    ends = w1_distance(mc.space, mc.measures[0], mc.measures[-1])
    rows = [{"t": t, "mass": m} for t, m in sorted(profile.items())]
    return GeodesicLiftReport(
        fraction=min(frac, 1.0),
        gap=abs(mean_end - ends),
        endpoint_w1=ends,
        mean_endpoint_distance=mean_end,
        jump_profile=rows,
        max_jump_mass=max(profile.values(), default=0.0),
        marginal_error=check_marginals(lift, mc),
        tol=tol,
    )


def grid_speed(lift: Lift, times: Sequence[float]) -> np.ndarray:
    """``sum_k w_k d(gamma_k(t), gamma_k(t + h)) / h`` for consecutive ``times``."""
    d = lift.space.dist
    pos, w = lift.positions(times), lift.weights()
    steps = np.diff(np.asarray(times, dtype=float))
    return np.array([w @ d[pos[:, i], pos[:, i + 1]] for i in range(steps.size)]) / steps
