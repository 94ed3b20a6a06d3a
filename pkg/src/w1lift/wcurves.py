"""Curves of discrete probability measures and their W1 geometry.

A :class:`MeasureCurve` stores samples on a time grid; when it carries a
:class:`Generator` it can be re-sampled at any time, which is what grid
refinement, the variation decomposition and dyadic lifts rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .space import MASS_TOL, MetricSpace, as_weights, line_space
from .transport import w1, w1_distance

ATOM_HALVINGS = 5
ATOM_RTOL = 1e-6


class CurveSamplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Generator:
    """Exact sampling rule ``t -> weights`` with a JSON-able description."""

    name: str
    params: dict
    fn: Callable[[float], np.ndarray] = field(repr=False)

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.fn(float(t)), dtype=float)


def uniform_grid(cells: int) -> np.ndarray:
    return np.arange(cells + 1) / cells


def dyadic_grid(level: int) -> np.ndarray:
    return uniform_grid(2**level)


def _as_grid(grid) -> np.ndarray:
    if isinstance(grid, (int, np.integer)):
        return uniform_grid(int(grid))
    return np.asarray(grid, dtype=float)


@dataclass(frozen=True, eq=False)
class MeasureCurve:
    space: MetricSpace
    grid: np.ndarray
    measures: np.ndarray
    generator: Optional[Generator] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        m = np.array(self.measures, dtype=float)
        if g.ndim != 1 or g.size < 2 or g[0] != 0.0 or g[-1] != 1.0 or np.any(np.diff(g) <= 0):
            raise CurveSamplingError("grid must be strictly increasing from 0 to 1")
        if m.shape != (g.size, self.space.size):
            raise CurveSamplingError(f"measures shape {m.shape} != {(g.size, self.space.size)}")
        if np.any(m < 0) or np.max(np.abs(m.sum(axis=1) - 1.0)) > MASS_TOL:
            raise CurveSamplingError("every sample must be a probability vector")
        g.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "measures", m)
        object.__setattr__(self, "_index", {float(t): k for k, t in enumerate(g)})

    @classmethod
    def sample(cls, space: MetricSpace, generator: Generator, grid) -> "MeasureCurve":
        g = _as_grid(grid)
        return cls(space, g, np.array([generator(t) for t in g]), generator)

    def at(self, t: float) -> np.ndarray:
        k = self._index.get(float(t))
        if k is not None:
            return self.measures[k]
        if self.generator is None:
            raise CurveSamplingError(f"t={t!r} is off the grid and the curve has no generator")
        if not 0.0 <= t <= 1.0:
            raise CurveSamplingError(f"t={t!r} outside [0, 1]")
        return self.generator(t)

    def refine(self, grid) -> "MeasureCurve":
        if self.generator is None:
            raise CurveSamplingError("refinement needs a generator")
        return MeasureCurve.sample(self.space, self.generator, grid)

    def restrict(self, times: Sequence[float]) -> "MeasureCurve":
        times = np.asarray(times, dtype=float)
        return MeasureCurve(self.space, times, np.array([self.at(t) for t in times]), self.generator)

    def increments(self) -> np.ndarray:
        """``W1(mu_{t_i}, mu_{t_{i+1}})`` for each grid cell."""
        if "inc" not in self._cache:
            m = self.measures
            self._cache["inc"] = np.array(
                [w1_distance(self.space, m[i], m[i + 1]) for i in range(len(m) - 1)]
            )
        return self._cache["inc"]

    @property
    def uniform(self) -> bool:
        dt = np.diff(self.grid)
        return bool(np.all(np.abs(dt - dt[0]) <= 1e-12))

    def to_json(self) -> dict:
        out = {"space": self.space.to_json(), "grid": self.grid.tolist()}
        if self.generator is not None and self.generator.name in GENERATORS:
            out["generator"] = {"name": self.generator.name, "params": self.generator.params}
        else:
            out["measures"] = self.measures.tolist()
        return out

    @classmethod
    def from_json(cls, data) -> "MeasureCurve":
        if isinstance(data, str):
            data = json.loads(data)
        gen = data.get("generator")
        if gen is not None:
            curve = build_generator_curve(gen["name"], gen.get("params", {}))
            if "grid" in data:
                curve = curve.refine(data["grid"])
            return curve
        space = MetricSpace.from_json(data["space"])
        return cls(space, data["grid"], data["measures"])


def curve_variation(mc: MeasureCurve, i0: int = 0, i1: Optional[int] = None) -> float:
    """Sum of W1 increments over grid cells ``i0 .. i1 - 1`` (all cells by default)."""
    inc = mc.increments()
    return float(inc[i0:i1].sum())


def metric_derivative(mc: MeasureCurve, t: float, h: float) -> float:
    if h == 0 or not (0.0 <= t <= 1.0 and 0.0 <= t + h <= 1.0):
        raise CurveSamplingError(f"need h != 0 and t, t+h in [0, 1]; got t={t!r}, h={h!r}")
    return w1_distance(mc.space, mc.at(t), mc.at(t + h)) / abs(h)


def is_bv_geodesic(mc: MeasureCurve, tol: float = 1e-9) -> bool:
    ends = w1_distance(mc.space, mc.measures[0], mc.measures[-1])
    return abs(curve_variation(mc) - ends) <= tol


def is_constant_speed(mc: MeasureCurve, tol: float = 1e-9) -> bool:
    if not mc.uniform:
        raise CurveSamplingError("constant-speed test needs a uniform grid")
    dt = mc.grid[1] - mc.grid[0]
    speed = w1_distance(mc.space, mc.measures[0], mc.measures[-1])
    if np.any(np.abs(mc.increments() - dt * speed) > tol):
        return False
    return is_bv_geodesic(mc, tol)


@dataclass
class VariationProfile:
    grid: np.ndarray
    interval_masses: np.ndarray
    atom_estimates: list
    ac_density: np.ndarray
    ac_estimate: float
    atom_estimate: float
    residual_estimate: float
    fine_variation: float
    refinement_gap: float
    levels: int

    @property
    def total(self) -> float:
        return float(self.interval_masses.sum())

    def to_dict(self) -> dict:
        return {
            "levels": self.levels,
            "total": self.total,
            "fine_variation": self.fine_variation,
            "refinement_gap": self.refinement_gap,
            "atoms": self.atom_estimates,
            "atom_estimate": self.atom_estimate,
            "ac_estimate": self.ac_estimate,
            "residual_estimate": self.residual_estimate,
        }

    def csv_rows(self):
        for t, inc, rho in zip(self.grid[:-1], self.interval_masses, self.ac_density):
            yield float(t), float(inc), float(rho)


def _refined_increments(mc: MeasureCurve, lo: float, hi: float, levels: int):
    """Increments of ``[lo, hi]`` split into ``2**l`` equal cells, for ``l = 0..levels``."""
    n = 2**levels
    times = [lo + (hi - lo) * k / n for k in range(n + 1)]
    times[-1] = hi
    samples = [mc.at(t) for t in times]
    out = []
    for l in range(levels + 1):
        step = 2 ** (levels - l)
        out.append(np.array([
            w1_distance(mc.space, samples[k], samples[k + step]) for k in range(0, n, step)
        ]))
    return times, out


def decompose_variation(mc: MeasureCurve, levels: int = 6, ac_rtol: float = 1e-3) -> VariationProfile:
    """Split the W1 variation into jump, absolutely continuous and residual parts.

    Each grid cell is halved ``levels`` times. A cell holds an atom when the
    heaviest sub-cell keeps the same increment (relative ``1e-6``) through
    the last five halvings; the atom mass is that limiting increment. A
    finest sub-cell counts as absolutely continuous when its increment per
    unit time agrees, within ``ac_rtol`` relative, with that of each of its
    five nearest ancestors. Whatever is neither is reported as residual
    (the Cantor-like part at this resolution).
    """
    if mc.generator is None:
        raise CurveSamplingError("decompose_variation needs a generator to refine")
    if levels < ATOM_HALVINGS:
        raise ValueError(f"levels must be at least {ATOM_HALVINGS}")
    base = mc.increments()
    atoms, dens = [], np.zeros(base.size)
    ac_total = atom_total = fine_total = 0.0
    for i in range(base.size):
        lo, hi = float(mc.grid[i]), float(mc.grid[i + 1])
        times, incs = _refined_increments(mc, lo, hi, levels)
        fine_total += float(incs[-1].sum())
        # heaviest chain, lowest index on ties
        chain, k = [float(incs[0][0])], 0
        for l in range(1, levels + 1):
            kids = incs[l][2 * k: 2 * k + 2]
            k = 2 * k + int(np.argmax(kids))
            chain.append(float(incs[l][k]))
        tail = chain[-ATOM_HALVINGS - 1:]
        atom_cell = None
        if tail[-1] > 1e-12 and all(abs(b - a) <= ATOM_RTOL * a for a, b in zip(tail, tail[1:])):
            atom_cell = k
            atoms.append({"t": times[k + 1], "cell": [times[k], times[k + 1]], "mass": tail[-1]})
            atom_total += tail[-1]
        ac_cell = 0.0
        h_fine = (hi - lo) / 2**levels
        for k_f in range(2**levels):
            if k_f == atom_cell:
                continue
            rho = incs[-1][k_f] / h_fine
            stable = True
            for up in range(1, ATOM_HALVINGS + 1):
                if levels - up < 0:
                    break
                anc = incs[levels - up][k_f >> up] / (h_fine * 2**up)
                if abs(rho - anc) > ac_rtol * max(anc, rho):
                    stable = False
                    break
            if stable:
                ac_cell += incs[-1][k_f]
        ac_total += ac_cell
        dens[i] = ac_cell / (hi - lo)
    residual = fine_total - atom_total - ac_total
    return VariationProfile(
        grid=mc.grid,
        interval_masses=base.copy(),
        atom_estimates=atoms,
        ac_density=dens,
        ac_estimate=float(ac_total),
        atom_estimate=float(atom_total),
        residual_estimate=float(max(residual, 0.0)),
        fine_variation=fine_total,
        refinement_gap=fine_total - float(base.sum()),
        levels=levels,
    )


# ---------------------------------------------------------------------------
# generators


def gen_linear(space: MetricSpace, mu0, mu1, grid=16) -> MeasureCurve:
    """``(1 - t) mu0 + t mu1``."""
    a, b = as_weights(mu0).copy(), as_weights(mu1).copy()
    if a.size != space.size or b.size != space.size:
        raise ValueError("endpoint measures must live on the space")
    gen = Generator("linear", {"space": space.to_json(), "mu0": a.tolist(), "mu1": b.tolist()},
                    lambda t: (1.0 - t) * a + t * b)
    return MeasureCurve.sample(space, gen, grid)


def cantor_function(t: float, depth: int) -> float:
    """Piecewise-linear approximant of the Cantor function after ``depth`` subdivisions."""
    value, scale = 0.0, 1.0
    for _ in range(depth):
        if t < 1 / 3:
            t = 3.0 * t
        elif t <= 2 / 3:
            return value + 0.5 * scale
        else:
            value += 0.5 * scale
            t = 3.0 * t - 2.0
        scale *= 0.5
    return value + scale * t


def gen_cantor(depth: int, grid=16) -> MeasureCurve:
    """``(1 - c(t)) delta_0 + c(t) delta_1`` with ``c`` the depth-``depth`` Cantor approximant."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    space = line_space([0.0, 1.0])

    def fn(t):
        c = cantor_function(t, depth)
        return np.array([1.0 - c, c])

    return MeasureCurve.sample(space, Generator("cantor", {"depth": depth}, fn), grid)


def slice_space(cells: int) -> MetricSpace:
    return line_space((np.arange(cells) + 0.5) / cells)


def gen_slice2d(eps: float = 0.25, y: float = 0.6, cells: int = 8, grid=16) -> MeasureCurve:
    """Horizontal slice of the two-strip example, discretised on cell midpoints of [0, 1].

    Half the mass is uniform on [0, 1]; the other half is uniform on the left
    strip ``[0, eps]`` while ``t <= y`` and on the right strip ``[1 - eps, 1]``
    afterwards. ``eps * cells`` must be a whole number.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if not 0.0 <= y <= 1.0:
        raise ValueError("y must lie in [0, 1]")
    width = eps * cells
    if abs(width - round(width)) > 1e-9 or round(width) < 1:
        raise ValueError("eps * cells must be a positive integer")
    width = int(round(width))
    space = slice_space(cells)
    base = np.full(cells, 0.5 / cells)
    left, right = base.copy(), base.copy()
    left[:width] += 0.5 / width
    right[cells - width:] += 0.5 / width
    gen = Generator("slice2d", {"eps": eps, "y": y, "cells": cells},
                    lambda t: left if t <= y else right)
    return MeasureCurve.sample(space, gen, grid)


# periodic construction ------------------------------------------------------


def cantor_sigma0(depth: int, cells: int) -> np.ndarray:
    """Depth-``depth`` Cantor measure on the grid ``k / cells``: mass ``2**-depth`` per piece."""
    lefts = [Fraction(0)]
    for level in range(1, depth + 1):
        shift = Fraction(2, 3**level)
        lefts = [x for l in lefts for x in (l, l + shift)]
    w = np.zeros(cells)
    for l in lefts:
        w[int(round(l * cells)) % cells] += 2.0**-depth
    if np.count_nonzero(w) != len(lefts):
        raise ValueError(f"grid of {cells} cells too coarse to separate depth-{depth} pieces")
    return w


@dataclass(frozen=True, eq=False)
class PeriodicSigma:
    """Translates of a periodically extended measure on the grid ``k / K``.

    Curve ``alpha_j = j / K`` at time ``t`` sits at ``sigma((alpha_j, alpha_j + t])``.
    """

    sigma0: np.ndarray
    values: np.ndarray  # sorted distinct positions
    cum: np.ndarray     # cum[p] = sigma((0, p / K]) for p = 0 .. 2K

    @classmethod
    def build(cls, sigma0) -> "PeriodicSigma":
        w = np.asarray(sigma0, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError("sigma0 must be a probability vector on the grid k / K")
        K = w.size
        periodic = np.concatenate([w, w, w[:1]])
        cum = np.concatenate([[0.0], np.cumsum(periodic[1:2 * K + 1])])
        vals = np.unique(np.concatenate(
            [np.round(cum[j:j + K + 1] - cum[j], 12) for j in range(K)]))
        return cls(w, vals, cum)

    @property
    def K(self) -> int:
        return self.sigma0.size

    def index(self, x):
        k = np.searchsorted(self.values, np.round(x, 12))
        return np.minimum(k, self.values.size - 1)

    def weights(self, t: float) -> np.ndarray:
        K = self.K
        m = int(np.floor(t * K + 1e-9))
        j = np.arange(K)
        idx = self.index(self.cum[j + m] - self.cum[j])
        return np.bincount(idx, minlength=self.values.size) / K

    def curve_points(self, j: int):
        """Jump times and point indices of the curve started at ``alpha = j / K``."""
        K = self.K
        idx = self.index(self.cum[j:j + K + 1] - self.cum[j])
        at = np.flatnonzero(np.diff(idx)) + 1
        return (at / K).tolist(), [int(idx[0])] + idx[at].tolist()


def gen_periodic_sigma(sigma0, grid=None):
    """Constant-speed W1 geodesic from ``delta_0`` to ``delta_1`` built from translates of ``sigma0``.

    ``sigma0`` holds weights on the grid ``k / K`` of ``[0, 1)``. Returns the
    measure curve and its canonical lift (one curve per ``alpha = j / K``,
    equal weights). Grid times should be multiples of ``1 / K``.
    """
    from .curves import StepCurve
    from .lift import Lift

    ps = PeriodicSigma.build(sigma0)
    space = line_space(ps.values)
    K = ps.K
    if grid is None:
        grid = K
    gen = Generator("periodic_sigma", {"sigma0": ps.sigma0.tolist()}, ps.weights)
    mc = MeasureCurve.sample(space, gen, grid)
    atoms = []
    for j in range(K):
        times, vals = ps.curve_points(j)
        atoms.append((StepCurve(tuple(times), tuple(vals)), 1.0 / K))
    return mc, Lift(space, atoms)


def gen_backtrack(grid=16) -> MeasureCurve:
    """``delta_0 -> delta_1 -> delta_0``: linear out to ``t = 1/2`` and back."""
    space = line_space([0.0, 1.0])

    def fn(t):
        s = 2.0 * t if t <= 0.5 else 2.0 - 2.0 * t
        return np.array([1.0 - s, s])

    return MeasureCurve.sample(space, Generator("backtrack", {}, fn), grid)


def gen_waypoints(space: MetricSpace, waypoints, grid=16) -> MeasureCurve:
    """Piecewise-linear curve through ``waypoints`` placed at equally spaced times."""
    pts = [np.asarray(as_weights(w), dtype=float) for w in waypoints]
    if len(pts) < 2 or any(p.size != space.size for p in pts):
        raise ValueError("need at least two waypoint measures on the space")
    legs = len(pts) - 1

    def fn(t):
        k = min(int(t * legs), legs - 1)
        s = t * legs - k
        return (1.0 - s) * pts[k] + s * pts[k + 1]

    gen = Generator("waypoints", {"space": space.to_json(), "waypoints": [p.tolist() for p in pts]}, fn)
    return MeasureCurve.sample(space, gen, grid)


def arc_space(segments: int) -> MetricSpace:
    """``segments + 1`` points on a half circle, consecutive chords of length ``1 / segments``."""
    theta = np.pi * np.arange(segments + 1) / segments
    radius = 1.0 / (2.0 * segments * np.sin(np.pi / (2.0 * segments)))
    pts = radius * np.column_stack([-np.cos(theta), np.sin(theta)])
    return MetricSpace.from_coords(pts)


def gen_ac_not_enough(segments: int = 8, grid=None):
    """Half a moving Dirac from one end of a polyline to the other, plus half of its length measure.

    The polyline has unit length but is not a segment. Returns the measure
    curve and a lift whose particles only ever step to the neighbouring
    vertex: a conveyor of weight ``1 / (2 * segments)`` particles, plus two
    resting atoms of weight ``1 / (4 * segments)`` at the ends. Its
    marginals agree with the curve at the times ``k / segments``.
    """
    from .curves import StepCurve
    from .lift import Lift

    G = int(segments)
    if G < 2:
        raise ValueError("need at least two segments")
    space = arc_space(G)
    c, rest = 1.0 / (2 * G), 1.0 / (4 * G)

    def fn(t):
        w = np.full(G + 1, c)
        w[0] = 0.5 * (1.0 - t) + rest
        w[G] = 0.5 * t + rest
        return w

    gen = Generator("ac_not_enough", {"segments": G}, fn)
    mc = MeasureCurve.sample(space, gen, G if grid is None else grid)
    times = [m / G for m in range(G + 1)]
    atoms = [(StepCurve.constant(0), rest), (StepCurve.constant(G), rest)]
    for a in range(G):
        # waits at the start until a / G, then one vertex per time step
        atoms.append((StepCurve.from_samples(times, [max(0, min(m - a, G)) for m in range(G + 1)]), c))
    for k in range(1, G):
        atoms.append((StepCurve.from_samples(times, [min(k + m, G) for m in range(G + 1)]), c))
    return mc, Lift(space, atoms, tuple(times), "conveyor")


def sigma0_named(kind: str, cells: int, depth: int = 8) -> np.ndarray:
    if kind == "uniform":
        return np.full(cells, 1.0 / cells)
    if kind == "dirac":
        w = np.zeros(cells)
        w[0] = 1.0
        return w
    if kind == "cantor":
        return cantor_sigma0(depth, cells)
    raise ValueError(f"unknown sigma0 kind {kind!r}")


GENERATORS = ("linear", "cantor", "slice2d", "periodic_sigma", "backtrack", "ac_not_enough", "waypoints")


def build_generator_curve(name: str, params: dict) -> MeasureCurve:
    """Rebuild a generator-backed curve from its JSON description."""
    p = dict(params)
    grid = p.pop("grid", 16)
    if name == "linear":
        space = MetricSpace.from_json(p["space"])
        return gen_linear(space, p["mu0"], p["mu1"], grid)
    if name == "cantor":
        return gen_cantor(int(p.get("depth", 8)), grid)
    if name == "slice2d":
        return gen_slice2d(float(p.get("eps", 0.25)), float(p.get("y", 0.6)),
                           int(p.get("cells", 8)), grid)
    if name == "waypoints":
        return gen_waypoints(MetricSpace.from_json(p["space"]), p["waypoints"], grid)
    if name == "backtrack":
        return gen_backtrack(grid)
    if name == "ac_not_enough":
        return gen_ac_not_enough(int(p.get("segments", 8)), grid if "grid" in params else None)[0]
    if name == "periodic_sigma":
        if "sigma0" in p:
            w = np.asarray(p["sigma0"], dtype=float)
        else:
            w = sigma0_named(p.get("kind", "dirac"), int(p.get("cells", 16)), int(p.get("depth", 8)))
        return gen_periodic_sigma(w, grid)[0]
    raise ValueError(f"unknown generator {name!r}")
