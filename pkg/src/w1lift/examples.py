"""Registry of worked examples and the pipeline that verifies each one.

``run_example`` builds the curve and its lifts, runs every applicable check
and returns a JSON-able report plus CSV tables for plotting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import StepCurve
from .current import candidate_from_lift, benamou_brenier_compare, extract_field, extract_velocity, verify_field
from .lift import (Lift, build_lift, check_marginals, check_superposition_bound, geodesic_lift_check,
                   jump_balance, lift_variation, pushforward_curve)
from .space import line_space
from .transport import is_optimal, product_coupling, w1
from .wcurves import (curve_variation, decompose_variation, gen_ac_not_enough, gen_cantor,
                      gen_linear, gen_periodic_sigma, gen_slice2d, is_bv_geodesic, is_constant_speed,
                      metric_derivative, sigma0_named)

EXAMPLES = ("nonunique_lifts", "ac_not_enough", "slice2d", "cantor_cs", "periodic_sigma")

DEFAULTS = {
    "nonunique_lifts": {"alphas": 4, "level": 3},
    "ac_not_enough": {"segments": 8, "level": 3},
    "slice2d": {"eps": 0.25, "y": 0.6, "cells": 8, "grid": 32, "levels": 6, "level": 6},
    "cantor_cs": {"depth": 8, "grid": 32, "levels": 6, "level": 5},
    "periodic_sigma": {"sigma0": "dirac", "cells": 16, "depth": 8, "level": 4},
}


class ExampleError(ValueError):
    pass


@dataclass
class ExampleSpec:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in EXAMPLES:
            raise ExampleError(f"unknown example {self.name!r}; choose from {', '.join(EXAMPLES)}")
        unknown = set(self.params) - set(DEFAULTS[self.name])
        if unknown:
            raise ExampleError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        self.params = {**DEFAULTS[self.name], **self.params}


@dataclass
class Report:
    name: str
    params: dict
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def check(self, name: str, ok: bool, tol=None, **values):
        self.checks.append({"name": name, "ok": bool(ok), "tol": tol, **values})

    def close(self, name: str, value: float, expected: float, tol: float):
        self.check(name, abs(value - expected) <= tol, tol, value=value, expected=expected)

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"example": self.name, "params": self.params, "ok": self.ok,
                "checks": self.checks, "data": self.data}


def _lift_checks(rep: Report, tag: str, lift: Lift, mc, exact: bool = True):
    level_mc = mc.restrict(lift.grid) if lift.grid is not None else mc
    merr = check_marginals(lift, level_mc)
    rep.check(f"{tag}: marginals", merr <= 1e-9, 1e-9, value=merr)
    sup = check_superposition_bound(lift, level_mc, expect_equality=exact)
    rep.check(f"{tag}: superposition bound", not sup.violations, sup.tol, max_slack=sup.max_slack)
    if exact:
        rep.check(f"{tag}: chain sum equals lift variation", sup.equality_gap is not None and sup.equality_gap <= 1e-8,
                  1e-8, chain_sum=sup.chain_sum, lift_variation=sup.lift_total)
    field_rep = verify_field(level_mc, extract_field(lift, level_mc))
    rep.check(f"{tag}: current residual", field_rep.max_residual <= 1e-9, 1e-9, value=field_rep.max_residual)
    if exact:
        rep.check(f"{tag}: metric speed identity", field_rep.max_speed_gap <= 1e-6, 1e-6,
                  value=field_rep.max_speed_gap)
    return sup


def map_lift(space, sources, targets, alphas: int) -> Lift:
    """Curves that wait at ``sources[k]`` and jump to ``targets[k]`` at ``alpha = a / alphas``.

    Source points carry equal mass and ``alpha`` runs over ``1/alphas .. 1``.
    """
    w = 1.0 / (len(sources) * alphas)
    atoms = []
    for x, tx in zip(sources, targets):
        for a in range(1, alphas + 1):
            atoms.append((StepCurve((a / alphas,), (x, tx)), w))
    return Lift(space, atoms, tuple(np.arange(alphas + 1) / alphas), "map")


def nonunique_instance():
    space = line_space([-2.0, -1.5, -1.0, 1.0, 1.5, 2.0])
    mu0 = np.array([1, 1, 1, 0, 0, 0]) / 3
    mu1 = np.array([0, 0, 0, 1, 1, 1]) / 3
    return space, mu0, mu1


def _nonunique(p) -> Report:
    rep = Report("nonunique_lifts", p)
    G = int(p["alphas"])
    space, mu0, mu1 = nonunique_instance()
    res = w1(space, mu0, mu1)
    rep.close("W1(mu0, mu1)", res.distance, 3.0, 1e-9)
    rep.check("dual gap", res.cert.reported_gap <= 1e-9, 1e-9, value=res.cert.reported_gap)
    rep.check("product coupling is optimal", is_optimal(space, product_coupling(mu0, mu1)), 1e-9)
    mc = gen_linear(space, mu0, mu1, G)
    mono = map_lift(space, [0, 1, 2], [3, 4, 5], G)
    anti = map_lift(space, [0, 1, 2], [5, 4, 3], G)
    rep.check("lifts differ", not mono.same_atoms(anti))
    pm, pa = pushforward_curve(mono, mc.grid), pushforward_curve(anti, mc.grid)
    tv = float(0.5 * np.abs(pm.measures - pa.measures).sum(axis=1).max())
    rep.check("identical pushforwards", tv <= 1e-9, 1e-9, value=tv)
    vm, va = lift_variation(mono)[0], lift_variation(anti)[0]
    rep.check("identical lift variation", abs(vm - va) <= 1e-9, 1e-9, monotone=vm, antitone=va)
    for tag, lift in (("monotone", mono), ("antitone", anti)):
        rep.check(f"{tag}: marginals", check_marginals(lift, mc) <= 1e-9, 1e-9)
        g = geodesic_lift_check(lift, mc)
        rep.check(f"{tag}: geodesic lift", g.fraction >= 1 - 1e-12 and g.gap <= 1e-6, 1e-6,
                  fraction=g.fraction, gap=g.gap)
    built = build_lift(mc, int(p["level"]))
    _lift_checks(rep, "built", built, mc)
    rep.data.update({"w1": res.distance, "lift_variation": vm, "atoms": {"monotone": len(mono), "antitone": len(anti),
                                                                      "built": len(built)}})
    rep.tables["lifts"] = (("lift", "jump_time", "from", "to", "weight"),
                           [(tag, c.jump_times[0], c.start, c.end, w)
                            for tag, lift in (("monotone", mono), ("antitone", anti)) for c, w in lift.atoms])
    return rep


def _ac_not_enough(p) -> Report:
    rep = Report("ac_not_enough", p)
    G = int(p["segments"])
    mc, conveyor = gen_ac_not_enough(G)
    rep.check("geodesic", is_bv_geodesic(mc, 1e-9), 1e-9, variation=curve_variation(mc))
    rep.check("constant speed", is_constant_speed(mc, 1e-9), 1e-9)
    rep.check("conveyor: marginals", check_marginals(conveyor, mc) <= 1e-9, 1e-9)
    sup = check_superposition_bound(conveyor, mc)
    lv = lift_variation(conveyor)[0]
    rep.check("conveyor: strictly above the curve variation", sup.max_slack > 1e-3 and not sup.violations,
              1e-3, curve_variation=curve_variation(mc), lift_variation=lv)
    g = geodesic_lift_check(conveyor, mc)
    rep.check("conveyor: not concentrated on geodesics", g.fraction < 1.0, value=g.fraction)
    fld = verify_field(mc, extract_field(conveyor, mc))
    rep.check("conveyor: current residual", fld.max_residual <= 1e-9, 1e-9, value=fld.max_residual)
    built = build_lift(mc, int(p["level"]))
    _lift_checks(rep, "built", built, mc)
    level_mc = mc.restrict(built.grid)
    bb = benamou_brenier_compare(mc.space, mc.measures[0], mc.measures[-1],
                                 [candidate_from_lift("built", built, level_mc),
                                  candidate_from_lift("conveyor", conveyor, mc)])
    rep.check("action minimum is W1 and attained by the built lift",
              bb["ok"] and bb["attained_by"] == ["built"], bb["tol"], actions=bb["candidates"], w1=bb["w1"])
    rep.data.update({"curve_variation": curve_variation(mc), "conveyor_variation": lv,
                     "endpoint_distance": float(mc.space.dist[0, G])})
    return rep


def _slice2d(p) -> Report:
    rep = Report("slice2d", p)
    eps, y = float(p["eps"]), float(p["y"])
    mc = gen_slice2d(eps, y, int(p["cells"]), int(p["grid"]))
    prof = decompose_variation(mc, int(p["levels"]))
    expected = (1 - eps) / 2
    rep.close("total variation", curve_variation(mc), expected, 1e-9)
    rep.check("one atom", len(prof.atom_estimates) == 1, value=len(prof.atom_estimates))
    if prof.atom_estimates:
        a = prof.atom_estimates[0]
        rep.check("atom location", a["cell"][0] <= y <= a["cell"][1], cell=a["cell"])
        rep.close("atom mass", a["mass"], expected, 1e-6)
    rep.close("absolutely continuous part", prof.ac_estimate, 0.0, 1e-6)
    lift = build_lift(mc, int(p["level"]))
    _lift_checks(rep, "built", lift, mc)
    lhs, rhs = jump_balance(lift, mc, y, prof)
    rep.check("jump balance", abs(lhs - expected) <= 1e-6 and abs(rhs - expected) <= 1e-6, 1e-6,
              lhs=lhs, rhs=rhs, expected=expected)
    jumpers = [c for c, _ in lift.atoms if c.jump_times]
    rep.check("each atom constant or one jump", all(len(c.jump_times) <= 1 for c, _ in lift.atoms))
    level_mc = mc.restrict(lift.grid)
    step = int(np.searchsorted(np.asarray(lift.grid), y)) - 1
    v = extract_velocity(lift, level_mc, step)
    width = int(round(eps * int(p["cells"])))
    left, right = set(range(width)), set(range(int(p["cells"]) - width, int(p["cells"])))
    rep.check("velocity only from left strip to right strip",
              bool(v.rates) and all(x in left and z in right for x, z in v.rates), pairs=len(v.rates))
    rep.data.update({"profile": prof.to_dict(), "jumping_atoms": len(jumpers)})
    rep.tables["profile"] = (("t", "w1_increment", "ac_density"), list(prof.csv_rows()))
    return rep


def _cantor(p) -> Report:
    rep = Report("cantor_cs", p)
    depth = int(p["depth"])
    mc = gen_cantor(depth, int(p["grid"]))
    rep.close("total variation", curve_variation(mc), 1.0, 1e-9)
    plateau = [(0.5, 0.125), (0.4, 0.2), (1 / 6, 1 / 24)]
    vals = [metric_derivative(mc, t, h) for t, h in plateau]
    rep.check("metric derivative vanishes on plateaus", max(vals) <= 1e-12, 1e-12, values=vals)
    rep.check("not constant speed", not is_constant_speed(mc, 1e-9))
    prof = decompose_variation(mc, int(p["levels"]))
    floor = 1 - (2 / 3) ** depth
    rep.check("residual (Cantor part) estimate", prof.residual_estimate >= floor - 1e-6, 1e-6,
              value=prof.residual_estimate, floor=floor)
    rep.close("no atoms", prof.atom_estimate, 0.0, 1e-6)
    lift = build_lift(mc, int(p["level"]))
    _lift_checks(rep, "built", lift, mc)
    rep.data.update({"profile": prof.to_dict()})
    rep.tables["profile"] = (("t", "w1_increment", "ac_density"), list(prof.csv_rows()))
    return rep


def _periodic(p) -> Report:
    rep = Report("periodic_sigma", p)
    K = int(p["cells"])
    sigma0 = sigma0_named(p["sigma0"], K, int(p["depth"]))
    mc, canon = gen_periodic_sigma(sigma0)
    rep.check("geodesic", is_bv_geodesic(mc, 1e-9), 1e-9, variation=curve_variation(mc))
    rep.check("constant speed", is_constant_speed(mc, 1e-9), 1e-9)
    g = geodesic_lift_check(canon, mc)
    rep.check("canonical lift: geodesic", g.fraction >= 1 - 1e-12 and g.gap <= 1e-6, 1e-6,
              fraction=g.fraction, gap=g.gap, max_jump_mass=g.max_jump_mass)
    _lift_checks(rep, "canonical", canon, mc)
    level = min(int(p["level"]), int(np.log2(K)))
    lift = build_lift(mc, level)
    gb = geodesic_lift_check(lift, mc.restrict(lift.grid))
    rep.check("built lift: geodesic", gb.fraction >= 1 - 1e-12 and gb.gap <= 1e-6, 1e-6,
              fraction=gb.fraction, gap=gb.gap)
    _lift_checks(rep, "built", lift, mc)
    x = mc.space.coords[:, 0]
    rep.tables["sigma0"] = (("x", "mass"), [(k / K, float(m)) for k, m in enumerate(sigma0)])
    show = sorted(set(np.linspace(0, K - 1, min(K, 4)).astype(int).tolist()))
    rows = []
    for j in show:
        c, _ = canon.atoms[j]
        for m in range(K + 1):
            rows.append((j / K, m / K, float(x[c(m / K)])))
    rep.tables["trajectories"] = (("alpha", "t", "position"), rows)
    rep.data.update({"points": mc.space.size, "canonical_atoms": len(canon), "built_atoms": len(lift),
                     "built_gluing": lift.gluing})
    return rep


_RUNNERS = {
    "nonunique_lifts": _nonunique,
    "ac_not_enough": _ac_not_enough,
    "slice2d": _slice2d,
    "cantor_cs": _cantor,
    "periodic_sigma": _periodic,
}


def run_example(spec: ExampleSpec) -> Report:
    try:
        return _RUNNERS[spec.name](spec.params)
    except (TypeError, KeyError) as err:
        raise ExampleError(f"invalid parameters for {spec.name}: {err}") from None
