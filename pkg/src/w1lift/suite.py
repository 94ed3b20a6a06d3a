"""Acceptance checks, one function per criterion.

Every function returns a dict with the measured values, the tolerance each
was compared against and an overall ``ok``. ``run_suite`` runs them all and
adds timings; the test-suite re-asserts the raw values independently.
"""

from __future__ import annotations

import time
from functools import lru_cache

import numpy as np

from .curves import StepCurve, check_bv_equivalences, diff_quotient_integral, pointwise_variation
from .current import (Candidate, benamou_brenier_compare, candidate_from_lift, current_residual,
                      extract_field, speed_identity, velocity_from_coupling, verify_field)
from .examples import map_lift, nonunique_instance
from .lift import (adversarial_lift, build_lift, check_marginals, check_superposition_bound,
                   geodesic_lift_check, jump_balance, lift_variation, pushforward_curve)
from .space import MetricSpace, line_space
from .transport import Coupling, w1, w1_line_oracle
from .wcurves import (MeasureCurve, curve_variation, decompose_variation, dyadic_grid, gen_ac_not_enough,
                      gen_backtrack, gen_cantor, gen_linear, gen_periodic_sigma, gen_slice2d, gen_waypoints,
                      is_bv_geodesic, is_constant_speed, metric_derivative, sigma0_named)

SEED = 20240611
LEVELS = range(2, 9)


@lru_cache(maxsize=None)
def _periodic(kind: str):
    cells = 4096 if kind == "cantor" else 256
    return gen_periodic_sigma(sigma0_named(kind, cells, 8), grid=256)


@lru_cache(maxsize=None)
def suite_curves():
    """Every generator curve the suite exercises, by name."""
    two = line_space([0.0, 1.0])
    space, mu0, mu1 = nonunique_instance()
    return {
        "linear_dirac": gen_linear(two, [1, 0], [0, 1]),
        "linear_nonunique": gen_linear(space, mu0, mu1),
        "cantor_8": gen_cantor(8),
        "slice2d": gen_slice2d(0.25, 0.6, 8),
        "periodic_dirac": _periodic("dirac")[0],
        "periodic_uniform": _periodic("uniform")[0],
        "periodic_cantor_8": _periodic("cantor")[0],
        "ac_not_enough": gen_ac_not_enough(8)[0],
        "backtrack": gen_backtrack(),
    }


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        out = fn(*args, **kwargs)
        out["runtime_s"] = time.perf_counter() - start
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_line_instance(rng: np.random.Generator, max_points: int = 30):
    """Distinct integer-spaced points and weights with a common small denominator."""
    n = int(rng.integers(2, max_points + 1))
    xs = np.sort(rng.choice(1000, size=n, replace=False)) / 10.0
    den = int(rng.integers(n, 4 * n + 1))

    def weights():
        cuts = np.sort(rng.integers(0, den + 1, size=n - 1))
        return np.diff(np.concatenate([[0], cuts, [den]])) / den

    return line_space(xs), weights(), weights()


@_timed
def criterion_1(instances: int = 500):
    """W1 solver against the CDF formula on random line instances."""
    rng = np.random.default_rng(SEED)
    err = gap = lip = 0.0
    for _ in range(instances):
        space, a, b = random_line_instance(rng)
        res = w1(space, a, b)
        err = max(err, abs(res.distance - w1_line_oracle(space, a, b)))
        gap = max(gap, res.cert.reported_gap)
        lip = max(lip, res.cert.lipschitz_excess(space))
    return {"id": 1, "name": "W1 oracle equivalence", "instances": instances,
            "max_oracle_error": err, "max_dual_gap": gap, "max_lipschitz_excess": lip,
            "ok": err <= 1e-8 and gap <= 1e-9 and lip <= 1e-9, "tol": {"oracle": 1e-8, "gap": 1e-9}}


@_timed
def criterion_2(levels=LEVELS):
    """Built lifts: total lift variation equals the chain sum, marginals exact."""
    rows = []
    for name, mc in suite_curves().items():
        for n in levels:
            lift = build_lift(mc, n)
            level_mc = mc.restrict(dyadic_grid(n))
            chain = curve_variation(level_mc)
            lv = lift_variation(lift)[0]
            rows.append({"curve": name, "level": n, "chain_sum": chain, "lift_variation": lv,
                         "error": abs(lv - chain), "marginal_error": check_marginals(lift, level_mc),
                         "atoms": len(lift), "gluing": lift.gluing, "pruned": lift.pruned})
    err = max(r["error"] for r in rows)
    merr = max(r["marginal_error"] for r in rows)
    return {"id": 2, "name": "superposition identity", "rows": rows, "max_error": err,
            "max_marginal_error": merr, "ok": err <= 1e-8 and merr <= 1e-9,
            "tol": {"identity": 1e-8, "marginals": 1e-9}}


def strict_instance():
    """Three points on a line where the shuffled coupling is strictly suboptimal."""
    space = line_space([0.0, 1.0, 2.0])
    return gen_linear(space, [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], 4)


@_timed
def criterion_3(level: int = 4):
    """Superposition inequality on every dyadic subinterval, built and adversarial."""
    curves = dict(suite_curves())
    curves["three_point"] = strict_instance()
    rows = []
    for name, mc in curves.items():
        level_mc = mc.restrict(dyadic_grid(level))
        for kind in ("built", "adversarial"):
            if kind == "built":
                lift = build_lift(mc, level)
            else:
                lift = adversarial_lift(mc, level, step=2 ** (level - 1))
            rep = check_superposition_bound(lift, level_mc)
            rows.append({"curve": name, "lift": kind, "violations": len(rep.violations),
                         "max_slack": rep.max_slack, "intervals": len(rep.rows),
                         "marginal_error": rep.marginal_error})
    # negative control: an adversarial lift passed off as built must fail the equality check
    mc = strict_instance()
    fake = adversarial_lift(mc, 2, step=1)
    fake = type(fake)(fake.space, fake.atoms, fake.grid, "built", fake.pruned, fake.gluing)
    control = check_superposition_bound(fake, mc.restrict(dyadic_grid(2)))
    violations = sum(r["violations"] for r in rows)
    best = max(r["max_slack"] for r in rows if r["lift"] == "adversarial")
    return {"id": 3, "name": "superposition inequality", "rows": rows, "violations": violations,
            "max_adversarial_slack": best,
            "negative_control": {"detected": not control.ok, "witness": control.witness,
                                 "equality_gap": control.equality_gap},
            "ok": violations == 0 and best >= 1e-3 and not control.ok,
            "tol": {"bound": 1e-8, "slack": 1e-3}}


@_timed
def criterion_4(grid: int = 32, levels: int = 6, level: int = 8):
    """Jump balance for the two-strip slice at eps = 1/4, y = 3/5."""
    eps, y = 0.25, 0.6
    mc = gen_slice2d(eps, y, 8, grid)
    prof = decompose_variation(mc, levels)
    lift = build_lift(mc, level)
    lhs, rhs = jump_balance(lift, mc, y, prof)
    depth = int(np.log2(grid)) + levels
    expected = (1 - eps) / 2
    return {"id": 4, "name": "jump balance", "lhs": lhs, "rhs": rhs, "expected": expected,
            "refinement_depth": depth, "atoms": prof.atom_estimates,
            "ok": abs(lhs - expected) <= 1e-6 and abs(rhs - expected) <= 1e-6 and depth >= 10,
            "tol": 1e-6}


@_timed
def criterion_5(level: int = 6):
    """Geodesic characterisation for the geodesic generators and the backtracking curve."""
    rows = []
    cases = [("linear_dirac", suite_curves()["linear_dirac"], None)]
    for kind in ("uniform", "dirac", "cantor"):
        mc, canon = _periodic(kind)
        cases.append((f"periodic_{kind}", mc, canon))
    for name, mc, canon in cases:
        row = {"curve": name, "bv_geodesic": is_bv_geodesic(mc, 1e-9),
               "constant_speed": is_constant_speed(mc, 1e-9)}
        lifts = [("built", build_lift(mc, level))]
        if canon is not None:
            lifts.append(("canonical", canon))
        for tag, lift in lifts:
            g = geodesic_lift_check(lift, mc.restrict(lift.grid) if lift.grid else mc)
            row[f"{tag}_fraction"] = g.fraction
            row[f"{tag}_gap"] = g.gap
            row[f"{tag}_marginal_error"] = g.marginal_error
        rows.append(row)
    back = suite_curves()["backtrack"]
    gb = geodesic_lift_check(build_lift(back, 4), back.restrict(dyadic_grid(4)))
    ok = all(r["bv_geodesic"] and r["constant_speed"] for r in rows)
    for r in rows:
        for tag in ("built", "canonical"):
            if f"{tag}_fraction" in r:
                ok &= r[f"{tag}_fraction"] >= 1 - 1e-12 and r[f"{tag}_gap"] <= 1e-6
    backtrack = {"bv_geodesic": is_bv_geodesic(back, 1e-9), "fraction": gb.fraction}
    ok &= backtrack["fraction"] == 0.0 and not backtrack["bv_geodesic"]
    return {"id": 5, "name": "geodesic characterisation", "rows": rows, "backtrack": backtrack,
            "ok": bool(ok), "tol": {"geodesic": 1e-9, "gap": 1e-6}}


def random_feasible_field(rng: np.random.Generator, max_points: int = 8):
    """Random planar space, random coupling; the field moves its row marginal to its column one."""
    n = int(rng.integers(2, max_points + 1))
    space = MetricSpace.from_coords(rng.uniform(-1, 1, size=(n, 2)))
    p = rng.uniform(0, 1, size=(n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    p[rng.integers(n), rng.integers(n)] += 0.1
    p /= p.sum()
    coupling = Coupling.from_dense(p)
    mu, nu = coupling.first_marginal(), coupling.second_marginal()
    nu = nu + (mu.sum() - nu.sum()) / n
    mc = MeasureCurve(space, [0.0, 1.0], [mu, nu])
    return mc, velocity_from_coupling(coupling, mu, 0.0, 1.0)


@_timed
def criterion_6(level: int = 5, instances: int = 200):
    """Current equation: residuals, metric-speed equality, a priori bound, action minimum."""
    rows = []
    for name, mc in suite_curves().items():
        lift = build_lift(mc, level)
        level_mc = mc.restrict(dyadic_grid(level))
        rep = verify_field(level_mc, extract_field(lift, level_mc))
        rows.append({"curve": name, "lift": "built", "max_residual": rep.max_residual,
                     "max_speed_gap": rep.max_speed_gap})
    for kind in ("dirac", "cantor"):
        mc, canon = _periodic(kind)
        rep = verify_field(mc, extract_field(canon, mc))
        rows.append({"curve": f"periodic_{kind}", "lift": "canonical", "max_residual": rep.max_residual,
                     "max_speed_gap": rep.max_speed_gap})
    mc, conveyor = gen_ac_not_enough(8)
    rep = verify_field(mc, extract_field(conveyor, mc))
    rows.append({"curve": "ac_not_enough", "lift": "conveyor", "max_residual": rep.max_residual,
                 "max_speed_gap": None})
    rng = np.random.default_rng(SEED + 6)
    worst_bound = -np.inf
    worst_balance = 0.0
    for _ in range(instances):
        rmc, v = random_feasible_field(rng)
        lhs, rhs = speed_identity(rmc, v, 0)
        worst_bound = max(worst_bound, lhs - rhs)
        worst_balance = max(worst_balance, float(np.max(np.abs(current_residual(rmc, v, 0)))))
    bb = _action_comparison()
    max_res = max(r["max_residual"] for r in rows)
    max_speed = max(r["max_speed_gap"] for r in rows if r["max_speed_gap"] is not None)
    ok = max_res <= 1e-9 and max_speed <= 1e-6 and worst_bound <= 1e-8 and bb["ok"]
    return {"id": 6, "name": "current equation", "rows": rows, "max_residual": max_res,
            "max_speed_gap": max_speed, "apriori_instances": instances,
            "apriori_max_excess": worst_bound, "apriori_max_residual": worst_balance,
            "benamou_brenier": bb, "ok": bool(ok),
            "tol": {"residual": 1e-9, "speed": 1e-6, "apriori": 1e-8}}


def _action_comparison(level: int = 4) -> dict:
    space = line_space([0.0, 1.0, 5.0])
    d0, d1, far = [1, 0, 0], [0, 1, 0], [0, 0, 1]
    straight = gen_linear(space, d0, d1)
    detour = gen_waypoints(space, [d0, far, d1])
    grid = dyadic_grid(level)
    cands = [candidate_from_lift("optimal", build_lift(straight, level), straight.restrict(grid)),
             candidate_from_lift("adversarial", adversarial_lift(straight, level, 3), straight.restrict(grid)),
             candidate_from_lift("detour", build_lift(detour, level), detour.restrict(grid))]
    return benamou_brenier_compare(space, d0, d1, cands)


@_timed
def criterion_7(depth: int = 8):
    """Cantor curve: total variation, flat plateaus, residual of the decomposition."""
    mc = gen_cantor(depth)
    grids = {g: curve_variation(mc.refine(g)) for g in (16, 64, 81, 243)}
    plateau = [(0.5, 0.125), (0.4, 0.2), (1 / 6, 1 / 24), (0.8, 1 / 18)]
    derivs = [metric_derivative(mc, t, h) for t, h in plateau]
    prof = decompose_variation(mc.refine(32), 6)
    floor = 1 - (2 / 3) ** depth
    var_err = max(abs(v - 1.0) for v in grids.values())
    ok = var_err <= 1e-9 and max(derivs) <= 1e-12 and prof.residual_estimate >= floor - 1e-6
    return {"id": 7, "name": "Cantor curve", "variation_by_grid": grids, "max_variation_error": var_err,
            "plateau_derivatives": derivs, "residual_estimate": prof.residual_estimate,
            "residual_floor": floor, "atom_estimate": prof.atom_estimate, "ac_estimate": prof.ac_estimate,
            "ok": bool(ok), "tol": {"variation": 1e-9, "residual": 1e-6}}


@_timed
def criterion_8(alphas: int = 4):
    """Two lifts with different atoms, same pushforward, same variation."""
    space, mu0, mu1 = nonunique_instance()
    mc = gen_linear(space, mu0, mu1, alphas)
    mono = map_lift(space, [0, 1, 2], [3, 4, 5], alphas)
    anti = map_lift(space, [0, 1, 2], [5, 4, 3], alphas)
    pm, pa = pushforward_curve(mono, mc.grid), pushforward_curve(anti, mc.grid)
    tv = float(0.5 * np.abs(pm.measures - pa.measures).sum(axis=1).max())
    vm, va = lift_variation(mono)[0], lift_variation(anti)[0]
    gm, ga = geodesic_lift_check(mono, mc), geodesic_lift_check(anti, mc)
    differ = not mono.same_atoms(anti)
    ok = differ and tv <= 1e-9 and abs(vm - va) <= 1e-9 and gm.ok and ga.ok
    return {"id": 8, "name": "non-uniqueness", "atoms_differ": differ, "pushforward_tv": tv,
            "variation": [vm, va], "variation_gap": abs(vm - va),
            "marginal_error": max(check_marginals(mono, mc), check_marginals(anti, mc)),
            "geodesic_fraction": [gm.fraction, ga.fraction], "w1": w1(space, mu0, mu1).distance,
            "ok": bool(ok), "tol": 1e-9}


def random_step_curve(rng: np.random.Generator, max_points: int = 6, max_jumps: int = 8):
    """Random planar space and a step curve jumping at distinct times in (0, 1)."""
    n = int(rng.integers(2, max_points + 1))
    space = MetricSpace.from_coords(rng.uniform(-1, 1, size=(n, 2)))
    k = int(rng.integers(0, max_jumps + 1))
    times = np.sort(rng.choice(999, size=k, replace=False) + 1) / 1000.0
    vals = [int(rng.integers(n))]
    for _ in range(k):
        vals.append(int((vals[-1] + rng.integers(1, n)) % n))
    return space, StepCurve(tuple(times), tuple(vals))


@_timed
def criterion_9(curves: int = 100):
    """BV equivalences on random step curves."""
    rng = np.random.default_rng(SEED + 9)
    failures, worst = [], 0.0
    for k in range(curves):
        space, c = random_step_curve(rng)
        rep = check_bv_equivalences(space, c, tol=1e-6)
        gap = abs(rep.dyadic_sup - pointwise_variation(space, c))
        worst = max(worst, gap)
        if not rep.ok or gap > 1e-6:
            failures.append({"index": k, "report": rep.to_dict()})
    return {"id": 9, "name": "BV equivalences", "curves": curves, "failures": failures,
            "max_sup_gap": worst, "ok": not failures, "tol": 1e-6}


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9)


def run_suite(only=None) -> dict:
    start = time.perf_counter()
    results = []
    for fn in CRITERIA:
        if only is not None and int(fn.__name__.split("_")[1]) not in only:
            continue
        results.append(fn())
    return {"ok": all(r["ok"] for r in results), "runtime_s": time.perf_counter() - start,
            "criteria": results}
