import json

import numpy as np
import pytest

from w1lift.curves import StepCurve
from w1lift.lift import (Lift, LiftInputError, LiftVerificationError, adversarial_lift, build_lift,
                         check_marginals, check_superposition_bound, geodesic_lift_check, grid_speed,
                         jump_balance, lift_variation, pushforward_curve)
from w1lift.space import line_space
from w1lift.transport import w1_distance
from w1lift.wcurves import (curve_variation, dyadic_grid, gen_backtrack, gen_cantor, gen_linear,
                            gen_slice2d, gen_waypoints)

TWO = line_space([0.0, 1.0])


def linear():
    return gen_linear(TWO, [1, 0], [0, 1], 16)


def test_linear_level_two_atoms():
    lift = build_lift(linear(), 2)
    assert len(lift) == 4
    assert np.allclose(lift.weights(), 0.25)
    times = sorted(c.jump_times[0] for c, _ in lift.atoms)
    assert times == [0.25, 0.5, 0.75, 1.0]
    assert all(c.values == (0, 1) for c, _ in lift.atoms)
    assert lift_variation(lift)[0] == pytest.approx(1.0)


def test_constant_curve_lift():
    mc = gen_linear(TWO, [0.4, 0.6], [0.4, 0.6], 4)
    lift = build_lift(mc, 3)
    assert all(not c.jump_times for c, _ in lift.atoms)
    assert lift_variation(lift)[0] == 0.0


def test_slice2d_atoms_jump_at_most_once():
    mc = gen_slice2d(0.25, 0.6, 8, 32)
    lift = build_lift(mc, 5)
    assert all(len(c.jump_times) <= 1 for c, _ in lift.atoms)
    assert {c.jump_times for c, _ in lift.atoms if c.jump_times} == {(0.625,)}


@pytest.mark.parametrize("level", [2, 4, 6])
def test_chain_sum_equals_lift_variation(level):
    space = line_space([0.0, 1.0, 5.0])
    mc = gen_waypoints(space, [[1, 0, 0], [0, 0, 1], [0.5, 0.5, 0]], 8)
    lift = build_lift(mc, level)
    level_mc = mc.restrict(dyadic_grid(level))
    assert check_marginals(lift, level_mc) <= 1e-12
    assert lift_variation(lift)[0] == pytest.approx(curve_variation(level_mc), abs=1e-12)
    rep = check_superposition_bound(lift, level_mc)
    assert rep.ok and rep.equality_gap <= 1e-12


def test_marginals_by_hand():
    mc = gen_cantor(6, 8)
    lift = build_lift(mc, 3)
    for t, mu in zip(mc.grid, mc.measures):
        hand = np.zeros(2)
        for c, w in lift.atoms:
            hand[c(t)] += w
        assert np.allclose(hand, mu, atol=1e-12)


def test_dropped_atom_breaks_marginals():
    mc = linear().restrict(dyadic_grid(2))
    lift = build_lift(mc, 2)
    atoms = [(c, w * 4 / 3) for c, w in lift.atoms[1:]]
    broken = Lift(TWO, atoms)
    assert check_marginals(broken, mc) > 0.1
    with pytest.raises(LiftVerificationError):
        check_superposition_bound(broken, mc)


def test_adversarial_lift_is_strictly_worse():
    space = line_space([0.0, 1.0, 2.0])
    mc = gen_linear(space, [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], 4)
    lift = adversarial_lift(mc, 2, step=1)
    level_mc = mc.restrict(dyadic_grid(2))
    assert check_marginals(lift, level_mc) <= 1e-12
    rep = check_superposition_bound(lift, level_mc)
    assert not rep.violations
    assert rep.max_slack >= 1e-3
    fake = Lift(lift.space, lift.atoms, lift.grid, "built")
    bad = check_superposition_bound(fake, level_mc)
    assert not bad.ok and bad.witness is not None


def test_slice2d_jump_balance():
    mc = gen_slice2d(0.25, 0.6, 8, 16)
    lift = build_lift(mc, 6)
    lhs, rhs = jump_balance(lift, mc, 0.6)
    assert lhs == pytest.approx(0.375, abs=1e-12)
    assert rhs == pytest.approx(0.375, abs=1e-12)
    lhs0, rhs0 = jump_balance(lift, mc, 0.3)
    assert lhs0 == 0.0 and rhs0 == 0.0


def test_pushforward_matches_curve():
    mc = gen_cantor(6, 16)
    lift = build_lift(mc, 4)
    push = pushforward_curve(lift, 16)
    assert np.allclose(push.measures, mc.measures, atol=1e-12)


def test_geodesic_checks():
    mc = linear()
    g = geodesic_lift_check(build_lift(mc, 4), mc.restrict(dyadic_grid(4)))
    assert g.ok and g.fraction == pytest.approx(1.0)
    assert g.max_jump_mass == pytest.approx(1 / 16)
    back = gen_backtrack()
    gb = geodesic_lift_check(build_lift(back, 3), back.restrict(dyadic_grid(3)))
    assert gb.fraction == 0.0 and not gb.ok


def test_grid_speed_of_linear_lift():
    lift = build_lift(linear(), 3)
    assert np.allclose(grid_speed(lift, dyadic_grid(3)), 1.0)


@pytest.mark.parametrize("level", [2, 3])
def test_sequential_and_markov_agree_on_observables(level):
    space = line_space([0.0, 1.0, 3.0, 4.0])
    mc = gen_waypoints(space, [[0.5, 0.5, 0, 0], [0, 0.25, 0.25, 0.5], [0, 0, 0.5, 0.5]], 8)
    level_mc = mc.restrict(dyadic_grid(level))
    a, b = build_lift(mc, level, "markov"), build_lift(mc, level, "sequential")
    assert a.gluing == "markov" and b.gluing == "sequential"
    for lift in (a, b):
        assert check_marginals(lift, level_mc) <= 1e-12
        assert lift_variation(lift)[0] == pytest.approx(curve_variation(level_mc), abs=1e-12)
    assert len(b) <= len(a)


def test_invalid_lifts():
    c = StepCurve((0.5,), (0, 1))
    with pytest.raises(LiftInputError):
        Lift(TWO, [(c, 0.5)])
    with pytest.raises(LiftInputError):
        Lift(TWO, [(StepCurve((0.5,), (0, 2)), 1.0)])
    with pytest.raises(LiftInputError):
        Lift(TWO, [])
    with pytest.raises(LiftInputError):
        build_lift(linear(), -1)


def test_json_round_trip():
    lift = build_lift(gen_cantor(4, 8), 3)
    back = Lift.from_json(json.dumps(lift.to_json()))
    assert back.same_atoms(lift)
    assert back.grid == lift.grid and back.source == "built"


def test_lift_variation_uses_visibility_rule():
    lift = Lift(TWO, [(StepCurve((0.5,), (0, 1)), 1.0)])
    assert lift.variation_mass(0.5, 1.0, "[]") == 0.0
    assert lift.variation_mass(0.25, 0.5, "[]") == 1.0
    assert lift.variation_mass(0.25, 0.5, "[)") == 0.0
    assert lift_variation(lift, 0.25, 0.5, "[)")[0] == 0.0
    assert w1_distance(TWO, lift.marginal(0.0), lift.marginal(1.0)) == 1.0
