import numpy as np
import pytest

from oracles import partition_sup, quad_diff_quotient
from w1lift.curves import (CurveError, StepCurve, check_bv_equivalences, diff_quotient_integral,
                           essential_variation, pointwise_variation, variation_measure)
from w1lift.space import MetricSpace, line_space


def jumps_1_2_half():
    s = line_space([0.0, 1.0, 2.5, 3.0])
    return s, StepCurve((0.2, 0.5, 0.8), (0, 1, 3, 2))


def test_three_jumps_total():
    s, c = jumps_1_2_half()
    assert c.jumps(s) == [(0.2, 1.0), (0.5, 2.0), (0.8, 0.5)]
    assert pointwise_variation(s, c) == 3.5
    assert essential_variation(s, c) == 3.5


def test_variation_measure_intervals():
    s = line_space([0.0, 2.0, 3.0])
    c = StepCurve((0.25, 0.75), (0, 1, 2))
    m = variation_measure(s, c)
    assert m.mass(0.0, 0.5, "()") == 2.0
    assert m.mass(0.25, 0.75, "[]") == 3.0
    assert m.mass(0.25, 0.75, "(]") == 1.0
    assert m.total == 3.0


@pytest.mark.parametrize("kind", ["[]", "[)", "(]", "()"])
def test_pointwise_matches_partitions(kind):
    rng = np.random.default_rng(1)
    s = MetricSpace.from_coords(rng.normal(size=(5, 2)))
    c = StepCurve((0.1, 0.25, 0.5, 0.9, 1.0), (0, 3, 1, 4, 2, 0))
    for a, b in [(0.0, 1.0), (0.25, 0.5), (0.1, 0.9), (0.3, 1.0), (0.5, 0.5)]:
        assert pointwise_variation(s, c, a, b, kind) == pytest.approx(
            partition_sup(s.dist, c, a, b, kind), abs=1e-12)


def test_jump_at_one():
    s = line_space([0.0, 1.0, 2.0])
    c = StepCurve((0.5, 1.0), (0, 1, 2))
    assert c.left_continuous_at_1 is False
    assert c(1.0) == 2 and c.left_limit(1.0) == 1
    assert pointwise_variation(s, c) == 2.0
    assert essential_variation(s, c) == 1.0
    assert check_bv_equivalences(s, c).ok


def test_unit_jump_difference_quotient():
    s = line_space([0.0, 1.0])
    c = StepCurve((0.5,), (0, 1))
    for h in (0.25, 0.1, 1e-3):
        assert diff_quotient_integral(s, c, h) == pytest.approx(1.0, abs=1e-12)


def test_difference_quotient_against_quadrature():
    rng = np.random.default_rng(4)
    s = MetricSpace.from_coords(rng.normal(size=(4, 2)))
    c = StepCurve((0.13, 0.4, 0.77), (0, 2, 1, 3))
    for h in (0.3, 0.05):
        assert diff_quotient_integral(s, c, h) == pytest.approx(
            quad_diff_quotient(s.dist, c, h), rel=1e-4)


def test_dyadic_sup_reaches_variation():
    s, c = jumps_1_2_half()
    vals = [diff_quotient_integral(s, c, 2.0**-k) for k in range(1, 17)]
    assert max(vals) == pytest.approx(3.5, abs=1e-9)
    assert all(x <= y + 1e-12 for x, y in zip(vals, vals[1:]))


@pytest.mark.parametrize("seed", range(5))
def test_bv_checks_on_random_curves(seed):
    rng = np.random.default_rng(seed)
    s = MetricSpace.from_coords(rng.normal(size=(5, 2)))
    times = np.sort(rng.choice(np.arange(1, 100), size=6, replace=False)) / 100
    vals = [0]
    for _ in times:
        vals.append((vals[-1] + int(rng.integers(1, 5))) % 5)
    rep = check_bv_equivalences(s, StepCurve(tuple(times), tuple(vals)))
    assert rep.ok, rep.to_dict()
    assert rep.dyadic_sup == pytest.approx(rep.variation, abs=1e-6)


def test_constant_curve():
    s = line_space([0.0, 1.0])
    c = StepCurve.constant(1)
    assert pointwise_variation(s, c) == 0.0
    rep = check_bv_equivalences(s, c)
    assert rep.ok and rep.dyadic_sup == 0.0


def test_normalization_and_filling_map():
    c = StepCurve.from_samples([0.0, 0.25, 0.5, 0.75, 1.0], [0, 0, 1, 1, 2])
    assert c.jump_times == (0.5, 1.0) and c.values == (0, 1, 2)
    assert c(0.49) == 0 and c(0.5) == 1 and c(1.0) == 2


def test_json_round_trip():
    c = StepCurve((0.3, 1.0), (1, 0, 2))
    assert StepCurve.from_json(c.to_json()) == c


@pytest.mark.parametrize("times, values", [
    ((0.5,), (0,)),
    ((0.0,), (0, 1)),
    ((0.6, 0.4), (0, 1, 2)),
    ((0.5,), (1, 1)),
    ((1.5,), (0, 1)),
])
def test_invalid_curves(times, values):
    with pytest.raises(CurveError):
        StepCurve(times, values)


def test_inconsistent_lc1_flag():
    with pytest.raises(CurveError):
        StepCurve((1.0,), (0, 1), left_continuous_at_1=True)


def test_bad_intervals():
    s, c = jumps_1_2_half()
    with pytest.raises(CurveError):
        pointwise_variation(s, c, 0.7, 0.2)
    with pytest.raises(CurveError):
        pointwise_variation(s, c, 0.0, 1.0, "[[")
    with pytest.raises(CurveError):
        diff_quotient_integral(s, c, 1.5)
