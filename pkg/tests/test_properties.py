import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import partition_sup, projection
from w1lift.curves import StepCurve, check_bv_equivalences, pointwise_variation, variation_measure
from w1lift.lift import build_lift, check_marginals, lift_variation
from w1lift.space import MetricSpace, line_space
from w1lift.transport import glue_chain, w1
from w1lift.wcurves import MeasureCurve, curve_variation, dyadic_grid

COORDS = st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=2, max_size=5, unique=True)


def simplex(n):
    return st.lists(st.integers(0, 12), min_size=n, max_size=n).filter(lambda w: sum(w) > 0).map(
        lambda w: np.array(w, float) / sum(w))


@st.composite
def chains(draw):
    coords = draw(COORDS)
    space = MetricSpace.from_coords(coords)
    k = draw(st.integers(2, 4))
    ms = [draw(simplex(space.size)) for _ in range(k + 1)]
    return space, ms


@settings(max_examples=40, deadline=None)
@given(chains(), st.sampled_from(["markov", "sequential"]))
def test_glued_plan_has_prescribed_projections(chain, method):
    space, ms = chain
    cs = [w1(space, a, b).coupling for a, b in zip(ms, ms[1:])]
    plan = glue_chain(cs, method=method)
    for k, c in enumerate(cs):
        assert np.allclose(projection(plan.atoms, space.size, k, k + 1), c.dense(), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(chains(), st.integers(1, 3))
def test_built_lift_identity(chain, level):
    space, ms = chain
    times = dyadic_grid(level)
    samples = np.array([ms[min(int(t * (len(ms) - 1) + 1e-12), len(ms) - 1)] for t in times])
    dmc = MeasureCurve(space, times, samples)
    lift = build_lift(dmc, level)
    assert check_marginals(lift, dmc) <= 1e-12
    assert abs(lift_variation(lift)[0] - curve_variation(dmc)) <= 1e-10


@st.composite
def step_curves(draw):
    n = draw(st.integers(2, 5))
    space = line_space(sorted(draw(st.lists(st.integers(0, 50), min_size=n, max_size=n, unique=True))))
    k = draw(st.integers(0, 6))
    times = sorted(draw(st.lists(st.integers(1, 64), min_size=k, max_size=k, unique=True)))
    vals = [draw(st.integers(0, n - 1))]
    for _ in times:
        vals.append((vals[-1] + draw(st.integers(1, n - 1))) % n)
    return space, StepCurve(tuple(t / 64 for t in times), tuple(vals))


@settings(max_examples=60, deadline=None)
@given(step_curves(), st.integers(0, 64), st.integers(0, 64), st.sampled_from(["[]", "[)", "(]", "()"]))
def test_variation_invariants(sc, i, j, kind):
    space, c = sc
    a, b = min(i, j) / 64, max(i, j) / 64
    v = pointwise_variation(space, c, a, b, kind)
    assert abs(v - partition_sup(space.dist, c, a, b, kind)) <= 1e-12
    assert v <= pointwise_variation(space, c) + 1e-12
    # additivity over a split point
    m = variation_measure(space, c)
    assert abs(m.mass(0.0, 0.5, "[)") + m.mass(0.5, 1.0, "[]") - m.total) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(step_curves())
def test_bv_equivalences_hold(sc):
    space, c = sc
    assert check_bv_equivalences(space, c).ok
