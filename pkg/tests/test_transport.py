import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cdf_w1, lp_w1, projection
from w1lift.examples import nonunique_instance
from w1lift.space import MetricSpace, line_space
from w1lift.transport import (Coupling, TransportError, glue, glue_chain, is_optimal, product_coupling,
                              shuffled_coupling, w1, w1_distance, w1_line_oracle)


def random_simplex(rng, n, sparsity=0.3):
    w = rng.uniform(size=n) * (rng.uniform(size=n) > sparsity)
    w[rng.integers(n)] += 0.1
    return w / w.sum()


@pytest.mark.parametrize("seed", range(25))
def test_against_lp_on_planar_spaces(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    space = MetricSpace.from_coords(rng.uniform(-1, 1, size=(n, 2)))
    a, b = random_simplex(rng, n), random_simplex(rng, n)
    res = w1(space, a, b)
    assert res.distance == pytest.approx(lp_w1(space.dist, a, b), abs=1e-8)
    assert res.cert.reported_gap <= 1e-9
    assert res.cert.lipschitz_excess(space) <= 1e-9
    assert np.allclose(res.coupling.first_marginal(), a, atol=1e-12)
    assert np.allclose(res.coupling.second_marginal(), b, atol=1e-12)


def test_dirac_distance():
    s = line_space([0.0, 1.0])
    assert w1_distance(s, [1, 0], [0, 1]) == 1.0


def test_nonunique_instance_distance_and_product_optimal():
    space, mu0, mu1 = nonunique_instance()
    assert w1_distance(space, mu0, mu1) == pytest.approx(3.0, abs=1e-12)
    assert is_optimal(space, product_coupling(mu0, mu1))


def test_half_shift_on_line():
    s = line_space([0.0, 0.5, 1.0])
    a, b = [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]
    assert w1_distance(s, a, b) == pytest.approx(0.5)
    assert w1_line_oracle(s, a, b) == pytest.approx(0.5)
    assert cdf_w1([0, 0.5, 1], np.array(a), np.array(b)) == pytest.approx(0.5)


def test_equal_measures_stay_put():
    rng = np.random.default_rng(3)
    space = MetricSpace.from_coords(rng.normal(size=(5, 2)))
    mu = random_simplex(rng, 5)
    res = w1(space, mu, mu)
    assert res.distance == 0.0
    assert all(i == j for i, j in res.coupling.entries)


def test_shuffled_coupling_is_feasible_but_suboptimal():
    s = line_space([0.0, 1.0, 2.0])
    mu, nu = [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]
    c = shuffled_coupling(mu, nu)
    assert np.allclose(c.first_marginal(), mu) and np.allclose(c.second_marginal(), nu)
    assert c.cost(s) > w1_distance(s, mu, nu) + 0.5
    assert not is_optimal(s, c)


def test_mass_mismatch_rejected():
    s = line_space([0.0, 1.0])
    with pytest.raises(TransportError):
        w1(s, [1, 0], [0.5, 0])
    with pytest.raises(TransportError):
        w1(s, [1, 0, 0], [0, 0, 1])


def test_glue_split():
    c12 = Coupling({(0, 0): 1.0}, 3)
    c23 = Coupling({(0, 1): 0.5, (0, 2): 0.5}, 3)
    plan = glue(c12, c23)
    assert dict(plan.atoms) == {(0, 0, 1): 0.5, (0, 0, 2): 0.5}



@pytest.mark.parametrize("method", ["markov", "sequential"])
def test_chain_pair_projections(method):
    rng = np.random.default_rng(11)
    space = line_space([0.0, 1.0, 3.0])
    ms = [random_simplex(rng, 3, 0.0) for _ in range(5)]
    cs = [w1(space, a, b).coupling for a, b in zip(ms, ms[1:])]
    plan = glue_chain(cs, method=method)
    assert plan.arity == 5
    for k, c in enumerate(cs):
        assert np.allclose(projection(plan.atoms, 3, k, k + 1), c.dense(), atol=1e-12)
    for k, m in enumerate(ms):
        assert np.allclose(plan.marginal(k), m, atol=1e-12)
    assert plan.total_mass() == pytest.approx(1.0)


def test_markov_gluing_is_conditionally_independent():
    rng = np.random.default_rng(5)
    ms = [random_simplex(rng, 3, 0.0) for _ in range(3)]
    cs = [Coupling.from_dense(np.outer(a, b)) for a, b in zip(ms, ms[1:])]
    p13 = glue_chain(cs).pair_projection(0, 2)
    # product couplings glue to the product of the outer marginals
    assert np.allclose(p13, np.outer(ms[0], ms[2]), atol=1e-12)


def test_identity_chain_is_diagonal():
    mu = np.array([0.2, 0.3, 0.5])
    ident = Coupling.from_dense(np.diag(mu))
    plan = glue_chain([ident] * 4)
    assert all(len(set(p)) == 1 for p, _ in plan.atoms)


def test_interface_mismatch_raises():
    c1 = Coupling({(0, 1): 1.0}, 2)
    c2 = Coupling({(0, 0): 1.0}, 2)
    with pytest.raises(TransportError):
        glue(c1, c2)


def test_gluing_is_deterministic():
    rng = np.random.default_rng(2)
    space = MetricSpace.from_coords(rng.normal(size=(6, 2)))
    ms = [random_simplex(rng, 6) for _ in range(6)]
    cs = [w1(space, a, b).coupling for a, b in zip(ms, ms[1:])]
    for method in ("markov", "sequential"):
        assert glue_chain(cs, method=method).atoms == glue_chain(cs, method=method).atoms


weights = st.lists(st.integers(0, 20), min_size=4, max_size=4).filter(lambda w: sum(w) > 0)


@settings(max_examples=60, deadline=None)
@given(weights, weights, weights, st.lists(st.floats(-5, 5), min_size=4, max_size=4, unique=True))
def test_metric_properties(a, b, c, xs):
    xs = sorted(xs)
    if min(np.diff(xs)) < 1e-3:
        return
    s = line_space(xs)
    a, b, c = (np.array(w, float) / sum(w) for w in (a, b, c))
    ab, ba = w1_distance(s, a, b), w1_distance(s, b, a)
    assert ab == pytest.approx(ba, abs=1e-9)
    assert ab <= w1_distance(s, a, c) + w1_distance(s, c, b) + 1e-9
    assert ab == pytest.approx(cdf_w1(xs, a, b), abs=1e-8)
