import json

import numpy as np
import pytest

from oracles import triangle_violations
from w1lift.space import (DiscreteMeasure, MetricError, MetricSpace, dirac, first_moment, line_space,
                          uniform, validate_metric)


def test_line_space_distances():
    s = line_space([-2, -1.5, -1, 1, 1.5, 2])
    assert s.dist[0, 5] == 4.0
    assert s.is_line
    assert np.allclose(s.dist, np.abs(np.subtract.outer(s.coords[:, 0], s.coords[:, 0])))


def test_triangle_violation_reported_with_indices():
    d = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    with pytest.raises(MetricError) as err:
        MetricSpace(d)
    tri = [v for v in err.value.violations if v.axiom == "triangle"]
    assert any(v.indices == (0, 1, 2) for v in tri)
    assert {(v.indices) for v in tri} == {t for t in triangle_violations(d)}
    assert "np.float64" not in str(err.value)


@pytest.mark.parametrize("d, axiom", [
    ([[0, 1], [2, 0]], "symmetry"),
    ([[0, -1], [-1, 0]], "positivity"),
    ([[1, 1], [1, 0]], "identity"),
    ([[0, 0], [0, 0]], "positivity"),
])
def test_axiom_violations(d, axiom):
    s = MetricSpace(d, check=False)
    assert axiom in {v.axiom for v in validate_metric(s)}


def test_valid_metric_has_no_violations():
    rng = np.random.default_rng(0)
    s = MetricSpace.from_coords(rng.normal(size=(7, 3)))
    assert validate_metric(s) == []


def test_bad_shapes():
    with pytest.raises(ValueError):
        MetricSpace(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        line_space([1.0, 0.0])


def test_first_moment():
    s = line_space([0.0, 1.0])
    assert first_moment(s, uniform(2), 0) == 0.5
    s3 = line_space([-2.0, -1.5, -1.0, 0.0])
    assert first_moment(s3, [1 / 3, 1 / 3, 1 / 3, 0.0], 3) == pytest.approx(1.5)
    with pytest.raises(IndexError):
        first_moment(s, uniform(2), 5)


def test_measures():
    assert np.array_equal(dirac(3, 1).weights, [0, 1, 0])
    assert np.array_equal(uniform(4, [0, 2]).weights, [0.5, 0, 0.5, 0])
    with pytest.raises(ValueError):
        DiscreteMeasure([0.5, 0.6])
    with pytest.raises(ValueError):
        DiscreteMeasure([1.5, -0.5])


def test_json_round_trip():
    for s in (line_space([0, 1, 3]), MetricSpace([[0, 2, 3], [2, 0, 1.5], [3, 1.5, 0]])):
        back = MetricSpace.from_json(json.dumps(s.to_json()))
        assert np.array_equal(back.dist, s.dist)
        assert back.labels == s.labels
