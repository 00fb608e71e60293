import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xinform.errors import DomainError
from xinform.geometry import (AxisBox, DiagonalSegment, Grid, UniformBox, box_mass, cell_index, contains,
                              distribution_from_json, sample_points, trial_rng)

from conftest import unit

INF = math.inf


def test_contains_closed_interior_point():
    assert contains(AxisBox.closed((0, 0), (1, 1)), (0.5, 0.5))


def test_contains_open_upper_endpoint():
    box = AxisBox((0, 0), (1, 1), (True, True), (False, True))
    assert not contains(box, (1, 0.5))


def test_contains_closed_endpoints_with_infinite_sides():
    box = AxisBox((-INF, 0.2), (0.3, INF), (False, True), (True, False))
    assert contains(box, (0.3, 0.2))


def test_contains_dimension_mismatch():
    with pytest.raises(DomainError) as exc:
        contains(AxisBox.closed((0, 0), (1, 1)), (0.5,))
    assert exc.value.kind == "dimension-mismatch"


def test_bad_boxes_rejected():
    with pytest.raises(DomainError):
        AxisBox.closed((1.0,), (0.0,))
    with pytest.raises(DomainError):
        AxisBox.closed((math.nan,), (0.0,))


def test_box_mass_examples():
    assert box_mass(unit(2), AxisBox.closed((0, 0), (0.5, 1))) == pytest.approx(0.5, abs=1e-15)
    diag = DiagonalSegment(AxisBox.closed((0, 0), (1, 1)))
    assert box_mass(diag, AxisBox.closed((0, 0), (0.25, 1))) == pytest.approx(0.25, abs=1e-15)
    assert box_mass(unit(2), AxisBox.closed((2, 0), (3, 1))) == 0.0
    assert box_mass(unit(3), unit(3).support) == 1.0


def _random_box(rng, d):
    a = rng.uniform(-0.3, 1.0, d)
    b = a + rng.uniform(0.0, 0.8, d)
    return AxisBox.closed(a, b)


@pytest.mark.parametrize("dist", [unit(2), UniformBox(AxisBox.closed((-1, 2), (1, 5))),
                                  DiagonalSegment(AxisBox.closed((0, 0), (1, 1)))],
                         ids=["unit", "shifted", "diagonal"])
def test_box_mass_additive_under_a_cut(dist, rng):
    for _ in range(100):
        box = _random_box(rng, 2)
        j = int(rng.integers(2))
        t = rng.uniform(box.lower[j], box.upper[j])
        left_hi = list(box.upper)
        left_hi[j] = t
        right_lo = list(box.lower)
        right_lo[j] = t
        left = AxisBox(box.lower, tuple(left_hi), box.lower_closed, (True, True))
        right = AxisBox(tuple(right_lo), box.upper, (True, True), box.upper_closed)
        whole = box_mass(dist, box)
        assert 0.0 <= whole <= 1.0
        assert abs(box_mass(dist, left) + box_mass(dist, right) - whole) <= 1e-12


def test_sample_points_empty_and_reproducible():
    assert sample_points(unit(2), 0, 3).shape == (0, 2)
    a = sample_points(unit(3), 50, 11)
    b = sample_points(unit(3), 50, 11)
    assert a.tobytes() == b.tobytes()
    assert sample_points(unit(3), 50, 12).tobytes() != a.tobytes()


def test_sample_points_law_of_large_numbers():
    X = sample_points(unit(2), 10_000, 0)
    assert abs(X[:, 0].mean() - 0.5) <= 0.02


def test_diagonal_samples_lie_on_the_diagonal():
    X = sample_points(DiagonalSegment(AxisBox.closed((0, 0), (1, 1))), 5, 4)
    assert np.array_equal(X[:, 0], X[:, 1])


def test_box_frequency_matches_mass(rng):
    dist = unit(2)
    X = sample_points(dist, 100_000, 99)
    for _ in range(5):
        box = _random_box(rng, 2)
        p = box_mass(dist, box)
        freq = box.contains_many(X).mean()
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / 1e5) + 1e-12


def test_trial_streams_are_independent_of_each_other():
    a = trial_rng(7, 0).random(4)
    b = trial_rng(7, 1).random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, trial_rng(7, 0).random(4))


def test_cell_index_conventions():
    g = Grid.regular(unit(2).support, 3)
    assert cell_index(g, (0.1, 0.9)) == (0, 2)
    cut = g.cuts[0][0]
    assert cell_index(g, (cut, 0.5))[0] == 1
    assert cell_index(g, (1.0, 1.0)) == (2, 2)
    with pytest.raises(DomainError) as exc:
        cell_index(g, (1.2, 0.5))
    assert exc.value.kind == "outside-grid"


def test_cell_boxes_partition_the_grid(rng):
    g = Grid.regular(unit(2).support, 3)
    X = rng.random((500, 2))
    X[:10, 0] = 1.0
    for x in X:
        owners = [idx for idx in g.cells() if g.cell_box(idx).contains(x)]
        assert owners == [cell_index(g, x)]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(0, 3), min_size=2, max_size=2),
       st.lists(st.booleans(), min_size=4, max_size=4))
def test_box_json_round_trip(lo, widths, flags):
    hi = [a + w for a, w in zip(lo, widths)]
    box = AxisBox(tuple(lo), tuple(hi), tuple(flags[:2]), tuple(flags[2:]))
    again = AxisBox.from_json(json.loads(json.dumps(box.to_json())))
    assert again == box


def test_infinite_box_round_trip():
    box = AxisBox((-INF, 0.0), (1.0, INF), (False, True), (True, False))
    assert AxisBox.from_json(json.loads(json.dumps(box.to_json()))) == box


def test_distribution_round_trip():
    for dist in (unit(2), DiagonalSegment(AxisBox.closed((0, 0), (1, 1)))):
        again = distribution_from_json(json.loads(json.dumps(dist.to_json())))
        assert type(again) is type(dist) and again.box == dist.box
