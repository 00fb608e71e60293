import json

import numpy as np
import pytest

from xinform.errors import DomainError
from xinform.geometry import AxisBox, DiagonalSegment, Grid, UniformBox
from xinform.models import (AxisTree, ClassSpec, ConstantModel, GamModel, GridFunction, Leaf, LinearModel,
                            PolynomialModel, Split, evaluate, expectation, grid_to_tree, label, marginal_value,
                            model_from_json, validate_model_document)
from xinform.oracles import random_grid, random_tree

from conftest import unit


def _grid2(values):
    return GridFunction(Grid.regular(unit(2).support, 2), np.array(values, dtype=float).reshape(-1))


def test_evaluate_examples():
    assert evaluate(LinearModel((2.0, -1.0), 0.5), (1, 1)) == 1.5
    tree = AxisTree(2, Split(0, 0.5, Leaf(-1.0), Leaf(1.0)))
    assert evaluate(tree, (0.3, 0.9)) == -1.0
    assert evaluate(_grid2([[-1, 1], [0.5, -0.5]]), (0.75, 0.25)) == 0.5


def test_tree_left_branch_is_strictly_below_threshold():
    tree = AxisTree(1, Split(0, 0.5, Leaf(-1.0), Leaf(1.0)))
    assert evaluate(tree, (0.5,)) == 1.0
    assert evaluate(tree, (np.nextafter(0.5, 0),)) == -1.0


def test_label_sign_convention():
    assert label(ConstantModel(1, -0.2), (0.0,)) == -1
    assert label(ConstantModel(1, 0.0), (0.0,)) == 1
    assert label(ConstantModel(1, 0.7), (0.0,)) == 1


def test_bounded_models_stay_in_range(rng):
    X = rng.uniform(-0.2, 1.2, size=(10_000, 2))
    X = np.clip(X, 0, 1)
    for _ in range(5):
        for f in (random_grid(2, 3, rng), random_tree(2, 3, rng)):
            v = f.evaluate_many(X)
            assert np.all(np.abs(v) <= 1)


def test_expectation_examples(rng):
    a, b, c, d = rng.uniform(-1, 1, 4)
    assert expectation(_grid2([[a, b], [c, d]]), unit(2)) == pytest.approx((a + b + c + d) / 4, abs=1e-15)
    assert expectation(ConstantModel(3, 0.3), unit(3)) == 0.3


def test_linear_expectation_matches_monte_carlo(rng):
    box = AxisBox.closed((-1.0, 2.0), (3.0, 2.5))
    f = LinearModel((0.7, -1.3), 0.2)
    exact = expectation(f, UniformBox(box))
    assert exact == pytest.approx(0.7 * 1.0 - 1.3 * 2.25 + 0.2, abs=1e-12)
    X = UniformBox(box).sample(100_000, rng)
    assert abs(f.evaluate_many(X).mean() - exact) <= 1e-2


def test_expectation_between_extreme_values(rng):
    for _ in range(30):
        f = random_tree(2, 3, rng)
        vals = f.regions().values
        assert vals.min() - 1e-12 <= expectation(f, unit(2)) <= vals.max() + 1e-12


def test_expectation_on_the_diagonal():
    # cells (0,0) and (1,1) hold the whole diagonal
    f = _grid2([[0.2, 1.0], [-1.0, 0.6]])
    assert expectation(f, DiagonalSegment(AxisBox.closed((0, 0), (1, 1)))) == pytest.approx(0.4, abs=1e-12)


def test_marginal_value_endpoints(rng):
    f = random_grid(3, 2, rng)
    x = rng.random(3)
    assert marginal_value(f, unit(3), x, [0, 1, 2]) == pytest.approx(evaluate(f, x), abs=1e-12)
    assert marginal_value(f, unit(3), x, []) == pytest.approx(expectation(f, unit(3)), abs=1e-12)


def test_marginal_value_left_column():
    f = _grid2([[-1, 1], [0.5, -0.5]])
    assert marginal_value(f, unit(2), (0.25, 0.9), [0]) == pytest.approx(0.0, abs=1e-15)


def test_marginal_value_rejects_non_product_distribution():
    f = _grid2([[-1, 1], [0.5, -0.5]])
    with pytest.raises(DomainError):
        marginal_value(f, DiagonalSegment(AxisBox.closed((0, 0), (1, 1))), (0.2, 0.2), [0])


def test_marginal_value_matches_monte_carlo(rng):
    draws = 100_000
    for case in range(50):
        d = int(rng.integers(1, 4))
        f = random_tree(d, 3, rng) if case % 2 else random_grid(d, 3, rng)
        dist = unit(d)
        x = rng.random(d)
        S = [j for j in range(d) if rng.random() < 0.5]
        X = dist.sample(draws, rng)
        X[:, S] = x[S]
        vals = f.evaluate_many(X)
        se = vals.std(ddof=1) / np.sqrt(draws)
        assert abs(vals.mean() - marginal_value(f, dist, x, S)) <= 4 * se + 1e-12


def test_grid_and_equivalent_tree_agree(rng):
    for _ in range(20):
        d = int(rng.integers(1, 4))
        g = random_grid(d, int(rng.integers(1, 4)), rng)
        t = grid_to_tree(g)
        X = rng.random((300, d))
        assert np.max(np.abs(g.evaluate_many(X) - t.evaluate_many(X))) <= 1e-12
        assert abs(expectation(g, unit(d)) - expectation(t, unit(d))) <= 1e-12
        x = rng.random(d)
        S = [j for j in range(d) if rng.random() < 0.5]
        assert abs(marginal_value(g, unit(d), x, S) - marginal_value(t, unit(d), x, S)) <= 1e-12


def test_polynomial_and_gam_evaluate():
    p = PolynomialModel.from_terms(2, 2, {(1, 0): 0.5, (1, 1): -0.25})
    assert evaluate(p, (2.0, 1.0)) == pytest.approx(1.0 - 0.5)
    gam = GamModel((AxisTree(1, Split(0, 0.5, Leaf(-0.5), Leaf(0.5))), AxisTree(1, Leaf(0.25))))
    assert evaluate(gam, (0.7, 0.1)) == 0.75
    assert expectation(gam, unit(2)) == pytest.approx(0.25)


def test_out_of_range_models_rejected():
    with pytest.raises(DomainError):
        _grid2([[2, 0], [0, 0]])
    with pytest.raises(DomainError):
        LinearModel((3.0, 4.0), 0.0, M=5.0)


def test_class_spec_validation():
    assert ClassSpec.make("grid", k=3).k == 3
    assert ClassSpec.make("linear", M=2).label() == "linear(M=2)"
    for bad in (lambda: ClassSpec.make("grid", k=0), lambda: ClassSpec.make("lipschitz", L=-1),
                lambda: ClassSpec.make("linear"), lambda: ClassSpec.make("forest", K=2)):
        with pytest.raises(DomainError):
            bad()
    spec = ClassSpec.make("noisy-linear", M=10, eps=0.5)
    assert ClassSpec.from_json(json.loads(json.dumps(spec.to_json()))) == spec


@pytest.mark.parametrize("model", [
    _grid2([[-1, 1], [0.5, -0.5]]),
    AxisTree(2, Split(1, 0.25, Leaf(0.1), Split(0, 0.5, Leaf(-1.0), Leaf(1.0))), max_depth=2),
    LinearModel((0.5, -1.0), 0.25, M=2.0),
    PolynomialModel.from_terms(2, 2, {(0, 0): 0.1, (2, 0): -0.3}),
    ConstantModel(2, 0.5),
], ids=["grid", "tree", "linear", "polynomial", "constant"])
def test_model_json_round_trip(model, rng):
    doc = json.loads(json.dumps(model.to_json()))
    assert validate_model_document(doc) == []
    again = model_from_json(doc)
    X = rng.random((50, 2))
    assert np.array_equal(model.evaluate_many(X), again.evaluate_many(X))


def test_validate_reports_paths():
    doc = {"kind": "tree", "d": 2, "max_depth": 1,
           "root": {"feature": 3, "threshold": 0.5, "left": {"value": 2}, "right": {"value": 0}}}
    paths = {p for p, _ in validate_model_document(doc)}
    assert "$.root.feature" in paths
    assert "$.root.left.value" in paths
    grid = {"kind": "grid", "grid": Grid.regular(unit(1).support, 2).to_json(), "values": [0.5]}
    assert validate_model_document(grid)[0][0] == "$.values"
