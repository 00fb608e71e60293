import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xinform.errors import DomainError, NotFound
from xinform.explainers import (anchor_metrics, gradient_explain, grow_anchor, shap_explain,
                                shap_permutation_oracle, single_axis_counterfactual, strong_counterfactual,
                                top_gradient_component, weak_counterfactual)
from xinform.geometry import AxisBox, Grid
from xinform.models import (AxisTree, ConstantModel, GridFunction, Leaf, LinearModel, PolynomialModel, Split,
                            evaluate, expectation, label)
from xinform.oracles import random_grid, random_model, random_tree, scan_radius

from conftest import unit

STEP = AxisTree(1, Split(0, 0.5, Leaf(-1.0), Leaf(1.0)))
CHECKER = GridFunction(Grid.regular(unit(2).support, 2), np.array([-1.0, 1.0, 1.0, -1.0]))


def _grid(cuts, values):
    return GridFunction(Grid(unit(len(cuts)).support, cuts), np.array(values, dtype=float).reshape(-1))


# ---------------------------------------------------------------- gradients

def test_gradient_examples():
    assert gradient_explain(LinearModel((2.0, -1.0), 0.0), (0.3, 0.3)).vector == (2.0, -1.0)
    assert gradient_explain(CHECKER, (0.2, 0.3)).vector == (0.0, 0.0)
    assert gradient_explain(CHECKER, (0.5, 0.3)).undefined


def test_top_component_examples():
    tc = top_gradient_component(LinearModel((2.0, -3.0), 0.0), (0.1, 0.1))
    assert (tc.index, tc.magnitude) == (1, 3.0)
    tc = top_gradient_component(CHECKER, (0.2, 0.2))
    assert (tc.index, tc.magnitude) == (0, 0.0)
    assert top_gradient_component(LinearModel((-5.0, 1.0), 0.0), (0.4, 0.9)).to_json()["index"] == 1
    with pytest.raises(DomainError):
        top_gradient_component(CHECKER, (0.5, 0.5))


# ---------------------------------------------------------------- SHAP

def test_shap_constant_model_is_zero():
    assert shap_explain(ConstantModel(3, 0.4), unit(3), (0.1, 0.2, 0.3)).phi == (0.0, 0.0, 0.0)


def test_shap_one_dimension_is_value_minus_mean():
    phi = shap_explain(STEP, unit(1), (0.7,)).phi
    assert phi[0] == pytest.approx(1.0 - 0.0, abs=1e-15)


def test_shap_two_dimensions_closed_form(rng):
    f = random_grid(2, 3, rng)
    x = rng.random(2)
    v0 = expectation(f, unit(2))
    v1 = f.marginal_value(unit(2), x, [0])
    v2 = f.marginal_value(unit(2), x, [1])
    v12 = evaluate(f, x)
    phi = shap_explain(f, unit(2), x).phi
    assert phi[0] == pytest.approx(0.5 * ((v1 - v0) + (v12 - v2)), abs=1e-12)
    assert phi[1] == pytest.approx(0.5 * ((v2 - v0) + (v12 - v1)), abs=1e-12)


def test_shap_dimension_budget():
    f = ConstantModel(13, 0.0)
    with pytest.raises(DomainError) as exc:
        shap_explain(f, unit(13), (0.5,) * 13)
    assert exc.value.kind == "dimension-too-large"


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_shap_efficiency(seed, d):
    rng = np.random.default_rng(seed)
    f = random_model(d, rng)
    x = rng.random(d)
    phi = shap_explain(f, unit(d), x).phi
    assert abs(sum(phi) - (evaluate(f, x) - expectation(f, unit(d)))) <= 1e-9


def test_shap_efficiency_for_smooth_models(rng):
    for _ in range(20):
        f = PolynomialModel(3, 2, tuple(rng.uniform(-0.2, 0.2, 10)))
        x = rng.random(3)
        phi = shap_explain(f, unit(3), x).phi
        assert abs(sum(phi) - (evaluate(f, x) - expectation(f, unit(3)))) <= 1e-9


def test_shap_symmetry(rng):
    for _ in range(20):
        a = rng.uniform(-1, 1, (3, 3))
        f = _grid(((1 / 3, 2 / 3), (1 / 3, 2 / 3)), (a + a.T) / 2)
        x = rng.random(2)
        phi = shap_explain(f, unit(2), x).phi
        swapped = shap_explain(f, unit(2), x[::-1]).phi
        assert phi[0] == pytest.approx(swapped[1], abs=1e-12)
        assert phi[1] == pytest.approx(swapped[0], abs=1e-12)


def test_shap_dummy_feature(rng):
    for _ in range(20):
        col = rng.uniform(-1, 1, 3)
        f = _grid(((1 / 3, 2 / 3), (0.5,)), np.repeat(col[:, None], 2, axis=1))
        phi = shap_explain(f, unit(2), rng.random(2)).phi
        assert abs(phi[1]) <= 1e-12


def test_shap_matches_permutation_oracle(rng):
    worst = 0.0
    for i in range(50):
        d = 1 + i % 5
        f = random_model(d, rng)
        x = rng.random(d)
        a = np.array(shap_explain(f, unit(d), x).phi)
        b = np.array(shap_permutation_oracle(f, unit(d), x).phi)
        worst = max(worst, float(np.max(np.abs(a - b))))
    assert worst <= 1e-9


def test_shap_on_diagonal_needs_ambient_box():
    from xinform.geometry import DiagonalSegment
    seg = DiagonalSegment(AxisBox.closed((0, 0), (1, 1)))
    with pytest.raises(DomainError):
        shap_explain(CHECKER, seg, (0.2, 0.2))
    phi = shap_explain(CHECKER, seg, (0.2, 0.2), ambient=unit(2)).phi
    assert sum(phi) == pytest.approx(evaluate(CHECKER, (0.2, 0.2)) - expectation(CHECKER, seg), abs=1e-12)
    assert np.allclose(phi, shap_permutation_oracle(CHECKER, seg, (0.2, 0.2), ambient=unit(2)).phi, atol=1e-12)


# ---------------------------------------------------------------- anchors

def test_anchor_metrics_examples():
    rule = AxisBox.closed((0.25,), (0.75,))
    assert anchor_metrics(STEP, unit(1), rule, (0.6,)) == pytest.approx((0.5, 0.5))
    assert anchor_metrics(AxisTree(2, Leaf(0.5)), unit(2), AxisBox.closed((0, 0), (0.3, 0.3)), (0.1, 0.1))[1] == 1.0
    assert anchor_metrics(CHECKER, unit(2), unit(2).support, (0.1, 0.1))[0] == 1.0


def test_anchor_metrics_rejects_zero_mass_rule():
    with pytest.raises(DomainError):
        anchor_metrics(STEP, unit(1), AxisBox.closed((0.3,), (0.3,)), (0.3,))


def test_grow_anchor_examples():
    a = grow_anchor(AxisTree(2, Leaf(0.2)), unit(2), (0.4, 0.4), 1.0)
    assert a.coverage == 1.0
    a = grow_anchor(STEP, unit(1), (0.7,), 1.0)
    assert a.rule.lower == (0.5,) and a.rule.upper == (1.0,)
    assert a.coverage == pytest.approx(0.5)
    a = grow_anchor(CHECKER, unit(2), (0.2, 0.2), 0.9)
    assert anchor_metrics(CHECKER, unit(2), a.rule, (0.2, 0.2))[1] >= 0.9


def test_grow_anchor_sanity(rng):
    for _ in range(40):
        d = int(rng.integers(1, 4))
        f = random_tree(d, 3, rng) if rng.random() < 0.5 else random_grid(d, 3, rng)
        x = rng.random(d)
        p = float(rng.choice([0.6, 0.8, 1.0]))
        try:
            a = grow_anchor(f, unit(d), x, p)
        except NotFound:
            continue
        assert a.rule.contains(x)
        assert 0 <= a.precision <= 1 and 0 <= a.coverage <= 1
        assert a.precision >= p - 1e-12
        assert anchor_metrics(f, unit(d), a.rule, x) == (a.coverage, a.precision)


# ---------------------------------------------------------------- counterfactuals

def test_weak_counterfactual_examples():
    cf = weak_counterfactual(STEP, (0.3,), unit(1).support, seed=1)
    assert cf.point[0] >= 0.5 and label(STEP, cf.point) == 1
    with pytest.raises(NotFound):
        weak_counterfactual(ConstantModel(2, 0.3), (0.5, 0.5), unit(2).support, seed=1)
    cf = weak_counterfactual(CHECKER, (0.2, 0.2), unit(2).support, seed=3)
    assert label(CHECKER, (0.2, 0.2)) == -1 and label(CHECKER, cf.point) == 1


def test_weak_counterfactual_flips_label(rng):
    for s in range(30):
        f = random_tree(2, 3, rng)
        x = rng.random(2)
        try:
            cf = weak_counterfactual(f, x, unit(2).support, seed=s)
        except NotFound:
            continue
        assert label(f, cf.point) != label(f, x)


def test_strong_counterfactual_examples():
    cf = strong_counterfactual(STEP, (0.3,))
    assert cf.point == (0.5,) and cf.radius == pytest.approx(0.2)
    f = _grid(((0.5,), (0.5,)), [[-1, -1], [-1, 1]])
    assert strong_counterfactual(f, (0.25, 0.25)).radius == pytest.approx(math.sqrt(0.125), abs=1e-12)
    with pytest.raises(NotFound):
        strong_counterfactual(AxisTree(1, Leaf(0.5)), (0.1,))


def test_strong_counterfactual_is_optimal(rng):
    h = 2e-3
    for _ in range(10):
        f = random_tree(2, 3, rng)
        x = rng.random(2)
        try:
            cf = strong_counterfactual(f, x)
        except NotFound:
            continue
        # no opposite-label point strictly closer than the radius, up to scan resolution
        assert scan_radius(f, x, unit(2).support, h) >= cf.radius - h * math.sqrt(2)
        assert np.linalg.norm(np.array(cf.point) - x) == pytest.approx(cf.radius, abs=1e-12)


def test_single_axis_examples():
    cf = single_axis_counterfactual(STEP, (0.3,))
    assert (cf.axis, cf.step) == (0, pytest.approx(0.2))
    f = _grid(((0.5,), (0.9,)), [[-1, 1], [1, 1]])
    cf = single_axis_counterfactual(f, (0.1, 0.8))
    assert cf.axis == 1 and cf.step == pytest.approx(0.1)
    assert cf.to_json()["axis"] == 2
    diagonal_only = _grid(((0.5,), (0.5,)), [[-1, -1], [-1, 1]])
    with pytest.raises(NotFound):
        single_axis_counterfactual(diagonal_only, (0.25, 0.25))


def test_single_axis_tie_prefers_lower_axis_then_negative_move():
    f = _grid(((0.25, 0.75), (0.25, 0.75)), [[1, 1, 1], [1, -1, 1], [1, 1, 1]])
    cf = single_axis_counterfactual(f, (0.5, 0.5))
    assert cf.axis == 0 and cf.step == pytest.approx(-0.25)
