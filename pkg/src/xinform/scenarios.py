"""Registry of runnable informativeness experiments.

Each scenario fixes a function class, a distribution, a model f and a point x0,
computes f's explanation with the explainers module, turns that explanation into
constraints and runs paired gap reports.  When the scenario carries a
conditioning event, the conditional report is the headline.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, NotFound
from .explainers import (grow_anchor, gradient_explain, locally_stable_gradient, shap_explain, strong_counterfactual,
                         top_gradient_component, weak_counterfactual)
from .geometry import AxisBox, DiagonalSegment, Grid, UniformBox
from .models import (AxisTree, ClassSpec, GamModel, GridFunction, LinearModel, PolynomialModel, grid_to_tree,
                     tree_from_intervals)
from .rademacher import (AnchorHolds, EventSpec, GapReport, GradientAt, LocallyStableGradient, MeanEquals, ShapEquals,
                         SignAt, SignOnBall, TopComponentAt, ValueAt, gap_report)

BUDGETS = {"n": 16, "K": 4, "d": 6, "k": 6}
INT_KEYS = {"d", "k", "K", "n", "trials", "seed"}
COMMON = {"n": 4, "trials": 200, "seed": 7}


@dataclass(frozen=True)
class Setup:
    cls: ClassSpec
    dist: object
    x0: tuple
    model: object
    explanation: dict
    predict: tuple
    explain: tuple
    event: EventSpec | None = None
    hints: tuple = ()


@dataclass(frozen=True)
class Scenario:
    id: str
    setting: str
    expected: str  # "informative" or "non-informative"
    build: Callable = field(repr=False)
    params: dict = field(default_factory=dict)
    bracket: bool = False
    note: str = ""

    def defaults(self) -> dict:
        return {**COMMON, **self.params}


# ---------------------------------------------------------------- helpers

def _centered_box(d: int) -> UniformBox:
    return UniformBox(AxisBox.closed((-0.5,) * d, (0.5,) * d))


def _unit_box(d: int) -> UniformBox:
    return UniformBox(AxisBox.closed((0.0,) * d, (1.0,) * d))


def _gradient_x0(d: int) -> tuple:
    return tuple(0.1 if j % 2 == 0 else -0.1 for j in range(d))


def _diagonal_linear(d: int, M=None) -> LinearModel:
    return LinearModel(tuple([1 / math.sqrt(d)] * d), 0.0, M)


def _checkerboard(dist, k: int) -> GridFunction:
    grid = Grid.regular(dist.support, k)
    return GridFunction(grid, np.array([(-1.0) ** sum(idx) for idx in grid.cells()]))


def _band_tree(d: int, low: float, high: float) -> AxisTree:
    """-1 below `low` and above `high` along the last feature, +1 in between."""
    return AxisTree(d, tree_from_intervals(d, d - 1, (low, high), (-1.0, 1.0, -1.0)))


def _band_x0(d: int) -> tuple:
    return tuple([0.4] * (d - 1) + [0.5])


def _value(model, x0) -> ValueAt:
    return ValueAt(x0, model.evaluate(x0))


def _box_in_ball(center, radius: float, dist) -> AxisBox:
    h = radius / math.sqrt(len(center))
    c = np.asarray(center)
    return AxisBox.open(tuple(c - h), tuple(c + h))


def _check_model(model, dist, default):
    if model is None:
        return default
    if model.d != dist.d:
        raise DomainError("dimension-mismatch", f"model has dimension {model.d}, scenario uses {dist.d}")
    return model


def _forcing_event(x0, c: int, green: int, K: int, region: AxisBox, n: int) -> EventSpec:
    """Points that use up every leaf of a depth-K tree close to x0.

    Boxes just past x0 along feature 0 carry the label `green`; a diagonal
    staircase on the other side carries labels alternating from -c.  A tree that
    fits them has all its cuts near x0, so it takes the value `green` on most of
    the side of x0 that holds the green boxes.  That side is the heavier one
    within `region`.
    """
    x0 = np.asarray(x0, dtype=float)
    d = len(x0)
    lo, hi = np.asarray(region.lo, float), np.asarray(region.hi, float)
    side = 1.0 if (x0[0] - lo[0]) <= (hi[0] - x0[0]) else -1.0
    steps = 2 ** K - 1 if green == c else 2 ** K - 2
    need = 2 ** (d - 1) + steps
    if n < need:
        raise DomainError("budget", f"the event needs n >= {need}")
    room = min(float(np.min(x0 - lo)), float(np.min(hi - x0)))
    eps = min(0.05, room / 3)
    if eps <= 0:
        raise DomainError("degenerate-sample", "x0 sits on the boundary of the region")
    boxes = []
    for signs in itertools.product((1.0, -1.0), repeat=d - 1):
        a = [x0[0], x0[0] + side * eps]
        lows, highs = [min(a)], [max(a)]
        for j, sg in enumerate(signs, start=1):
            u, v = x0[j] + sg * eps, x0[j] + sg * 2 * eps
            lows.append(min(u, v)); highs.append(max(u, v))
        boxes.append(AxisBox.open(tuple(lows), tuple(highs)))
    regions, labels = list(boxes), [green] * len(boxes)
    delta = eps / max(steps, 1)
    direction = np.full(d, -1.0)
    direction[0] = -side
    stair = []
    for k in range(1, steps + 1):
        u, v = x0 + (k - 1) * delta * direction, x0 + k * delta * direction
        stair.append((AxisBox.open(tuple(np.minimum(u, v)), tuple(np.maximum(u, v))), -c if k % 2 else c))
    for i in range(n - len(boxes)):
        box, lab = stair[i % steps]
        regions.append(box); labels.append(lab)
    return EventSpec(tuple(regions), tuple(labels))


# ---------------------------------------------------------------- gradient scenarios

def _gradient_setup(cls, P, model, d, extra=None, event=None, dist=None, M=None):
    dist = dist or _centered_box(d)
    f = _check_model(model, dist, _diagonal_linear(d, M))
    x0 = _gradient_x0(d)
    g = gradient_explain(f, x0)
    if g.undefined:
        raise DomainError("undefined-gradient", "the model is not differentiable at x0")
    pred = (_value(f, x0),)
    expl = pred + ((GradientAt(x0, g.vector),) if extra is None else extra(f, x0))
    return Setup(cls, dist, x0, f, g.to_json(), pred, expl, event, (f,))


def _grad_linear(P, model):
    return _gradient_setup(ClassSpec.make("linear", M=P["M"]), P, model, P["d"], M=P["M"])


def _grad_noisy_linear(P, model):
    return _gradient_setup(ClassSpec.make("noisy-linear", M=P["M"], eps=P["eps"]), P, model, P["d"], M=P["M"])


def _grad_differentiable(P, model):
    return _gradient_setup(ClassSpec.make("bounded-differentiable"), P, model, P["d"])


def _grad_poly_unbounded(P, model):
    return _gradient_setup(ClassSpec.make("poly-unbounded"), P, model, P["d"])


def _grad_smooth(P, model):
    return _gradient_setup(ClassSpec.make("smooth-grad", alpha=P["alpha"], beta=P["beta"]), P, model, P["d"])


def _grad_poly_bounded(P, model):
    d = P["d"]
    if model is None:
        terms = {tuple(int(j == i) for j in range(d)): 1 / math.sqrt(d) for i in range(d)}
        model = PolynomialModel.from_terms(d, P["D"], terms, P["M"])
    return _gradient_setup(ClassSpec.make("poly-bounded", D=P["D"], M=P["M"]), P, model, d)


def _grad_locally_stable(P, model):
    d, r, delta = P["d"], P["r"], P["delta"]
    x0 = _gradient_x0(d)
    region = _box_in_ball(x0, r, None)
    event = EventSpec((region,) * P["n"])

    def extra(f, x):
        ls = locally_stable_gradient(f, x, r, delta)
        return (LocallyStableGradient(x, ls.vector, ls.r, ls.delta),)

    s = _gradient_setup(ClassSpec.make("bounded-gradient", alpha=P["alpha"]), P, model, d, extra, event)
    ls = locally_stable_gradient(s.model, x0, r, delta)
    return replace(s, explanation=ls.to_json())


def _grad_piecewise_linear(P, model):
    cls = ClassSpec.make("piecewise-linear-grid", k=P["k"], M=P["M"])
    return _gradient_setup(cls, P, model, P["d"], M=P["M"])


def _grad_top_component(P, model):
    def extra(f, x):
        t = top_gradient_component(f, x)
        return (TopComponentAt(x, t.index, t.magnitude),)

    s = _gradient_setup(ClassSpec.make("linear", M=P["M"]), P, model, P["d"], extra, M=P["M"])
    return replace(s, explanation=top_gradient_component(s.model, s.x0).to_json())


def _grad_tree_nontrivial(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _band_tree(d, 0.45, 0.55))
    x0 = _band_x0(d)
    g = gradient_explain(f, x0)
    if g.undefined:
        raise DomainError("undefined-gradient", "x0 sits on a split of the model")
    pred = (_value(f, x0),)
    return Setup(ClassSpec.make("tree-bounded", K=P["K"]), dist, x0, f, g.to_json(), pred,
                 pred + (GradientAt(x0, g.vector),), None, (f,))


# ---------------------------------------------------------------- SHAP scenarios

def _shap_setup(cls, dist, f, x0, event=None, ambient=None, base=()):
    phi = shap_explain(f, dist, x0, ambient)
    pred = tuple(base) + (_value(f, x0),)
    expl = pred + (ShapEquals(x0, phi.phi, dist, ambient),)
    return Setup(cls, dist, x0, f, phi.to_json(), pred, expl, event, (f,))


def _shap_grid(P, model):
    d, k, n = P["d"], P["k"], P["n"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _checkerboard(dist, k))
    x0 = (0.5,) * d
    # one point in every cell except x0's, all labelled +1
    grid = Grid.regular(dist.support, k)
    own = grid.cell_index(np.array(x0))
    cells = [grid.cell_box(idx) for idx in grid.cells() if tuple(idx) != tuple(own)]
    if n < len(cells):
        raise DomainError("budget", f"the event needs n >= {len(cells)}")
    regions = tuple(cells) + (None,) * (n - len(cells))
    event = EventSpec(regions, (1,) * n)
    return _shap_setup(ClassSpec.make("grid", k=k), dist, f, x0, event)


def _manifold_model(dist, k: int) -> GridFunction:
    grid = Grid.regular(dist.support, k)
    diag = np.linspace(1.0, -1.0, k) if k % 2 == 0 else None
    vals = []
    for idx in grid.cells():
        if len(set(idx)) == 1:
            i = idx[0]
            if diag is not None:
                vals.append(diag[i])
            else:
                # zero-mean values on the diagonal cells with -1 in the middle
                vals.append(-1.0 if i == k // 2 else 1.0 / (k - 1))
        else:
            vals.append((-1.0) ** sum(idx))
    return GridFunction(grid, np.array(vals))


def _shap_manifold(P, model):
    k = P["k"]
    ambient = _unit_box(2)
    dist = DiagonalSegment(ambient.support)
    f = _check_model(model, dist, _manifold_model(ambient, k))
    x0 = (0.5, 0.5)
    mean = f.expectation(dist)
    return _shap_setup(ClassSpec.make("grid", k=k), dist, f, x0, ambient=ambient, base=(MeanEquals(mean, dist),))


def _shap_tree_unbounded(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _band_tree(d, 0.45, 0.55))
    return _shap_setup(ClassSpec.make("tree-unbounded"), dist, f, _band_x0(d))


def _default_gam(d: int) -> GamModel:
    comps = []
    for j in range(d):
        cut = 0.5 - 0.1 * (j % 2)
        amp = 0.6 / d
        comps.append(AxisTree(1, tree_from_intervals(1, 0, (cut,), (amp, -amp))))
    return GamModel(tuple(comps))


def _shap_gam_unbounded(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _default_gam(d))
    x0 = tuple(0.3 if j % 2 == 0 else 0.6 for j in range(d))
    return _shap_setup(ClassSpec.make("gam-trees-unbounded"), dist, f, x0)


def _shap_tree_bounded(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _band_tree(d, 0.45, 0.55))
    _require_depth(f, P["K"])
    x0 = _band_x0(d)
    green = 1 if f.expectation(dist) <= 0 else -1
    event = _forcing_event(x0, f.label(x0), green, P["K"], dist.support, P["n"])
    return _shap_setup(ClassSpec.make("tree-bounded", K=P["K"]), dist, f, x0, event)


def _require_depth(f, K):
    if isinstance(f, AxisTree) and f.depth > K:
        raise DomainError("budget", f"the model has depth {f.depth} > K = {K}")


# ---------------------------------------------------------------- anchor scenarios

def _anchor_setup(cls, dist, f, x0, p, perfect_event=False, n=None, K=None):
    a = grow_anchor(f, dist, x0, p)
    if a.precision >= 1.0 and not perfect_event:
        raise NotFound("the grown anchor is perfect; lower the precision floor or change x0")
    c = f.label(x0)
    pred = (_value(f, x0),)
    expl = pred + (AnchorHolds(a.rule, a.precision, x0, c, dist, True),)
    event = None
    if perfect_event:
        event = EventSpec((a.rule,) * n, (-c,) * n)
    elif K is not None:
        # push the precision to the far side of 1/2 from the anchor's
        event = _forcing_event(x0, c, c if a.precision <= 0.5 else -c, K, a.rule, n)
    return Setup(cls, dist, x0, f, a.to_json(), pred, expl, event, (f,))


def _anchor_unbounded(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, grid_to_tree(_checkerboard(dist, P["k"])))
    return _anchor_setup(ClassSpec.make("tree-unbounded"), dist, f, (0.5,) * d, P["p"])


def _anchor_bounded(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _band_tree(d, 0.3, 0.7))
    _require_depth(f, P["K"])
    return _anchor_setup(ClassSpec.make("tree-bounded", K=P["K"]), dist, f, _band_x0(d), P["p"], n=P["n"], K=P["K"])


def _anchor_perfect(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, grid_to_tree(_checkerboard(dist, P["k"])))
    return _anchor_setup(ClassSpec.make("tree-unbounded"), dist, f, (0.5,) * d, 1.0, True, P["n"])


# ---------------------------------------------------------------- counterfactual scenarios

def _cf_weak_large(P, model):
    d = P["d"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _band_tree(d, 0.45, 0.55))
    x0 = _band_x0(d)
    cf = weak_counterfactual(f, x0, dist.support, P["seed"])
    pred = (_value(f, x0),)
    expl = pred + (SignAt(cf.point, f.label(cf.point)),)
    return Setup(ClassSpec.make("tree-unbounded"), dist, x0, f, cf.to_json(), pred, expl, None, (f,))


def _staircase_boxes(x0, xc, count, dist) -> tuple:
    """Boxes x0 + ((k-1) v, k v) with v = x0 - x_C (zero entries replaced), shrunk
    uniformly when the staircase would leave the support."""
    x0, xc = np.asarray(x0), np.asarray(xc)
    v = x0 - xc
    v[v == 0] = 1.0
    lo, hi = dist.support.lo, dist.support.hi
    far = x0 + count * v
    room = np.where(v > 0, (hi - x0) / np.abs(count * v), (x0 - lo) / np.abs(count * v))
    v = v * min(1.0, float(room.min()))
    boxes = []
    for k in range(1, count + 1):
        a, b = x0 + (k - 1) * v, x0 + k * v
        boxes.append(AxisBox.open(tuple(np.minimum(a, b)), tuple(np.maximum(a, b))))
    del far
    return tuple(boxes)


def _cf_weak_tree_bounded(P, model):
    d, K, n = P["d"], P["K"], P["n"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _band_tree(d, 0.45, 0.55))
    _require_depth(f, K)
    x0 = _band_x0(d)
    cf = weak_counterfactual(f, x0, dist.support, P["seed"])
    count = 2 ** K - 1
    if n < count:
        raise DomainError("budget", f"the event needs n >= {count}")
    boxes = _staircase_boxes(x0, cf.point, count, dist)
    c = f.label(x0)
    regions = tuple(boxes[i % count] for i in range(n))
    labels = tuple(-c if (i % count) % 2 == 0 else c for i in range(n))
    pred = (_value(f, x0),)
    expl = pred + (SignAt(cf.point, f.label(cf.point)),)
    return Setup(ClassSpec.make("tree-bounded", K=K), dist, x0, f, cf.to_json(), pred, expl,
                 EventSpec(regions, labels), (f,))


def _cf_weak_lipschitz(P, model):
    d, L, n = P["d"], P["L"], P["n"]
    dist = _centered_box(d)
    f = _check_model(model, dist, _diagonal_linear(d))
    x0 = tuple([0.2] + [0.1] * (d - 1))
    # the raw probe: the proof only needs some opposite point with its value
    cf = weak_counterfactual(f, x0, dist.support, P["seed"], steps=0)
    yc = f.evaluate(cf.point)
    if yc == 0:
        raise DomainError("degenerate-sample", "the counterfactual sits on the decision boundary")
    region = _box_in_ball(cf.point, abs(yc) / L, dist)
    event = EventSpec((region,) * n, (-f.label(cf.point),) * n)
    pred = (_value(f, x0),)
    expl = pred + (ValueAt(cf.point, yc),)
    return Setup(ClassSpec.make("lipschitz", L=L), dist, x0, f, {**cf.to_json(), "value": yc}, pred, expl, event, (f,))


def _cf_strong(P, model):
    d, n = P["d"], P["n"]
    dist = _unit_box(d)
    f = _check_model(model, dist, _band_tree(d, 0.45, 0.55))
    x0 = _band_x0(d)
    cf = strong_counterfactual(f, x0)
    c = f.label(x0)
    pred = (_value(f, x0),)
    expl = pred + (SignOnBall(x0, cf.radius, c),)
    event = EventSpec((_box_in_ball(x0, cf.radius, dist),) * n, (-c,) * n)
    return Setup(ClassSpec.make("tree-unbounded"), dist, x0, f, cf.to_json(), pred, expl, event, (f,))


# ---------------------------------------------------------------- registry

_ROWS = [
    Scenario("grad-linear", "gradient explanation, linear functions with bounded coefficients",
             "informative", _grad_linear, {"d": 2, "M": 10.0}),
    Scenario("grad-noisy-linear", "gradient explanation, linear functions plus bounded wiggles",
             "non-informative", _grad_noisy_linear, {"d": 2, "M": 10.0, "eps": 0.1}),
    Scenario("grad-differentiable", "gradient explanation, all differentiable functions into [-1, 1]",
             "non-informative", _grad_differentiable, {"d": 2}),
    Scenario("grad-poly-unbounded", "gradient explanation, polynomials of any degree into [-1, 1]",
             "non-informative", _grad_poly_unbounded, {"d": 2}),
    Scenario("grad-smooth", "gradient explanation, bounded and Lipschitz gradients",
             "informative", _grad_smooth, {"d": 2, "alpha": 2.0, "beta": 1.0}, bracket=True,
             note="bracket solver: can certify informative only"),
    Scenario("grad-poly-bounded", "gradient explanation, polynomials of bounded degree and coefficients",
             "informative", _grad_poly_bounded, {"d": 2, "D": 2, "M": 1.0}),
    Scenario("grad-locally-stable", "locally stable gradient explanation, bounded gradients",
             "informative", _grad_locally_stable, {"d": 2, "alpha": 2.0, "r": 0.3, "delta": 1.0}, bracket=True,
             note="bracket solver: can certify informative only"),
    Scenario("grad-piecewise-linear", "gradient explanation, piecewise linear functions on a known grid",
             "informative", _grad_piecewise_linear, {"d": 2, "k": 2, "M": 10.0}),
    Scenario("grad-top-component", "largest gradient component, linear functions",
             "informative", _grad_top_component, {"d": 2, "M": 10.0}),
    Scenario("grad-tree-nontrivial", "gradient explanation, depth-limited trees",
             "non-informative", _grad_tree_nontrivial, {"d": 2, "K": 3, "n": 6}),
    Scenario("shap-grid", "SHAP, piecewise constant functions on a known grid",
             "informative", _shap_grid, {"d": 2, "k": 3, "n": 8}, note="needs n >= k^d - 1"),
    Scenario("shap-manifold", "SHAP, mean-zero grid functions, data on the diagonal",
             "non-informative", _shap_manifold, {"k": 3, "n": 6}),
    Scenario("shap-tree-unbounded", "SHAP, trees of any depth",
             "non-informative", _shap_tree_unbounded, {"d": 2}),
    Scenario("shap-gam-unbounded", "SHAP, additive models with deep tree components",
             "non-informative", _shap_gam_unbounded, {"d": 2}),
    Scenario("shap-tree-bounded", "SHAP, depth-limited trees",
             "informative", _shap_tree_bounded, {"d": 2, "K": 2, "n": 5}, bracket=True,
             note="needs n >= 2^(d-1) + 2^K - 1"),
    Scenario("anchor-unbounded", "anchor with precision below 1, trees of any depth",
             "non-informative", _anchor_unbounded, {"d": 2, "k": 3, "p": 0.5}),
    Scenario("anchor-bounded", "anchor with precision below 1, depth-limited trees",
             "informative", _anchor_bounded, {"d": 2, "K": 2, "n": 5, "p": 0.5}, bracket=True,
             note="needs n >= 2^(d-1) + 2^K - 1"),
    Scenario("anchor-perfect", "anchor with precision 1, trees of any depth",
             "informative", _anchor_perfect, {"d": 2, "k": 3}),
    Scenario("cf-weak-large", "weak counterfactual, trees of any depth",
             "non-informative", _cf_weak_large, {"d": 2}),
    Scenario("cf-weak-tree-bounded", "weak counterfactual, depth-limited trees",
             "informative", _cf_weak_tree_bounded, {"d": 2, "K": 2, "n": 3}, note="needs n >= 2^K - 1"),
    Scenario("cf-weak-lipschitz", "weak counterfactual with its value, Lipschitz functions",
             "informative", _cf_weak_lipschitz, {"d": 2, "L": 2.0}),
    Scenario("cf-strong", "strong counterfactual, trees of any depth",
             "informative", _cf_strong, {"d": 2}),
]
REGISTRY = {s.id: s for s in _ROWS}


def list_scenarios() -> list:
    return [{"id": s.id, "setting": s.setting, "expected": s.expected, "bracket": s.bracket, "note": s.note}
            for s in _ROWS]


def get_scenario(sid: str) -> Scenario:
    try:
        return REGISTRY[sid]
    except KeyError:
        raise NotFound(f"unknown scenario {sid!r}") from None


def resolve_params(s: Scenario, overrides: dict | None = None) -> dict:
    P = s.defaults()
    for key, raw in (overrides or {}).items():
        if key not in P:
            raise DomainError("bad-override", f"scenario {s.id} has no parameter {key!r}; known: {sorted(P)}")
        try:
            val = int(raw) if key in INT_KEYS | {"D"} else float(raw)
        except (TypeError, ValueError):
            raise DomainError("bad-override", f"parameter {key} needs a number, got {raw!r}") from None
        if key in INT_KEYS | {"D"} and float(raw) != val:
            raise DomainError("bad-override", f"parameter {key} must be an integer")
        P[key] = val
    for key, cap in BUDGETS.items():
        if key in P and P[key] > cap:
            raise DomainError("budget", f"{key} = {P[key]} exceeds the budget {cap}")
    if P["n"] < 1 or P["trials"] < 1:
        raise DomainError("budget", "n and trials must be at least 1")
    if "p" in P and not 0 < P["p"] <= 1:
        raise DomainError("bad-override", "p must lie in (0, 1]")
    return P


def build_setup(sid: str, overrides: dict | None = None, model=None) -> tuple:
    s = get_scenario(sid)
    P = resolve_params(s, overrides)
    return s, P, s.build(P, model)


@dataclass(frozen=True)
class ScenarioOutcome:
    scenario: Scenario
    params: dict
    setup: Setup
    headline: GapReport
    unconditional: GapReport | None

    @property
    def conforms(self) -> bool:
        want = "informative" if self.scenario.expected == "informative" else "non-informative-consistent"
        return self.headline.verdict == want

    def to_json(self) -> dict:
        st = self.setup
        return {
            "scenario": self.scenario.id,
            "setting": self.scenario.setting,
            "expected": self.scenario.expected,
            "conforms": self.conforms,
            "params": self.params,
            "class": st.cls.to_json(),
            "x0": list(st.x0),
            "model": st.model.to_json(),
            "explanation": st.explanation,
            "event": None if st.event is None else st.event.to_json(),
            "headline": self.headline.to_json(),
            "unconditional": None if self.unconditional is None else self.unconditional.to_json(),
        }


def run_scenario(sid: str, overrides: dict | None = None, model=None, workers: int = 1,
                 timing: bool = False) -> ScenarioOutcome:
    s, P, st = build_setup(sid, overrides, model)
    args = (st.cls, st.predict, st.explain, st.dist, P["n"], P["trials"], P["seed"])
    uncond = gap_report(*args, scenario_id=sid, workers=workers, hints=st.hints, timing=timing)
    if st.event is None:
        return ScenarioOutcome(s, P, st, uncond, None)
    cond = gap_report(*args, event=st.event, scenario_id=sid, workers=workers, hints=st.hints, timing=timing)
    return ScenarioOutcome(s, P, st, cond, uncond)


def plot_series(sid: str, ns=None, overrides: dict | None = None, workers: int = 1) -> str:
    """Tab-separated gap-vs-n series of the headline report."""
    s = get_scenario(sid)
    base = resolve_params(s, overrides)
    if ns is None:
        ns = sorted({1, 2, 4, base["n"], min(BUDGETS["n"], 2 * base["n"])})
    lines = ["n\tgap_mean\tgap_ci_low\tgap_ci_high\tverdict"]
    for n in ns:
        try:
            out = run_scenario(sid, {**(overrides or {}), "n": n}, workers=workers)
        except DomainError as exc:
            if exc.kind != "budget":
                raise
            continue
        lo, hi = out.headline.ci
        lines.append(f"{n}\t{out.headline.gap_mean!r}\t{lo!r}\t{hi!r}\t{out.headline.verdict}")
    return "\n".join(lines) + "\n"
