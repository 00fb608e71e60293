"""Exact local explanations: gradients, interventional SHAP, anchors and
counterfactuals, with brute-force oracles for cross-checking."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotFound, Unsupported
from .geometry import AxisBox, DiagonalSegment, UniformBox, as_point
from .models import AxisTree, FunctionModel, GamModel, GridFunction, LinearModel, PolynomialModel, sign

MAX_SHAP_DIM = 12
MAX_PERMUTATION_DIM = 7


def _vec(v) -> list:
    return [float(x) for x in v]


@dataclass(frozen=True)
class Gradient:
    vector: tuple | None

    @property
    def undefined(self) -> bool:
        return self.vector is None

    def to_json(self) -> dict:
        if self.vector is None:
            return {"kind": "gradient", "vector": None, "undefined": True}
        return {"kind": "gradient", "vector": _vec(self.vector)}


@dataclass(frozen=True)
class TopComponent:
    index: int  # 0-based
    magnitude: float

    def to_json(self) -> dict:
        return {"kind": "top-component", "index": self.index + 1, "magnitude": self.magnitude}


@dataclass(frozen=True)
class Shap:
    phi: tuple

    def to_json(self) -> dict:
        return {"kind": "shap", "phi": _vec(self.phi)}


@dataclass(frozen=True)
class Anchor:
    rule: AxisBox
    precision: float
    coverage: float

    def to_json(self) -> dict:
        return {"kind": "anchor", "rule": self.rule.to_json(), "precision": self.precision, "coverage": self.coverage}


@dataclass(frozen=True)
class Counterfactual:
    point: tuple
    kind: str
    radius: float | None = None
    axis: int | None = None  # 0-based
    step: float | None = None

    def to_json(self) -> dict:
        doc = {"kind": "counterfactual", "cf_kind": self.kind, "point": _vec(self.point)}
        if self.radius is not None:
            doc["radius"] = self.radius
        if self.axis is not None:
            doc["axis"] = self.axis + 1
            doc["step"] = self.step
        return doc


@dataclass(frozen=True)
class LocallyStableGradient:
    vector: tuple
    r: float
    delta: float

    def to_json(self) -> dict:
        return {"kind": "locally-stable-gradient", "vector": _vec(self.vector), "r": self.r, "delta": self.delta}


# ---------------------------------------------------------------- gradients

def gradient_explain(model: FunctionModel, x0) -> Gradient:
    g = model.gradient(as_point(x0, model.d))
    return Gradient(None if g is None else tuple(float(v) for v in g))


def top_gradient_component(model: FunctionModel, x0) -> TopComponent:
    g = gradient_explain(model, x0)
    if g.undefined:
        raise DomainError("undefined-gradient", "gradient is undefined at this point")
    a = np.abs(np.array(g.vector))
    j = int(np.argmax(a))  # argmax returns the first maximum
    return TopComponent(j, float(a[j]))


def locally_stable_gradient(model: FunctionModel, x0, r: float, delta: float) -> LocallyStableGradient:
    """Gradient bundled with (r, delta), after checking that the gradient is
    delta-Lipschitz on the closed r-ball around x0."""
    x = as_point(x0, model.d)
    if not (r > 0 and delta > 0):
        raise DomainError("bad-parameter", "r and delta must be positive")
    if isinstance(model, LinearModel):
        pass
    elif isinstance(model, PolynomialModel):
        ball = AxisBox.closed(tuple(x - r), tuple(x + r))
        if model.hessian_bound(ball) > delta:
            raise DomainError("not-locally-stable", "Hessian bound on the ball exceeds delta")
    else:
        raise Unsupported(f"local stability cannot be certified for {model.kind} models")
    return LocallyStableGradient(tuple(float(v) for v in model.gradient(x)), float(r), float(delta))


# ---------------------------------------------------------------- SHAP

def _value_table(model: FunctionModel, dist, x: np.ndarray, ambient) -> dict:
    d = model.d
    table = {}
    for size in range(d + 1):
        for S in itertools.combinations(range(d), size):
            if size == 0:
                table[S] = model.expectation(dist)
            elif size == d:
                table[S] = model.evaluate(x)
            else:
                table[S] = model.marginal_value(ambient or dist, x, S)
    return table


def _check_shap_inputs(model, dist, ambient):
    if isinstance(dist, DiagonalSegment) and ambient is None and model.d > 1:
        raise Unsupported("SHAP needs product marginals; pass an ambient uniform box for a diagonal segment")
    if ambient is not None and not isinstance(ambient, UniformBox):
        raise Unsupported("the ambient distribution must be a uniform box")


def shap_explain(model: FunctionModel, dist, x0, ambient: UniformBox | None = None) -> Shap:
    """Interventional Shapley values by exact subset enumeration.

    The empty coalition uses `dist`; every other partial coalition uses
    `ambient` when given (product marginals of an enclosing box).
    """
    x = as_point(x0, model.d)
    d = model.d
    if d > MAX_SHAP_DIM:
        raise DomainError("dimension-too-large", f"exact SHAP enumerates 2^d subsets; d={d} exceeds {MAX_SHAP_DIM}")
    _check_shap_inputs(model, dist, ambient)
    v = _value_table(model, dist, x, ambient)
    weights = [math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d) for s in range(d)]
    phi = np.zeros(d)
    for S, vs in v.items():
        if len(S) == d:
            continue
        w = weights[len(S)]
        for j in range(d):
            if j not in S:
                phi[j] += w * (v[tuple(sorted(S + (j,)))] - vs)
    return Shap(tuple(float(p) for p in phi))


def _oracle_marginal(model: FunctionModel, dist, x: np.ndarray, S: tuple) -> float:
    """v(S, x) by direct integration, independent of the region tables.

    Piecewise-constant models are integrated over the product of elementary
    intervals between split points (midpoint rule, exact); smooth models by
    tensor Gauss-Legendre quadrature (exact for their degree).
    """
    d = model.d
    if len(S) == d:
        return model.evaluate(x)
    if isinstance(dist, DiagonalSegment):
        ts, ws = _segment_nodes(model, dist)
        pts = np.repeat(ts[:, None], d, axis=1)
        return float(ws @ model.evaluate_many(pts))
    free = [j for j in range(d) if j not in S]
    nodes, weights = [], []
    for j in free:
        a, b = dist.box.lower[j], dist.box.upper[j]
        if model.piecewise_constant:
            cuts = _model_cuts(model, j)
            e = np.unique(np.concatenate([[a, b], cuts[(cuts > a) & (cuts < b)]]))
            nodes.append((e[:-1] + e[1:]) / 2)
            weights.append(np.diff(e) / (b - a))
        else:
            t, w = np.polynomial.legendre.leggauss(16)
            nodes.append(a + (t + 1) * (b - a) / 2)
            weights.append(w / 2)
    total = 0.0
    for combo in itertools.product(*[range(len(n)) for n in nodes]):
        z = x.copy()
        w = 1.0
        for k, j in enumerate(free):
            z[j] = nodes[k][combo[k]]
            w *= weights[k][combo[k]]
        total += w * model.evaluate(z)
    return total


def _model_cuts(model, j: int) -> np.ndarray:
    if isinstance(model, GridFunction):
        return np.array(model.grid.cuts[j])
    if isinstance(model, AxisTree):
        out = []
        stack = [model.root]
        while stack:
            node = stack.pop()
            if hasattr(node, "feature"):
                if node.feature == j:
                    out.append(node.threshold)
                stack.extend([node.left, node.right])
        return np.array(out)
    if isinstance(model, GamModel):
        return _model_cuts(model.components[j], 0)
    return np.array([])


def _segment_nodes(model, dist: DiagonalSegment):
    a, b = dist.t_lo, dist.t_hi
    if model.piecewise_constant:
        cuts = np.concatenate([_model_cuts(model, j) for j in range(model.d)])
        e = np.unique(np.concatenate([[a, b], cuts[(cuts > a) & (cuts < b)]]))
        return (e[:-1] + e[1:]) / 2, np.diff(e) / (b - a)
    t, w = np.polynomial.legendre.leggauss(16)
    return a + (t + 1) * (b - a) / 2, w / 2


def shap_permutation_oracle(model: FunctionModel, dist, x0, ambient: UniformBox | None = None) -> Shap:
    """Shapley values averaged over all feature orderings."""
    x = as_point(x0, model.d)
    d = model.d
    if d > MAX_PERMUTATION_DIM:
        raise DomainError("dimension-too-large", f"the permutation oracle enumerates d! orderings; d={d} exceeds {MAX_PERMUTATION_DIM}")
    _check_shap_inputs(model, dist, ambient)
    cache = {}

    def v(S):
        S = tuple(sorted(S))
        if S not in cache:
            use = dist if len(S) == 0 else (ambient or dist)
            cache[S] = _oracle_marginal(model, use, x, S)
        return cache[S]

    phi = np.zeros(d)
    count = 0
    for order in itertools.permutations(range(d)):
        count += 1
        before = ()
        for j in order:
            phi[j] += v(before + (j,)) - v(before)
            before = before + (j,)
    return Shap(tuple(float(p) / count for p in phi))


# ---------------------------------------------------------------- anchors

def anchor_metrics(model: FunctionModel, dist, rule: AxisBox, x0) -> tuple:
    """(coverage, precision) of a rule, exact over the model's constant regions."""
    x = as_point(x0, model.d)
    if not rule.contains(x):
        raise DomainError("bad-rule", "the rule must contain the explained point")
    coverage = dist.box_mass(rule)
    if coverage <= 0:
        raise DomainError("zero-mass", "the rule has zero mass under the distribution")
    t = model.regions()
    c0 = model.label(x)
    inside = t.masses_within(dist, rule)
    agree = np.where(t.values >= 0, 1, -1) == c0
    precision = float(inside[agree].sum() / coverage)
    return float(coverage), min(1.0, max(0.0, precision))


def _elementary_edges(model, dist, j: int) -> np.ndarray:
    a, b = dist.support.lower[j], dist.support.upper[j]
    cuts = model.split_points(j)
    return np.unique(np.concatenate([[a, b], cuts[(cuts > a) & (cuts < b)]]))


def _rule_box(edges, lo_idx, hi_idx) -> AxisBox:
    lo = tuple(float(edges[j][lo_idx[j]]) for j in range(len(edges)))
    hi = tuple(float(edges[j][hi_idx[j]]) for j in range(len(edges)))
    uc = tuple(hi_idx[j] == len(edges[j]) - 1 for j in range(len(edges)))
    return AxisBox(lo, hi, (True,) * len(edges), uc)


def grow_anchor(model: FunctionModel, dist, x0, min_precision: float) -> Anchor:
    """Greedy rule growth from x0's elementary cell.

    Each step extends one side of one coordinate interval by one elementary
    interval, choosing the feasible move with the largest coverage.
    """
    if not 0 < min_precision <= 1:
        raise DomainError("bad-parameter", "min_precision must lie in (0, 1]")
    x = as_point(x0, model.d)
    if not dist.support.contains(x):
        raise DomainError("bad-point", "x0 must lie in the support")
    d = model.d
    edges = [_elementary_edges(model, dist, j) for j in range(d)]
    lo_idx, hi_idx = [], []
    for j in range(d):
        i = int(np.searchsorted(edges[j], x[j], side="right")) - 1
        i = min(i, len(edges[j]) - 2)
        lo_idx.append(i)
        hi_idx.append(i + 1)
    tol = 1e-12

    def metrics(lo, hi):
        return anchor_metrics(model, dist, _rule_box(edges, lo, hi), x)

    cov, prec = metrics(lo_idx, hi_idx)
    if prec < min_precision - tol:
        raise NotFound("no rule around x0 reaches the precision floor")
    while True:
        best = None
        for j in range(d):
            for side in (0, 1):
                lo, hi = list(lo_idx), list(hi_idx)
                if side == 0:
                    if lo[j] == 0:
                        continue
                    lo[j] -= 1
                else:
                    if hi[j] == len(edges[j]) - 1:
                        continue
                    hi[j] += 1
                c, p = metrics(lo, hi)
                if p >= min_precision - tol and (best is None or c > best[0] + 1e-15):
                    best = (c, p, lo, hi)
        if best is None:
            break
        cov, prec, lo_idx, hi_idx = best
    return Anchor(_rule_box(edges, lo_idx, hi_idx), prec, cov)


# ---------------------------------------------------------------- counterfactuals

def weak_counterfactual(model: FunctionModel, x0, search_box: AxisBox, seed: int, budget: int = 4096,
                        steps: int = 60) -> Counterfactual:
    """Random probe for an opposite-label point, then `steps` bisections toward x0."""
    x = as_point(x0, model.d)
    if not search_box.is_finite():
        raise DomainError("bad-box", "the search box must be finite")
    c0 = model.label(x)
    rng = np.random.default_rng(int(seed))
    probes = search_box.lo + rng.random((budget, model.d)) * (search_box.hi - search_box.lo)
    labels = np.where(model.evaluate_many(probes) >= 0, 1, -1)
    hits = np.flatnonzero(labels != c0)
    if hits.size == 0:
        raise NotFound(f"no opposite-label point found in {budget} probes")
    near, far = x, probes[hits[0]]
    for _ in range(steps):
        mid = (near + far) / 2
        if model.label(mid) != c0:
            far = mid
        else:
            near = mid
    return Counterfactual(tuple(float(v) for v in far), "weak")


def _opposite_regions(model: FunctionModel, x: np.ndarray):
    if not model.piecewise_constant:
        raise Unsupported("exact counterfactual geometry needs a piecewise-constant model")
    t = model.regions()
    c0 = model.label(x)
    opp = np.flatnonzero(np.where(t.values >= 0, 1, -1) != c0)
    if opp.size == 0:
        raise NotFound("the model has no region with the opposite label")
    return t, opp


def strong_counterfactual(model: FunctionModel, x0) -> Counterfactual:
    """Nearest point of the closed opposite-label set."""
    x = as_point(x0, model.d)
    t, opp = _opposite_regions(model, x)
    near = np.clip(x[None, :], t.lo[opp], t.hi[opp])
    dist = np.linalg.norm(near - x[None, :], axis=1)
    k = int(np.argmin(dist))
    return Counterfactual(tuple(float(v) for v in near[k]), "strong", radius=float(dist[k]))


def single_axis_counterfactual(model: FunctionModel, x0) -> Counterfactual:
    """Smallest single-coordinate move that reaches the opposite label
    (as an infimum when the crossing boundary is open)."""
    x = as_point(x0, model.d)
    t, opp = _opposite_regions(model, x)
    best = None
    for j in range(model.d):
        on_line = np.ones(opp.size, dtype=bool)
        for k in range(model.d):
            if k != j:
                on_line &= t.coord_inside(k, x[k])[opp]
        for i in opp[on_line]:
            lo, hi = t.lo[i, j], t.hi[i, j]
            if x[j] < lo:
                cand = (lo - x[j], 1)
            elif x[j] > hi:
                cand = (x[j] - hi, 0)
            else:
                cand = (0.0, 0)
            key = (cand[0], j, cand[1])
            if best is None or key < best:
                best = key
    if best is None:
        raise NotFound("no single-coordinate move changes the label")
    r, j, positive = best
    step = r if positive else -r
    point = x.copy()
    point[j] += step
    return Counterfactual(tuple(float(v) for v in point), "weak", axis=j, step=float(step))
