"""Re-check a candidate function against a constraint list using the explainers
themselves, so that every reported witness is validated by an independent route."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError, Unsupported
from ..explainers import gradient_explain, shap_explain, top_gradient_component
from ..geometry import AxisBox
from .constraints import (AnchorHolds, GradientAt, LocallyStableGradient, MeanEquals, ShapEquals,
                          SignAt, SignOnBall, TopComponentAt, ValueAt)

TOL = 1e-9


def _sign_ok(v: float, s: int, tol: float) -> bool:
    # closure of the sign set: a supremum may sit on the boundary value 0
    return v >= -tol if s > 0 else v <= tol


def _ball_sign_ok(model, c: SignOnBall, tol: float) -> bool:
    center = np.array(c.center)
    if model.piecewise_constant:
        t = model.regions()
        for box, v in zip(t.boxes, t.values):
            if box.closure_distance(center) < c.radius and not _sign_ok(v, c.sign, tol):
                lo = np.maximum(box.lo, center - c.radius)
                hi = np.minimum(box.hi, center + c.radius)
                if np.all(hi > lo):
                    return False
        return True
    rng = np.random.default_rng(0)
    d = center.size
    U = rng.normal(size=(4000, d))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    X = center + U * (c.radius * rng.random((4000, 1)) ** (1 / d))
    vals = model.evaluate_many(X)
    return bool(np.all(vals >= -tol) if c.sign > 0 else np.all(vals <= tol))


def _anchor_precision(model, c: AnchorHolds) -> float:
    t = model.regions()
    cov = c.dist.box_mass(c.rule)
    if cov <= 0:
        raise DomainError("zero-mass", "the anchor rule has zero mass")
    inside = t.masses_within(c.dist, c.rule)
    agree = np.where(t.values >= 0, 1, -1) == c.label
    return float(inside[agree].sum() / cov)


def violations(model, constraints, tol: float = TOL) -> list:
    """Human-readable list of violated constraints (empty when all hold)."""
    out = []
    for c in constraints:
        if isinstance(c, ValueAt):
            v = model.evaluate(c.point)
            if abs(v - c.value) > tol:
                out.append(f"value at {c.point}: {v} != {c.value}")
        elif isinstance(c, GradientAt):
            g = gradient_explain(model, c.point)
            if g.undefined or np.max(np.abs(np.array(g.vector) - np.array(c.vector))) > tol:
                out.append(f"gradient at {c.point} differs")
        elif isinstance(c, TopComponentAt):
            try:
                tc = top_gradient_component(model, c.point)
            except DomainError:
                out.append("gradient undefined")
                continue
            if tc.index != c.index or abs(tc.magnitude - c.magnitude) > tol:
                out.append("top component differs")
        elif isinstance(c, MeanEquals):
            m = model.expectation(c.dist)
            if abs(m - c.value) > tol:
                out.append(f"mean {m} != {c.value}")
        elif isinstance(c, ShapEquals):
            phi = shap_explain(model, c.dist, c.point, c.ambient).phi
            if np.max(np.abs(np.array(phi) - np.array(c.vector))) > tol:
                out.append("SHAP vector differs")
        elif isinstance(c, AnchorHolds):
            if model.label(c.point) != c.label:
                out.append("label at the anchor point differs")
                continue
            p = _anchor_precision(model, c)
            if (c.equality and abs(p - c.precision) > tol) or (not c.equality and p < c.precision - tol):
                out.append(f"anchor precision {p} vs {c.precision}")
        elif isinstance(c, SignAt):
            if not _sign_ok(model.evaluate(c.point), c.sign, tol):
                out.append(f"sign at {c.point}")
        elif isinstance(c, SignOnBall):
            if not _ball_sign_ok(model, c, tol):
                out.append("sign on ball")
        elif isinstance(c, LocallyStableGradient):
            g = gradient_explain(model, c.point)
            if g.undefined or np.max(np.abs(np.array(g.vector) - np.array(c.vector))) > tol:
                out.append("locally stable gradient differs")
        else:
            raise Unsupported(f"cannot verify {c.kind}")
    return out


def satisfies(model, constraints, tol: float = TOL) -> bool:
    try:
        return not violations(model, constraints, tol)
    except (DomainError, Unsupported):
        return False


def within_box(model, box: AxisBox, samples: int = 20000, seed: int = 0) -> bool:
    """Spot-check that a smooth witness stays in [-1, 1] on a box (grid plus random points)."""
    d = box.d
    k = max(2, int(round(samples ** (1 / d))))
    axes = [np.linspace(box.lower[j], box.upper[j], k) for j in range(d)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    R = np.random.default_rng(seed).uniform(box.lo, box.hi, size=(samples, d))
    v = model.evaluate_many(np.vstack([G, R]))
    return bool(np.all(np.abs(v) <= 1 + 1e-9))
