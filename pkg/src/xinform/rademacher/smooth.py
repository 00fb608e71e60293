"""Brackets for differentiable classes with a gradient-norm bound alpha, optionally
with beta-Lipschitz gradients (globally, or only on a ball around the explained point).

Upper bounds are pointwise: a member through (x0, y0) with gradient v at x0 and
beta-Lipschitz gradient satisfies |g(x0 + h) - y0 - v.h| <= beta/2 |h|^2, and the
gradient-norm bound gives |g(x0 + h) - y0| <= alpha |h|.  Lower bounds come from
explicit members: an affine function for the prediction class, and
y0 + v.h +- beta * huber(h, tau) for the explanation class.
"""
from __future__ import annotations

import numpy as np

from ..errors import Infeasible, Unsupported
from ..models import LinearModel
from .constraints import GradientAt, LocallyStableGradient, SupResult, ValueAt
from .symbolic import TaylorHuber


def _anchor_point(constraints, allowed):
    vals = [c for c in constraints if isinstance(c, ValueAt)]
    for c in constraints:
        if not isinstance(c, allowed):
            raise Unsupported(f"gradient-bounded classes do not support {c.kind} constraints")
    if len(vals) != 1:
        raise Unsupported("gradient-bounded classes need exactly one value constraint")
    return np.array(vals[0].point), vals[0].value


def _gradient_info(constraints, x0, kind):
    gs = [c for c in constraints if isinstance(c, kind)]
    if len(gs) > 1:
        raise Unsupported("at most one gradient constraint")
    if gs and not np.array_equal(np.array(gs[0].point), x0):
        raise Unsupported("the gradient must be given at the valued point")
    return gs[0] if gs else None


def _affine_lower(alpha, x0, y0, H, sample):
    c = sample.sigma.astype(float) @ H / sample.n
    norm = float(np.linalg.norm(c))
    w = alpha * c / norm if norm > 0 else np.zeros_like(c)
    model = LinearModel(tuple(w), float(y0 - w @ x0))
    return sample.correlation(model.evaluate_many(sample.points)), model


def _huber_lower(alpha, curv, x0, y0, v, sample):
    tau = (alpha - float(np.linalg.norm(v))) / curv
    best, wit = -np.inf, None
    for gamma in (curv, -curv, 0.0):
        m = TaylorHuber(tuple(x0), float(y0), tuple(v), gamma, tau)
        val = sample.correlation(m.evaluate_many(sample.points))
        if val > best:
            best, wit = val, m
    return best, wit


def _solve(alpha, curv, radius, constraints, sample, gkind):
    allowed = (ValueAt, gkind)
    x0, y0 = _anchor_point(constraints, allowed)
    H = sample.points - x0
    r = np.linalg.norm(H, axis=1)
    sig = sample.sigma.astype(float)
    base = float(sig.mean()) * y0
    g = _gradient_info(constraints, x0, gkind)
    if g is None:
        lo, wit = _affine_lower(alpha, x0, y0, H, sample)
        return SupResult.bracket(lo, base + alpha * float(r.mean()), wit)
    v = np.array(g.vector)
    if np.linalg.norm(v) > alpha:
        raise Infeasible("the given gradient exceeds the gradient-norm bound")
    taylor = sig * (H @ v) + 0.5 * curv * r * r
    per_point = np.minimum(alpha * r, np.where(r <= radius, taylor, np.inf))
    upper = base + float(per_point.mean())
    if np.linalg.norm(v) == alpha:
        # only the affine continuation keeps the norm bound at x0 with room to curve
        m = LinearModel(tuple(v), float(y0 - v @ x0))
        return SupResult.bracket(sample.correlation(m.evaluate_many(sample.points)), upper, m)
    lo, wit = _huber_lower(alpha, curv, x0, y0, v, sample)
    return SupResult.bracket(lo, upper, wit)


def solve_smooth_grad(alpha: float, beta: float, constraints, sample) -> SupResult:
    return _solve(alpha, beta, np.inf, constraints, sample, GradientAt)


def solve_bounded_gradient(alpha: float, constraints, sample) -> SupResult:
    """Gradient-norm bound only; a locally stable gradient adds curvature control on its ball."""
    g = [c for c in constraints if isinstance(c, LocallyStableGradient)]
    if not g:
        return _solve(alpha, 1.0, 0.0, constraints, sample, LocallyStableGradient)
    return _solve(alpha, g[0].delta, g[0].r, constraints, sample, LocallyStableGradient)
