"""Sup-correlation for norm-bounded affine classes.

Every problem here is a linear objective over a Euclidean ball intersected
with a slab (from a value constraint) and, for top-component constraints, a
box.  Ball-and-slab problems have a closed form; the box variant is solved
through its one-dimensional dual.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import Infeasible, Unsupported
from ..geometry import AxisBox, Grid
from ..models import LinearModel
from .constraints import GradientAt, SupResult, TopComponentAt, ValueAt

TOL = 1e-12
GOLDEN = (math.sqrt(5) - 1) / 2


def ball_slab_max(g, q, lo_t, hi_t, R):
    """max g.w  s.t. ||w|| <= R and lo_t <= q.w <= hi_t."""
    g = np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    nq = float(np.linalg.norm(q))
    ng = float(np.linalg.norm(g))
    w = R * g / ng if ng > 0 else np.zeros_like(g)
    if nq == 0:
        if lo_t > TOL or hi_t < -TOL:
            raise Infeasible("the value constraint cannot be met")
        return R * ng, w
    reach = R * nq
    if lo_t > reach * (1 + 1e-12) + TOL or hi_t < -reach * (1 + 1e-12) - TOL:
        raise Infeasible("the value constraint cannot be met inside the norm ball")
    t = float(q @ w)
    if lo_t <= t <= hi_t:
        return R * ng, w
    t = min(max(hi_t if t > hi_t else lo_t, -reach), reach)
    u = q / nq
    along = float(g @ u)
    perp = g - along * u
    nperp = float(np.linalg.norm(perp))
    rho = math.sqrt(max(R * R - (t / nq) ** 2, 0.0))
    w = (t / nq) * u + (rho * perp / nperp if nperp > 0 else 0.0)
    return along * (t / nq) + rho * nperp, w


def box_ball_max(g, m, R):
    """max g.u  s.t. |u_k| <= m and ||u|| <= R; returns (value, u)."""
    g = np.asarray(g, dtype=float)
    a = np.abs(g)
    if R <= 0 or m <= 0 or not np.any(a > 0):
        return 0.0, np.zeros_like(g)
    nz = a > 0
    corner = np.where(nz, m * np.sign(g), 0.0)
    if m * math.sqrt(int(nz.sum())) <= R:
        return float(g @ corner), corner
    idx = np.flatnonzero(nz)
    order = idx[np.argsort(m / a[idx])]
    brk = m / a[order]
    sq = a[order] ** 2
    suffix = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])  # no cancellation
    sat = 0
    lam = None
    for s in range(len(order) + 1):
        rest = float(suffix[s])
        if rest > 0:
            cand = math.sqrt(max(R * R - s * m * m, 0.0) / rest)
            lo_b = brk[s - 1] if s > 0 else 0.0
            hi_b = brk[s] if s < len(order) else math.inf
            if lo_b * (1 - 1e-12) <= cand <= hi_b * (1 + 1e-12):
                lam = cand
                sat = s
                break
    if lam is None:  # numerically at a breakpoint
        lam = brk[min(sat, len(brk) - 1)]
    u = np.clip(lam * g, -m, m)
    return float(g @ u), u


def _golden_min(fn, lo, hi, iters=200):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            break
    return min(fc, fd, fn(a), fn(b))


def box_ball_slab_max(g, q, lo_t, hi_t, m, R):
    """max g.u over {|u_k| <= m, ||u|| <= R, lo_t <= q.u <= hi_t} via the slab multiplier."""
    g = np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    top = box_ball_max(q, m, R)[0]
    if lo_t > top + 1e-12 or hi_t < -top - 1e-12:
        raise Infeasible("the value constraint cannot be met inside the component box")
    v0, u0 = box_ball_max(g, m, R)
    if lo_t - 1e-15 <= q @ u0 <= hi_t + 1e-15:
        return v0

    def dual(mu):
        return box_ball_max(g - mu * q, m, R)[0] + (mu * hi_t if mu >= 0 else mu * lo_t)

    B = 1.0
    while B < 1e18 and not (dual(B) > dual(B / 2) and dual(-B) > dual(-B / 2)):
        B *= 2
    return _golden_min(dual, -B, B)


def _linear_core(a, s, constraints, M, d):
    """Max over ||w|| <= M, |b| <= M of w.a + s*b under the point constraints.

    Returns (value, LinearModel or None)."""
    a = np.asarray(a, dtype=float)
    vals = [c for c in constraints if isinstance(c, ValueAt)]
    grads = [c for c in constraints if isinstance(c, GradientAt)]
    tops = [c for c in constraints if isinstance(c, TopComponentAt)]
    if grads:
        v = np.array(grads[0].vector)
        if any(not np.allclose(np.array(c.vector), v, rtol=0, atol=1e-12) for c in grads[1:]):
            raise Infeasible("linear functions have a single gradient")
        if np.linalg.norm(v) > M * (1 + 1e-12):
            raise Infeasible("the gradient exceeds the norm bound")
        for c in tops:
            if abs(abs(v[c.index]) - c.magnitude) > 1e-12 or np.any(np.abs(v) > c.magnitude + 1e-12) \
                    or int(np.argmax(np.abs(v))) != c.index:
                raise Infeasible("the gradient disagrees with the top component")
        if vals:
            bs = [c.value - v @ np.array(c.point) for c in vals]
            if max(bs) - min(bs) > 1e-9 or abs(bs[0]) > M * (1 + 1e-12):
                raise Infeasible("value constraints need an intercept outside the bound")
            b = bs[0]
        else:
            b = M * (1.0 if s > 0 else -1.0 if s < 0 else 0.0)
        return float(v @ a + s * b), LinearModel(v, b)
    if len({c.point for c in vals}) > 1:
        raise Unsupported("several value constraints on a linear class need a gradient constraint")
    if len(tops) > 1:
        raise Unsupported("at most one top-component constraint")
    if not vals:
        if tops:
            j, m = tops[0].index, tops[0].magnitude
            if m > M:
                raise Infeasible("the top component exceeds the norm bound")
            rest = [k for k in range(d) if k != j]
            R = math.sqrt(max(M * M - m * m, 0.0))
            val_rest, u = box_ball_max(a[rest], m, R)
            w = np.zeros(d)
            w[rest] = u
            w[j] = m if a[j] >= 0 else -m
            b = M * np.sign(s)
            return float(m * abs(a[j]) + val_rest + M * abs(s)), LinearModel(w, b)
        na = float(np.linalg.norm(a))
        w = M * a / na if na > 0 else np.zeros(d)
        return M * na + M * abs(s), LinearModel(w, M * np.sign(s))
    x0 = np.array(vals[0].point)
    y0 = vals[0].value
    g = a - s * x0
    base, w = ball_slab_max(g, x0, y0 - M, y0 + M, M)
    base_model = LinearModel(w, y0 - w @ x0)
    if not tops:
        return float(base + s * y0), base_model
    j, m = tops[0].index, tops[0].magnitude
    if m > M:
        raise Infeasible("the top component exceeds the norm bound")
    rest = [k for k in range(d) if k != j]
    R = math.sqrt(max(M * M - m * m, 0.0))
    best = -math.inf
    for sgn in (1.0, -1.0):
        shift = x0[j] * sgn * m
        try:
            v = box_ball_slab_max(g[rest], x0[rest], y0 - M - shift, y0 + M - shift, m, R)
        except Infeasible:
            continue
        best = max(best, v + g[j] * sgn * m)
    if best == -math.inf:
        raise Infeasible("no linear function meets the value and top-component constraints")
    return float(min(best, base) + s * y0), None


def _check_kinds(constraints, allowed, name):
    for c in constraints:
        if not isinstance(c, allowed):
            raise Unsupported(f"{name} class does not support {c.kind} constraints")


def solve_linear(M: float, constraints, sample) -> SupResult:
    _check_kinds(constraints, (ValueAt, GradientAt, TopComponentAt), "linear")
    X, sig = sample.points, sample.sigma.astype(float)
    a = sig @ X / sample.n
    s = float(sig.sum()) / sample.n
    val, witness = _linear_core(a, s, constraints, M, sample.d)
    return SupResult.exact(val, witness)


def solve_noisy_linear(M: float, eps: float, constraints, sample) -> SupResult:
    """f = g + e with g linear (norm bound M) and |e| < eps pointwise.

    Gradient and top-component constraints say nothing about g here because
    the noise term is unconstrained in shape, so they are ignored.  The open
    band is approximated from inside by eps(1 - 1e-9)."""
    _check_kinds(constraints, (ValueAt, GradientAt, TopComponentAt), "noisy linear")
    vals = [c for c in constraints if isinstance(c, ValueAt)]
    eps = eps * (1 - 1e-9)
    X, sig = sample.points, sample.sigma.astype(float)
    a = sig @ X / sample.n
    s = float(sig.sum()) / sample.n
    if not vals:
        return SupResult.exact(M * float(np.linalg.norm(a)) + M * abs(s) + eps)
    if len({c.point for c in vals}) > 1:
        raise Unsupported("several value constraints on the noisy linear class")
    x0 = np.array(vals[0].point)
    y0 = vals[0].value
    g = a - s * x0
    lo_t, hi_t = y0 - M - eps, y0 + M + eps

    def F(theta):
        gt = g + (1 - theta) * s * x0
        v, _ = ball_slab_max(gt, x0, lo_t, hi_t, M)
        return v + theta * abs(s) * eps + (1 - theta) * (abs(s) * M - s * y0)

    inner = F(1.0) if s == 0 else _golden_min(F, 0.0, 1.0)
    return SupResult.exact(s * y0 + eps + inner)


def solve_piecewise_linear_grid(k: int, M: float, constraints, sample, domain: AxisBox) -> SupResult:
    """Independent affine piece (norm bound M) on every cell of a regular grid."""
    _check_kinds(constraints, (ValueAt, GradientAt, TopComponentAt), "piecewise-linear")
    grid = Grid.regular(domain, k)
    X, sig = sample.points, sample.sigma.astype(float)
    if not np.all(grid.box.contains_many(X)):
        raise Infeasible("sample points must lie inside the grid bounding box")
    cell = grid.flat_index_many(X)
    by_cell = {}
    for c in constraints:
        p = np.array(c.point)[None, :]
        if not grid.box.contains_many(p)[0]:
            raise Infeasible("constraint point lies outside the grid bounding box")
        by_cell.setdefault(int(grid.flat_index_many(p)[0]), []).append(c)
    total = 0.0
    for ci in set(cell.tolist()) | set(by_cell):
        mask = cell == ci
        a = sig[mask] @ X[mask] / sample.n
        s = float(sig[mask].sum()) / sample.n
        v, _ = _linear_core(a, s, by_cell.get(ci, []), M, sample.d)
        total += v
    return SupResult.exact(total)
