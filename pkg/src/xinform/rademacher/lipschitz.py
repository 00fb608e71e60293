"""Sup-correlation over L-Lipschitz functions into [-1, 1].

Only values at finitely many nodes matter: any assignment that respects the
pairwise Lipschitz inequalities and the node bounds extends to the whole space
(McShane).  The problem is therefore a small LP in the node values.  When all
labels agree the optimum is the upper (or lower) envelope and no LP is needed.
"""
from __future__ import annotations

from collections import deque

import numpy as np
from scipy.optimize import linprog

from ..errors import DomainError, Infeasible, Unsupported
from .constraints import SignAt, SignOnBall, SupResult, ValueAt
from .symbolic import LipschitzExtension

FEAS = 1e-12


def _nodes(constraints, sample):
    pts = [np.asarray(p, dtype=float) for p in sample.points]
    lo = [-1.0] * len(pts)
    hi = [1.0] * len(pts)
    balls = []
    for c in constraints:
        if isinstance(c, ValueAt):
            pts.append(np.array(c.point))
            lo.append(c.value)
            hi.append(c.value)
        elif isinstance(c, SignAt):
            pts.append(np.array(c.point))
            lo.append(0.0 if c.sign > 0 else -1.0)
            hi.append(1.0 if c.sign > 0 else 0.0)
        elif isinstance(c, SignOnBall):
            balls.append(c)
        else:
            raise Unsupported(f"Lipschitz class does not support {c.kind} constraints")
    P = np.array(pts)
    lo, hi = np.array(lo), np.array(hi)
    return P, lo, hi, balls


def _apply_balls(P, lo, hi, balls, L):
    for b in balls:
        dist = np.maximum(0.0, np.linalg.norm(P - np.array(b.center), axis=1) - b.radius)
        if b.sign > 0:
            lo = np.maximum(lo, -L * dist)
        else:
            hi = np.minimum(hi, L * dist)
    return lo, hi


def solve_lipschitz(L: float, constraints, sample) -> SupResult:
    P, lo, hi, balls = _nodes(constraints, sample)
    lo, hi = _apply_balls(P, lo, hi, balls, L)
    n = sample.n
    Dm = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
    upper = np.min(hi[None, :] + L * Dm, axis=1)
    lower = np.max(lo[None, :] - L * Dm, axis=1)
    if np.any(lower > upper + FEAS):
        raise Infeasible("the constraints admit no L-Lipschitz function")
    sig = sample.sigma.astype(float)
    signs = [b.sign for b in balls]
    witness_upper = None if (1 in signs and -1 in signs) else (signs[0] > 0 if signs else None)
    if np.all(sig > 0) or np.all(sig < 0):
        g = upper if sig[0] > 0 else lower
        up = sig[0] > 0 if witness_upper is None else witness_upper
        wit = LipschitzExtension(P, g, L, up) if (witness_upper is None or witness_upper == up) else None
        return SupResult.exact(float(sig @ g[:n]) / n, wit)
    g = _lp(P, lo, hi, sig, L, Dm, upper, lower)
    val = float(sig @ g[:n]) / n
    wit = LipschitzExtension(P, g, L, True if witness_upper is None else witness_upper)
    return SupResult.exact(val, wit)


def _lp(P, lo, hi, sig, L, Dm, upper, lower):
    N = P.shape[0]
    n = sig.size
    c = np.zeros(N)
    c[:n] = -sig / n
    ii, jj = np.where(~np.eye(N, dtype=bool))
    A = np.zeros((ii.size, N))
    A[np.arange(ii.size), ii] = 1.0
    A[np.arange(ii.size), jj] = -1.0
    b = L * Dm[ii, jj]
    bounds = list(zip(np.maximum(lo, lower), np.minimum(hi, upper)))
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        raise Infeasible("the constraints admit no L-Lipschitz function")
    if res.status != 0:
        raise DomainError("solver", f"LP solver failed: {res.message}")
    g = _polish(res.x, lo, hi, L, Dm)
    if g is None:
        g = np.clip(res.x, lo, hi)
    return g


def _polish(x, lo, hi, L, Dm, tol=1e-7):
    """Recompute an LP vertex exactly: snap bound-active nodes, then propagate
    along tight Lipschitz edges.  Returns None if the result is not feasible."""
    N = x.size
    g = np.full(N, np.nan)
    for i in range(N):
        if abs(x[i] - hi[i]) <= tol:
            g[i] = hi[i]
        elif abs(x[i] - lo[i]) <= tol:
            g[i] = lo[i]
    queue = deque(np.flatnonzero(~np.isnan(g)).tolist())
    while queue:
        i = queue.popleft()
        for j in range(N):
            if np.isnan(g[j]) and abs(abs(x[i] - x[j]) - L * Dm[i, j]) <= tol:
                g[j] = g[i] + np.sign(x[j] - x[i]) * L * Dm[i, j]
                queue.append(j)
    if np.any(np.isnan(g)):
        return None
    if np.any(g < lo - FEAS) or np.any(g > hi + FEAS):
        return None
    if np.any(np.abs(g[:, None] - g[None, :]) > L * Dm + 1e-12):
        return None
    return g
