"""Exact solver for small linear programs over a box:

    maximize c.z  subject to  A z = b,  lo <= z <= hi.

Pinned variables are substituted out and the equality rows are reduced to an
orthonormal basis of their row space.  One remaining row is solved as a
fractional knapsack; more rows by enumerating every basis together with every
bound pattern of the non-basic variables, which is exhaustive over vertices.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import DomainError, Infeasible

FEAS_TOL = 1e-9
RANK_TOL = 1e-10
DEFAULT_BUDGET = 4_000_000


def _reduce_rows(A: np.ndarray, b: np.ndarray):
    if A.shape[0] == 0 or A.shape[1] == 0:
        if A.shape[0] and np.any(np.abs(b) > RANK_TOL * (1 + np.abs(b).max())):
            raise Infeasible("equality rows are inconsistent once fixed variables are substituted")
        return np.zeros((0, A.shape[1])), np.zeros(0)
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    scale = max(1.0, float(s[0]) if s.size else 1.0)
    r = int(np.sum(s > RANK_TOL * scale))
    rhs = U.T @ b
    if np.any(np.abs(rhs[r:]) > 1e-9 * (1 + np.abs(b).max())):
        raise Infeasible("equality rows are inconsistent")
    return s[:r, None] * Vt[:r], rhs[:r]


def _knapsack(c, a, beta, lo, hi):
    """max c.z s.t. a.z = beta, lo <= z <= hi (fractional knapsack, exact)."""
    z = np.where(c > 0, hi, np.where(c < 0, lo, np.clip(0.0, lo, hi)))
    r = beta - a @ z
    tol = 1e-12 * (1 + abs(beta) + np.abs(a) @ np.maximum(np.abs(lo), np.abs(hi)))
    if abs(r) <= tol:
        return z
    direction = 1.0 if r > 0 else -1.0
    moves = []
    for i in np.flatnonzero(a != 0):
        # amount of (direction * a.z) gained by moving z_i to either bound
        gain_hi = direction * a[i] * (hi[i] - z[i])
        gain_lo = direction * a[i] * (lo[i] - z[i])
        target, gain = (hi[i], gain_hi) if gain_hi >= gain_lo else (lo[i], gain_lo)
        if gain <= 0:
            continue
        rate = abs(c[i] / a[i])
        moves.append((rate, i, target, gain))
    moves.sort(key=lambda m: (m[0], m[1]))
    need = abs(r)
    for rate, i, target, gain in moves:
        if need <= 0:
            break
        if gain <= need:
            z[i] = target
            need -= gain
        else:
            z[i] = z[i] + (target - z[i]) * (need / gain)
            need = 0.0
    if need > tol:
        raise Infeasible("the equality row cannot be met inside the bounds")
    return z


def _enumerate(c, A, b, lo, hi, budget):
    m, N = A.shape
    total = math.comb(N, m) * (2 ** (N - m))
    if total > budget:
        raise DomainError("budget", f"vertex enumeration needs {total} candidates, above the budget {budget}")
    best_val, best_z = -np.inf, None
    patterns = np.array(list(itertools.product((0, 1), repeat=N - m)), dtype=float).reshape(2 ** (N - m), N - m)
    for basis in itertools.combinations(range(N), m):
        B = list(basis)
        nb = [j for j in range(N) if j not in basis]
        AB = A[:, B]
        if abs(np.linalg.det(AB)) <= 1e-12 * max(1.0, np.abs(AB).max() ** m):
            continue
        AN = A[:, nb]
        ZN = lo[nb] + patterns * (hi[nb] - lo[nb])  # (P, N-m)
        ZB = np.linalg.solve(AB, (b[:, None] - AN @ ZN.T)).T  # (P, m)
        ok = np.all((ZB >= lo[B] - FEAS_TOL) & (ZB <= hi[B] + FEAS_TOL), axis=1)
        if not np.any(ok):
            continue
        vals = ZB @ c[B] + ZN @ c[nb]
        vals = np.where(ok, vals, -np.inf)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            z = np.empty(N)
            z[B] = np.clip(ZB[k], lo[B], hi[B])
            z[nb] = ZN[k]
            best_z = z
    if best_z is None:
        raise Infeasible("no vertex satisfies the equality rows within the bounds")
    return best_z


def solve_box_lp(c, A, b, lo, hi, budget: int = DEFAULT_BUDGET):
    """Return (optimal value, optimal z)."""
    c = np.asarray(c, dtype=float)
    N = c.size
    A = np.asarray(A, dtype=float).reshape(-1, N)
    b = np.asarray(b, dtype=float).reshape(-1)
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    if np.any(lo > hi + FEAS_TOL):
        raise Infeasible("a variable has an empty range")
    hi = np.maximum(hi, lo)
    pinned = (hi - lo) <= 0
    free = np.flatnonzero(~pinned)
    z = np.where(pinned, lo, 0.0)
    rhs = b - A[:, pinned] @ lo[pinned]
    Ar, br = _reduce_rows(A[:, free], rhs)
    cf, lf, hf = c[free], lo[free], hi[free]
    if free.size == 0:
        zf = np.zeros(0)
    elif Ar.shape[0] == 0:
        zf = np.where(cf > 0, hf, np.where(cf < 0, lf, np.clip(0.0, lf, hf)))
    elif Ar.shape[0] == 1:
        zf = _knapsack(cf, Ar[0], float(br[0]), lf, hf)
    else:
        zf = _enumerate(cf, Ar, br, lf, hf, budget)
    z[free] = zf
    return float(c @ z), z
