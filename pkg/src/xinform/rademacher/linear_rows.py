"""Sup-correlation for classes whose parameters enter every constraint
linearly: piecewise-constant functions on a known grid and polynomials with
bounded coefficients.  Both reduce to the box LP in `lp`."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import DomainError, Infeasible, Unsupported
from ..geometry import AxisBox, DiagonalSegment, Grid
from ..models import (GridFunction, PolynomialModel, RegionTable, monomial_gradient_matrix,
                      monomial_matrix, monomial_value_weights, monomials)
from .constraints import (AnchorHolds, GradientAt, MeanEquals, ShapEquals, SignAt, SignOnBall,
                          SupResult, ValueAt)
from .lp import solve_box_lp

MAX_ANCHOR_CELLS = 14


def shap_rows(weights_of, d: int) -> np.ndarray:
    """Rows r_j with phi_j = r_j . theta, given v(S) = weights_of(S) . theta."""
    W = {}
    for size in range(d + 1):
        for S in itertools.combinations(range(d), size):
            W[S] = weights_of(S)
    rows = np.zeros((d, len(W[()])))
    for S, w in W.items():
        if len(S) == d:
            continue
        coef = math.factorial(len(S)) * math.factorial(d - len(S) - 1) / math.factorial(d)
        for j in range(d):
            if j not in S:
                rows[j] += coef * (W[tuple(sorted(S + (j,)))] - w)
    return rows


def _check_point_in(domain: AxisBox, p, what: str):
    if not domain.contains(p):
        raise DomainError("outside-grid", f"{what} lies outside the grid bounding box")


class GridProblem:
    def __init__(self, k: int, domain: AxisBox):
        self.grid = Grid.regular(domain, k)
        self.boxes = [self.grid.cell_box(idx) for idx in self.grid.cells()]
        self.table = RegionTable(self.boxes, np.zeros(len(self.boxes)))
        self.N = len(self.boxes)

    def cell(self, p) -> int:
        _check_point_in(self.grid.box, p, "point")
        return int(self.grid.flat_index_many(np.asarray(p, dtype=float)[None, :])[0])

    def shap_weights(self, c: ShapEquals):
        x = np.asarray(c.point, dtype=float)
        d = self.grid.d

        def weights_of(S):
            if len(S) == 0:
                return self.table.masses(c.dist)
            use = c.ambient if (c.ambient is not None and len(S) < d) else c.dist
            if isinstance(use, DiagonalSegment) and 0 < len(S) < d:
                raise Unsupported("SHAP rows on a diagonal segment need an ambient uniform box")
            return self.table.value_weights(use, x, S)

        return shap_rows(weights_of, d)


def solve_grid(k: int, constraints, sample, domain: AxisBox) -> SupResult:
    prob = GridProblem(k, domain)
    N = prob.N
    X = sample.points
    if not np.all(prob.grid.box.contains_many(X)):
        raise DomainError("outside-grid", "sample points must lie inside the grid bounding box")
    idx = prob.grid.flat_index_many(X)
    c = np.bincount(idx, weights=sample.sigma.astype(float), minlength=N) / sample.n
    lo, hi = -np.ones(N), np.ones(N)
    rows, rhs = [], []
    anchors = []
    for con in constraints:
        if isinstance(con, ValueAt):
            i = prob.cell(con.point)
            lo[i] = max(lo[i], con.value)
            hi[i] = min(hi[i], con.value)
        elif isinstance(con, SignAt):
            i = prob.cell(con.point)
            if con.sign > 0:
                lo[i] = max(lo[i], 0.0)
            else:
                hi[i] = min(hi[i], 0.0)
        elif isinstance(con, SignOnBall):
            for i, b in enumerate(prob.boxes):
                if b.closure_distance(con.center) < con.radius:
                    if con.sign > 0:
                        lo[i] = max(lo[i], 0.0)
                    else:
                        hi[i] = min(hi[i], 0.0)
        elif isinstance(con, GradientAt):
            if any(v != 0.0 for v in con.vector):
                raise Infeasible("grid functions have zero gradient inside every cell")
        elif isinstance(con, MeanEquals):
            rows.append(prob.table.masses(con.dist))
            rhs.append(con.value)
        elif isinstance(con, ShapEquals):
            R = prob.shap_weights(con)
            rows.extend(list(R))
            rhs.extend(con.vector)
        elif isinstance(con, AnchorHolds):
            anchors.append(con)
        else:
            raise Unsupported(f"grid class does not support {con.kind} constraints")
    if np.any(lo > hi + 1e-12):
        raise Infeasible("value or sign constraints conflict inside a cell")
    A = np.array(rows).reshape(-1, N)
    b = np.array(rhs, dtype=float)
    if not anchors:
        val, z = solve_box_lp(c, A, b, lo, hi)
        return SupResult.exact(val, GridFunction(prob.grid, np.clip(z, -1, 1)))
    if len(anchors) > 1:
        raise Unsupported("at most one anchor constraint per problem")
    return _solve_with_anchor(prob, anchors[0], c, A, b, lo, hi)


def _solve_with_anchor(prob: GridProblem, con: AnchorHolds, c, A, b, lo, hi) -> SupResult:
    inside = prob.table.masses_within(con.dist, con.rule)
    cov = con.dist.box_mass(con.rule)
    if cov <= 0:
        raise DomainError("zero-mass", "the anchor rule has zero mass")
    cells = np.flatnonzero(inside > 0)
    if cells.size > MAX_ANCHOR_CELLS:
        raise DomainError("budget", f"anchor rule covers {cells.size} cells, above {MAX_ANCHOR_CELLS}")
    target = con.precision * cov
    best = None
    for labels in itertools.product((1, -1), repeat=cells.size):
        lab = np.array(labels)
        agree = float(inside[cells][lab == con.label].sum())
        if con.equality and abs(agree - target) > 1e-9:
            continue
        if not con.equality and agree < target - 1e-9:
            continue
        l2, h2 = lo.copy(), hi.copy()
        pos = cells[lab > 0]
        neg = cells[lab < 0]
        l2[pos] = np.maximum(l2[pos], 0.0)
        h2[neg] = np.minimum(h2[neg], 0.0)
        if np.any(l2 > h2 + 1e-12):
            continue
        try:
            val, z = solve_box_lp(c, A, b, l2, h2)
        except Infeasible:
            continue
        if best is None or val > best[0]:
            best = (val, z)
    if best is None:
        raise Infeasible("no labeling of the rule's cells meets the anchor precision")
    return SupResult.exact(best[0], GridFunction(prob.grid, np.clip(best[1], -1, 1)))


def solve_poly_bounded(D: int, M: float, constraints, sample) -> SupResult:
    d = sample.d
    alphas = monomials(d, D)
    K = len(alphas)
    Phi = monomial_matrix(sample.points, alphas)
    c = sample.sigma @ Phi / sample.n
    rows, rhs = [], []
    for con in constraints:
        if isinstance(con, ValueAt):
            rows.append(monomial_matrix(np.array(con.point)[None, :], alphas)[0])
            rhs.append(con.value)
        elif isinstance(con, GradientAt):
            G = monomial_gradient_matrix(np.array(con.point), alphas)
            rows.extend(list(G))
            rhs.extend(con.vector)
        elif isinstance(con, MeanEquals):
            rows.append(monomial_value_weights(alphas, con.dist, np.zeros(d), ()))
            rhs.append(con.value)
        elif isinstance(con, ShapEquals):
            x = np.array(con.point)

            def weights_of(S, con=con, x=x):
                use = con.dist if len(S) == 0 else (con.ambient or con.dist)
                return monomial_value_weights(alphas, use, x, S)

            R = shap_rows(weights_of, d)
            rows.extend(list(R))
            rhs.extend(con.vector)
        else:
            raise Unsupported(f"bounded polynomial class does not support {con.kind} constraints")
    A = np.array(rows).reshape(-1, K)
    b = np.array(rhs, dtype=float)
    val, a = solve_box_lp(c, A, b, -M * np.ones(K), M * np.ones(K))
    a = np.clip(a, -M, M)
    return SupResult.exact(val, PolynomialModel(d, D, tuple(a), M))
