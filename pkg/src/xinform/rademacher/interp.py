"""Exact sup-correlation for classes rich enough to interpolate any labels away
from the constrained points.  Each solver builds an explicit member of the
class that meets the constraints and fits every sample label (or as many as
the sign constraints allow), then re-verifies it.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError, Infeasible, Unsupported
from ..geometry import AxisBox, UniformBox
from ..models import AxisTree, GamModel, GridFunction, Leaf, Split, grid_to_tree, tree_from_intervals
from .constraints import (AnchorHolds, GradientAt, MeanEquals, ShapEquals, SignAt, SignOnBall,
                          SupResult, ValueAt)
from .symbolic import BumpSum, PeakPolynomial
from .verify import satisfies, violations, within_box

MASS_SCALE = 1e-4  # total mass of the interpolating boxes is about this
NEG_ZERO = -1e-12  # stands in for "negative but as close to 0 as wanted"


def _degenerate(msg):
    return DomainError("degenerate-sample", msg)


# ------------------------------------------------------------- box carving

def carve(items, default, d):
    """Tree equal to each item's value on its half-open box and to `default` elsewhere.

    items: list of (lo, hi, value) with pairwise disjoint boxes.
    default: a tree node used for every uncovered region.
    """
    items = [(np.asarray(lo, float), np.asarray(hi, float), float(v)) for lo, hi, v in items]

    def rec(its, rlo, rhi):
        if not its:
            return default
        if len(its) > 1:
            for j in range(d):
                srt = sorted(its, key=lambda it: it[0][j])
                top = -math.inf
                for k in range(len(srt) - 1):
                    top = max(top, srt[k][1][j])
                    if top <= srt[k + 1][0][j]:
                        t = 0.5 * (top + srt[k + 1][0][j])
                        left, right = srt[:k + 1], srt[k + 1:]
                        l_hi = rhi.copy(); l_hi[j] = t
                        r_lo = rlo.copy(); r_lo[j] = t
                        return Split(j, t, rec(left, rlo, l_hi), rec(right, r_lo, rhi))
        lo, hi, v = its[0]
        for j in range(d):
            for t, is_lo in ((lo[j], True), (hi[j], False)):
                if rlo[j] < t < rhi[j]:
                    left = [_clip(it, j, None, t) for it in its]
                    right = [_clip(it, j, t, None) for it in its]
                    l_hi = rhi.copy(); l_hi[j] = t
                    r_lo = rlo.copy(); r_lo[j] = t
                    return Split(j, float(t), rec([x for x in left if x], rlo, l_hi),
                                 rec([x for x in right if x], r_lo, rhi))
        return Leaf(v)

    return rec(items, np.full(d, -math.inf), np.full(d, math.inf))


def _clip(it, j, lo_t, hi_t):
    lo, hi, v = it
    lo, hi = lo.copy(), hi.copy()
    if lo_t is not None:
        lo[j] = max(lo[j], lo_t)
    if hi_t is not None:
        hi[j] = min(hi[j], hi_t)
    if hi[j] <= lo[j]:
        return None
    return lo, hi, v


def _box_mass(dist: UniformBox, lo, hi) -> float:
    return dist.box_mass(AxisBox.half_open(tuple(lo), tuple(hi)))


# ------------------------------------------------------------- tree witnesses

class _TreeSetup:
    """Shared bookkeeping for unbounded-tree witnesses."""

    def __init__(self, constraints, sample, dist):
        self.sample = sample
        self.dist = dist
        self.d = sample.d
        self.values = [c for c in constraints if isinstance(c, ValueAt)]
        self.signs = [c for c in constraints if isinstance(c, SignAt)]
        self.balls = [c for c in constraints if isinstance(c, SignOnBall)]
        self.anchors = [c for c in constraints if isinstance(c, AnchorHolds)]
        self.means = [c for c in constraints if isinstance(c, MeanEquals)]
        self.shaps = [c for c in constraints if isinstance(c, ShapEquals)]
        for c in constraints:
            if isinstance(c, GradientAt) and any(v != 0 for v in c.vector):
                raise Infeasible("trees have zero gradient wherever it is defined")
        others = [c for c in constraints if not isinstance(
            c, (ValueAt, SignAt, SignOnBall, AnchorHolds, MeanEquals, ShapEquals, GradientAt))]
        if others:
            raise Unsupported(f"unbounded tree class does not support {others[0].kind} constraints")
        self.fixed_points = [np.array(c.point) for c in constraints if hasattr(c, "point")]
        self.forced = []  # (kind, object, sign)
        for b in self.balls:
            self.forced.append(("ball", b, b.sign))
        for a in self.anchors:
            if a.precision >= 1.0:
                self.forced.append(("rule", a.rule, a.label))

    def forced_sign(self, x):
        """Sign every function in the class must take at x (or 0 when free)."""
        s = 0
        for kind, obj, sg in self.forced:
            inside = (np.linalg.norm(x - np.array(obj.center)) < obj.radius) if kind == "ball" else obj.contains(x)
            if inside:
                if s and s != sg:
                    raise Infeasible("sign constraints disagree on a region")
                s = sg
        return s

    def clearance(self, x, value_sign):
        """Largest half-width keeping a box at x clear of regions forcing the other sign."""
        h = math.inf
        for kind, obj, sg in self.forced:
            if sg == value_sign:
                continue
            if kind == "ball":
                gap = np.linalg.norm(x - np.array(obj.center)) - obj.radius
                h = min(h, gap / math.sqrt(self.d))
            else:
                lo, hi = obj.lo, obj.hi
                gap = np.max(np.maximum(lo - x, x - hi))
                h = min(h, gap)
        return h

    def half_width(self, i_point, others, cap_mass):
        P = np.vstack(others) if len(others) else np.zeros((0, self.d))
        x = i_point
        h = math.inf
        if P.shape[0]:
            dist = np.max(np.abs(P - x), axis=1)
            dist = dist[dist > 0]
            if dist.size:
                h = 0.25 * float(dist.min())
        vol = float(np.prod(self.dist.box.hi - self.dist.box.lo))
        h = min(h, 0.5 * (cap_mass * vol) ** (1.0 / self.d))
        return h

    def all_points(self):
        return [p for p in self.sample.points] + self.fixed_points


def _tree_items(setup: _TreeSetup, cap_mass, extra_clear=None, point_boxes=True):
    """Boxes for samples and constrained points.  Returns (items, achieved values)."""
    X, sig = setup.sample.points, setup.sample.sigma
    pts = setup.all_points()
    items, got = [], np.zeros(len(sig))
    for i, x in enumerate(X):
        others = [p for k, p in enumerate(pts) if k != i]
        h = setup.half_width(x, others, cap_mass)
        fs = setup.forced_sign(x)
        if fs and fs != sig[i]:
            v = 0.0 if fs > 0 else NEG_ZERO
            got[i] = 0.0  # supremum; the witness is within 1e-12 of it
        else:
            v = float(sig[i])
            h = min(h, 0.5 * setup.clearance(x, sig[i]))
            got[i] = 1.0
        if extra_clear is not None:
            h = min(h, extra_clear(x))
        if not h > 0:
            raise _degenerate("a sample point sits on a constrained point or region boundary")
        items.append((x - h, x + h, v))
    for c in (setup.values + setup.signs if point_boxes else []):
        x = np.array(c.point)
        v = c.value if isinstance(c, ValueAt) else float(c.sign)
        others = [p for p in pts if not np.array_equal(p, x)]
        h = setup.half_width(x, others, cap_mass)
        h = min(h, 0.5 * setup.clearance(x, 1 if v >= 0 else -1))
        if not h > 0:
            raise _degenerate("a constrained point sits on a region of the opposite sign")
        fs = setup.forced_sign(x)
        if fs and fs != (1 if v >= 0 else -1):
            raise Infeasible("a point value contradicts a sign constraint")
        items.append((x - h, x + h, float(v)))
    return items, got


def _default_value(setup: _TreeSetup):
    signs = {sg for _, _, sg in setup.forced}
    if len(signs) > 1:
        raise Unsupported("sign constraints of both signs in one problem")
    return float(signs.pop()) if signs else 0.0


def tree_unbounded(constraints, sample, dist, hints=()) -> SupResult:
    if not isinstance(dist, UniformBox):
        raise Unsupported("tree witnesses need a uniform box distribution")
    setup = _TreeSetup(constraints, sample, dist)
    n, d = sample.n, sample.d
    cap = MASS_SCALE / n
    if setup.means or setup.shaps:
        return _tree_with_mean(setup, constraints, hints, cap)
    partial = [a for a in setup.anchors if a.precision < 1.0 and a.equality]
    if len(partial) > 1:
        raise Unsupported("at most one anchor constraint")
    if partial:
        a = partial[0]
        room = (1 - a.precision) * dist.box_mass(a.rule)
        cap = min(cap, room / (4 * (n + 1)))
    items, got = _tree_items(setup, cap)
    default = Leaf(_default_value(setup))
    if partial:
        default = _anchor_filler(setup, partial[0], items, default)
    tree = AxisTree(d, carve(items, default, d))
    value = float(np.mean(got))
    return _finish(tree, value, constraints, sample)


def _finish(model, value, constraints, sample, tol=1e-9):
    bad = violations(model, constraints)
    if bad:
        raise AssertionError(f"constructed witness violates: {bad}")
    attained = sample.correlation(model.evaluate_many(sample.points))
    if abs(attained - value) > tol:
        raise AssertionError(f"witness attains {attained}, expected {value}")
    return SupResult.exact(value, model)


def _anchor_filler(setup, a: AnchorHolds, items, default):
    """Slab of the opposite label inside the rule, sized so the precision is exact."""
    dist = setup.dist
    R = a.rule.intersect(dist.box)
    if R is None:
        raise DomainError("zero-mass", "the anchor rule misses the support")
    Rlo, Rhi = R.lo, R.hi
    PR = dist.box_mass(a.rule)
    other = -a.label

    def label(v):
        return 1 if v >= 0 else -1

    fixed_other = sum(_box_mass(dist, np.maximum(lo, Rlo), np.minimum(hi, Rhi))
                      for lo, hi, v in items if label(v) == other and np.all(np.minimum(hi, Rhi) > np.maximum(lo, Rlo)))
    target = (1 - a.precision) * PR - fixed_other
    if target < -1e-15:
        raise _degenerate("interpolating boxes already exceed the anchor's error mass")

    def filler(w):
        lo, hi = Rlo.copy(), Rhi.copy()
        hi[0] = lo[0] + w
        return lo, hi

    def mass(w):
        lo, hi = filler(w)
        m = _box_mass(dist, lo, hi)
        for blo, bhi, _ in items:
            ilo, ihi = np.maximum(blo, lo), np.minimum(bhi, hi)
            if np.all(ihi > ilo):
                m -= _box_mass(dist, ilo, ihi)
        return m

    lo_w, hi_w = 0.0, float(Rhi[0] - Rlo[0])
    if mass(hi_w) < target - 1e-12:
        raise _degenerate("the rule is too small for the requested precision")
    for _ in range(200):
        mid = 0.5 * (lo_w + hi_w)
        if mass(mid) < target:
            lo_w = mid
        else:
            hi_w = mid
    flo, fhi = filler(hi_w)
    return carve([(flo, fhi, float(other))], default, setup.d)


def _tree_with_mean(setup: _TreeSetup, constraints, hints, cap):
    """Keep a base member on thin slabs through x0, fit labels elsewhere and fix the mean with a constant."""
    d, dist = setup.d, setup.dist
    if setup.balls or setup.anchors or setup.signs:
        raise Unsupported("mean or SHAP constraints combined with sign constraints")
    base = None
    for h in hints:
        if isinstance(h, GridFunction):
            h = grid_to_tree(h)
        if isinstance(h, AxisTree) and satisfies(h, constraints):
            base = h
            break
    keys = {json_key(m.dist) for m in setup.means} | {json_key(s.dist) for s in setup.shaps}
    if len(keys) > 1:
        raise Unsupported("mean and SHAP constraints under different distributions")
    x0 = np.array(setup.values[0].point) if setup.values else None
    if setup.shaps:
        if base is None:
            raise Unsupported("SHAP-constrained witnesses need a base tree that meets the constraints")
        x0 = np.array(setup.shaps[0].point)
        if any(s.point != setup.shaps[0].point for s in setup.shaps):
            raise Unsupported("SHAP constraints at several points")
        target_dist = setup.shaps[0].dist
        mu = base.expectation(target_dist)
    else:
        target_dist = setup.means[0].dist
        mu = setup.means[0].value
        if abs(mu) > 1:
            raise Infeasible("mean outside [-1, 1]")
    root = base.root if base is not None else Leaf(mu)
    X = setup.sample.points
    if x0 is not None:
        gaps = np.abs(X - x0)
        if np.any(gaps == 0):
            raise _degenerate("a sample point shares a coordinate with the explained point")
        eta = min(0.25 * float(gaps.min()), 1e-3 * float(np.min(dist.box.hi - dist.box.lo)))
    clear = (lambda x: 0.5 * float(np.min(np.abs(x - x0)))) if x0 is not None else None
    items, got = _tree_items(setup, cap, extra_clear=clear, point_boxes=base is None)

    def build(c):
        node = Leaf(c)
        if x0 is not None:
            for j in reversed(range(d)):
                rest = node
                node = Split(j, float(x0[j] - eta), rest, Split(j, float(x0[j] + eta), root, rest))
        return AxisTree(d, carve(items, node, d))

    e0 = build(0.0).expectation(target_dist)
    e1 = build(1.0).expectation(target_dist)
    if e1 == e0:
        raise _degenerate("no room left to adjust the mean")
    c = (mu - e0) / (e1 - e0)
    if abs(c) > 1:
        raise _degenerate("the mean sits too close to +-1 to leave room for the labels")
    tree = build(float(c))
    return _finish(tree, float(np.mean(got)), constraints, setup.sample)


def json_key(dist):
    return repr(dist.to_json())


# ------------------------------------------------------------- GAM witness

def gam_unbounded(constraints, sample, dist) -> SupResult:
    if not isinstance(dist, UniformBox):
        raise Unsupported("GAM witnesses need a uniform box distribution")
    vals = [c for c in constraints if isinstance(c, ValueAt)]
    shaps = [c for c in constraints if isinstance(c, ShapEquals)]
    for c in constraints:
        if isinstance(c, GradientAt):
            if any(v != 0 for v in c.vector):
                raise Infeasible("GAM trees have zero gradient wherever it is defined")
        elif not isinstance(c, (ValueAt, ShapEquals)):
            raise Unsupported(f"GAM class does not support {c.kind} constraints")
    if len(vals) != 1 or len(shaps) > 1:
        raise Unsupported("GAM witness needs one value constraint and at most one SHAP constraint")
    x0 = np.array(vals[0].point)
    y0 = vals[0].value
    d, n = sample.d, sample.n
    a = np.full(d, y0 / d)
    if shaps:
        if np.array(shaps[0].point).tolist() != x0.tolist():
            raise Unsupported("SHAP and value constraints at different points")
        if shaps[0].ambient is not None and shaps[0].ambient != dist:
            raise Unsupported("GAM witness with an ambient SHAP distribution")
        phi = np.array(shaps[0].vector)
    else:
        phi = a.copy()
    e = a - phi  # target component means
    X = sample.points
    if np.any(X == x0):
        raise _degenerate("a sample point shares a coordinate with the explained point")
    lo_s, hi_s = dist.box.lo, dist.box.hi
    width = hi_s - lo_s
    for scale in (1.0, 1e-2, 1e-4, 1e-6):
        p = MASS_SCALE * scale / n
        comps, ok = _gam_components(X, sample.sigma, x0, a, e, p, lo_s, width)
        if not ok:
            continue
        try:
            model = GamModel(tuple(comps), box=dist.box)
        except DomainError:
            continue
        if satisfies(model, constraints):
            return _finish(model, 1.0, constraints, sample)
    raise _degenerate("the SHAP vector leaves no room to interpolate the labels")


Q = 2.0 ** -30


def _gam_components(X, sig, x0, a, e, p, lo_s, width):
    n, d = X.shape
    intervals = []
    for j in range(d):
        coords = np.concatenate([X[:, j], [x0[j]]])
        srt = np.sort(coords)
        gap = float(np.min(np.diff(srt))) if coords.size > 1 else math.inf
        if gap <= 0:
            return None, False
        h = min(0.25 * gap, 0.5 * p * width[j])
        intervals.append(h)
    c = e.copy()
    U = L = None
    for _ in range(4):
        base_u = np.maximum(a, c)
        base_l = np.minimum(a, c)
        su = 1.0 - base_u.sum()
        sl = -1.0 - base_l.sum()
        if su < 0 or sl > 0:
            return None, False
        U = np.ceil((base_u + su / d) / Q) * Q
        L = np.floor((base_l + sl / d) / Q) * Q
        U[-1] = 1.0 - U[:-1].sum()
        L[-1] = -1.0 - L[:-1].sum()
        if U[-1] < base_u[-1] or L[-1] > base_l[-1]:
            return None, False
        m = 2 * np.array(intervals) / width  # marginal mass of one interval
        npos = int(np.sum(sig > 0))
        nneg = n - npos
        c = (e - m * a - m * (npos * U + nneg * L)) / (1 - m * (n + 1))
    base_u = np.maximum(a, c)
    base_l = np.minimum(a, c)
    if np.any(U < base_u - 1e-15) or np.any(L > base_l + 1e-15):
        return None, False
    comps = []
    for j in range(d):
        h = intervals[j]
        pieces = sorted([(float(x0[j]), float(a[j]))] +
                        [(float(X[i, j]), float(U[j] if sig[i] > 0 else L[j])) for i in range(n)])
        edges, values = [], [float(c[j])]
        for x, v in pieces:
            edges += [x - h, x + h]
            values += [v, float(c[j])]
        comps.append(AxisTree(1, tree_from_intervals(1, 0, edges, values)))
    return comps, True


# ------------------------------------------------------------- smooth witnesses

def _centers(constraints, sample):
    vals = [c for c in constraints if isinstance(c, ValueAt)]
    grads = [c for c in constraints if isinstance(c, GradientAt)]
    for c in constraints:
        if not isinstance(c, (ValueAt, GradientAt)):
            raise Unsupported(f"smooth interpolating classes do not support {c.kind} constraints")
    if len(vals) > 1 or len(grads) > 1:
        raise Unsupported("at most one value and one gradient constraint")
    if grads and (not vals or grads[0].point != vals[0].point):
        raise Unsupported("a gradient constraint needs a value constraint at the same point")
    C = [p for p in sample.points]
    off = list(sample.sigma.astype(float))
    slopes = [np.zeros(sample.d) for _ in C]
    if vals:
        C.append(np.array(vals[0].point))
        off.append(vals[0].value)
        slopes.append(np.array(grads[0].vector) if grads else np.zeros(sample.d))
    C = np.array(C)
    Dm = np.linalg.norm(C[:, None, :] - C[None, :, :], axis=2)
    np.fill_diagonal(Dm, np.inf)
    sep = float(Dm.min()) if C.shape[0] > 1 else math.inf
    if sep <= 0:
        raise _degenerate("a sample point coincides with the constrained point")
    return C, np.array(off), np.array(slopes), sep, vals


def bounded_differentiable(constraints, sample, dist) -> SupResult:
    C, off, slopes, sep, vals = _centers(constraints, sample)
    rho = 0.45 * sep if math.isfinite(sep) else 1.0
    if vals:
        y0 = off[-1]
        v = slopes[-1]
        nv = float(np.linalg.norm(v))
        if abs(y0) > 1:
            raise Infeasible("value outside [-1, 1]")
        if nv > 0:
            if abs(y0) >= 1:
                raise Infeasible("an extreme value needs a zero gradient")
            rho = min(rho, 0.99 * (1 - abs(y0)) / nv)
    model = BumpSum(C, off, slopes, rho)
    return _finish(model, 1.0, constraints, sample)


def poly_unbounded(constraints, sample, dist) -> SupResult:
    C, off, slopes, sep, vals = _centers(constraints, sample)
    if vals and abs(off[-1]) > 1:
        raise Infeasible("value outside [-1, 1]")
    if vals and abs(off[-1]) >= 1 and np.any(slopes[-1] != 0):
        raise Infeasible("an extreme value needs a zero gradient")
    box = dist.support
    D = float(np.linalg.norm(box.hi - box.lo))
    k, d = C.shape
    if not math.isfinite(sep):
        sep = D
    # cross-talk between peaks below half an ulp of 1, so labels come out as exact +-1
    m = int(math.ceil(math.log(1e-18) / math.log1p(-(sep / D) ** 2)))
    m = max(m, 1)
    # unknowns per center: offset, slope (d); equations: value and gradient at every center
    A = np.zeros((k * (d + 1), k * (d + 1)))
    rhs = np.zeros(k * (d + 1))
    for l in range(k):
        H = C[l] - C  # (k, d)
        u = 1.0 - np.sum(H * H, axis=1) / D ** 2
        phi = u ** m
        dphi = (-2.0 * m / D ** 2) * H * (u ** (m - 1))[:, None]
        row = l * (d + 1)
        for kk in range(k):
            col = kk * (d + 1)
            A[row, col] = phi[kk]
            A[row, col + 1:col + 1 + d] = H[kk] * phi[kk]
            A[row + 1:row + 1 + d, col] = dphi[kk]
            A[row + 1:row + 1 + d, col + 1:col + 1 + d] = np.eye(d) * phi[kk] + np.outer(dphi[kk], H[kk])
        rhs[row] = off[l]
        rhs[row + 1:row + 1 + d] = slopes[l]
    sol = np.linalg.solve(A, rhs)
    model = PeakPolynomial(C, sol.reshape(k, d + 1)[:, 0], sol.reshape(k, d + 1)[:, 1:], D, m)
    # iterative refinement against the model's own evaluation, so labels are hit to the last bit
    for _ in range(4):
        got = np.concatenate([np.concatenate(([model.evaluate_many(C[l:l + 1])[0]], model.gradient(C[l])))
                              for l in range(k)])
        res = rhs - got
        if not np.any(res):
            break
        sol = sol + np.linalg.solve(A, res)
        model = PeakPolynomial(C, sol.reshape(k, d + 1)[:, 0], sol.reshape(k, d + 1)[:, 1:], D, m)
    width = D / math.sqrt(2 * m)
    rng = np.random.default_rng(0)
    local = (C[:, None, :] + rng.normal(scale=width, size=(k, 400, d))).reshape(-1, d)
    local = local[box.contains_many(local)]
    if not within_box(model, box) or np.any(np.abs(model.evaluate_many(local)) > 1 + 1e-9):
        raise _degenerate("peak polynomial left [-1, 1]")
    return _finish(model, 1.0, constraints, sample)
