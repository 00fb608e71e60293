"""Sup-correlation over axis-aligned trees of depth at most K with leaf values
in [-1, 1].

Point constraints only (values, signs, zero gradients) depend on which points
share a leaf, so the problem is an exact dynamic program over the subsets a
depth-K tree can cut out.  Mean and anchor constraints also depend on leaf
masses; for those the tree shapes are enumerated, each leaf mass is bounded by
the range its thresholds can move in, and a Lagrangian (mean) or a label
enumeration (anchor) bounds the best leaf values.  That gives an upper bound;
the lower bound comes from concrete trees that are checked exactly.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..errors import DomainError, Infeasible, Unsupported
from ..geometry import AxisBox, UniformBox
from ..models import AxisTree, Leaf, Split
from .constraints import (AnchorHolds, GradientAt, MeanEquals, ShapEquals, SignAt, SupResult,
                          ValueAt)
from .lp import solve_box_lp

NEG = -math.inf
MAX_SHAPES = 400_000


class _Nodes:
    """Sample points followed by constraint points, with per-node leaf-value data."""

    def __init__(self, constraints, sample):
        pts = [p for p in sample.points]
        w = list(sample.sigma.astype(float) / sample.n)
        fixed, lo, hi = [math.nan] * len(pts), [-1.0] * len(pts), [1.0] * len(pts)
        for c in constraints:
            if isinstance(c, ValueAt):
                pts.append(np.array(c.point)); w.append(0.0)
                fixed.append(c.value); lo.append(-1.0); hi.append(1.0)
            elif isinstance(c, SignAt):
                pts.append(np.array(c.point)); w.append(0.0); fixed.append(math.nan)
                lo.append(0.0 if c.sign > 0 else -1.0); hi.append(1.0 if c.sign > 0 else 0.0)
            elif isinstance(c, GradientAt):
                if any(v != 0.0 for v in c.vector):
                    raise Infeasible("trees have zero gradient wherever it is defined")
                pts.append(np.array(c.point)); w.append(0.0)
                fixed.append(math.nan); lo.append(-1.0); hi.append(1.0)
            elif isinstance(c, AnchorHolds):
                pts.append(np.array(c.point)); w.append(0.0)
                fixed.append(math.nan); lo.append(-1.0); hi.append(1.0)
        self.P = np.array(pts, dtype=float)
        self.w = np.array(w)
        self.fixed = np.array(fixed)
        self.lo = np.array(lo)
        self.hi = np.array(hi)
        self.N, self.d = self.P.shape
        if self.N > 62:
            raise DomainError("budget", "too many points for the exact tree solver")
        self.order = [np.argsort(self.P[:, j], kind="stable") for j in range(self.d)]
        self._leaf_cache = {}

    def members(self, mask: int) -> list:
        return [i for i in range(self.N) if mask >> i & 1]

    def leaf_data(self, mask: int):
        """(weight sum, fixed value or nan, value low, value high); None if infeasible."""
        got = self._leaf_cache.get(mask)
        if got is not None or mask in self._leaf_cache:
            return got
        idx = self.members(mask)
        out = None
        if not idx:
            out = (0.0, math.nan, -1.0, 1.0)
        else:
            s = float(self.w[idx].sum())
            f = self.fixed[idx]
            f = f[~np.isnan(f)]
            vlo, vhi = float(self.lo[idx].max()), float(self.hi[idx].min())
            if vlo <= vhi + 1e-12:
                if f.size == 0:
                    out = (s, math.nan, vlo, max(vhi, vlo))
                elif np.all(np.abs(f - f[0]) <= 1e-12) and vlo - 1e-12 <= f[0] <= vhi + 1e-12:
                    out = (s, float(f[0]), float(f[0]), float(f[0]))
        self._leaf_cache[mask] = out
        return out

    def leaf_best(self, mask: int):
        data = self.leaf_data(mask)
        if data is None:
            return NEG, 0.0
        s, f, vlo, vhi = data
        if not math.isnan(f):
            return s * f, f
        v = vhi if s > 0 else vlo if s < 0 else min(max(0.0, vlo), vhi)
        return s * v, v

    def splits(self, mask: int):
        """Yield (feature, low coord, high coord, left mask, right mask) for every separating gap."""
        for j in range(self.d):
            left = 0
            prev = None
            for i in self.order[j]:
                i = int(i)
                if not mask >> i & 1:
                    continue
                x = self.P[i, j]
                if prev is not None and x > prev:
                    yield j, prev, x, left, mask & ~left
                left |= 1 << i
                prev = x


def _partition_dp(nodes: _Nodes, K: int):
    memo = {}

    def best(mask, depth):
        key = (mask, depth)
        if key in memo:
            return memo[key][0]
        val, _ = nodes.leaf_best(mask)
        plan = None
        if depth < K and mask & (mask - 1):
            for j, a, b, lm, rm in nodes.splits(mask):
                v = best(lm, depth + 1)
                if v == NEG:
                    continue
                v += best(rm, depth + 1)
                if v > val + 1e-15:
                    val, plan = v, (j, (a + b) / 2, lm, rm)
        memo[key] = (val, plan)
        return val

    return best, memo


def _build_from_plan(nodes, memo, mask, depth):
    _, plan = memo.get((mask, depth), (None, None))
    if plan is None:
        return Leaf(nodes.leaf_best(mask)[1])
    j, t, lm, rm = plan
    return Split(j, float(t), _build_from_plan(nodes, memo, lm, depth + 1),
                 _build_from_plan(nodes, memo, rm, depth + 1))


def solve_tree_partition(K: int, constraints, sample) -> SupResult:
    for c in constraints:
        if not isinstance(c, (ValueAt, SignAt, GradientAt)):
            raise Unsupported(f"exact tree solver does not handle {c.kind} constraints")
    nodes = _Nodes(constraints, sample)
    best, memo = _partition_dp(nodes, K)
    full = (1 << nodes.N) - 1
    val = best(full, 0)
    if val == NEG:
        raise Infeasible("no depth-limited tree separates the conflicting point constraints")
    tree = AxisTree(nodes.d, _build_from_plan(nodes, memo, full, 0), max_depth=K)
    return SupResult.exact(val, tree)


# ------------------------------------------------------------------ brackets

class _LeafRec:
    __slots__ = ("mask", "s", "fixed", "vlo", "vhi", "mlo", "mhi", "rlo", "rhi", "clo", "chi")


def _interval_len(Llo, Lhi, Ulo, Uhi, a, b):
    """Range of the length of [lower, upper] clipped to [a, b] when lower in [Llo, Lhi], upper in [Ulo, Uhi]."""
    small = max(0.0, min(Ulo, b) - max(Lhi, a))
    large = max(0.0, min(Uhi, b) - max(Llo, a))
    return small, large


class _ShapeEnumerator:
    def __init__(self, nodes: _Nodes, K: int, dist: UniformBox, rule: AxisBox | None):
        self.nodes = nodes
        self.K = K
        self.dist = dist
        self.rule = rule
        self.S = dist.box
        self.count = 0

    def leaf(self, mask, L, U, clo, chi):
        data = self.nodes.leaf_data(mask)
        if data is None:
            return None
        r = _LeafRec()
        r.mask = mask
        r.s, r.fixed, r.vlo, r.vhi = data
        a, b = self.S.lo, self.S.hi
        mlo = mhi = 1.0
        for j in range(self.nodes.d):
            small, large = _interval_len(L[j][0], L[j][1], U[j][0], U[j][1], a[j], b[j])
            mlo *= small / (b[j] - a[j])
            mhi *= large / (b[j] - a[j])
        r.mlo, r.mhi = mlo, mhi
        if self.rule is not None:
            rlo = rhi = 1.0
            for j in range(self.nodes.d):
                ra, rb = max(a[j], self.rule.lo[j]), min(b[j], self.rule.hi[j])
                if rb <= ra:
                    rlo = rhi = 0.0
                    break
                small, large = _interval_len(L[j][0], L[j][1], U[j][0], U[j][1], ra, rb)
                rlo *= small / (b[j] - a[j])
                rhi *= large / (b[j] - a[j])
            r.rlo, r.rhi = rlo, rhi
        r.clo, r.chi = tuple(clo), tuple(chi)
        return r

    def options(self, mask, L, U, clo, chi):
        """Split options: (feature, L/U/concrete for left and right, left mask, right mask, threshold)."""
        P = self.nodes.P
        idx = self.nodes.members(mask)
        for j in range(self.nodes.d):
            coords = sorted(set(float(P[i, j]) for i in idx))
            cuts = []
            for u, v in zip(coords, coords[1:]):
                lm = sum(1 << i for i in idx if P[i, j] <= u)
                cuts.append((u, v, lm, (u + v) / 2))
            if coords:
                u1, uk = coords[0], coords[-1]
                if L[j][0] < u1:
                    cuts.append((L[j][0], u1, 0, (clo[j] + u1) / 2))
                if U[j][1] > uk:
                    cuts.append((uk, U[j][1], mask, (uk + chi[j]) / 2))
            for lo_t, hi_t, lm, t in cuts:
                rm = mask & ~lm
                Ul = list(U); Ul[j] = (max(lo_t, L[j][0]), min(hi_t, U[j][1]))
                Lr = list(L); Lr[j] = (max(lo_t, L[j][0]), min(hi_t, U[j][1]))
                chl = list(chi); chl[j] = t
                clr = list(clo); clr[j] = t
                yield j, t, (lm, L, Ul, clo, chl), (rm, Lr, U, clr, chi)

    def shapes(self, state, depth):
        """Yield (leaf records, shape) for every tree below this node."""
        mask, L, U, clo, chi = state
        rec = self.leaf(mask, L, U, clo, chi)
        if rec is not None:
            yield [rec], None
        if depth >= self.K or mask == 0:
            return
        for j, t, ls, rs in self.options(mask, L, U, clo, chi):
            rights = list(self.shapes(rs, depth + 1))
            if not rights:
                continue
            for lrecs, lshape in self.shapes(ls, depth + 1):
                for rrecs, rshape in rights:
                    self.count += 1
                    if self.count > MAX_SHAPES:
                        raise DomainError("budget", f"more than {MAX_SHAPES} tree shapes")
                    yield lrecs + rrecs, (j, t, lshape, rshape)

    def root(self):
        a, b = self.S.lo, self.S.hi
        L = [(float(a[j]), float(a[j])) for j in range(self.nodes.d)]
        U = [(float(b[j]), float(b[j])) for j in range(self.nodes.d)]
        return (1 << self.nodes.N) - 1, L, U, list(map(float, a)), list(map(float, b))


def _free_best(r: _LeafRec) -> float:
    if not math.isnan(r.fixed):
        return r.s * r.fixed
    return r.s * (r.vhi if r.s > 0 else r.vlo)


def _mean_bound(recs, mu: float) -> float:
    """Lagrangian upper bound for max sum s_l v_l s.t. sum m_l v_l = mu with m_l, v_l in intervals."""
    lines = []  # per leaf: list of (intercept s*v, slope -m*v)
    lo_sum = hi_sum = 0.0
    cands = {0.0}
    for r in recs:
        vs = (r.fixed,) if not math.isnan(r.fixed) else (r.vlo, r.vhi)
        ms = (r.mlo, r.mhi)
        mv = [m * v for m in ms for v in vs]
        lo_sum += min(mv)
        hi_sum += max(mv)
        lines.append([(r.s * v, -m * v) for m in ms for v in vs])
        for m in ms:
            if m > 0:
                cands.add(r.s / m)
        for (m1, v1), (m2, v2) in itertools.combinations([(m, v) for m in ms for v in vs], 2):
            den = m1 * v1 - m2 * v2
            if den != 0:
                cands.add(r.s * (v1 - v2) / den)
    if mu < lo_sum - 1e-12 or mu > hi_sum + 1e-12:
        return NEG
    best = math.inf
    for lam in cands:
        val = lam * mu + sum(max(c + k * lam for c, k in ls) for ls in lines)
        best = min(best, val)
    return best


def _anchor_bound(recs, con: AnchorHolds, Mr: float, cap: float) -> float:
    p = con.precision
    full = [r for r in recs if r.mask]
    empty = [r for r in recs if not r.mask]
    C_lo = sum(r.rlo for r in empty)
    C_hi = sum(r.rhi for r in empty)
    best = NEG
    tol = 1e-12
    for labels in itertools.product((1, -1), repeat=len(full)):
        val = 0.0
        A_lo = A_hi = B_lo = B_hi = 0.0
        ok = True
        for r, lab in zip(full, labels):
            vlo, vhi = (max(r.vlo, 0.0), r.vhi) if lab > 0 else (r.vlo, min(r.vhi, 0.0))
            if not math.isnan(r.fixed):
                if not vlo - tol <= r.fixed <= vhi + tol or (lab > 0) != (r.fixed >= 0):
                    ok = False
                    break
                val += r.s * r.fixed
            else:
                if vlo > vhi + tol:
                    ok = False
                    break
                val += r.s * (vhi if r.s > 0 else vlo)
            if lab == con.label:
                A_lo += r.rlo; A_hi += r.rhi
            else:
                B_lo += r.rlo; B_hi += r.rhi
        if not ok or val <= best:
            continue
        if A_lo + B_lo + C_lo > Mr + tol or B_lo > (1 - p) * Mr + tol:
            continue
        if con.equality:
            if A_lo > p * Mr + tol or min(A_hi, p * Mr) + min(B_hi, (1 - p) * Mr) + C_hi < Mr - tol:
                continue
        elif A_hi + min(B_hi, (1 - p) * Mr) + C_hi < Mr - tol:
            continue
        best = val
        if best >= cap:
            break
    return best


def _shape_tree(d, shape, values, K):
    it = iter(values)

    def build(sh):
        if sh is None:
            return Leaf(float(next(it)))
        j, t, l, r = sh
        return Split(j, float(t), build(l), build(r))

    return AxisTree(d, build(shape), max_depth=K)


def _concrete_lower(recs, shape, mean: MeanEquals, dist, d, K, check):
    masses = np.array([dist.box_mass(AxisBox.half_open(r.clo, r.chi)) for r in recs])
    s = np.array([r.s for r in recs])
    lo = np.array([r.fixed if not math.isnan(r.fixed) else r.vlo for r in recs])
    hi = np.array([r.fixed if not math.isnan(r.fixed) else r.vhi for r in recs])
    try:
        val, z = solve_box_lp(s, masses[None, :], [mean.value], lo, hi)
    except Infeasible:
        return NEG, None
    tree = _shape_tree(d, shape, np.clip(z, -1, 1), K)
    if not check(tree):
        return NEG, None
    return val, tree


def solve_tree_bracket(K: int, constraints, sample, hints=(), check=None) -> SupResult:
    """Bracket for trees under a mean or anchor constraint (plus point constraints)."""
    cons = list(constraints)
    shaps = [c for c in cons if isinstance(c, ShapEquals)]
    if shaps:
        vals = [c for c in cons if isinstance(c, ValueAt) and c.point == shaps[0].point]
        if not vals:
            raise Unsupported("tree bracket needs the value at the SHAP point")
        # efficiency: g(x0) - E g = sum(phi); keep only that consequence
        cons = [c for c in cons if not isinstance(c, ShapEquals)]
        cons += [MeanEquals(vals[0].value - sum(s.vector), s.dist) for s in shaps]
    means = [c for c in cons if isinstance(c, MeanEquals)]
    anchors = [c for c in cons if isinstance(c, AnchorHolds)]
    for c in cons:
        if not isinstance(c, (ValueAt, SignAt, GradientAt, MeanEquals, AnchorHolds)):
            raise Unsupported(f"tree bracket does not handle {c.kind} constraints")
    if len(means) + len(anchors) != 1:
        raise Unsupported("tree bracket handles exactly one mean or anchor constraint")
    glob = (means or anchors)[0]
    dist = glob.dist
    if not isinstance(dist, UniformBox):
        raise Unsupported("tree bracket needs a uniform box distribution")
    nodes = _Nodes(cons, sample)
    dp, _ = _partition_dp(nodes, K)
    full = (1 << nodes.N) - 1
    cap = dp(full, 0)
    if cap == NEG:
        raise Infeasible("point constraints conflict for every depth-limited tree")
    lower, witness = NEG, None
    for h in hints:
        if isinstance(h, AxisTree) and (h.depth if hasattr(h, "depth") else 0) <= K and (check is None or check(h)):
            v = sample.correlation(h.evaluate_many(sample.points))
            if v > lower:
                lower, witness = v, h
    rule = anchors[0].rule if anchors else None
    Mr = dist.box_mass(rule) if anchors else 0.0
    enum = _ShapeEnumerator(nodes, K, dist, rule)
    upper = NEG
    for recs, shape in enum.shapes(enum.root(), 0):
        free = sum(_free_best(r) for r in recs)
        if free <= upper:
            continue
        if means:
            ub = _mean_bound(recs, means[0].value)
            if ub > lower and check is not None:
                lv, tree = _concrete_lower(recs, shape, means[0], dist, nodes.d, K, check)
                if lv > lower:
                    lower, witness = lv, tree
        else:
            ub = _anchor_bound(recs, anchors[0], Mr, free)
        upper = max(upper, min(ub, free))
    if upper == NEG:
        raise Infeasible("no tree shape meets the constraints")
    if lower == NEG:
        lower = -1.0
    upper = min(upper, cap)
    return SupResult.bracket(lower, upper, witness)
