"""Concrete decision functions with exact evaluation and exact expectations,
plus the class specifications consumed by the sup-correlation solvers.

Piecewise-constant models (grid, tree, GAM of trees) expose their constant
regions; expectations, interventional value functions and anchor metrics are
all computed from those regions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, Unsupported
from .geometry import INF, AxisBox, DiagonalSegment, Grid, UniformBox, as_point

BOUND_TOL = 1e-12


def sign(v: float) -> int:
    return 1 if v >= 0 else -1


def signs(v: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(v) >= 0, 1, -1)


class RegionTable:
    """Constant regions of a piecewise-constant model as flat arrays."""

    def __init__(self, boxes: Sequence[AxisBox], values: Sequence[float]):
        self.boxes = list(boxes)
        self.values = np.asarray(values, dtype=float)
        self.lo = np.array([b.lower for b in self.boxes], dtype=float)
        self.hi = np.array([b.upper for b in self.boxes], dtype=float)
        self.lc = np.array([b.lower_closed for b in self.boxes], dtype=bool)
        self.uc = np.array([b.upper_closed for b in self.boxes], dtype=bool)

    def __len__(self):
        return len(self.boxes)

    def coord_inside(self, j: int, v: float) -> np.ndarray:
        above = np.where(self.lc[:, j], v >= self.lo[:, j], v > self.lo[:, j])
        below = np.where(self.uc[:, j], v <= self.hi[:, j], v < self.hi[:, j])
        return above & below

    def masses(self, dist) -> np.ndarray:
        if isinstance(dist, UniformBox):
            slo, shi = dist.box.lo, dist.box.hi
            ov = np.maximum(0.0, np.minimum(self.hi, shi) - np.maximum(self.lo, slo))
            return np.prod(ov / (shi - slo), axis=1)
        if isinstance(dist, DiagonalSegment):
            a = np.maximum(self.lo.max(axis=1), dist.t_lo)
            b = np.minimum(self.hi.min(axis=1), dist.t_hi)
            return np.maximum(0.0, b - a) / (dist.t_hi - dist.t_lo)
        raise Unsupported(f"unknown distribution {dist!r}")

    def masses_within(self, dist, box: AxisBox) -> np.ndarray:
        """Mass of each region intersected with a box."""
        lo = np.maximum(self.lo, box.lo)
        hi = np.minimum(self.hi, box.hi)
        if isinstance(dist, UniformBox):
            slo, shi = dist.box.lo, dist.box.hi
            ov = np.maximum(0.0, np.minimum(hi, shi) - np.maximum(lo, slo))
            return np.prod(ov / (shi - slo), axis=1)
        a = np.maximum(lo.max(axis=1), dist.t_lo)
        b = np.minimum(hi.min(axis=1), dist.t_hi)
        return np.maximum(0.0, b - a) / (dist.t_hi - dist.t_lo)

    def value_weights(self, dist, x: np.ndarray, S: Sequence[int]) -> np.ndarray:
        """Coefficients w with v(S, x) = w . values (interventional value function)."""
        d = self.lo.shape[1]
        S = tuple(S)
        if len(S) == d:
            w = np.ones(len(self))
            for j in range(d):
                w = w * self.coord_inside(j, x[j])
            return w
        if isinstance(dist, DiagonalSegment):
            if S:
                raise Unsupported("partial value functions need a product distribution, not a diagonal segment")
            return self.masses(dist)
        if not isinstance(dist, UniformBox):
            raise Unsupported(f"unknown distribution {dist!r}")
        w = np.ones(len(self))
        for j in range(d):
            if j in S:
                w = w * self.coord_inside(j, x[j])
            else:
                a, b = dist.box.lower[j], dist.box.upper[j]
                ov = np.maximum(0.0, np.minimum(self.hi[:, j], b) - np.maximum(self.lo[:, j], a))
                w = w * (ov / (b - a))
        return w


class FunctionModel:
    kind = "abstract"
    bounded = True
    piecewise_constant = False

    @property
    def d(self) -> int:
        raise NotImplementedError

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, p) -> float:
        x = as_point(p, self.d)
        return float(self.evaluate_many(x[None, :])[0])

    def label(self, p) -> int:
        return sign(self.evaluate(p))

    def expectation(self, dist) -> float:
        raise NotImplementedError

    def marginal_value(self, dist, x, S: Sequence[int]) -> float:
        raise NotImplementedError

    def gradient(self, x0) -> np.ndarray | None:
        raise NotImplementedError

    def regions(self) -> RegionTable:
        raise Unsupported(f"{self.kind} models are not piecewise constant")

    def to_json(self) -> dict:
        raise NotImplementedError


class PiecewiseConstant(FunctionModel):
    piecewise_constant = True

    def expectation(self, dist) -> float:
        t = self.regions()
        return float(t.masses(dist) @ t.values)

    def marginal_value(self, dist, x, S: Sequence[int]) -> float:
        x = as_point(x, self.d)
        t = self.regions()
        return float(t.value_weights(dist, x, S) @ t.values)

    def split_points(self, j: int) -> np.ndarray:
        """Finite region boundaries along dimension j."""
        t = self.regions()
        v = np.concatenate([t.lo[:, j], t.hi[:, j]])
        return np.unique(v[np.isfinite(v)])


@dataclass(frozen=True)
class GridFunction(PiecewiseConstant):
    grid: Grid
    values: np.ndarray = field(compare=False)

    kind = "grid"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size != self.grid.n_cells:
            raise DomainError("bad-model", f"grid needs {self.grid.n_cells} values, got {vals.size}")
        if np.any(np.abs(vals) > 1 + BOUND_TOL) or not np.all(np.isfinite(vals)):
            raise DomainError("bad-model", "grid values must lie in [-1, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        boxes = [self.grid.cell_box(idx) for idx in self.grid.cells()]
        object.__setattr__(self, "_table", RegionTable(boxes, vals))

    @property
    def d(self) -> int:
        return self.grid.d

    def regions(self) -> RegionTable:
        return self._table

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inside = self.grid.box.contains_many(X)
        if not np.all(inside):
            raise DomainError("outside-grid", "point lies outside the grid bounding box")
        return self.values[self.grid.flat_index_many(X)]

    def gradient(self, x0) -> np.ndarray | None:
        x = as_point(x0, self.d)
        for j in range(self.d):
            if np.any(np.array(self.grid.cuts[j]) == x[j]):
                return None
        return np.zeros(self.d)

    def to_json(self) -> dict:
        return {"kind": "grid", "grid": self.grid.to_json(), "values": [float(v) for v in self.values]}


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"


def _node_depth(node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(_node_depth(node.left), _node_depth(node.right))


@dataclass(frozen=True)
class AxisTree(PiecewiseConstant):
    """Binary tree; left branch takes x[feature] < threshold."""

    dim: int
    root: "Leaf | Split"
    max_depth: int | None = None

    kind = "tree"

    def __post_init__(self):
        boxes, vals = [], []

        def walk(node, lo, hi, lc, uc, depth):
            if isinstance(node, Leaf):
                v = float(node.value)
                if not math.isfinite(v) or abs(v) > 1 + BOUND_TOL:
                    raise DomainError("bad-model", "tree leaf values must lie in [-1, 1]")
                boxes.append(AxisBox(tuple(lo), tuple(hi), tuple(lc), tuple(uc)))
                vals.append(v)
                return
            j, t = node.feature, float(node.threshold)
            if not (0 <= j < self.dim) or not math.isfinite(t):
                raise DomainError("bad-model", "tree split needs a valid feature and finite threshold")
            if t > lo[j] and t < hi[j] or (t == lo[j] and lc[j]):
                pass
            hl = list(hi); hl[j] = min(hi[j], t)
            ucl = list(uc); ucl[j] = False if t <= hi[j] else uc[j]
            if hl[j] >= lo[j]:
                walk(node.left, lo, hl, lc, ucl, depth + 1)
            ll = list(lo); ll[j] = max(lo[j], t)
            lcl = list(lc); lcl[j] = True if t >= lo[j] else lc[j]
            if ll[j] <= hi[j]:
                walk(node.right, ll, hi, lcl, uc, depth + 1)

        d = self.dim
        walk(self.root, [-INF] * d, [INF] * d, [False] * d, [False] * d, 0)
        depth = _node_depth(self.root)
        if self.max_depth is not None and depth > self.max_depth:
            raise DomainError("bad-model", f"tree depth {depth} exceeds the bound {self.max_depth}")
        keep = [i for i, b in enumerate(boxes) if _nonempty(b)]
        object.__setattr__(self, "_table", RegionTable([boxes[i] for i in keep], [vals[i] for i in keep]))

    @property
    def d(self) -> int:
        return self.dim

    @property
    def depth(self) -> int:
        return _node_depth(self.root)

    def regions(self) -> RegionTable:
        return self._table

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])

        def walk(node, idx):
            if idx.size == 0:
                return
            if isinstance(node, Leaf):
                out[idx] = node.value
                return
            go_left = X[idx, node.feature] < node.threshold
            walk(node.left, idx[go_left])
            walk(node.right, idx[~go_left])

        walk(self.root, np.arange(X.shape[0]))
        return out

    def gradient(self, x0) -> np.ndarray | None:
        x = as_point(x0, self.d)
        node = self.root
        while isinstance(node, Split):
            if x[node.feature] == node.threshold:
                return None
            node = node.left if x[node.feature] < node.threshold else node.right
        return np.zeros(self.d)

    def to_json(self) -> dict:
        def enc(node):
            if isinstance(node, Leaf):
                return {"value": float(node.value)}
            return {"feature": node.feature + 1, "threshold": float(node.threshold),
                    "left": enc(node.left), "right": enc(node.right)}

        doc = {"kind": "tree", "d": self.dim, "root": enc(self.root)}
        if self.max_depth is not None:
            doc["max_depth"] = self.max_depth
        return doc


def _nonempty(b: AxisBox) -> bool:
    for a, c, lc, uc in zip(b.lower, b.upper, b.lower_closed, b.upper_closed):
        if a > c or (a == c and not (lc and uc)):
            return False
    return True


def tree_from_intervals(dim: int, feature: int, edges: Sequence[float], values: Sequence[float]) -> "Leaf | Split":
    """Balanced tree over one feature: values[i] on [edges[i-1], edges[i])."""
    edges = list(edges)
    values = list(values)
    if len(values) != len(edges) + 1:
        raise DomainError("bad-model", "need one more value than edges")

    def build(lo, hi):
        if lo == hi:
            return Leaf(float(values[lo]))
        mid = (lo + hi + 1) // 2
        return Split(feature, float(edges[mid - 1]), build(lo, mid - 1), build(mid, hi))

    return build(0, len(values) - 1)


def grid_to_tree(g: GridFunction) -> AxisTree:
    shape = g.grid.shape
    vals = g.values.reshape(shape)

    def build(j, index):
        if j == g.d:
            return Leaf(float(vals[tuple(index)]))
        cuts = g.grid.cuts[j]
        subs = [build(j + 1, index + [i]) for i in range(shape[j])]

        def split(lo, hi):
            if lo == hi:
                return subs[lo]
            mid = (lo + hi + 1) // 2
            return Split(j, float(cuts[mid - 1]), split(lo, mid - 1), split(mid, hi))

        return split(0, len(subs) - 1)

    return AxisTree(g.d, build(0, []))


@dataclass(frozen=True)
class LinearModel(FunctionModel):
    w: tuple
    b: float
    M: float | None = None

    kind = "linear"
    bounded = False

    def __post_init__(self):
        w = tuple(float(v) for v in np.asarray(self.w, dtype=float).reshape(-1))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        if not all(math.isfinite(v) for v in w + (self.b,)):
            raise DomainError("bad-model", "linear model parameters must be finite")
        if self.M is not None:
            if not (np.linalg.norm(w) < self.M and abs(self.b) < self.M):
                raise DomainError("bad-model", "linear model needs ||w|| < M and |b| < M")

    @property
    def d(self) -> int:
        return len(self.w)

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ np.array(self.w) + self.b

    def expectation(self, dist) -> float:
        if isinstance(dist, UniformBox):
            c = (dist.box.lo + dist.box.hi) / 2
        else:
            c = np.full(self.d, (dist.t_lo + dist.t_hi) / 2)
        return float(np.array(self.w) @ c + self.b)

    def marginal_value(self, dist, x, S) -> float:
        x = as_point(x, self.d)
        if len(S) == self.d:
            return self.evaluate(x)
        if not isinstance(dist, UniformBox):
            if S:
                raise Unsupported("partial value functions need a product distribution")
            return self.expectation(dist)
        c = (dist.box.lo + dist.box.hi) / 2
        z = c.copy()
        z[list(S)] = x[list(S)]
        return float(np.array(self.w) @ z + self.b)

    def gradient(self, x0):
        return np.array(self.w)

    def to_json(self) -> dict:
        doc = {"kind": "linear", "w": list(self.w), "b": self.b}
        if self.M is not None:
            doc["M"] = self.M
        return doc


def monomials(d: int, D: int) -> list:
    """Multi-indices with total degree <= D, graded then lexicographic."""
    out = []
    for deg in range(D + 1):
        for combo in itertools.combinations_with_replacement(range(d), deg):
            a = [0] * d
            for j in combo:
                a[j] += 1
            out.append(tuple(a))
    seen, uniq = set(), []
    for a in out:
        if a not in seen:
            seen.add(a)
            uniq.append(a)
    return uniq


def monomial_matrix(X: np.ndarray, alphas: Sequence[tuple]) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.array(alphas, dtype=int)
    return np.prod(X[:, None, :] ** A[None, :, :], axis=2)


def monomial_gradient_matrix(x: np.ndarray, alphas: Sequence[tuple]) -> np.ndarray:
    """G[j, k] = d/dx_j of x^alpha_k at x."""
    A = np.array(alphas, dtype=int)
    d = x.size
    G = np.zeros((d, len(alphas)))
    for j in range(d):
        B = A.copy()
        coef = B[:, j].astype(float)
        B[:, j] = np.maximum(B[:, j] - 1, 0)
        G[j] = coef * np.prod(x[None, :] ** B, axis=1)
    return G


def uniform_moment(lo: float, hi: float, power: int) -> float:
    return (hi ** (power + 1) - lo ** (power + 1)) / ((power + 1) * (hi - lo))


def monomial_value_weights(alphas, dist, x: np.ndarray, S: Sequence[int]) -> np.ndarray:
    """Coefficients c with v(S, x) = c . a for a polynomial with coefficients a."""
    A = np.array(alphas, dtype=int)
    d = A.shape[1]
    if len(S) == d:
        return monomial_matrix(x[None, :], alphas)[0]
    if isinstance(dist, DiagonalSegment):
        if S:
            raise Unsupported("partial value functions need a product distribution")
        deg = A.sum(axis=1)
        return np.array([uniform_moment(dist.t_lo, dist.t_hi, int(k)) for k in deg])
    out = np.ones(len(alphas))
    for j in range(d):
        if j in S:
            out = out * x[j] ** A[:, j]
        else:
            lo, hi = dist.box.lower[j], dist.box.upper[j]
            out = out * np.array([uniform_moment(lo, hi, int(p)) for p in A[:, j]])
    return out


@dataclass(frozen=True)
class PolynomialModel(FunctionModel):
    dim: int
    degree: int
    coefficients: tuple
    M: float | None = None

    kind = "polynomial"
    bounded = False

    def __post_init__(self):
        alphas = monomials(self.dim, self.degree)
        coef = tuple(float(v) for v in np.asarray(self.coefficients, dtype=float).reshape(-1))
        if len(coef) != len(alphas):
            raise DomainError("bad-model", f"polynomial of degree {self.degree} in {self.dim} variables needs {len(alphas)} coefficients")
        if self.M is not None and any(abs(c) > self.M + BOUND_TOL for c in coef):
            raise DomainError("bad-model", "polynomial coefficients exceed the bound M")
        object.__setattr__(self, "coefficients", coef)

    @classmethod
    def from_terms(cls, dim: int, degree: int, terms: dict, M=None) -> "PolynomialModel":
        alphas = monomials(dim, degree)
        c = [float(terms.get(a, 0.0)) for a in alphas]
        extra = set(terms) - set(alphas)
        if extra:
            raise DomainError("bad-model", f"terms outside the degree bound: {sorted(extra)}")
        return cls(dim, degree, tuple(c), M)

    @property
    def d(self) -> int:
        return self.dim

    @property
    def alphas(self) -> list:
        return monomials(self.dim, self.degree)

    def evaluate_many(self, X):
        return monomial_matrix(X, self.alphas) @ np.array(self.coefficients)

    def expectation(self, dist) -> float:
        return self.marginal_value(dist, np.zeros(self.dim), ())

    def marginal_value(self, dist, x, S) -> float:
        x = as_point(x, self.d)
        return float(monomial_value_weights(self.alphas, dist, x, tuple(S)) @ np.array(self.coefficients))

    def gradient(self, x0):
        x = as_point(x0, self.d)
        return monomial_gradient_matrix(x, self.alphas) @ np.array(self.coefficients)

    def hessian_bound(self, box: AxisBox) -> float:
        """Upper bound on the spectral norm of the Hessian over a finite box."""
        alphas = self.alphas
        lo, hi = box.lo, box.hi
        mags = np.maximum(np.abs(lo), np.abs(hi))
        H = np.zeros((self.dim, self.dim))
        for a, c in zip(alphas, self.coefficients):
            if c == 0.0:
                continue
            for i in range(self.dim):
                for j in range(self.dim):
                    b = list(a)
                    if i == j:
                        k = b[i] * (b[i] - 1)
                        b[i] -= 2
                    else:
                        k = b[i] * b[j]
                        b[i] -= 1
                        b[j] -= 1
                    if k == 0 or min(b) < 0:
                        continue
                    H[i, j] += abs(c) * k * float(np.prod(mags ** np.array(b)))
        return float(np.sqrt((H ** 2).sum()))

    def to_json(self) -> dict:
        doc = {"kind": "polynomial", "d": self.dim, "degree": self.degree,
               "terms": [{"alpha": list(a), "coefficient": c} for a, c in zip(self.alphas, self.coefficients) if c != 0.0]}
        if self.M is not None:
            doc["M"] = self.M
        return doc


@dataclass(frozen=True)
class GamModel(PiecewiseConstant):
    """Sum of one-dimensional trees; component j reads feature j only."""

    components: tuple
    box: AxisBox | None = None

    kind = "gam"

    def __post_init__(self):
        comps = tuple(self.components)
        for j, c in enumerate(comps):
            if not isinstance(c, AxisTree) or c.dim != 1:
                raise DomainError("bad-model", f"GAM component {j + 1} must be a one-dimensional tree")
        object.__setattr__(self, "components", comps)
        if self.box is not None and self.box.d != len(comps):
            raise DomainError("bad-model", "GAM evaluation box has the wrong dimension")
        lo, hi = self.value_range()
        if lo < -1 - 1e-9 or hi > 1 + 1e-9:
            raise DomainError("bad-model", f"GAM sum leaves [-1, 1] over its evaluation box: [{lo}, {hi}]")

    @property
    def d(self) -> int:
        return len(self.components)

    def _component_pieces(self, j):
        t = self.components[j].regions()
        lo, hi, vals = t.lo[:, 0], t.hi[:, 0], t.values
        if self.box is not None:
            a, b = self.box.lower[j], self.box.upper[j]
            keep = (hi > a) & (lo < b) | ((lo <= a) & (hi >= a)) | ((lo <= b) & (hi >= b))
            lo, hi, vals = lo[keep], hi[keep], vals[keep]
        return lo, hi, vals

    def value_range(self) -> tuple:
        lo = hi = 0.0
        for j in range(self.d):
            _, _, v = self._component_pieces(j)
            lo += float(v.min())
            hi += float(v.max())
        return lo, hi

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return sum(c.evaluate_many(X[:, [j]]) for j, c in enumerate(self.components))

    def component_expectation(self, dist, j: int) -> float:
        marg = _marginal(dist, j)
        return self.components[j].expectation(marg)

    def expectation(self, dist) -> float:
        if isinstance(dist, DiagonalSegment):
            return super().expectation(dist)
        return float(sum(self.component_expectation(dist, j) for j in range(self.d)))

    def marginal_value(self, dist, x, S) -> float:
        x = as_point(x, self.d)
        if len(S) == self.d:
            return self.evaluate(x)
        if isinstance(dist, DiagonalSegment):
            if S:
                raise Unsupported("partial value functions need a product distribution")
            return self.expectation(dist)
        total = 0.0
        for j, c in enumerate(self.components):
            total += c.evaluate([x[j]]) if j in S else self.component_expectation(dist, j)
        return float(total)

    def regions(self) -> RegionTable:
        pieces = [self.components[j].regions() for j in range(self.d)]
        boxes, vals = [], []
        for combo in itertools.product(*[range(len(p)) for p in pieces]):
            lo = tuple(pieces[j].lo[i, 0] for j, i in enumerate(combo))
            hi = tuple(pieces[j].hi[i, 0] for j, i in enumerate(combo))
            lc = tuple(bool(pieces[j].lc[i, 0]) for j, i in enumerate(combo))
            uc = tuple(bool(pieces[j].uc[i, 0]) for j, i in enumerate(combo))
            boxes.append(AxisBox(lo, hi, lc, uc))
            vals.append(sum(pieces[j].values[i] for j, i in enumerate(combo)))
        return RegionTable(boxes, vals)

    def gradient(self, x0):
        x = as_point(x0, self.d)
        for j, c in enumerate(self.components):
            if c.gradient([x[j]]) is None:
                return None
        return np.zeros(self.d)

    def to_json(self) -> dict:
        doc = {"kind": "gam", "components": [c.to_json() for c in self.components]}
        if self.box is not None:
            doc["box"] = self.box.to_json()
        return doc


def _marginal(dist, j: int) -> UniformBox:
    if not isinstance(dist, UniformBox):
        raise Unsupported("GAM component expectations need a product distribution")
    b = dist.box
    return UniformBox(AxisBox.closed((b.lower[j],), (b.upper[j],)))


@dataclass(frozen=True)
class ConstantModel(FunctionModel):
    dim: int
    value: float

    kind = "constant"

    @property
    def d(self) -> int:
        return self.dim

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(X.shape[0], float(self.value))

    def expectation(self, dist) -> float:
        return float(self.value)

    def marginal_value(self, dist, x, S) -> float:
        return float(self.value)

    def gradient(self, x0):
        return np.zeros(self.dim)

    def to_json(self) -> dict:
        return {"kind": "constant", "d": self.dim, "value": float(self.value)}


def evaluate(model: FunctionModel, p) -> float:
    return model.evaluate(p)


def label(model: FunctionModel, p) -> int:
    return model.label(p)


def expectation(model: FunctionModel, dist) -> float:
    return model.expectation(dist)


def marginal_value(model: FunctionModel, dist, x, S) -> float:
    return model.marginal_value(dist, x, tuple(S))


# ---------------------------------------------------------------- class specs

CLASS_PARAMS = {
    "grid": ("k",),
    "tree-bounded": ("K",),
    "tree-unbounded": (),
    "linear": ("M",),
    "noisy-linear": ("M", "eps"),
    "smooth-grad": ("alpha", "beta"),
    "bounded-gradient": ("alpha",),
    "lipschitz": ("L",),
    "poly-bounded": ("D", "M"),
    "poly-unbounded": (),
    "gam-trees-unbounded": (),
    "bounded-differentiable": (),
    "piecewise-linear-grid": ("k", "M"),
}
INTEGER_PARAMS = {"k", "K", "D"}
INTERPOLATING = {"tree-unbounded", "poly-unbounded", "gam-trees-unbounded", "bounded-differentiable"}


@dataclass(frozen=True)
class ClassSpec:
    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in CLASS_PARAMS:
            raise DomainError("bad-class", f"unknown class kind {self.kind!r}")
        p = dict(self.params)
        need = CLASS_PARAMS[self.kind]
        if set(p) != set(need):
            raise DomainError("bad-class", f"class {self.kind} needs parameters {list(need)}, got {sorted(p)}")
        clean = []
        for k in need:
            v = p[k]
            if k in INTEGER_PARAMS:
                if int(v) != v or int(v) < 1:
                    raise DomainError("bad-class", f"{k} must be a positive integer")
                v = int(v)
            else:
                v = float(v)
                if not (math.isfinite(v) and v > 0):
                    raise DomainError("bad-class", f"{k} must be strictly positive")
            clean.append((k, v))
        object.__setattr__(self, "params", tuple(clean))

    @classmethod
    def make(cls, kind: str, **params) -> "ClassSpec":
        return cls(kind, tuple(params.items()))

    def __getattr__(self, name):
        for k, v in object.__getattribute__(self, "params"):
            if k == name:
                return v
        raise AttributeError(name)

    @property
    def interpolating(self) -> bool:
        return self.kind in INTERPOLATING

    def to_json(self) -> dict:
        return {"kind": self.kind, **dict(self.params)}

    @classmethod
    def from_json(cls, doc: dict) -> "ClassSpec":
        doc = dict(doc)
        kind = doc.pop("kind", None)
        return cls(kind, tuple(doc.items()))

    def label(self) -> str:
        if not self.params:
            return self.kind
        return self.kind + "(" + ",".join(f"{k}={v:g}" for k, v in self.params) + ")"


# ---------------------------------------------------------------- documents

def model_from_json(doc: dict) -> FunctionModel:
    kind = doc.get("kind")
    if kind == "grid":
        return GridFunction(Grid.from_json(doc["grid"]), np.array(doc["values"], dtype=float))
    if kind == "tree":
        return AxisTree(int(doc["d"]), _node_from_json(doc["root"], int(doc["d"])), doc.get("max_depth"))
    if kind == "linear":
        return LinearModel(tuple(doc["w"]), float(doc["b"]), doc.get("M"))
    if kind == "polynomial":
        terms = {tuple(t["alpha"]): float(t["coefficient"]) for t in doc["terms"]}
        return PolynomialModel.from_terms(int(doc["d"]), int(doc["degree"]), terms, doc.get("M"))
    if kind == "gam":
        comps = tuple(model_from_json(c) for c in doc["components"])
        box = AxisBox.from_json(doc["box"]) if "box" in doc else None
        return GamModel(comps, box)
    if kind == "constant":
        return ConstantModel(int(doc["d"]), float(doc["value"]))
    raise DomainError("bad-document", f"unknown model kind {kind!r}")


def _node_from_json(doc: dict, d: int):
    if "value" in doc:
        return Leaf(float(doc["value"]))
    j = int(doc["feature"]) - 1
    if not 0 <= j < d:
        raise DomainError("bad-model", f"split feature {j + 1} outside 1..{d}")
    return Split(j, float(doc["threshold"]), _node_from_json(doc["left"], d), _node_from_json(doc["right"], d))


def validate_model_document(doc) -> list:
    """Invariant violations as (json-path, message) pairs; empty when valid."""
    out = []
    if not isinstance(doc, dict):
        return [("$", "model document must be an object")]
    kind = doc.get("kind")
    if kind == "grid":
        try:
            grid = Grid.from_json(doc.get("grid", {}))
        except (DomainError, KeyError, TypeError) as exc:
            return [("$.grid", str(exc))]
        vals = doc.get("values", [])
        if len(vals) != grid.n_cells:
            out.append(("$.values", f"expected {grid.n_cells} values, got {len(vals)}"))
        for i, v in enumerate(vals):
            if not isinstance(v, (int, float)) or not -1 <= v <= 1:
                out.append((f"$.values[{i}]", "value must be a number in [-1, 1]"))
    elif kind == "tree":
        d = doc.get("d")
        if not isinstance(d, int) or d < 1:
            return [("$.d", "dimension must be a positive integer")]
        bound = doc.get("max_depth")

        def walk(node, path, depth):
            if not isinstance(node, dict):
                out.append((path, "node must be an object"))
                return
            if bound is not None and depth > bound:
                out.append((path, f"depth {depth} exceeds max_depth {bound}"))
            if "value" in node:
                v = node["value"]
                if not isinstance(v, (int, float)) or not -1 <= v <= 1:
                    out.append((path + ".value", "leaf value must be a number in [-1, 1]"))
                return
            f = node.get("feature")
            if not isinstance(f, int) or not 1 <= f <= d:
                out.append((path + ".feature", f"feature must be an integer in 1..{d}"))
            t = node.get("threshold")
            if not isinstance(t, (int, float)) or not math.isfinite(t):
                out.append((path + ".threshold", "threshold must be a finite number"))
            for side in ("left", "right"):
                if side not in node:
                    out.append((path, f"missing {side} child"))
                else:
                    walk(node[side], f"{path}.{side}", depth + 1)

        walk(doc.get("root"), "$.root", 0)
    elif kind == "linear":
        w = doc.get("w")
        b = doc.get("b")
        M = doc.get("M")
        if not isinstance(w, list) or not w:
            out.append(("$.w", "weights must be a non-empty list"))
        elif M is not None and not float(np.linalg.norm(np.array(w, dtype=float))) < M:
            out.append(("$.w", "||w|| must be below M"))
        if not isinstance(b, (int, float)):
            out.append(("$.b", "offset must be a number"))
        elif M is not None and not abs(b) < M:
            out.append(("$.b", "|b| must be below M"))
    elif kind == "polynomial":
        M = doc.get("M")
        D = doc.get("degree")
        for i, t in enumerate(doc.get("terms", [])):
            a = t.get("alpha", [])
            if len(a) != doc.get("d") or (isinstance(D, int) and sum(a) > D):
                out.append((f"$.terms[{i}].alpha", "multi-index has the wrong length or exceeds the degree"))
            if M is not None and abs(t.get("coefficient", 0.0)) > M:
                out.append((f"$.terms[{i}].coefficient", "coefficient exceeds M"))
    elif kind == "gam":
        comps = doc.get("components", [])
        for i, c in enumerate(comps):
            for p, m in validate_model_document(c):
                out.append((f"$.components[{i}]" + p[1:], m))
            if c.get("kind") != "tree" or c.get("d") != 1:
                out.append((f"$.components[{i}]", "component must be a one-dimensional tree"))
        if not out:
            try:
                model_from_json(doc)
            except DomainError as exc:
                out.append(("$", exc.message))
    elif kind == "constant":
        v = doc.get("value")
        if not isinstance(v, (int, float)):
            out.append(("$.value", "value must be a number"))
    else:
        out.append(("$.kind", f"unknown model kind {kind!r}"))
    return out
