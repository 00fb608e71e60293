"""Points, axis-aligned boxes, grids and the two supported distributions.

Boxes carry open/closed flags per endpoint.  Grid cells follow the half-open
convention: lower edge closed, upper edge open, except the topmost cell in
each dimension which is closed so the bounding box is covered exactly once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

INF = math.inf


def as_point(p, d: int | None = None) -> np.ndarray:
    x = np.asarray(p, dtype=float).reshape(-1)
    if x.size == 0:
        raise DomainError("bad-point", "a point needs at least one coordinate")
    if not np.all(np.isfinite(x)):
        raise DomainError("bad-point", "point coordinates must be finite")
    if d is not None and x.size != d:
        raise DomainError("dimension-mismatch", f"expected {d} coordinates, got {x.size}")
    return x


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one Monte-Carlo trial.

    Depends only on (seed, trial), so any scheduling of trials over workers
    reproduces the same draws.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial),))
    return np.random.default_rng(ss)


def _enc(v: float):
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return float(v)


def _dec(v) -> float:
    if isinstance(v, str):
        if v in ("inf", "+inf"):
            return INF
        if v == "-inf":
            return -INF
        raise DomainError("bad-document", f"unknown numeric sentinel {v!r}")
    return float(v)


@dataclass(frozen=True)
class AxisBox:
    lower: tuple
    upper: tuple
    lower_closed: tuple
    upper_closed: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or len(lo) == 0:
            raise DomainError("bad-box", "lower and upper must have the same positive length")
        lc = tuple(bool(v) for v in self.lower_closed)
        uc = tuple(bool(v) for v in self.upper_closed)
        if len(lc) != len(lo) or len(uc) != len(lo):
            raise DomainError("bad-box", "closed flags must match the dimension")
        for j, (a, b) in enumerate(zip(lo, hi)):
            if math.isnan(a) or math.isnan(b):
                raise DomainError("bad-box", f"NaN bound in dimension {j + 1}")
            if a > b:
                raise DomainError("bad-box", f"lower > upper in dimension {j + 1}")
            if a == INF or b == -INF:
                raise DomainError("bad-box", f"degenerate infinite interval in dimension {j + 1}")
        # infinite endpoints are open by definition
        lc = tuple(c and math.isfinite(a) for c, a in zip(lc, lo))
        uc = tuple(c and math.isfinite(b) for c, b in zip(uc, hi))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "lower_closed", lc)
        object.__setattr__(self, "upper_closed", uc)

    @classmethod
    def closed(cls, lower: Sequence[float], upper: Sequence[float]) -> "AxisBox":
        d = len(lower)
        return cls(tuple(lower), tuple(upper), (True,) * d, (True,) * d)

    @classmethod
    def half_open(cls, lower: Sequence[float], upper: Sequence[float]) -> "AxisBox":
        d = len(lower)
        return cls(tuple(lower), tuple(upper), (True,) * d, (False,) * d)

    @classmethod
    def open(cls, lower: Sequence[float], upper: Sequence[float]) -> "AxisBox":
        d = len(lower)
        return cls(tuple(lower), tuple(upper), (False,) * d, (False,) * d)

    @classmethod
    def whole(cls, d: int) -> "AxisBox":
        return cls((-INF,) * d, (INF,) * d, (False,) * d, (False,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.lower + self.upper)

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, p) -> bool:
        x = as_point(p)
        if x.size != self.d:
            raise DomainError("dimension-mismatch", f"box has dimension {self.d}, point has {x.size}")
        return bool(self.contains_many(x[None, :])[0])

    def contains_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        lo, hi = self.lo, self.hi
        lc = np.array(self.lower_closed)
        uc = np.array(self.upper_closed)
        above = np.where(lc, X >= lo, X > lo)
        below = np.where(uc, X <= hi, X < hi)
        return np.all(above & below, axis=1)

    def intersect(self, other: "AxisBox") -> "AxisBox | None":
        """Intersection, or None when it is empty."""
        if other.d != self.d:
            raise DomainError("dimension-mismatch", "boxes differ in dimension")
        lo, hi, lc, uc = [], [], [], []
        for j in range(self.d):
            a1, a2 = self.lower[j], other.lower[j]
            if a1 > a2:
                lo.append(a1); lc.append(self.lower_closed[j])
            elif a2 > a1:
                lo.append(a2); lc.append(other.lower_closed[j])
            else:
                lo.append(a1); lc.append(self.lower_closed[j] and other.lower_closed[j])
            b1, b2 = self.upper[j], other.upper[j]
            if b1 < b2:
                hi.append(b1); uc.append(self.upper_closed[j])
            elif b2 < b1:
                hi.append(b2); uc.append(other.upper_closed[j])
            else:
                hi.append(b1); uc.append(self.upper_closed[j] and other.upper_closed[j])
            if lo[-1] > hi[-1] or (lo[-1] == hi[-1] and not (lc[-1] and uc[-1])):
                return None
        return AxisBox(tuple(lo), tuple(hi), tuple(lc), tuple(uc))

    def closure_distance(self, p) -> float:
        """Euclidean distance from p to the closure of the box."""
        x = as_point(p, self.d)
        nearest = np.clip(x, self.lo, self.hi)
        return float(np.linalg.norm(x - nearest))

    def nearest_point(self, p) -> np.ndarray:
        x = as_point(p, self.d)
        return np.clip(x, self.lo, self.hi)

    def to_json(self) -> dict:
        return {
            "lower": [_enc(v) for v in self.lower],
            "upper": [_enc(v) for v in self.upper],
            "lower_closed": list(self.lower_closed),
            "upper_closed": list(self.upper_closed),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AxisBox":
        try:
            lo = [_dec(v) for v in doc["lower"]]
            hi = [_dec(v) for v in doc["upper"]]
        except (KeyError, TypeError) as exc:
            raise DomainError("bad-document", f"box needs lower/upper lists: {exc}") from exc
        d = len(lo)
        lc = doc.get("lower_closed", [True] * d)
        uc = doc.get("upper_closed", [True] * d)
        return cls(tuple(lo), tuple(hi), tuple(lc), tuple(uc))


@dataclass(frozen=True)
class Grid:
    box: AxisBox
    cuts: tuple

    def __post_init__(self):
        if not self.box.is_finite():
            raise DomainError("bad-grid", "grid bounding box must be finite")
        cuts = tuple(tuple(float(c) for c in cj) for cj in self.cuts)
        if len(cuts) != self.box.d:
            raise DomainError("bad-grid", "one cut list per dimension is required")
        for j, cj in enumerate(cuts):
            prev = self.box.lower[j]
            for c in cj:
                if not (c > prev):
                    raise DomainError("bad-grid", f"cuts in dimension {j + 1} must be increasing and inside the box")
                prev = c
            if cj and not (cj[-1] < self.box.upper[j]):
                raise DomainError("bad-grid", f"cut outside the box in dimension {j + 1}")
        object.__setattr__(self, "cuts", cuts)

    @classmethod
    def regular(cls, box: AxisBox, k: int) -> "Grid":
        if k < 1:
            raise DomainError("bad-grid", "k must be a positive integer")
        cuts = []
        for j in range(box.d):
            a, b = box.lower[j], box.upper[j]
            cuts.append(tuple(a + (b - a) * i / k for i in range(1, k)))
        return cls(box, tuple(cuts))

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def shape(self) -> tuple:
        return tuple(len(c) + 1 for c in self.cuts)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def edges(self, j: int) -> np.ndarray:
        return np.array((self.box.lower[j],) + self.cuts[j] + (self.box.upper[j],))

    def cell_index(self, p) -> tuple:
        x = as_point(p, self.d)
        if not self.box.contains(x):
            raise DomainError("outside-grid", "point lies outside the grid bounding box")
        return tuple(int(i) for i in self.cell_index_many(x[None, :])[0])

    def cell_index_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape, dtype=int)
        for j in range(self.d):
            out[:, j] = np.searchsorted(np.array(self.cuts[j]), X[:, j], side="right")
        return out

    def flat_index_many(self, X: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(self.cell_index_many(X).T), self.shape)

    def cell_box(self, idx: Sequence[int]) -> AxisBox:
        lo, hi, uc = [], [], []
        for j, i in enumerate(idx):
            e = self.edges(j)
            lo.append(e[i]); hi.append(e[i + 1])
            uc.append(i == len(e) - 2)
        return AxisBox(tuple(lo), tuple(hi), (True,) * self.d, tuple(uc))

    def cells(self) -> Iterator[tuple]:
        return iter(np.ndindex(*self.shape))

    def to_json(self) -> dict:
        return {"box": self.box.to_json(), "cuts": [list(c) for c in self.cuts]}

    @classmethod
    def from_json(cls, doc: dict) -> "Grid":
        return cls(AxisBox.from_json(doc["box"]), tuple(tuple(c) for c in doc["cuts"]))


def _interval_overlap(a, b, c, e):
    return np.maximum(0.0, np.minimum(b, e) - np.maximum(a, c))


@dataclass(frozen=True)
class UniformBox:
    box: AxisBox

    def __post_init__(self):
        if not self.box.is_finite():
            raise DomainError("bad-distribution", "uniform box must be finite")
        if not np.all(self.box.hi > self.box.lo):
            raise DomainError("bad-distribution", "uniform box needs positive volume")

    kind = "uniform-box"
    is_product = True

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def support(self) -> AxisBox:
        return self.box

    def box_mass(self, box: AxisBox) -> float:
        if box.d != self.d:
            raise DomainError("dimension-mismatch", "box and distribution differ in dimension")
        lo, hi = self.box.lo, self.box.hi
        ov = _interval_overlap(box.lo, box.hi, lo, hi)
        return float(np.prod(ov / (hi - lo)))

    def interval_mass(self, j: int, a: float, b: float) -> float:
        """Marginal mass of coordinate j in [a, b]."""
        lo, hi = self.box.lower[j], self.box.upper[j]
        return float(max(0.0, min(b, hi) - max(a, lo)) / (hi - lo))

    def marginal_moment(self, j: int, power: int) -> float:
        lo, hi = self.box.lower[j], self.box.upper[j]
        return (hi ** (power + 1) - lo ** (power + 1)) / ((power + 1) * (hi - lo))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.box.lo + rng.random((n, self.d)) * (self.box.hi - self.box.lo)

    def sample_in(self, region: AxisBox, n: int, rng: np.random.Generator) -> np.ndarray:
        cut = self.box.intersect(region)
        if cut is None or self.box_mass(cut) <= 0.0:
            raise DomainError("zero-mass", "region has zero mass under the distribution")
        return cut.lo + rng.random((n, self.d)) * (cut.hi - cut.lo)

    def to_json(self) -> dict:
        return {"kind": self.kind, "box": self.box.to_json()}


@dataclass(frozen=True)
class DiagonalSegment:
    box: AxisBox

    def __post_init__(self):
        if not self.box.is_finite():
            raise DomainError("bad-distribution", "diagonal box must be finite")
        if not self.t_hi > self.t_lo:
            raise DomainError("bad-distribution", "diagonal segment has zero length")

    kind = "diagonal-segment"
    is_product = False

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def support(self) -> AxisBox:
        return self.box

    @property
    def t_lo(self) -> float:
        return max(self.box.lower)

    @property
    def t_hi(self) -> float:
        return min(self.box.upper)

    def box_mass(self, box: AxisBox) -> float:
        if box.d != self.d:
            raise DomainError("dimension-mismatch", "box and distribution differ in dimension")
        a = max(max(box.lower), self.t_lo)
        b = min(min(box.upper), self.t_hi)
        return float(max(0.0, b - a) / (self.t_hi - self.t_lo))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        t = self.t_lo + rng.random(n) * (self.t_hi - self.t_lo)
        return np.repeat(t[:, None], self.d, axis=1)

    def sample_in(self, region: AxisBox, n: int, rng: np.random.Generator) -> np.ndarray:
        a = max(max(region.lower), self.t_lo)
        b = min(min(region.upper), self.t_hi)
        if not b > a:
            raise DomainError("zero-mass", "region has zero mass under the distribution")
        t = a + rng.random(n) * (b - a)
        return np.repeat(t[:, None], self.d, axis=1)

    def to_json(self) -> dict:
        return {"kind": self.kind, "box": self.box.to_json()}


Distribution = UniformBox | DiagonalSegment


def distribution_from_json(doc: dict) -> Distribution:
    kind = doc.get("kind")
    box = AxisBox.from_json(doc["box"])
    if kind == "uniform-box":
        return UniformBox(box)
    if kind == "diagonal-segment":
        return DiagonalSegment(box)
    raise DomainError("bad-document", f"unknown distribution kind {kind!r}")


def box_mass(dist: Distribution, box: AxisBox) -> float:
    return dist.box_mass(box)


def contains(box: AxisBox, p) -> bool:
    return box.contains(p)


def sample_points(dist: Distribution, n: int, seed: int) -> np.ndarray:
    if n < 0:
        raise DomainError("bad-count", "n must be non-negative")
    rng = np.random.default_rng(int(seed))
    return dist.sample(int(n), rng)


def cell_index(grid: Grid, p) -> tuple:
    return grid.cell_index(p)


@dataclass(frozen=True)
class FeatureSubset:
    """Sorted 0-based feature indices; rendered 1-based in documents."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise DomainError("bad-subset", "feature indices must be distinct")
        if idx and idx[0] < 0:
            raise DomainError("bad-subset", "feature indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    def complement(self, d: int) -> "FeatureSubset":
        return FeatureSubset(tuple(j for j in range(d) if j not in self.indices))
