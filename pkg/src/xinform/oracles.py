"""Slow, independent cross-checks for the fast paths.

Each oracle draws random instances from a seed, runs both routes and reports
the largest discrepancy against a declared tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotFound
from .explainers import shap_explain, shap_permutation_oracle, strong_counterfactual
from .geometry import AxisBox, Grid, UniformBox
from .models import AxisTree, ClassSpec, GridFunction, Leaf, Split
from .rademacher import LabeledSample, MeanEquals, ShapEquals, ValueAt, empirical_rademacher
from .rademacher.linear_rows import solve_grid

MAX_PERMUTATION_D = 5
MIN_SCAN_STEP = 1e-3
MIN_LATTICE_STEP = 1e-2


@dataclass
class OracleReport:
    kind: str
    config: dict
    tolerance: float
    discrepancies: list = field(default_factory=list)
    details: list = field(default_factory=list)
    limits: list = field(default_factory=list)  # per-instance tolerances, when they differ

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancies, default=0.0)

    @property
    def passed(self) -> bool:
        if self.limits:
            return all(x <= t for x, t in zip(self.discrepancies, self.limits))
        return self.max_discrepancy <= self.tolerance

    def to_json(self) -> dict:
        return {"kind": self.kind, "config": self.config, "instances": len(self.discrepancies),
                "max_discrepancy": self.max_discrepancy, "tolerance": self.tolerance,
                "passed": self.passed, "details": self.details}


# ------------------------------------------------------------ random models

def unit_box(d: int) -> UniformBox:
    return UniformBox(AxisBox.closed((0.0,) * d, (1.0,) * d))


def random_grid(d: int, k: int, rng) -> GridFunction:
    grid = Grid.regular(AxisBox.closed((0.0,) * d, (1.0,) * d), k)
    return GridFunction(grid, rng.uniform(-1, 1, k ** d))


def random_tree(d: int, depth: int, rng, lattice: int | None = None) -> AxisTree:
    """Random axis tree on [0,1]^d.  With `lattice`, thresholds are multiples of 1/lattice."""

    def threshold(lo, hi):
        if lattice is None:
            return float(rng.uniform(lo, hi))
        ticks = np.arange(math.floor(lo * lattice) + 1, math.ceil(hi * lattice))
        return float(rng.choice(ticks)) / lattice if ticks.size else None

    def grow(lo, hi, level):
        if level == depth or rng.random() < 0.2 * level:
            return Leaf(float(rng.uniform(-1, 1)))
        j = int(rng.integers(d))
        t = threshold(lo[j], hi[j])
        if t is None:
            return Leaf(float(rng.uniform(-1, 1)))
        lhi, rlo = list(hi), list(lo)
        lhi[j] = rlo[j] = t
        return Split(j, t, grow(lo, lhi, level + 1), grow(rlo, hi, level + 1))

    return AxisTree(d, grow([0.0] * d, [1.0] * d, 0))


def random_model(d: int, rng):
    if rng.random() < 0.5:
        return random_grid(d, int(rng.integers(2, 4 if d <= 3 else 3)), rng)
    return random_tree(d, int(rng.integers(1, 5)), rng)


# ------------------------------------------------------------ permutation SHAP

def shap_permutation_check(d: int = 3, count: int = 50, seed: int = 0, tolerance: float = 1e-9,
                           vary_d: bool = False) -> OracleReport:
    if not 1 <= d <= MAX_PERMUTATION_D:
        raise DomainError("budget", f"the permutation oracle runs for 1 <= d <= {MAX_PERMUTATION_D}")
    rng = np.random.default_rng(seed)
    rep = OracleReport("shap-permutation", {"d": d, "count": count, "seed": seed, "vary_d": vary_d}, tolerance)
    for _ in range(count):
        dd = int(rng.integers(1, d + 1)) if vary_d else d
        dist = unit_box(dd)
        model = random_model(dd, rng)
        x0 = rng.uniform(0, 1, dd)
        fast = shap_explain(model, dist, x0).phi
        slow = shap_permutation_oracle(model, dist, x0).phi
        rep.discrepancies.append(float(np.max(np.abs(np.subtract(fast, slow)))))
    return rep


# ------------------------------------------------------------ strong counterfactual scan

def scan_radius(model, x0, box: AxisBox, step: float) -> float:
    """Distance from x0 to the nearest lattice point of `box` with the opposite label."""
    axes = [np.arange(lo, hi + step / 2, step) for lo, hi in zip(box.lo, box.hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    c = model.label(x0)
    lab = np.where(model.evaluate_many(mesh) >= 0, 1, -1)
    other = mesh[lab != c]
    if other.size == 0:
        return math.inf
    return float(np.min(np.linalg.norm(other - np.asarray(x0), axis=1)))


def cf_scan_check(count: int = 20, seed: int = 0, step: float = 1e-3, d: int = 2) -> OracleReport:
    if step < MIN_SCAN_STEP:
        raise DomainError("budget", f"scan resolution must be at least {MIN_SCAN_STEP}")
    tol = step * math.sqrt(d)
    rng = np.random.default_rng(seed)
    rep = OracleReport("cf-scan", {"d": d, "count": count, "seed": seed, "step": step}, tol)
    box = AxisBox.closed((0.0,) * d, (1.0,) * d)
    while len(rep.discrepancies) < count:
        # thresholds on a coarse lattice keep every leaf at least one scan step wide
        model = random_tree(d, int(rng.integers(1, 5)), rng, lattice=40)
        x0 = rng.uniform(0, 1, d)
        try:
            cf = strong_counterfactual(model, x0)
        except NotFound:
            continue
        slow = scan_radius(model, x0, box, step)
        rep.discrepancies.append(abs(cf.radius - slow))
        rep.details.append({"radius": cf.radius, "scan": slow})
    return rep


# ------------------------------------------------------------ grid sup by lattice search

def _in_zonotope(T: np.ndarray, G: np.ndarray, tol: float) -> np.ndarray:
    """Rows of T inside {G v : v in [-1,1]^m}; G has 1 or 2 rows."""
    r = G.shape[0]
    if G.shape[1] == 0:
        return np.all(np.abs(T) <= tol, axis=1)
    if r == 1:
        return np.abs(T[:, 0]) <= np.abs(G[0]).sum() + tol
    if r != 2:
        raise DomainError("budget", "lattice search handles at most two independent equality rows")
    if np.linalg.matrix_rank(G, tol=1e-12) < 2:
        # a segment: no component across it, and within its half-length along it
        g = G[:, np.argmax(np.hypot(G[0], G[1]))]
        g = g / np.hypot(*g)
        across = np.array([-g[1], g[0]])
        return (np.abs(T @ across) <= tol) & (np.abs(T @ g) <= np.abs(g @ G).sum() + tol)
    ok = np.ones(T.shape[0], dtype=bool)
    for a in G.T:
        norm = np.hypot(*a)
        if norm > 1e-15:
            u = np.array([-a[1], a[0]]) / norm
            ok &= np.abs(T @ u) <= np.abs(u @ G).sum() + tol
    return ok


def _basis_shap_rows(grid: Grid, dist, x0, ambient=None) -> np.ndarray:
    """phi as a linear map of the cell values, one permutation-oracle call per cell."""
    N = grid.n_cells
    cols = []
    for c in range(N):
        e = np.zeros(N)
        e[c] = 1.0
        cols.append(shap_permutation_oracle(GridFunction(grid, e), dist, x0, ambient).phi)
    return np.array(cols).T


def lattice_grid_sup(k: int, constraints, sample: LabeledSample, dist: UniformBox, h: float) -> float:
    """max of the sample correlation over grid functions whose sample-cell values lie on the
    h-lattice; all other cells are free in [-1, 1] and checked for feasibility exactly."""
    if h < MIN_LATTICE_STEP:
        raise DomainError("budget", f"lattice step must be at least {MIN_LATTICE_STEP}")
    grid = Grid.regular(dist.support, k)
    N = k ** dist.d
    rows, rhs, fixed = [], [], {}
    for c in constraints:
        if isinstance(c, ValueAt):
            fixed[int(grid.flat_index_many(np.array([c.point]))[0])] = c.value
        elif isinstance(c, MeanEquals):
            rows.append(np.full(N, 1.0 / N)); rhs.append(c.value)
        elif isinstance(c, ShapEquals):
            R = _basis_shap_rows(grid, c.dist, np.array(c.point), c.ambient)
            rows.extend(R); rhs.extend(c.vector)
        else:
            raise DomainError("unsupported", f"lattice search does not handle {c.kind}")
    A = np.array(rows).reshape(-1, N)
    b = np.array(rhs, dtype=float)
    cells = grid.flat_index_many(sample.points)
    s = np.zeros(N)
    np.add.at(s, cells, sample.sigma / sample.n)
    sample_cells = [c for c in dict.fromkeys(int(c) for c in cells) if c not in fixed]
    free = [c for c in range(N) if c not in fixed and c not in sample_cells]
    if len(sample_cells) > 3:
        raise DomainError("budget", "lattice search enumerates at most three sample cells")
    base = sum(s[c] * v for c, v in fixed.items())
    ticks = np.linspace(-1.0, 1.0, int(round(2 / h)) + 1)
    if sample_cells:
        V = np.stack(np.meshgrid(*([ticks] * len(sample_cells)), indexing="ij"), -1).reshape(-1, len(sample_cells))
    else:
        V = np.zeros((1, 0))
    if A.shape[0] == 0:
        return float(base + (V @ s[sample_cells]).max())
    # orthonormal row space, so the zonotope test runs in at most two dimensions
    U, S, _ = np.linalg.svd(A, full_matrices=False)
    keep = S > 1e-12 * max(S.max(), 1.0)
    P = U[:, keep].T
    A2, b2 = P @ A, P @ b
    fixed_part = sum((A2[:, c] * v for c, v in fixed.items()), np.zeros(A2.shape[0]))
    T = b2 - fixed_part - V @ A2[:, sample_cells].T
    ok = _in_zonotope(T, A2[:, free], 1e-9)
    if not ok.any():
        return -math.inf
    return float(base + (V[ok] @ s[sample_cells]).max())


def grid_sup_check(count: int = 50, seed: int = 0, h: float = 1e-2, shap_share: float = 0.5) -> OracleReport:
    rng = np.random.default_rng(seed)
    rep = OracleReport("grid-sup", {"count": count, "seed": seed, "h": h}, 0.0)
    tol_max = 0.0
    while len(rep.discrepancies) < count:
        d = 2
        k = int(rng.integers(2, 4))
        dist = unit_box(d)
        f = random_grid(d, k, rng)
        x0 = rng.uniform(0, 1, d)
        cs = [ValueAt(tuple(x0), f.evaluate(x0))]
        use_shap = rng.random() < shap_share
        if use_shap:
            cs.append(ShapEquals(tuple(x0), tuple(shap_explain(f, dist, x0).phi), dist))
        else:
            cs.append(MeanEquals(f.expectation(dist), dist))
        n = 1 if k == 2 else int(rng.integers(1, 4))
        pts = rng.uniform(0, 1, (n, d))
        sigma = 2 * rng.integers(0, 2, n) - 1
        sample = LabeledSample(pts, sigma)
        fast = solve_grid(k, cs, sample, dist.support).value
        slow = lattice_grid_sup(k, cs, sample, dist, h)
        tol = h * k ** d
        tol_max = max(tol_max, tol)
        rep.limits.append(tol)
        rep.discrepancies.append(abs(fast - slow))
        rep.details.append({"k": k, "n": n, "constraint": "shap" if use_shap else "mean",
                            "lp": fast, "lattice": slow, "tolerance": tol})
    rep.tolerance = tol_max
    return rep


# ------------------------------------------------------------ two budgets

def two_budget_check(trials: int = 200, factor: int = 4, seed: int = 0, n: int = 4, k: int = 2) -> OracleReport:
    """The same estimator at two trial budgets agrees within three combined standard errors."""
    dist = unit_box(2)
    f = random_grid(2, k, np.random.default_rng(seed))
    x0 = (0.5, 0.5)
    cs = [ValueAt(x0, f.evaluate(x0))]
    cls = ClassSpec.make("grid", k=k)
    a = empirical_rademacher(cls, cs, dist, n, trials, seed)
    b = empirical_rademacher(cls, cs, dist, n, trials * factor, seed + 1)
    se = math.hypot(a.standard_error, b.standard_error)
    rep = OracleReport("two-budget", {"trials": trials, "factor": factor, "seed": seed, "n": n, "k": k}, 3.0)
    rep.discrepancies.append(abs(a.mean - b.mean) / se if se > 0 else (0.0 if a.mean == b.mean else math.inf))
    rep.details.append({"small": a.mean, "large": b.mean, "combined_se": se})
    return rep


ORACLES = {
    "shap-permutation": shap_permutation_check,
    "cf-scan": cf_scan_check,
    "grid-sup": grid_sup_check,
    "two-budget": two_budget_check,
}


def run_oracle(kind: str, **config) -> OracleReport:
    try:
        fn = ORACLES[kind]
    except KeyError:
        raise NotFound(f"unknown oracle {kind!r}; known: {sorted(ORACLES)}") from None
    return fn(**config)
