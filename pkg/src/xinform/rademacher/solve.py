"""Dispatch from a function class to its sup-correlation solver."""
from __future__ import annotations

from ..errors import Unsupported
from ..models import INTERPOLATING, ClassSpec
from .constraints import AnchorHolds, LabeledSample, MeanEquals, ShapEquals, SupResult
from .interp import bounded_differentiable, gam_unbounded, poly_unbounded, tree_unbounded
from .linear import solve_linear, solve_noisy_linear, solve_piecewise_linear_grid
from .linear_rows import solve_grid, solve_poly_bounded
from .lipschitz import solve_lipschitz
from .smooth import solve_bounded_gradient, solve_smooth_grad
from .trees import solve_tree_bracket, solve_tree_partition
from .verify import satisfies


def _need_dist(cls: ClassSpec, dist):
    if dist is None:
        raise Unsupported(f"class {cls.kind} needs the data distribution")
    return dist


def sup_correlation(cls: ClassSpec, constraints, sample: LabeledSample, dist=None, hints=()) -> SupResult:
    """sup over class members meeting `constraints` of (1/n) sum sigma_i g(x_i).

    `hints` are known feasible members (typically the explained model); bracket
    solvers use them as lower-bound witnesses.
    """
    cs = list(constraints)
    k = cls.kind
    if k == "grid":
        return solve_grid(cls.k, cs, sample, _need_dist(cls, dist).support)
    if k == "piecewise-linear-grid":
        return solve_piecewise_linear_grid(cls.k, cls.M, cs, sample, _need_dist(cls, dist).support)
    if k == "linear":
        return solve_linear(cls.M, cs, sample)
    if k == "noisy-linear":
        return solve_noisy_linear(cls.M, cls.eps, cs, sample)
    if k == "lipschitz":
        return solve_lipschitz(cls.L, cs, sample)
    if k == "poly-bounded":
        return solve_poly_bounded(cls.D, cls.M, cs, sample)
    if k == "smooth-grad":
        return solve_smooth_grad(cls.alpha, cls.beta, cs, sample)
    if k == "bounded-gradient":
        return solve_bounded_gradient(cls.alpha, cs, sample)
    if k == "tree-bounded":
        if any(isinstance(c, (MeanEquals, ShapEquals, AnchorHolds)) for c in cs):
            return solve_tree_bracket(cls.K, cs, sample, hints, check=lambda m: satisfies(m, cs))
        return solve_tree_partition(cls.K, cs, sample)
    if k in INTERPOLATING:
        return construct_witness(cls, cs, sample, dist, hints)
    raise Unsupported(f"no solver for class {k}")


def construct_witness(cls: ClassSpec, constraints, sample: LabeledSample, dist=None, hints=()) -> SupResult:
    """Explicit member of an interpolating class fitting the labels under the constraints.

    The result is exact; its witness has been re-verified against every constraint.
    """
    k = cls.kind
    if k == "tree-unbounded":
        return tree_unbounded(constraints, sample, _need_dist(cls, dist), hints)
    if k == "gam-trees-unbounded":
        return gam_unbounded(constraints, sample, _need_dist(cls, dist))
    if k == "bounded-differentiable":
        return bounded_differentiable(constraints, sample, dist)
    if k == "poly-unbounded":
        return poly_unbounded(constraints, sample, _need_dist(cls, dist))
    raise Unsupported(f"class {k} has no witness construction")
