import math

import pytest

from xinform.errors import DomainError, NotFound
from xinform.models import ClassSpec
from xinform.oracles import run_oracle
from xinform.rademacher import empirical_rademacher

from conftest import unit


def test_shap_permutation_oracle_agrees():
    rep = run_oracle("shap-permutation", d=3, count=20)
    assert rep.passed and rep.max_discrepancy <= 1e-9


def test_cf_scan_oracle_agrees():
    rep = run_oracle("cf-scan", count=5, step=2e-3)
    assert rep.tolerance == pytest.approx(2e-3 * math.sqrt(2))
    assert rep.passed


def test_grid_sup_oracle_with_mean_rows():
    rep = run_oracle("grid-sup", count=6, shap_share=0.0)
    assert rep.passed
    for item in rep.details:
        if item["k"] == 2:
            assert abs(item["lp"] - item["lattice"]) <= 0.04


def test_two_budget_oracle():
    rep = run_oracle("two-budget", trials=100, factor=4)
    assert rep.passed


def test_linear_estimate_matches_large_reference_run():
    cls = ClassSpec.make("linear", M=1.0)
    small = empirical_rademacher(cls, [], unit(2), 4, 400, seed=1)
    big = empirical_rademacher(cls, [], unit(2), 4, 100_000, seed=2)
    assert abs(small.mean - big.mean) <= 3 * small.standard_error


@pytest.mark.parametrize("kind, config", [
    ("shap-permutation", {"d": 6}),
    ("cf-scan", {"step": 1e-4}),
    ("grid-sup", {"h": 1e-3}),
])
def test_oracle_budgets(kind, config):
    with pytest.raises(DomainError) as exc:
        run_oracle(kind, **config)
    assert exc.value.kind == "budget"


def test_unknown_oracle():
    with pytest.raises(NotFound):
        run_oracle("tarot")
