"""Acceptance criteria. Each test prints one PASS/FAIL line (also collected in the
terminal summary) and then asserts the same condition."""
import json
import math
import subprocess
import sys
import time

import numpy as np
from scipy.optimize import linprog

from xinform.errors import Infeasible
from xinform.explainers import shap_explain, top_gradient_component
from xinform.geometry import AxisBox, Grid, trial_rng
from xinform.models import ClassSpec, LinearModel, PolynomialModel, evaluate, expectation
from xinform.oracles import _basis_shap_rows, random_grid, random_model, random_tree, run_oracle
from xinform.rademacher import (EventSpec, GradientAt, LabeledSample, MeanEquals, ShapEquals, SignAt, SignOnBall,
                                TopComponentAt, ValueAt, construct_witness, draw_sample, decomposition_check,
                                sup_correlation, violations)

from conftest import acceptance, unit


def test_efficiency_axiom():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        f = random_tree(d, int(rng.integers(1, 5)), rng) if rng.random() < 0.5 else random_grid(d, 3, rng)
        x = rng.random(d)
        phi = shap_explain(f, unit(d), x).phi
        worst = max(worst, abs(sum(phi) - (evaluate(f, x) - expectation(f, unit(d)))))
    secs = time.perf_counter() - start
    ok = worst <= 1e-9 and secs < 5
    assert acceptance(1, "efficiency", ok, f"100 models, max residual {worst:.2e} (tol 1e-9), {secs:.2f}s (< 5s)")


def test_shap_oracle_equivalence():
    start = time.perf_counter()
    rep = run_oracle("shap-permutation", d=5, count=50, vary_d=True, seed=2)
    secs = time.perf_counter() - start
    ok = rep.max_discrepancy <= 1e-9 and secs < 10 and len(rep.discrepancies) == 50
    assert acceptance(2, "SHAP oracle", ok,
                      f"50 models d<=5, max |diff| {rep.max_discrepancy:.2e} (tol 1e-9), {secs:.2f}s (< 10s)")


# ---------------------------------------------------------------- monotonicity fuzz

def _random_problem(rng):
    """(class, predict constraints, explain constraints, dist, d) built around a random class member."""
    kind = rng.choice(["grid", "linear", "lipschitz", "tree", "poly", "deep-tree"])
    d = int(rng.integers(1, 3))
    dist = unit(d)
    x0 = tuple(rng.uniform(0.05, 0.95, d))
    p = tuple(rng.uniform(0.05, 0.95, d))
    if kind == "grid":
        k = int(rng.integers(2, 4))
        f = random_grid(d, k, rng)
        extra = rng.choice(["mean", "shap", "sign"])
        add = {"mean": lambda: MeanEquals(expectation(f, dist), dist),
               "shap": lambda: ShapEquals(x0, shap_explain(f, dist, x0).phi, dist),
               "sign": lambda: SignAt(p, f.label(p))}[extra]()
        cls = ClassSpec.make("grid", k=k)
    elif kind == "linear":
        w = rng.uniform(-0.5, 0.5, d)
        f = LinearModel(w, float(rng.uniform(-0.3, 0.3)))
        add = GradientAt(x0, tuple(w)) if rng.random() < 0.5 else TopComponentAt(
            x0, top_gradient_component(f, x0).index, top_gradient_component(f, x0).magnitude)
        cls = ClassSpec.make("linear", M=1.0)
    elif kind == "lipschitz":
        f = LinearModel(rng.uniform(-0.5, 0.5, d) / math.sqrt(d), float(rng.uniform(-0.2, 0.2)))
        if rng.random() < 0.5:
            add = SignAt(p, f.label(p))
        else:
            # a ball on which f keeps one sign
            v = f.evaluate(p)
            r = max(abs(v) / (np.linalg.norm(f.w) + 1e-9), 1e-3) * 0.9
            add = SignOnBall(p, r, f.label(p))
        cls = ClassSpec.make("lipschitz", L=1.0)
    elif kind == "tree":
        K = int(rng.integers(1, 3))
        f = random_tree(d, K, rng)
        add = SignAt(p, f.label(p))
        cls = ClassSpec.make("tree-bounded", K=K)
    elif kind == "poly":
        f = PolynomialModel(d, 2, tuple(rng.uniform(-0.3, 0.3, 3 if d == 1 else 6)), M=1.0)
        extra = rng.choice(["gradient", "mean", "shap"])
        add = {"gradient": lambda: GradientAt(x0, tuple(f.gradient(np.array(x0)))),
               "mean": lambda: MeanEquals(expectation(f, dist), dist),
               "shap": lambda: ShapEquals(x0, shap_explain(f, dist, x0).phi, dist)}[extra]()
        cls = ClassSpec.make("poly-bounded", D=2, M=1.0)
    else:
        f = random_tree(d, 3, rng)
        add = MeanEquals(expectation(f, dist), dist)
        cls = ClassSpec.make("tree-unbounded")
    pred = [ValueAt(x0, f.evaluate(x0))]
    return cls, pred, pred + [add], dist, f


def test_monotonicity_fuzz():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    trials = violations_found = 0
    worst = -math.inf
    while trials < 1000:
        cls, pred, expl, dist, f = _random_problem(rng)
        n = int(rng.integers(1, 6))
        s = LabeledSample(dist.sample(n, rng), rng.choice([-1, 1], n))
        try:
            a = sup_correlation(cls, pred, s, dist, hints=(f,))
            b = sup_correlation(cls, expl, s, dist, hints=(f,))
        except Infeasible:
            continue
        trials += 1
        diff = b.upper - a.upper
        worst = max(worst, diff)
        violations_found += diff > 1e-12
    secs = time.perf_counter() - start
    ok = violations_found == 0 and secs < 60
    assert acceptance(3, "monotonicity", ok, f"{trials} paired trials, {violations_found} violations, "
                      f"max sup(explain)-sup(predict) {worst:.2e} (tol 1e-12), {secs:.1f}s (< 60s)")


# ---------------------------------------------------------------- scenarios

def test_registry_conformance(registry_run):
    outcomes, secs = registry_run
    bad = [sid for sid, o in outcomes.items() if not o.conforms]
    ok = not bad and len(outcomes) == 22 and secs < 600
    assert acceptance(4, "scenario conformance", ok,
                      f"{22 - len(bad)}/22 conform at trials=200 seed=7, {secs:.1f}s (< 600s)"
                      + (f", nonconforming: {bad}" if bad else ""))


def _grid_lp_oracle(setup, sample):
    """Explain-class sup for a grid model by a generic LP, rows from the permutation oracle."""
    k = setup.cls.k
    grid = Grid.regular(setup.dist.support, k)
    N = grid.n_cells
    c = np.zeros(N)
    np.add.at(c, grid.flat_index_many(sample.points), sample.sigma / sample.n)
    A, b = [], []
    bounds = [(-1.0, 1.0)] * N
    for con in setup.explain:
        if isinstance(con, ValueAt):
            i = int(grid.flat_index_many(np.array([con.point]))[0])
            bounds[i] = (con.value, con.value)
        else:
            R = _basis_shap_rows(grid, con.dist, np.array(con.point), con.ambient)
            A.extend(R)
            b.extend(con.vector)
    res = linprog(-c, A_eq=np.array(A), b_eq=np.array(b), bounds=bounds, method="highs")
    assert res.status == 0
    return -res.fun


def test_shap_grid_under_the_forcing_event():
    from xinform.scenarios import run_scenario
    start = time.perf_counter()
    out = run_scenario("shap-grid")
    secs = time.perf_counter() - start
    st, P, rep = out.setup, out.params, out.headline
    pred_one = rep.predict.exact and bool(np.all(rep.predict.upper == 1.0))
    cs, within = [], True
    for t in range(P["trials"]):
        s = draw_sample(st.dist, P["n"], trial_rng(P["seed"], t), st.event)
        lp = _grid_lp_oracle(st, s)
        cs.append(1.0 - lp)
        within &= bool(rep.explain.upper[t] <= lp + 1e-9)
    c = min(cs)
    lo, _ = rep.ci
    ok = pred_one and within and c > 0 and lo > 0 and secs < 30
    assert acceptance(5, "shap-grid", ok, f"predict=1 in every trial: {pred_one}; explain <= 1-c per trial: {within}; "
                      f"c={c:.4f} (> 0); gap CI low {lo:.4f} (> 0); {secs:.1f}s (< 30s)")


def test_shap_manifold_gaps_vanish(registry_run):
    rep = registry_run[0]["shap-manifold"].headline
    worst = float(rep.gaps.max())
    ok = rep.trials == 200 and worst <= 1e-9
    assert acceptance(6, "shap-manifold", ok, f"{rep.trials} trials, max per-trial gap {worst:.2e} (tol 1e-9)")


def test_counterfactual_events(registry_run):
    strong = registry_run[0]["cf-strong"]
    r = strong.headline
    strong_ok = bool(np.all(r.explain.upper <= 0.0) and np.all(r.predict.upper == 1.0)) and r.conditional
    weak = registry_run[0]["cf-weak-lipschitz"]
    f0 = abs(weak.setup.model.evaluate(weak.setup.x0))
    weak_min = float(weak.headline.predict.lower.min())
    weak_ok = weak.headline.conditional and weak_min >= f0 - 1e-12 and f0 > 0
    assert acceptance(7, "counterfactual events", strong_ok and weak_ok,
                      f"cf-strong explain max {r.explain.upper.max():.3g} (<= 0), predict min "
                      f"{r.predict.upper.min():.3g} (= 1); cf-weak-lipschitz predict min {weak_min:.4f} "
                      f">= |f(x0)| = {f0:.4f}")


def test_strong_counterfactual_scan():
    rep = run_oracle("cf-scan", count=20, step=1e-3)
    ok = rep.passed and len(rep.discrepancies) == 20 and rep.tolerance <= 1e-3 * math.sqrt(2) + 1e-15
    assert acceptance(8, "strong counterfactual", ok,
                      f"20 models, max |radius-scan| {rep.max_discrepancy:.5f} (tol {rep.tolerance:.5f})")


def test_grid_solver_against_lattice_search():
    rep = run_oracle("grid-sup", count=50, h=1e-2)
    shap_rows = sum(item["constraint"] == "shap" for item in rep.details)
    ok = rep.passed and len(rep.discrepancies) == 50 and 0 < shap_rows < 50
    worst = max(x / t for x, t in zip(rep.discrepancies, rep.limits))
    assert acceptance(9, "grid solver vs lattice", ok,
                      f"50 instances ({shap_rows} SHAP, {50 - shap_rows} mean), max |diff| "
                      f"{rep.max_discrepancy:.4f}, worst ratio to h*cells {worst:.2f} (<= 1)")


def test_conditional_decomposition():
    dist = unit(1)
    left = EventSpec((AxisBox.half_open((0.0,), (0.5,)), None))
    right = EventSpec((AxisBox.closed((0.5,), (1.0,)), None))
    out = decomposition_check(ClassSpec.make("grid", k=2), [], dist, 2, [left, right], 10_000, seed=11)
    ok = out["agree"] and abs(out["discrepancy"]) <= 3 * out["combined_se"]
    assert acceptance(10, "conditional decomposition", ok,
                      f"10^4 trials, |diff| {abs(out['discrepancy']):.5f} <= 3*SE {3 * out['combined_se']:.5f}")


def test_witness_validity(registry_run):
    checked = bad = 0
    for sid, out in registry_run[0].items():
        st, P = out.setup, out.params
        if not st.cls.interpolating:
            continue
        for t in range(20):
            s = draw_sample(st.dist, P["n"], trial_rng(P["seed"], t), st.event)
            for cs in (st.predict, st.explain):
                r = construct_witness(st.cls, cs, s, st.dist, st.hints)
                vals = r.witness.evaluate_many(s.points)
                hits = vals == s.sigma
                # points a sign constraint pins to the other side contribute 0 at best
                pinned = s.sigma * vals <= 1e-12
                fine = (not violations(r.witness, cs, 1e-9) and np.all(hits | pinned)
                        and abs(s.correlation(vals) - r.value) <= 1e-9 and (r.value < 1 or np.all(hits)))
                checked += 1
                bad += not fine
    ok = bad == 0 and checked > 0
    assert acceptance(11, "witness validity", ok, f"{checked} witnesses re-verified, {bad} invalid (tol 1e-9)")


def test_cli_determinism(tmp_path):
    digests = []
    for w in ("1", "2"):
        csv_path, json_path = tmp_path / f"w{w}.csv", tmp_path / f"w{w}.json"
        done = subprocess.run([sys.executable, "-m", "xinform.cli", "scenario", "run", "--all", "--seed", "7",
                               "--workers", w, "--csv", str(csv_path), "--out", str(json_path)],
                              capture_output=True, text=True)
        assert done.returncode == 0, done.stderr
        digests.append((csv_path.read_bytes(), json_path.read_bytes()))
    same = digests[0] == digests[1]
    summary = digests[0][0].decode().strip().splitlines()[-1]
    total = json.loads(digests[0][1])["total"]
    ok = same and total == 22
    assert acceptance(12, "CLI determinism", ok, f"--workers 1 vs 2 byte-identical CSV and JSON: {same}; {summary}")
