import json

import pytest

from xinform.errors import DomainError, NotFound
from xinform.rademacher import violations
from xinform.scenarios import (BUDGETS, REGISTRY, build_setup, get_scenario, list_scenarios, plot_series,
                               resolve_params, run_scenario)

IDS = [s["id"] for s in list_scenarios()]


def test_registry_has_every_row_once():
    assert len(IDS) == 22 == len(set(IDS)) == len(REGISTRY)
    assert {s["expected"] for s in list_scenarios()} == {"informative", "non-informative"}
    assert {s["id"] for s in list_scenarios() if s["bracket"]} >= {"grad-smooth", "grad-locally-stable"}


def test_unknown_scenario():
    with pytest.raises(NotFound):
        get_scenario("shap-forest")


def test_defaults_share_trials_and_seed():
    for sid in IDS:
        p = resolve_params(get_scenario(sid))
        assert p["trials"] == 200 and p["seed"] == 7


@pytest.mark.parametrize("overrides, kind", [
    ({"colour": "red"}, "bad-override"),
    ({"n": "2.5"}, "bad-override"),
    ({"n": str(BUDGETS["n"] + 1)}, "budget"),
    ({"k": str(BUDGETS["k"] + 1)}, "budget"),
])
def test_override_validation(overrides, kind):
    with pytest.raises(DomainError) as exc:
        resolve_params(get_scenario("shap-grid"), overrides)
    assert exc.value.kind == kind


def test_override_is_applied():
    assert resolve_params(get_scenario("grad-linear"), {"n": "6", "M": "3"})["n"] == 6


@pytest.mark.parametrize("sid", IDS)
def test_explanation_constraints_come_from_the_model(sid):
    _, _, st = build_setup(sid)
    assert all(c in st.explain for c in st.predict)
    assert len(st.explain) > len(st.predict)
    # the explained model is a member of its own explanation class
    assert violations(st.model, st.explain) == []
    assert st.model.label(st.x0) == (1 if st.model.evaluate(st.x0) >= 0 else -1)


def test_shap_grid_event_covers_every_other_cell():
    _, p, st = build_setup("shap-grid")
    assert p["n"] == 8 and st.event.n == 8
    assert set(st.event.labels) == {1}
    assert all(r is not None and not r.contains(st.x0) for r in st.event.regions)


def test_shap_grid_event_needs_enough_points():
    with pytest.raises(DomainError) as exc:
        build_setup("shap-grid", {"n": "7"})
    assert exc.value.kind == "budget"


def test_builtin_model_can_be_replaced():
    from xinform.models import LinearModel
    _, _, st = build_setup("grad-linear", model=LinearModel((0.3, -0.2), 0.1))
    assert st.model.w == (0.3, -0.2)


def test_run_is_deterministic():
    a = run_scenario("grad-linear", {"trials": "30"})
    b = run_scenario("grad-linear", {"trials": "30"}, workers=2)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)


def test_linear_explain_class_is_a_singleton():
    out = run_scenario("grad-linear", {"trials": "20"})
    st = out.setup
    assert out.headline.explain.exact
    # each trial's explain sup is the explained model's own correlation
    from xinform.geometry import trial_rng
    from xinform.rademacher import draw_sample
    for t in range(20):
        s = draw_sample(st.dist, out.params["n"], trial_rng(out.params["seed"], t))
        own = s.correlation(st.model.evaluate_many(s.points))
        assert out.headline.explain.upper[t] == pytest.approx(own, abs=1e-12)


def test_conditional_never_contradicts_unconditional(registry_run):
    outcomes, _ = registry_run
    for sid, out in outcomes.items():
        if out.unconditional is not None and out.unconditional.verdict == "informative":
            assert out.headline.verdict == "informative", sid


def test_no_monotonicity_violations(registry_run):
    outcomes, _ = registry_run
    for out in outcomes.values():
        assert out.headline.monotonicity_violations == 0
        if out.unconditional is not None:
            assert out.unconditional.monotonicity_violations == 0


def test_plot_series_format():
    text = plot_series("grad-linear", [2, 3], {"trials": "10"})
    lines = text.strip().split("\n")
    assert lines[0].split("\t") == ["n", "gap_mean", "gap_ci_low", "gap_ci_high", "verdict"]
    assert [ln.split("\t")[0] for ln in lines[1:]] == ["2", "3"]
