import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import REPORTED_OUTAGE_DEMAND
from tnfo.errors import InvalidParameter, UnknownLoad, ZeroDemand
from tnfo.nlp import NetworkState, index_variables
from tnfo.scenario import (
    ALL_LOADS, Scenario, apply_scenario, run_batch, run_scenario, sensitivity_sweep, solve_batch,
    study_scenarios, unique_names, unmet_fraction,
)
from tnfo.solver import SolverOptions
from tnfo.synth import largest_load, minimal_network

BASE = {"L1": 1e6, "L2": 2e6, "L3": 0.5e6}


def test_triple_one_load():
    out = apply_scenario(BASE, Scenario("x", multipliers={"L2": 3.0})).overrides
    assert out == {"L1": 1e6, "L2": 6e6, "L3": 0.5e6}


def test_uniform_half_again():
    out = apply_scenario(BASE, Scenario("x", multipliers={ALL_LOADS: 1.5})).overrides
    assert sum(out.values()) == pytest.approx(1.5 * sum(BASE.values()), rel=1e-15)


def test_empty_scenario_is_identity():
    assert apply_scenario(BASE, Scenario()).overrides == BASE
    assert apply_scenario(BASE, None).overrides == BASE


def test_override_applies_after_multiplier():
    out = apply_scenario(BASE, Scenario("x", multipliers={ALL_LOADS: 2.0}, overrides={"L1": 7.0})).overrides
    assert out == {"L1": 7.0, "L2": 4e6, "L3": 1e6}


def test_unknown_load():
    with pytest.raises(UnknownLoad):
        apply_scenario(BASE, Scenario("x", multipliers={"L9": 2.0}))
    with pytest.raises(UnknownLoad):
        apply_scenario(BASE, Scenario("x", overrides={"L9": 2.0}))


def test_negative_multiplier_rejected():
    with pytest.raises(InvalidParameter):
        Scenario("x", multipliers={"L1": -1.0})


multipliers = st.dictionaries(st.sampled_from(["L1", "L2", "L3", ALL_LOADS]), st.floats(0.0, 10.0))


@given(multipliers)
def test_applying_twice_is_idempotent(m):
    once = apply_scenario(BASE, Scenario("x", multipliers=m))
    assert apply_scenario(BASE, once).overrides == once.overrides


def test_study_scenarios_demands(campus):
    scen = {s.name: s for s in study_scenarios(campus)}
    assert len(scen) == 5
    total = sum(scen["equipment-outage"].demands(campus.demands()).values())
    assert total == pytest.approx(REPORTED_OUTAGE_DEMAND, rel=2e-3)
    big = largest_load(campus)
    tripled = scen["functional-contingency"].demands(campus.demands())
    assert tripled[big] == 3 * campus.demands()[big]


def test_unmet_fraction_examples(mini):
    lay = index_variables(mini)
    state = NetworkState(np.zeros(len(lay)), lay)
    assert unmet_fraction(state, {"L1": 1e6}) == 0.0
    with pytest.raises(ZeroDemand):
        unmet_fraction(state, {"L1": 0.0})


def test_empty_batch():
    assert run_batch(minimal_network(), []) == []


def test_duplicate_names_are_suffixed(mini):
    rows = run_batch(mini, [Scenario("a"), Scenario("a"), Scenario("b")])
    assert [r.name for r in rows] == ["a", "a-2", "b"]
    assert all(r.ok for r in rows)
    assert unique_names(["a", "a-2", "a"]) == ["a", "a-2", "a-3"]


def test_bad_row_does_not_abort_batch(mini):
    runs = solve_batch(mini, [Scenario("bad", multipliers={"L9": 2.0}), Scenario("good")])
    assert [r.summary.status for r in runs] == ["invalid", "optimal"]


def test_failed_solve_becomes_a_row(mini):
    run = run_scenario(mini, Scenario("short"), opts=SolverOptions(max_iter=1))
    assert run.summary.status == "iteration-limit"
    assert not run.summary.ok


def test_sweep_argument_checks(mini):
    for args in ((1.0, 2.0, 1), (2.0, 1.0, 3), (-1.0, 1.0, 3)):
        with pytest.raises(InvalidParameter):
            sensitivity_sweep(mini, *args)


def test_degenerate_sweep_repeats_the_point(mini):
    a, b = sensitivity_sweep(mini, 1.0, 1.0, 2)
    assert a.multiplier == b.multiplier == 1.0
    assert b.warm
    assert b.plant_f == pytest.approx(a.plant_f, rel=1e-6)
    assert b.plant_T_out == pytest.approx(a.plant_T_out, rel=1e-6)


def test_capacity_ladder_never_lowers_unmet():
    net = minimal_network(demand=1e6)
    unmet = [run_scenario(net, Scenario(f"cap{c}", plant_capacity=c)).summary.unmet
             for c in (2e6, 1.2e6, 0.9e6, 0.6e6, 0.3e6)]
    assert all(b >= a - 1.0 for a, b in zip(unmet, unmet[1:]))
    assert unmet[0] == pytest.approx(0.0, abs=1.0)
    assert unmet[-1] > 0.6e6


def test_capacity_for_unknown_plant(mini):
    with pytest.raises(UnknownLoad):
        Scenario("x", plant_capacity={"G9": 1e6}).resolve(mini)


def test_bound_overrides_reach_the_problem(mini):
    run = run_scenario(mini, Scenario("hot", bounds={"T_max": 420.0}))
    assert run.problem.bounds_si.T_max == 420.0
    assert run.summary.plant_T_out <= 420.0 + 1e-6


def test_warm_starts_meet_cold_tolerances(campus):
    opts = SolverOptions()
    prev = run_scenario(campus, Scenario("m1.1", multipliers={ALL_LOADS: 1.1}))
    for m in (1.2, 1.5, 1.8):
        scen = Scenario(f"m{m}", multipliers={ALL_LOADS: m})
        warm = run_scenario(campus, scen, x0=prev.state.x)
        cold = run_scenario(campus, scen)
        for run in (warm, cold):
            assert run.summary.ok
            assert run.report.primal_infeasibility <= opts.feasibility_tol
            assert run.report.dual_infeasibility <= opts.optimality_tol
        assert warm.summary.plant_f == pytest.approx(cold.summary.plant_f, rel=1e-3)
        prev = warm


def test_localized_and_uniform_growth_both_balance(campus):
    big = largest_load(campus)
    extra = 2 * campus.demands()[big]
    m = 1 + extra / campus.total_demand()
    local = run_scenario(campus, Scenario("local", multipliers={big: 3.0}))
    spread = run_scenario(campus, Scenario("spread", multipliers={ALL_LOADS: m}))
    assert local.summary.required == pytest.approx(spread.summary.required, rel=1e-12)
    for run in (local, spread):
        assert run.summary.ok
        assert run.summary.audit_gap() < 1e-3
    f_local = local.state.x[local.problem.layout.block("f")]
    f_spread = spread.state.x[spread.problem.layout.block("f")]
    assert np.max(np.abs(f_local - f_spread)) > 0.1


def test_summary_is_frozen(mini):
    s = run_scenario(mini).summary
    with pytest.raises(dataclasses.FrozenInstanceError):
        s.status = "x"
