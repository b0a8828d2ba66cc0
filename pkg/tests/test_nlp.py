import numpy as np
import pytest

from oracles import DEMAND_FLOW
from tnfo.errors import NonFiniteValue, NonSquareSystem, ScenarioMismatch
from tnfo.model import T_CONDENSE
from tnfo.nlp import (
    FLOW_FLOOR, ObjectiveWeights, Setpoints, Workspace, assemble_simulation, assemble_tnfo, evaluate,
    index_variables, initial_guess, setpoints_from_state,
)
from tnfo.scenario import Scenario
from tnfo.solver import simulate, solve_nlp
from tnfo.synth import minimal_network
from tnfo.units import psi_to_pa


def test_layout_count_minimal(mini):
    assert len(index_variables(mini)) == 2 * 4 + 3 * 4 + 0 + 2 * 1


def test_pump_adds_one_variable(mini):
    pumped = minimal_network(pump_boost_max=psi_to_pa(5.0))
    assert len(index_variables(pumped)) == len(index_variables(mini)) + 1


def test_layout_round_trip(campus):
    lay = index_variables(campus)
    x = np.arange(len(lay), dtype=float)
    assert np.array_equal(lay.flatten(lay.unflatten(x)), x)
    assert len(set(lay.names())) == len(lay)


def test_campus_row_counts(campus):
    prob = assemble_tnfo(campus)
    rows = {k: s.stop - s.start for k, s in prob.rows.items()}
    assert rows["load_power"] == 45
    assert rows["pipe_temperature"] == 136
    assert rows["steam_pressure"] + rows["water_pressure"] == 136
    pipes, loads, V = 136, 45, 134
    assert prob.m_eq == 2 * pipes + loads + len(campus.edges) + 2 * V


def test_every_variable_is_used(campus):
    prob = assemble_tnfo(campus)
    x = initial_guess(campus, problem=prob)
    Je, Ji = prob.jacobian(x)
    used = (np.abs(Je).sum(axis=0) > 0) | (np.abs(Ji).sum(axis=0) > 0) | (prob.objective_gradient(x) != 0)
    assert used.all()


def test_unknown_load_in_scenario(mini):
    with pytest.raises(ScenarioMismatch):
        assemble_tnfo(mini, Scenario("x", overrides={"L9": 1e6}))


def test_initial_flow_carries_the_demand(campus):
    prob = assemble_tnfo(campus)
    x = initial_guess(campus, problem=prob)
    f0 = x[prob.pl_f[0]]
    assert 0.9 * DEMAND_FLOW < f0 <= DEMAND_FLOW


def test_zero_demand_starts_at_flow_floor(mini):
    prob = assemble_tnfo(mini, Scenario("off", overrides={"L1": 0.0}))
    x = initial_guess(mini, problem=prob)
    assert x[prob.pl_f[0]] == FLOW_FLOOR


def test_single_load_path_has_one_flow(mini):
    prob = assemble_tnfo(mini)
    x = initial_guess(mini, problem=prob)
    flows = x[prob.layout.block("f")]
    assert np.ptp(flows) == 0.0


def test_evaluate_shapes_and_reuse(mini):
    prob = assemble_tnfo(mini)
    x = initial_guess(mini, problem=prob)
    ws = Workspace.for_problem(prob)
    obj, r, J = evaluate(prob, x, ws)
    assert r.shape == (prob.m_eq + prob.m_ineq,)
    assert J.shape == (prob.m_eq + prob.m_ineq, prob.n)
    _, r2, J2 = evaluate(prob, x, ws)
    assert r2 is r and J2 is J
    rows, cols = prob.jacobian_pattern()
    off = np.ones_like(J[: prob.m_eq], dtype=bool)
    off[rows, cols] = False
    assert not J[: prob.m_eq][off].any()


def test_evaluate_flags_non_finite(mini):
    prob = assemble_tnfo(mini)
    x = initial_guess(mini, problem=prob)
    x[prob.layout.index("T", "S1")] = np.nan
    with pytest.raises(NonFiniteValue):
        evaluate(prob, x)


def test_solved_state_has_small_residual(mini):
    state, report = solve_nlp(assemble_tnfo(mini))
    assert report.status == "optimal"
    assert state.norms["eq_scaled"] < 1e-8


def test_missing_pump_setpoint():
    net = minimal_network(pump_boost_max=psi_to_pa(5.0))
    sp = Setpoints(plants={"G1": (400.0, psi_to_pa(40.0), 0.5)}, pumps={}, loads={"L1": (0.0, 0.0, 1e4)})
    with pytest.raises(NonSquareSystem, match="pump PR1"):
        assemble_simulation(net, sp)


def test_more_plant_flow_lowers_steam_pressures(campus):
    prob = assemble_tnfo(campus)
    state, _ = solve_nlp(prob)
    sp = setpoints_from_state(prob, state.x)
    (gid, (T_out, p_out, f)), = sp.plants.items()
    bumped = Setpoints({gid: (T_out, p_out, 1.01 * f)}, sp.pumps, sp.loads)
    base, _ = simulate(assemble_simulation(campus, sp), x0=state.x)
    more, _ = simulate(assemble_simulation(campus, bumped), x0=state.x)
    plant_out = campus.plants[0].to_junction
    steam = [j.id for j in campus.junctions if j.kind == "outgoing" and j.id != plant_out]
    drops = [more.value("p", j) - base.value("p", j) for j in steam]
    assert max(drops) < 0


def test_weight_scaling_keeps_the_optimum(mini):
    w = ObjectiveWeights()
    a, _ = solve_nlp(assemble_tnfo(mini, weights=w))
    b, _ = solve_nlp(assemble_tnfo(mini, weights=w.scaled(10.0)))
    prob = assemble_tnfo(mini)
    scale = np.maximum(np.abs(prob.upper - prob.lower), 1.0)
    scale[~np.isfinite(scale)] = np.maximum(np.abs(a.x[~np.isfinite(scale)]), 1.0)
    assert np.max(np.abs(a.x - b.x) / scale) < 1e-4


def test_load_outlets_stay_condensed(mini):
    state, _ = solve_nlp(assemble_tnfo(mini))
    assert state.value("T_out", "L1") <= T_CONDENSE + 1e-6
    assert state.value("T_in", "L1") >= T_CONDENSE - 1e-6
