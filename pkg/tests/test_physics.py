import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    HEAT_LOSS_GAMMA, LOAD_SUPPLIED, PIPE_T_OUT, PLANT_POWER_BASELINE, STEAM_DENSITY, STEAM_P_OUT,
    STEAM_PIPE_T_OUT, WATER_DROP, WATER_RISE_WITH_PUMP,
)
from tnfo.errors import InvalidGeometry, NonpositiveInput, PhaseOrderViolation
from tnfo.model import OUTGOING, RETURN, T_CONDENSE, CarrierConstants, Pipe
from tnfo.physics import (
    EdgeState, HeatLossParams, heat_loss_coefficient, junction_energy_residual, junction_mass_residual,
    load_power_residual, load_supplied_power, mixing_residuals, pipe_heat_loss, pipe_outlet_temperature,
    plant_power, steam_density, steam_pressure_residual, water_pressure_residual,
)

C = CarrierConstants()
T_EXT = 298.15
ANY_PARAMS = st.tuples(
    st.floats(0.0, 5000.0), st.floats(0.01, 5.0), st.floats(500.0, 5000.0), st.floats(1e-3, 50.0)
)


# ---------------------------------------------------------------- temperature


def test_outlet_temperature_oracle():
    assert pipe_outlet_temperature(398.15, 1.0, 100.0, 0.1, 1996.0, T_EXT) == pytest.approx(PIPE_T_OUT, rel=1e-14)


@given(ANY_PARAMS)
def test_equilibrium_is_a_fixed_point(params):
    L, gamma, c, f = params
    assert pipe_outlet_temperature(T_EXT, f, L, gamma, c, T_EXT) == T_EXT


def test_zero_length_is_identity():
    assert pipe_outlet_temperature(400.0, 2.0, 0.0, 0.1, 1996.0, T_EXT) == 400.0


def test_zero_flow_relaxes_to_ambient():
    assert pipe_outlet_temperature(400.0, 0.0, 10.0, 0.1, 1996.0, T_EXT) == T_EXT


@given(ANY_PARAMS, st.floats(300.0, 450.0), st.floats(0.0, 100.0))
def test_outlet_is_monotone_and_bracketed(params, T_in, bump):
    L, gamma, c, f = params
    lo = pipe_outlet_temperature(T_in, f, L, gamma, c, T_EXT)
    hi = pipe_outlet_temperature(T_in + bump, f, L, gamma, c, T_EXT)
    assert T_EXT <= lo <= T_in
    assert hi >= lo


@given(ANY_PARAMS, st.floats(300.0, 450.0), st.floats(0.0, 1.0))
def test_split_pipe_equals_whole_pipe(params, T_in, share):
    L, gamma, c, f = params
    mid = pipe_outlet_temperature(T_in, f, share * L, gamma, c, T_EXT)
    two = pipe_outlet_temperature(mid, f, (1 - share) * L, gamma, c, T_EXT)
    one = pipe_outlet_temperature(T_in, f, L, gamma, c, T_EXT)
    assert two == pytest.approx(one, rel=1e-12, abs=1e-9)


# ----------------------------------------------------------------- heat loss


LAYERED = HeatLossParams(alpha_a=100.0, alpha_b=10.0, alpha_c=5.0, K_a=45.0, K_b=0.05, d_a=0.3, d_b=0.31, d_c=0.41)


def test_heat_loss_oracle():
    assert heat_loss_coefficient(LAYERED) == pytest.approx(HEAT_LOSS_GAMMA, rel=1e-13)


def test_zero_thickness_walls_leave_two_convection_terms():
    p = HeatLossParams(100.0, 10.0, 5.0, 45.0, 0.05, 0.3, 0.3, 0.3)
    expected = 1.0 / (1.0 / (100.0 * math.pi * 0.3) + 1.0 / (math.pi * 0.3 * 15.0))
    assert heat_loss_coefficient(p) == pytest.approx(expected, rel=1e-14)


def test_heat_loss_rejects_bad_ordering():
    with pytest.raises(InvalidGeometry):
        heat_loss_coefficient(HeatLossParams(100.0, 10.0, 5.0, 45.0, 0.05, 0.3, 0.41, 0.31))


# ---------------------------------------------------------------- hydraulics


STEAM_PIPE = Pipe("S", "a", "b", OUTGOING, 500.0, 0.3, friction_factor=0.01, heat_loss_coeff=0.1)
WATER_PIPE = Pipe("W", "a", "b", RETURN, 500.0, 0.2, friction_factor=0.002)


def test_steam_density():
    assert steam_density(275790.0, 398.15, 461.5) == pytest.approx(STEAM_DENSITY, rel=1e-14)
    assert steam_density(461.5 * 400.0, 400.0, 461.5) == 1.0
    with pytest.raises(NonpositiveInput):
        steam_density(1e5, 0.0, 461.5)


def test_steam_no_flow_no_drop():
    s = EdgeState(f=0.0, T_in=400.0, T_out=T_EXT, p_in=3e5, p_out=3e5)
    assert steam_pressure_residual(s, STEAM_PIPE, C, T_EXT) == 0.0


def test_steam_pressure_oracle():
    assert pipe_outlet_temperature(398.15, 5.0, 500.0, 0.1, C.c_s, T_EXT) == pytest.approx(STEAM_PIPE_T_OUT, rel=1e-14)
    s = EdgeState(f=5.0, T_in=398.15, T_out=STEAM_PIPE_T_OUT, p_in=275790.0, p_out=STEAM_P_OUT)
    assert abs(steam_pressure_residual(s, STEAM_PIPE, C, T_EXT)) / 275790.0**2 < 1e-12


def test_water_pressure_examples():
    s = EdgeState(f=0.0, p_in=2e5, p_out=2e5)
    assert water_pressure_residual(s, WATER_PIPE, C) == 0.0
    # residual vanishes at the physical outlet pressure
    drop = EdgeState(f=5.0, p_in=2e5, p_out=2e5 - WATER_DROP)
    assert abs(water_pressure_residual(drop, WATER_PIPE, C)) < 1e-9
    pumped = EdgeState(f=5.0, p_in=2e5, p_out=2e5 + WATER_RISE_WITH_PUMP, alpha=34474.0)
    assert abs(water_pressure_residual(pumped, WATER_PIPE, C)) < 1e-9


@given(st.floats(0.01, 20.0), st.floats(1e5, 5e5), st.floats(1e5, 5e5))
def test_friction_term_is_odd_in_flow(f, p_in, p_out):
    def friction(res, flow):
        return res(flow) - res(0.0)

    def steam(flow):
        return steam_pressure_residual(EdgeState(f=flow, T_in=398.0, T_out=398.0, p_in=p_in, p_out=p_out), STEAM_PIPE, C, T_EXT)

    def water(flow):
        return water_pressure_residual(EdgeState(f=flow, p_in=p_in, p_out=p_out), WATER_PIPE, C)

    for res in (steam, water):
        assert friction(res, -f) == pytest.approx(-friction(res, f), rel=1e-9)


# ------------------------------------------------------------ plant and loads


def test_plant_power_examples():
    assert plant_power(0.0, 350.0, 400.0, C) == 0.0
    assert plant_power(1.0, T_CONDENSE, T_CONDENSE, C) == 2.23e6
    assert plant_power(6.43, 353.15, 398.01, C) == pytest.approx(PLANT_POWER_BASELINE, rel=1e-12)


@pytest.mark.parametrize("T_in,T_out", [(380.0, 400.0), (350.0, 360.0)])
def test_plant_phase_order(T_in, T_out):
    with pytest.raises(PhaseOrderViolation):
        plant_power(1.0, T_in, T_out, C)


def test_load_power_examples():
    assert load_power_residual(EdgeState(), 0.0, C) == 0.0
    hot = EdgeState(f=1.0, T_in=398.15, T_out=353.15)
    assert load_supplied_power(1.0, 398.15, 353.15, C) == pytest.approx(LOAD_SUPPLIED, rel=1e-14)
    assert load_power_residual(hot, LOAD_SUPPLIED, C) == pytest.approx(0.0, abs=1e-8)
    short = EdgeState(f=1.0, T_in=398.15, T_out=353.15, QS=1e6)
    assert load_power_residual(short, LOAD_SUPPLIED + 1e6, C) == pytest.approx(0.0, abs=1e-8)


@given(st.floats(0.0, 20.0), st.floats(300.0, T_CONDENSE), st.floats(T_CONDENSE, 430.0))
def test_heating_and_condensing_mirror(f, T_water, T_steam):
    assert plant_power(f, T_water, T_steam, C) == pytest.approx(load_supplied_power(f, T_steam, T_water, C), rel=1e-12)


# ------------------------------------------------------------------ junctions


def _s(f, T=0.0):
    return EdgeState(f=f, T_in=T, T_out=T)


def test_mass_examples():
    assert junction_mass_residual([_s(2.0)], [_s(2.0)]) == 0.0
    assert junction_mass_residual([_s(1.5), _s(2.5)], [_s(4.0)]) == 0.0
    assert junction_mass_residual([_s(3.0)], [_s(2.0), _s(0.5)]) == 0.5


def test_energy_examples():
    assert junction_energy_residual([(_s(1.0, 390.0), C.c_s)], [(_s(1.0, 390.0), C.c_s)]) == 0.0
    inflows = [(_s(1.0, 360.0), C.c_w), (_s(1.0, 380.0), C.c_w)]
    assert junction_energy_residual(inflows, [(_s(2.0, 370.0), C.c_w)]) == pytest.approx(0.0, abs=1e-9)
    assert junction_energy_residual(inflows, [(_s(2.0, 371.0), C.c_w)]) != pytest.approx(0.0, abs=1.0)


def test_mixing_examples():
    assert mixing_residuals(390.0, [_s(1.0, 390.0), _s(2.0, 390.0)]) == [0.0, 0.0]
    assert mixing_residuals(390.0, [_s(1.0, 385.0)]) == [-5.0]
    assert mixing_residuals(390.0, []) == []


flows = st.lists(st.floats(0.0, 50.0), min_size=1, max_size=5)
temps = st.floats(300.0, 450.0)


@settings(max_examples=50)
@given(flows, flows, temps, temps, st.integers(1, 1000))
def test_junction_residuals_scale_linearly(fin, fout, Ti, To, k):
    ins = [_s(f, Ti) for f in fin]
    outs = [_s(f, To) for f in fout]
    big_in = [_s(k * f, Ti) for f in fin]
    big_out = [_s(k * f, To) for f in fout]
    scale = max(sum(fin), sum(fout), 1.0) * k
    assert junction_mass_residual(big_in, big_out) == pytest.approx(k * junction_mass_residual(ins, outs),
                                                                    abs=1e-12 * scale)
    pair = lambda xs: [(s, C.c_w) for s in xs]  # noqa: E731
    assert junction_energy_residual(pair(big_in), pair(big_out)) == pytest.approx(
        k * junction_energy_residual(pair(ins), pair(outs)), abs=1e-9 * scale * C.c_w * 450)


def test_pipe_heat_loss_vectorized():
    out = pipe_heat_loss(np.array([1.0, 2.0]), np.array([400.0, 400.0]), np.array([390.0, 399.0]), C.c_s)
    assert out.tolist() == [19960.0, 3992.0]
