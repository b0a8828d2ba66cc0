import math

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import AREA_D03
from tnfo.errors import InfeasibleSpec, InvalidParameter, NonpositiveDiameter, ValidationError
from tnfo.model import OUTGOING, RETURN, CarrierConstants, Load, OperationalBounds, Pipe, Plant, build_network, cross_section_area
from tnfo.synth import SynthSpec, campus_spec, largest_load, minimal_network, synth_network
from tnfo.units import c_to_k, from_si, k_to_c, pa_to_psi, psi_to_pa, to_si


def test_cross_section_area_matches_oracle():
    assert cross_section_area(0.3) == pytest.approx(AREA_D03, rel=1e-14)


def test_unit_area_diameter():
    assert cross_section_area(2 / math.sqrt(math.pi)) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("d", [0.0, -0.1])
def test_area_rejects_nonpositive_diameter(d):
    with pytest.raises(NonpositiveDiameter):
        cross_section_area(d)


def test_minimal_cycle_is_valid(mini):
    assert mini.census() == {
        "junctions": 4, "plants": 1, "loads": 1, "outgoing_pipes": 1, "return_pipes": 1, "pumps": 0,
    }
    kinds = {j.id: j.kind for j in mini.junctions}
    assert kinds == {"S1": OUTGOING, "S2": OUTGOING, "R1": RETURN, "R2": RETURN}


def test_two_junction_cycle():
    net = build_network(
        ["A", "B"],
        [],
        [Plant("G", "B", "A", 1e6)],
        [Load("L", "A", "B", 1e5)],
    )
    assert len(net.edges) == 2


def _components():
    return dict(
        junctions=["S1", "S2", "R1", "R2"],
        pipes=[Pipe("PS1", "S1", "S2", OUTGOING, 200.0, 0.15), Pipe("PR1", "R2", "R1", RETURN, 200.0, 0.1)],
        plants=[Plant("G1", "R1", "S1", 30e6)],
        loads=[Load("L1", "S2", "R2", 1e6)],
    )


def _codes(**changes):
    parts = _components()
    parts.update(changes)
    with pytest.raises(ValidationError) as info:
        build_network(**parts)
    return info.value.codes


def test_dangling_reference():
    assert "DanglingJunctionRef" in _codes(pipes=[Pipe("PS1", "S1", "J99", OUTGOING, 200.0, 0.15),
                                                  Pipe("PR1", "R2", "R1", RETURN, 200.0, 0.1)])


def test_duplicate_ids():
    assert "DuplicateId" in _codes(junctions=["S1", "S1", "S2", "R1", "R2"])


def test_pump_on_outgoing_pipe():
    assert "PumpOnOutgoingPipe" in _codes(pipes=[Pipe("PS1", "S1", "S2", OUTGOING, 200.0, 0.15, pump_boost_max=1e3),
                                                 Pipe("PR1", "R2", "R1", RETURN, 200.0, 0.1)])


def test_plantless_network():
    assert "PlantlessNetwork" in _codes(plants=[])


def test_disconnected_graph():
    parts = _components()
    extra = dict(
        junctions=parts["junctions"] + ["X1", "X2"],
        plants=parts["plants"] + [Plant("G2", "X2", "X1", 1e6)],
        loads=parts["loads"] + [Load("L2", "X1", "X2", 1e5)],
    )
    assert "DisconnectedGraph" in _codes(**extra)


def test_every_violation_is_reported():
    codes = _codes(junctions=["S1", "S1", "S2", "R1", "R2"], plants=[])
    assert {"DuplicateId", "PlantlessNetwork"} <= codes


def test_constants_must_be_positive():
    with pytest.raises(InvalidParameter):
        CarrierConstants(c_s=0.0)


def test_bounds_ordering():
    with pytest.raises(InvalidParameter):
        OperationalBounds(T_min=c_to_k(160.0))
    with pytest.raises(InvalidParameter):
        OperationalBounds(T_ext=c_to_k(90.0))


def test_campus_census(campus):
    assert campus.census() == {
        "junctions": 134, "plants": 1, "loads": 45, "outgoing_pipes": 68, "return_pipes": 68, "pumps": 11,
    }
    assert campus.total_demand() == pytest.approx(15.14e6, rel=1e-12)


def test_campus_has_three_dominant_loads(campus):
    demands = sorted(campus.demands().values(), reverse=True)
    typical = sorted(demands)[len(demands) // 2]
    assert all(d > 3 * typical for d in demands[:3])
    assert demands[3] < demands[2]
    assert largest_load(campus) == max(campus.demands(), key=campus.demands().get)


def test_synthesis_is_deterministic():
    assert synth_network(campus_spec(7)) == synth_network(campus_spec(7))
    assert synth_network(campus_spec(7)) != synth_network(campus_spec(8))


def test_single_load_star():
    net = synth_network(SynthSpec(loads=1, out_pipes=1, ret_pipes=1, pumps=0, total_demand=1e6,
                                  dominant_shares=(1.0,)))
    assert net.census()["loads"] == 1
    assert net.total_demand() == pytest.approx(1e6)


def test_too_many_pumps():
    with pytest.raises(InfeasibleSpec):
        synth_network(SynthSpec(pumps=69))


def test_subsystems_are_disjoint_with_equal_pipe_counts(campus):
    g = nx.MultiDiGraph()
    for p in campus.pipes:
        g.add_edge(p.from_junction, p.to_junction)
    parts = list(nx.weakly_connected_components(g))
    assert len(parts) == 2
    assert len(campus.outgoing_pipes) == len(campus.return_pipes)


def test_rebuild_from_components_is_identity(campus):
    assert build_network(**campus.components()) == campus


def test_edge_order_is_plants_pipes_loads(mini):
    assert [e.kind for e in mini.edges] == ["plant", "pipe", "pipe", "load"]


def test_minimal_network_with_pump():
    net = minimal_network(pump_boost_max=psi_to_pa(5.0))
    assert [p.id for p in net.pumps] == ["PR1"]


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_pressure_round_trip(v):
    assert pa_to_psi(psi_to_pa(v)) == pytest.approx(v, rel=1e-9, abs=1e-12)
    assert from_si(to_si(v, "pressure", "psi"), "pressure", "psi") == pytest.approx(v, rel=1e-9, abs=1e-12)


@given(st.floats(min_value=-200.0, max_value=1000.0, allow_nan=False))
def test_temperature_round_trip(v):
    assert k_to_c(c_to_k(v)) == pytest.approx(v, rel=1e-9, abs=1e-9)
