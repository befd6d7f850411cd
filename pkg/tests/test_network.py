import math

import pytest

from hubcap.errors import DisconnectedDemandPair, DuplicateNodeId, HubcapError, InvalidArc
from hubcap.network import (Arc, HubEconomics, Node, build_network, haversine_km, read_arcs_csv,
                            read_economics_csv, read_nodes_csv, scenario_travel_time, write_arcs_csv,
                            write_economics_csv, write_nodes_csv)


def line_nodes():
    return [Node("O", "origin", 33.0, -85.0), Node("H", "hub", 33.5, -84.5), Node("D", "destination", 34.0, -84.0)]


def test_minimal_network_from_arcs():
    net = build_network(line_nodes(), [("O", "H", 1.0, 1.0), ("H", "D", 1.0, 1.0)], demand_pairs=[("O", "D")])
    assert [a.id for a in net.arcs] == ["O->H", "H->D"]
    assert net.has_relay_path("O", "D")
    assert net.origins == ["O"] and net.hubs == ["H"] and net.destinations == ["D"]


def test_leg_over_limit_is_dropped_and_pair_disconnected():
    with pytest.raises(DisconnectedDemandPair) as err:
        build_network(line_nodes(), [("O", "H", 6.0, 1.0), ("H", "D", 1.0, 1.0)], demand_pairs=[("O", "D")])
    assert err.value.pairs == [("O", "D")]
    assert "O->D" in str(err.value)


def test_direct_origin_destination_leg_dropped_in_relay_mode():
    net = build_network(line_nodes(), [("O", "D", 1.0, 1.0), ("O", "H", 1.0, 1.0), ("H", "D", 1.0, 1.0)])
    assert "O->D" not in {a.id for a in net.arcs}
    with pytest.raises(DisconnectedDemandPair):
        build_network(line_nodes(), [("O", "D", 1.0, 1.0)], demand_pairs=[("O", "D")])


def test_direct_leg_kept_when_relay_off():
    net = build_network(line_nodes(), [("O", "D", 1.0, 1.0)], relay_only=False, demand_pairs=[("O", "D")])
    assert net.has_relay_path("O", "D")


def test_duplicate_node_rejected():
    nodes = line_nodes() + [Node("H", "hub", 30.0, -80.0)]
    with pytest.raises(DuplicateNodeId):
        build_network(nodes, [])


def test_arc_into_origin_rejected():
    with pytest.raises(InvalidArc):
        build_network(line_nodes(), [("H", "O", 1.0, 1.0)])


def test_symmetric_edges_skip_inadmissible_direction():
    net = build_network(line_nodes(), [("O", "H", 1.0, 2.0), ("H", "D", 1.5, 2.0)], symmetric=True)
    assert sorted(a.id for a in net.arcs) == ["H->D", "O->H"]


def test_unknown_node_in_arc():
    with pytest.raises(InvalidArc):
        build_network(line_nodes(), [("O", "X", 1.0, 1.0)])


def test_bad_values_rejected():
    with pytest.raises(ValueError):
        Node("X", "warehouse", 0.0, 0.0)
    with pytest.raises(ValueError):
        Node("X", "hub", 95.0, 0.0)
    with pytest.raises(InvalidArc):
        Arc("a", "X", "X", 1.0, 1.0)
    with pytest.raises(InvalidArc):
        Arc("a", "X", "Y", 0.0, 1.0)


def test_auto_connect_uses_great_circle_time():
    nodes = line_nodes()
    net = build_network(nodes, auto_connect=True, speed=70.0)
    oh = net.arc("O->H")
    assert oh.base_travel_time == pytest.approx(haversine_km(33.0, -85.0, 33.5, -84.5) / 70.0)
    assert net.has_relay_path("O", "D")


def test_haversine_known_distance():
    # one degree of latitude is about 111.2 km
    assert haversine_km(0.0, 0.0, 1.0, 0.0) == pytest.approx(111.19, abs=0.05)


def test_relay_through_hub_chain_only():
    nodes = [Node("O", "origin", 0, 0), Node("H1", "hub", 0, 1), Node("D1", "destination", 0, 2),
             Node("D2", "destination", 0, 3)]
    net = build_network(nodes, [("O", "H1", 1, 1), ("H1", "D1", 1, 1)])
    assert net.has_relay_path("O", "D1")
    assert not net.has_relay_path("O", "D2")
    assert not net.has_relay_path("O", "D1", allowed_hubs=set())


def test_disruption_multiplies_touching_arcs():
    a = Arc("O->H", "O", "H", 2.0, 1.0)
    assert scenario_travel_time(a, frozenset()) == 2.0
    assert scenario_travel_time(a, {"H"}) == 6.0
    assert scenario_travel_time(a, {"H"}, 1.0) == 2.0
    assert scenario_travel_time(a, {"Z"}) == 2.0
    with pytest.raises(ValueError):
        scenario_travel_time(a, {"H"}, 0.5)


def test_economics_validation():
    with pytest.raises(ValueError):
        HubEconomics({"H": 1.0}, {"H": 1.0}, {"H": 1.5})
    with pytest.raises(ValueError):
        HubEconomics({"H": 1.0}, {"H": -1.0}, {"H": 0.1})
    with pytest.raises(ValueError):
        HubEconomics({"H": 1.0}, {"H": 1.0}, {"H": 0.1}, truckload=0)
    with pytest.raises(ValueError):
        HubEconomics({"H": 1.0}, {"G": 1.0}, {"H": 0.1})
    e = HubEconomics.uniform(["H1", "H2"], 10.0, 1.0, 0.2, truckload=5, capacity_cap=10)
    assert e.with_disruption_rates(0.0).disruption_rate == {"H1": 0.0, "H2": 0.0}


def test_csv_round_trip(tmp_path):
    nodes = line_nodes()
    net = build_network(nodes, [("O", "H", 1.25, 3.0), ("H", "D", 2.5, 3.0)])
    econ = HubEconomics({"H": 10.0}, {"H": 1.5}, {"H": 0.125}, truckload=5, capacity_cap=10)
    write_nodes_csv(tmp_path / "n.csv", nodes)
    write_arcs_csv(tmp_path / "a.csv", net.arcs)
    write_economics_csv(tmp_path / "e.csv", econ)
    assert read_nodes_csv(tmp_path / "n.csv") == nodes
    assert read_arcs_csv(tmp_path / "a.csv") == [("O", "H", 1.25, 3.0), ("H", "D", 2.5, 3.0)]
    back = read_economics_csv(tmp_path / "e.csv", 5, 10)
    assert back.fixed_cost == econ.fixed_cost and back.disruption_rate == econ.disruption_rate


def test_csv_errors_name_the_file(tmp_path):
    p = tmp_path / "nodes.csv"
    p.write_text("id,kind,lat\nO,origin,1\n")
    with pytest.raises(HubcapError, match="nodes.csv"):
        read_nodes_csv(p)
    p.write_text("id,kind,lat,lon\nO,origin,north,1\n")
    with pytest.raises(HubcapError, match=r"nodes.csv:2"):
        read_nodes_csv(p)


def test_economics_hub_mismatch():
    net = build_network(line_nodes(), [("O", "H", 1.0, 1.0), ("H", "D", 1.0, 1.0)])
    with pytest.raises(HubcapError):
        HubEconomics({"G": 1.0}, {"G": 1.0}, {"G": 0.0}).check_hubs(net)
    assert math.isfinite(net.arc("O->H").base_travel_time)
