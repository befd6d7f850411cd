import csv
import json

import pytest

from hubcap.metrics import (COMPARISON_COLUMNS, NetworkMetrics, compare_plans, compute_network_metrics,
                            resilience_slope, write_comparison_csv, write_comparison_json)
from hubcap.network import Node, build_network
from hubcap.simulator import KpiReport
from hubcap.solver import DeploymentPlan, RoutingSolution


def star():
    nodes = [Node("O1", "origin", 32.0, -85.0), Node("O2", "origin", 32.5, -85.0),
             Node("H1", "hub", 33.0, -84.0), Node("H2", "hub", 33.2, -84.0), Node("H3", "hub", 33.4, -84.0),
             Node("D1", "destination", 34.0, -83.0), Node("D2", "destination", 34.5, -83.0)]
    arcs = [(o, h, 1.0, 1.0) for o in ("O1", "O2") for h in ("H1", "H2", "H3")]
    arcs += [(h, d, 1.0, 1.0) for h in ("H1", "H2", "H3") for d in ("D1", "D2")]
    arcs += [("H1", "H2", 1.0, 1.0)]
    return build_network(nodes, arcs)


def routing(arc_units):
    flows = {(("O1", "D1"), a): u for a, u in arc_units.items()}
    return RoutingSolution(flows, {}, {}, {})


def test_capacity_arithmetic():
    plan = DeploymentPlan.from_capacities({"H1": 10, "H2": 30, "H3": 0})
    m = compute_network_metrics(plan, star())
    assert (m.total_throughput_capacity, m.active_hub_count, m.avg_hub_capacity) == (40, 2, 20.0)


def test_flow_connectivity_counts_distinct_neighbours():
    plan = DeploymentPlan.from_capacities({"H1": 5, "H2": 0, "H3": 0})
    r = routing({"O1->H1": 1, "O2->H1": 2, "H1->D1": 2, "H1->D2": 1, "H1->H2": 0})
    m = compute_network_metrics(plan, star(), [r])
    assert m.hub_connectivity == 4.0
    assert m.source == "flow"


def test_all_closed():
    plan = DeploymentPlan.closed(["H1", "H2", "H3"])
    m = compute_network_metrics(plan, star())
    assert m == NetworkMetrics(0, 0, 0.0, 0.0, "designed")


def test_designed_degree_bounds_flow_degree():
    net = star()
    plan = DeploymentPlan.from_capacities({"H1": 5, "H2": 5, "H3": 0})
    r = routing({"O1->H1": 3, "H1->H2": 3, "H2->D1": 3})
    flow = compute_network_metrics(plan, net, [r])
    designed = compute_network_metrics(plan, net)
    assert designed.hub_connectivity >= flow.hub_connectivity
    # designed: H1 sees O1,O2,D1,D2,H2 and H2 sees O1,O2,D1,D2,H1
    assert designed.hub_connectivity == 5.0
    assert compute_network_metrics(plan, net, degree_scope="hubs").hub_connectivity == 1.0
    with pytest.raises(ValueError):
        compute_network_metrics(plan, net, degree_scope="edges")


def kpi(rate, cost=10.0):
    return KpiReport(rate, cost, cost / 2, cost / 4, cost / 4)


def test_resilience_slope():
    assert resilience_slope({1: kpi(0.9), 4: kpi(0.9)}) == 0.0
    assert resilience_slope({"L1": kpi(0.95), "L4": kpi(0.8)}) == pytest.approx(0.15)


def test_identical_plans_give_identical_rows(tmp_path):
    m = NetworkMetrics(40, 2, 20.0, 3.5)
    kp = {lv: kpi(1.0 - 0.05 * lv) for lv in (1, 2, 3, 4)}
    rows = compare_plans({"A": (m, kp), "B": (m, kp)})
    assert len(rows) == 8
    for a, b in zip(rows[:4], rows[4:]):
        assert a["plan"] == "A" and b["plan"] == "B"
        assert {k: v for k, v in a.items() if k != "plan"} == {k: v for k, v in b.items() if k != "plan"}
    assert rows[0]["resilience_slope"] == pytest.approx(0.15)


def test_comparison_columns_and_files(tmp_path):
    m = NetworkMetrics(481, 9, 481 / 9, 3.06)
    rows = compare_plans({"BDN": (m, {1: kpi(0.9)}), "ISN": (m, {1: kpi(0.95), 4: kpi(0.9)})})
    assert rows[0]["resilience_slope"] is None
    assert rows[0]["avg_capacity"] == 53.4 and rows[0]["connectivity"] == 3.1
    write_comparison_csv(tmp_path / "c.csv", rows)
    write_comparison_json(tmp_path / "c.json", rows)
    with (tmp_path / "c.csv").open() as fh:
        got = list(csv.DictReader(fh))
    assert list(got[0]) == COMPARISON_COLUMNS
    assert {"capacity", "active_hubs", "avg_capacity", "connectivity"} <= set(COMPARISON_COLUMNS)
    assert json.loads((tmp_path / "c.json").read_text())["columns"] == COMPARISON_COLUMNS


def test_compare_needs_two_plans():
    with pytest.raises(ValueError):
        compare_plans({"A": (NetworkMetrics(0, 0, 0.0, 0.0), {1: kpi(1.0)})})
