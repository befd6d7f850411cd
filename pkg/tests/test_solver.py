import json
import math
import random

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from hubcap.errors import Infeasible, TimedOut, UnreachableDemand
from hubcap.network import HubEconomics, Node, build_network
from hubcap.scenarios import Scenario, ScenarioSet
from hubcap.solver import (AUDIT, DeploymentPlan, build_extensive_form, check_solution, default_overflow_penalty,
                           recompute_objective, solve, solve_saa, solve_second_stage, to_lp, truck_count)
from hubcap.solver.bnb import gap_of

from oracles import enumerate_optimum, random_tiny_instance

PAIR = ("O", "D")


def tiny(demand=5, m=5, f=10.0, s=1.0, b=10, hubs=("H",), times=None, rate=0.0):
    nodes = [Node("O", "origin", 33.0, -85.0), Node("D", "destination", 34.0, -83.0)]
    nodes += [Node(h, "hub", 33.5, -84.0 + i) for i, h in enumerate(hubs)]
    arcs = []
    for h in hubs:
        t_in, t_out = (times or {}).get(h, (1.0, 1.0))
        arcs += [("O", h, t_in, 1.0), (h, "D", t_out, 1.0)]
    net = build_network(nodes, arcs, demand_pairs=[PAIR])
    econ = HubEconomics.uniform(list(hubs), f, s, rate, truckload=m, capacity_cap=b)
    ss = ScenarioSet([Scenario({PAIR: demand}, frozenset(), 1.0)])
    return net, econ, ss


@pytest.mark.parametrize("flow,m,trucks", [(10, 4, 3), (0, 7, 0), (5, 5, 1), (6, 5, 2), (1, 1, 1)])
def test_truck_count(flow, m, trucks):
    assert truck_count(flow, m) == trucks


def test_truck_count_rejects_bad_truckload():
    with pytest.raises(ValueError):
        truck_count(3, 0)


def test_model_counts_for_single_relay():
    net, econ, ss = tiny()
    model = build_extensive_form(net, econ, ss, overflow_penalty=100.0)
    assert model.counts() == {"open": 1, "capacity": 1, "flow": 2, "truck": 2, "slack": 1}


def test_unit_truckload_substitutes_trucks_by_flow():
    net, econ, ss = tiny(demand=6, m=1)
    model = build_extensive_form(net, econ, ss, overflow_penalty=100.0)
    assert model.counts()["truck"] == 0
    rep = solve(model)
    # 10 fixed + 6 capacity + 6 trucks on each of two 1-hour legs
    assert rep.objective == pytest.approx(28.0, abs=1e-9)
    assert rep.routings[0].trucks == {"O->H": 6, "H->D": 6}


def test_pure_model_has_no_slack_and_can_be_infeasible():
    net, econ, ss = tiny(demand=12, b=10)
    model = build_extensive_form(net, econ, ss, overflow_penalty=None)
    assert model.counts()["slack"] == 0
    with pytest.raises(Infeasible):
        solve(model)


@pytest.mark.parametrize("engine", ["bnb", "highs"])
def test_worked_example_demand_5(engine):
    net, econ, ss = tiny()
    rep = solve_saa(net, econ, ss, engine=engine)
    assert rep.objective == pytest.approx(17.0, abs=1e-9)
    assert rep.plan.open == {"H": 1} and rep.plan.capacity == {"H": 5}
    assert rep.routings[0].trucks == {"O->H": 1, "H->D": 1}
    assert rep.status == "optimal" and rep.optimality_gap <= 1e-6


@pytest.mark.parametrize("engine", ["bnb", "highs"])
def test_worked_example_demand_6(engine):
    net, econ, ss = tiny(demand=6)
    rep = solve_saa(net, econ, ss, engine=engine)
    assert rep.objective == pytest.approx(20.0, abs=1e-9)
    assert rep.routings[0].trucks == {"O->H": 2, "H->D": 2}


@pytest.mark.parametrize("engine", ["bnb", "highs", "heuristic"])
def test_worked_example_demand_0(engine):
    net, econ, ss = tiny(demand=0)
    rep = solve_saa(net, econ, ss, engine=engine)
    assert rep.objective == 0.0
    assert rep.plan.open == {"H": 0}


def test_worked_example_matches_oracle():
    for q, expect in ((5, 17.0), (6, 20.0), (0, 0.0)):
        net, econ, ss = tiny(demand=q)
        val, _ = enumerate_optimum(net, econ, ss, default_overflow_penalty(net, ss.pairs))
        assert val == expect


def test_heuristic_on_worked_example_is_feasible_upper_bound():
    net, econ, ss = tiny(demand=6)
    rep = solve_saa(net, econ, ss, engine="heuristic")
    assert rep.objective >= 20.0 - 1e-9
    assert rep.lower_bound <= 20.0 + 1e-9
    assert rep.optimality_gap == pytest.approx(gap_of(rep.objective, rep.lower_bound))


def test_unreachable_demand_reported_per_pair():
    net, econ, _ = tiny()
    ss = ScenarioSet([Scenario({("O", "D"): 1, ("O", "X"): 2}, frozenset(), 1.0)])
    with pytest.raises(UnreachableDemand) as err:
        build_extensive_form(net, econ, ss, 10.0)
    assert ("O", "X") in err.value.pairs


def test_second_stage_all_closed_goes_unserved():
    net, econ, ss = tiny()
    r = solve_second_stage(DeploymentPlan.closed(["H"]), net, econ, ss[0], overflow_penalty=50.0)
    assert r.unserved == {PAIR: 5}
    assert r.flows == {}
    assert r.cost == 250.0


def test_second_stage_with_capacity_routes_everything():
    net, econ, ss = tiny()
    r = solve_second_stage(DeploymentPlan.from_capacities({"H": 5}), net, econ, ss[0], overflow_penalty=50.0)
    assert r.total_unserved == 0
    assert r.arc_flow() == {"O->H": 5, "H->D": 5}


def test_second_stage_avoids_disrupted_hub():
    net, econ, _ = tiny(hubs=("H", "H2"))
    plan = DeploymentPlan.from_capacities({"H": 10, "H2": 10})
    scen = Scenario({PAIR: 5}, frozenset({"H"}), 1.0)
    r = solve_second_stage(plan, net, econ, scen, overflow_penalty=100.0)
    assert r.arc_flow() == {"O->H2": 5, "H2->D": 5}


def test_second_stage_partial_capacity_sheds_excess():
    net, econ, ss = tiny(demand=8, m=1)
    r = solve_second_stage(DeploymentPlan.from_capacities({"H": 3}), net, econ, ss[0], overflow_penalty=100.0)
    assert r.total_unserved == 5
    assert r.arc_flow()["O->H"] == 3


def test_zero_demand_scenario_set():
    net, econ, _ = tiny()
    ss = ScenarioSet.uniform([{PAIR: 0}] * 3)
    rep = solve_saa(net, econ, ss)
    assert rep.objective == 0.0 and rep.plan.total_capacity == 0


def test_two_hubs_tie_break_prefers_lower_id():
    net, econ, ss = tiny(hubs=("H1", "H2"))
    rep = solve_saa(net, econ, ss)
    assert rep.plan.capacity == {"H1": 5, "H2": 0}


def test_report_json_is_deterministic(tmp_path):
    net, econ, ss = tiny(hubs=("H1", "H2"), demand=7, m=3)
    a = solve_saa(net, econ, ss)
    b = solve_saa(net, econ, ss)
    a.to_json(tmp_path / "a.json")
    b.to_json(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    body = json.loads((tmp_path / "a.json").read_text())
    assert body["plan"]["hubs"]["H1"]["capacity"] == 7
    assert body["bound_history"]


def test_lp_dump_has_all_sections():
    net, econ, ss = tiny()
    text = to_lp(build_extensive_form(net, econ, ss, 60.0))
    for head in ("Minimize", "Subject To", "Bounds", "General", "End"):
        assert head in text


def test_checker_flags_broken_solutions():
    net, econ, ss = tiny()
    rep = solve_saa(net, econ, ss)
    before = AUDIT.violations
    r = rep.routings[0]
    bad_trucks = type(r)(dict(r.flows), {"O->H": 0, "H->D": 1}, dict(r.unserved), dict(r.travel_time),
                         list(r.paths), r.fleet_cost, r.penalty_cost)
    msgs = check_solution(net, econ, ss, rep.plan, [bad_trucks], record=False)
    assert any("truckload" in m for m in msgs)
    small = DeploymentPlan.from_capacities({"H": 4})
    msgs = check_solution(net, econ, ss, small, rep.routings, record=False)
    assert any("hub capacity" in m for m in msgs)
    over = DeploymentPlan.from_capacities({"H": 11})
    assert any("budget link" in m for m in check_solution(net, econ, ss, over, rep.routings, record=False))
    assert AUDIT.violations == before


def test_objective_recomputes():
    net, econ, ss = tiny(hubs=("H1", "H2"), demand=9, m=4)
    pen = default_overflow_penalty(net, ss.pairs)
    rep = solve_saa(net, econ, ss, overflow_penalty=pen)
    again = recompute_objective(econ, ss, rep.plan, rep.routings, pen)
    assert again == pytest.approx(rep.objective, rel=1e-12)
    assert rep.objective == pytest.approx(rep.first_stage_cost + rep.expected_second_stage_cost, rel=1e-12)


def test_bnb_bound_history_monotone_and_gap_closed():
    rng = random.Random(5)
    for _ in range(10):
        net, econ, ss, pen = random_tiny_instance(rng)
        rep = solve(build_extensive_form(net, econ, ss, pen), engine="bnb", gap_tol=1e-6)
        h = rep.bound_history
        assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(h, h[1:]))
        assert rep.optimality_gap <= 1e-6


@pytest.mark.parametrize("seed", range(30))
def test_oracle_integer_costs(seed):
    net, econ, ss, pen = random_tiny_instance(random.Random(1000 + seed))
    want, _ = enumerate_optimum(net, econ, ss, pen)
    got = solve(build_extensive_form(net, econ, ss, pen), gap_tol=1e-9)
    assert got.objective == want


@pytest.mark.parametrize("seed", range(15))
def test_oracle_float_costs(seed):
    net, econ, ss, pen = random_tiny_instance(random.Random(5000 + seed), integer_costs=False)
    want, _ = enumerate_optimum(net, econ, ss, pen)
    got = solve(build_extensive_form(net, econ, ss, pen), gap_tol=1e-12)
    assert got.objective == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_highs_engine_matches_oracle(seed):
    net, econ, ss, pen = random_tiny_instance(random.Random(7000 + seed))
    want, _ = enumerate_optimum(net, econ, ss, pen)
    got = solve(build_extensive_form(net, econ, ss, pen), engine="highs", gap_tol=1e-9)
    assert got.objective == pytest.approx(want, rel=1e-9, abs=1e-9)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6))
def test_heuristic_never_beats_the_optimum(seed):
    net, econ, ss, pen = random_tiny_instance(random.Random(seed))
    model = build_extensive_form(net, econ, ss, pen)
    exact = solve(model, gap_tol=1e-9)
    heur = solve(model, engine="heuristic")
    assert heur.objective >= exact.objective - 1e-7 * max(1.0, abs(exact.objective))
    assert heur.lower_bound <= exact.objective + 1e-7 * max(1.0, abs(exact.objective))


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_duplicating_a_scenario_keeps_objective(seed, copies):
    net, econ, ss, pen = random_tiny_instance(random.Random(seed))
    base = solve(build_extensive_form(net, econ, ss, pen), gap_tol=1e-9).objective
    first = ss[0]
    rest = list(ss)[1:]
    # give the first scenario `copies` twins while keeping its total weight
    w = first.weight / (copies + 1)
    twins = [Scenario(dict(first.demand), first.disrupted_hubs, w) for _ in range(copies + 1)]
    dup = ScenarioSet(twins + rest)
    again = solve(build_extensive_form(net, econ, dup, pen), gap_tol=1e-9).objective
    assert again == pytest.approx(base, rel=1e-9, abs=1e-9)


def test_identical_scenarios_equal_single_scenario():
    rng = random.Random(77)
    for _ in range(5):
        net, econ, ss, pen = random_tiny_instance(rng)
        one = ScenarioSet([Scenario(dict(ss[0].demand), frozenset(), 1.0)])
        many = ScenarioSet.uniform([dict(ss[0].demand)] * 50)
        a = solve(build_extensive_form(net, econ, one, pen), gap_tol=1e-9, engine="highs", tie_break=True)
        b = solve(build_extensive_form(net, econ, many, pen), gap_tol=1e-9, engine="highs", tie_break=True)
        assert b.plan.key() == a.plan.key()
        assert b.objective == pytest.approx(a.objective, rel=1e-12, abs=1e-12)


def test_unknown_engine():
    net, econ, ss = tiny()
    with pytest.raises(ValueError):
        solve(build_extensive_form(net, econ, ss, 60.0), engine="cplex")


def test_node_limit_returns_incumbent_or_raises():
    rng = random.Random(3)
    net, econ, ss, pen = random_tiny_instance(rng)
    model = build_extensive_form(net, econ, ss, pen)
    try:
        rep = solve(model, node_limit=1)
    except TimedOut:
        return
    assert rep.status in ("optimal", "timed_out")
    assert math.isfinite(rep.objective)
