"""Solving the deployment model and its second-stage routing problems."""

from __future__ import annotations

import logging
import math
import time
from collections import defaultdict

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from ..errors import Infeasible, TimedOut
from ..network import DEFAULT_DELAY_MULTIPLIER, Network
from ..scenarios import Scenario, ScenarioSet
from .bnb import MilpProblem, branch_and_bound, gap_of
from .checker import assert_feasible
from .model import ModelInstance, build_extensive_form, default_overflow_penalty
from .types import DeploymentPlan, RoutingSolution, SolveReport, truck_count

log = logging.getLogger(__name__)

ENGINES = ("bnb", "highs", "heuristic")
FLOW_EPS = 1e-9


def _problem(model: ModelInstance) -> MilpProblem:
    return MilpProblem(model.c, model.A_ub, model.b_ub, model.A_eq, model.b_eq, model.lb, model.ub,
                       model.integrality, model.priority)


def decompose_paths(network: Network, origin: str, arc_flow: dict[str, float], eps=FLOW_EPS):
    """Split one origin's arc flow into origin-to-destination path bundles.

    Flow cycles among hubs carry no freight anywhere and are cancelled.
    Returns ``[(destination, arcs, amount), ...]``; amounts are integral
    whenever ``arc_flow`` is.
    """
    residual = {a: v for a, v in arc_flow.items() if v > eps}
    paths = []

    def next_arc(v):
        for a in network.out_arcs(v):
            if residual.get(a.id, 0) > eps:
                return a
        return None

    while True:
        if next_arc(origin) is None:
            break
        path, pos, v = [], {origin: 0}, origin
        stuck = False
        while v == origin or network.is_hub(v):
            a = next_arc(v)
            if a is None:
                stuck = True
                break
            path.append(a.id)
            v = a.head
            if v in pos:
                cyc = path[pos[v]:]
                amt = min(residual[c] for c in cyc)
                for c in cyc:
                    residual[c] -= amt
                del path[pos[v]:]
                for k in [k for k, p in pos.items() if p > pos[v]]:
                    del pos[k]
            else:
                pos[v] = len(path)
        if stuck:
            amt = min(residual[c] for c in path) if path else 0.0
            if amt > 1e-6:
                raise RuntimeError(f"flow of origin {origin} violates conservation near {v}")
            for c in path:
                residual[c] -= amt
            if not path:
                break
            continue
        amt = min(residual[c] for c in path)
        for c in path:
            residual[c] -= amt
        paths.append((v, tuple(path), amt))
    return paths


def _routing_from_paths(network, econ, scenario, travel, od_paths, unserved, penalty):
    flows = defaultdict(int)
    merged = defaultdict(int)
    for pair, arcs, units in od_paths:
        if units <= 0:
            continue
        merged[(pair, arcs)] += units
    paths = [(p, arcs, u) for (p, arcs), u in sorted(merged.items())]
    for pair, arcs, units in paths:
        for a in arcs:
            flows[(pair, a)] += units
    load = defaultdict(int)
    for (_, a), u in flows.items():
        load[a] += u
    trucks = {a: truck_count(load[a], econ.truckload) for a in sorted(load)}
    fleet = math.fsum(network.arc(a).fleet_cost_rate * travel[a] * t for a, t in trucks.items())
    unserved = {p: int(u) for p, u in sorted(unserved.items()) if u}
    pen = (penalty or 0.0) * sum(unserved.values())
    return RoutingSolution(dict(sorted(flows.items())), trucks, unserved, dict(travel), paths, fleet, pen,
                           frozenset(scenario.disrupted_hubs))


def _extract(model: ModelInstance, x: np.ndarray):
    xi = np.round(x).astype(np.int64)
    plan = DeploymentPlan({h: int(xi[j]) for h, j in model.x_idx.items()},
                          {h: int(xi[j]) for h, j in model.c_idx.items()})
    routings = []
    for w, scen in enumerate(model.scenarios):
        unserved = {p: int(xi[j]) for p, j in model.u_idx[w].items()}
        od_paths = []
        for o, arcs in model.commodity_arcs.items():
            flow = {a: int(xi[model.f_idx[w][(o, a)]]) for a in arcs}
            for d, path, units in decompose_paths(model.network, o, flow):
                od_paths.append(((o, d), path, int(round(units))))
        routings.append(_routing_from_paths(model.network, model.econ, scen, model.travel[w], od_paths,
                                            unserved, model.overflow_penalty))
    return plan, routings


def _costs(model, plan, routings):
    first = plan.first_stage_cost(model.econ)
    second = math.fsum(s.weight * r.cost for s, r in zip(model.scenarios, routings))
    return first, second


def _tie_weights(model: ModelInstance) -> np.ndarray:
    """Secondary objective: total capacity, then open hubs, then hub id order."""
    H = len(model.hubs)
    w = np.zeros(model.n_cols)
    for i, h in enumerate(model.hubs):
        w[model.c_idx[h]] = (H + 1) * 2.0 ** H
        w[model.x_idx[h]] = 2.0 ** H + 2.0 ** i
    return w


def _with_objective_cap(prob: MilpProblem, cap: float, new_c) -> MilpProblem:
    row = sp.csr_matrix(prob.c.reshape(1, -1))
    A_ub = row if prob.A_ub is None else sp.vstack([prob.A_ub, row]).tocsr()
    b_ub = np.array([cap]) if prob.b_ub is None else np.append(prob.b_ub, cap)
    return MilpProblem(new_c, A_ub, b_ub, prob.A_eq, prob.b_eq, prob.lb, prob.ub, prob.integrality,
                       prob.priority)


def _highs(prob: MilpProblem, gap_tol, time_limit):
    cons = []
    if prob.A_ub is not None:
        cons.append(LinearConstraint(prob.A_ub, -np.inf, prob.b_ub))
    if prob.A_eq is not None:
        cons.append(LinearConstraint(prob.A_eq, prob.b_eq, prob.b_eq))
    opts = {"disp": False, "mip_rel_gap": gap_tol}
    if time_limit is not None:
        opts["time_limit"] = float(time_limit)
    res = milp(prob.c, integrality=prob.integrality, bounds=Bounds(prob.lb, prob.ub), constraints=cons,
               options=opts)
    if res.status == 2:
        raise Infeasible("model is infeasible")
    if res.x is None:
        if res.status == 1:
            raise TimedOut("time limit reached before an integral solution was found")
        raise RuntimeError(f"HiGHS failed: {res.message}")
    status = "optimal" if res.status == 0 else "timed_out"
    bound = getattr(res, "mip_dual_bound", None)
    if bound is None or not np.isfinite(bound):
        bound = float(res.fun)
    return res.x, float(res.fun), float(bound), status, int(getattr(res, "mip_node_count", 0) or 0)


def _round_lp_solution(model: ModelInstance, x: np.ndarray):
    """Integral plan and routings from an LP point.

    Path flows are rounded by largest remainder per OD pair, trucks become
    ceil(load / m) and each hub's capacity is the largest inbound load over
    scenarios. Loads above the cap are shed to unserved demand.
    """
    b = model.econ.capacity_cap
    per_scen = []
    for w, scen in enumerate(model.scenarios):
        od_paths = defaultdict(list)
        for o, arcs in model.commodity_arcs.items():
            flow = {a: float(x[model.f_idx[w][(o, a)]]) for a in arcs}
            for d, path, amt in decompose_paths(model.network, o, flow, eps=1e-7):
                od_paths[(o, d)].append([path, amt])
        chosen = []
        unserved = {}
        for pair in model.pairs:
            q = scen.demand.get(pair, 0)
            plist = od_paths.get(pair, [])
            lp_served = sum(a for _, a in plist)
            served = min(q, int(math.floor(lp_served + 1e-6)))
            base = [int(math.floor(a + 1e-9)) for _, a in plist]
            left = served - sum(base)
            order = sorted(range(len(plist)), key=lambda i: (-(plist[i][1] - base[i]), i))
            for i in order[:max(0, left)]:
                base[i] += 1
            for (path, _), units in zip(plist, base):
                if units > 0:
                    chosen.append([pair, path, units])
            unserved[pair] = q - sum(base)
        per_scen.append((chosen, unserved))

    arcs = {a.id: a for a in model.network.arcs}

    def inbound(chosen):
        load = defaultdict(int)
        for _, path, u in chosen:
            for a in path:
                if model.network.is_hub(arcs[a].head):
                    load[arcs[a].head] += u
        return load

    for chosen, unserved in per_scen:
        load = inbound(chosen)
        for h in model.hubs:
            excess = load.get(h, 0) - b
            # shed the largest bundles through an over-cap hub first
            for item in sorted((c for c in chosen if any(arcs[a].head == h for a in c[1])),
                               key=lambda c: -c[2]):
                if excess <= 0:
                    break
                cut = min(item[2], excess)
                item[2] -= cut
                unserved[item[0]] += cut
                excess -= cut
                load = inbound(chosen)
                excess = load.get(h, 0) - b

    cap = {h: 0 for h in model.hubs}
    for chosen, _ in per_scen:
        for h, v in inbound(chosen).items():
            cap[h] = max(cap[h], v)
    plan = DeploymentPlan.from_capacities(cap)
    routings = []
    for w, (chosen, unserved) in enumerate(per_scen):
        od_paths = [(p, tuple(path), u) for p, path, u in chosen if u > 0]
        routings.append(_routing_from_paths(model.network, model.econ, model.scenarios[w], model.travel[w],
                                            od_paths, unserved, model.overflow_penalty))
    return plan, routings


def solve(model: ModelInstance, gap_tol=1e-6, time_limit=None, seed=0, engine="bnb", tie_break=None,
          node_limit=None, check=True) -> SolveReport:
    """Solve the extensive form.

    ``engine`` selects the in-house branch-and-bound (``"bnb"``), the HiGHS
    MILP solver (``"highs"``) for instances too large for the former, or the
    LP-rounding heuristic (``"heuristic"``) which returns a feasible plan and
    the gap to the LP bound. ``seed`` is recorded for reproducibility; every
    engine is deterministic.

    ``tie_break`` (default on for the exact engines) runs a second pass that keeps the
    objective within 1e-9 relative of the first pass and picks the smallest
    total capacity, then fewest open hubs, then lowest hub ids.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    if tie_break is None:
        tie_break = engine != "heuristic"
    t0 = time.monotonic()
    prob = _problem(model)
    history = []
    nodes = 0

    if engine == "heuristic":
        res = linprog(prob.c, A_ub=prob.A_ub, b_ub=prob.b_ub, A_eq=prob.A_eq, b_eq=prob.b_eq,
                      bounds=np.column_stack([prob.lb, prob.ub]), method="highs")
        if res.status == 2:
            raise Infeasible("LP relaxation is infeasible")
        if res.status != 0:
            raise RuntimeError(f"LP relaxation failed: {res.message}")
        bound = float(res.fun)
        plan, routings = _round_lp_solution(model, res.x)
        status = "heuristic"
        history = [bound]
    else:
        if engine == "bnb":
            r = branch_and_bound(prob, gap_tol, time_limit, node_limit)
            x, z, bound, status, nodes, history = r.x, r.objective, r.bound, r.status, r.nodes, r.bound_history
        else:
            x, z, bound, status, nodes = _highs(prob, gap_tol, time_limit)
            history = [bound]
        if tie_break and status == "optimal" and len(model.hubs) > 0:
            cap = z + 1e-9 * max(1.0, abs(z))
            prob2 = _with_objective_cap(prob, cap, _tie_weights(model))
            remaining = None if time_limit is None else max(1.0, time_limit - (time.monotonic() - t0))
            try:
                if engine == "bnb":
                    x = branch_and_bound(prob2, 0.0, remaining, node_limit).x
                else:
                    x = _highs(prob2, 0.0, remaining)[0]
            except (Infeasible, TimedOut):
                log.warning("tie-break pass failed; keeping first-pass solution")
        plan, routings = _extract(model, x)

    if check:
        assert_feasible(model.network, model.econ, model.scenarios, plan, routings, model.delay_multiplier)
    first, second = _costs(model, plan, routings)
    objective = first + second
    bound = min(bound, objective)
    gap = gap_of(objective, bound)
    if history:
        history = [min(h, objective) for h in history]
    return SolveReport(plan=plan, routings=routings, objective=objective, first_stage_cost=first,
                       expected_second_stage_cost=second, optimality_gap=gap, lower_bound=bound,
                       status=status, engine=engine, node_count=nodes, wall_time=time.monotonic() - t0,
                       bound_history=history, weights=model.weights)


def solve_saa(network, econ, scenarios: ScenarioSet, overflow_penalty="default",
              delay_multiplier=DEFAULT_DELAY_MULTIPLIER, **kw) -> SolveReport:
    """Build and solve in one call. ``overflow_penalty="default"`` picks the standard penalty."""
    if overflow_penalty == "default":
        overflow_penalty = default_overflow_penalty(network, scenarios.pairs, delay_multiplier)
    model = build_extensive_form(network, econ, scenarios, overflow_penalty, delay_multiplier)
    return solve(model, **kw)


def solve_second_stage(plan: DeploymentPlan, network: Network, econ, scenario: Scenario, overflow_penalty,
                       delay_multiplier=DEFAULT_DELAY_MULTIPLIER, engine="highs", gap_tol=1e-9,
                       check=True) -> RoutingSolution:
    """Cheapest integral routing of one scenario with the plan's capacities fixed.

    Units that cannot be routed through open capacity come back as unserved.
    """
    single = ScenarioSet([Scenario(dict(scenario.demand), scenario.disrupted_hubs, 1.0)])
    model = build_extensive_form(network, econ, single, overflow_penalty, delay_multiplier, fixed_plan=plan,
                                 check_reachability=False)
    rep = solve(model, gap_tol=gap_tol, engine=engine, tie_break=False, check=False)
    routing = rep.routings[0]
    if check:
        assert_feasible(network, econ, [single[0]], plan, [routing], delay_multiplier)
    return routing
