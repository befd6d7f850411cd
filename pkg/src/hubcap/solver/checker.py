"""Independent feasibility checker for deployment plans and routings.

Works from raw network, economics and scenario data only (no model indices)
so it can audit any solver. Each routing is checked against per-OD flow
conservation, truckloads, hub throughput, budget linkage and integrality.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from ..errors import ConstraintViolation
from ..network import DEFAULT_DELAY_MULTIPLIER, scenario_travel_time
from ..scenarios import pair_key


@dataclass
class AuditLog:
    checked: int = 0
    violations: int = 0

    def reset(self):
        self.checked = 0
        self.violations = 0


# process-wide tally of every checked solution
AUDIT = AuditLog()


def _is_nat(v) -> bool:
    try:
        return v >= 0 and float(v) == int(v)
    except (TypeError, ValueError, OverflowError):
        return False


def check_plan(plan, econ) -> list[str]:
    out = []
    b = econ.capacity_cap
    for h in econ.hubs:
        if h not in plan.open:
            out.append(f"plan: hub {h} missing")
            continue
        x, c = plan.open[h], plan.capacity[h]
        if x not in (0, 1):
            out.append(f"integrality: X[{h}]={x} not binary")
        if not _is_nat(c):
            out.append(f"integrality: C[{h}]={c} not a natural number")
        if c > b * x:
            out.append(f"budget link: C[{h}]={c} > b*X = {b * x}")
    return out


def check_routing(network, econ, scenario, plan, routing, delay_multiplier=DEFAULT_DELAY_MULTIPLIER,
                  label="") -> list[str]:
    out = []
    m = econ.truckload
    tag = f"[{label}] " if label else ""
    arcs = {a.id: a for a in network.arcs}
    per_od = defaultdict(lambda: defaultdict(int))
    for (pair, a), units in routing.flows.items():
        if a not in arcs:
            out.append(f"{tag}flow on unknown arc {a}")
            continue
        if not _is_nat(units):
            out.append(f"{tag}integrality: F[{pair_key(pair)},{a}]={units} not a natural number")
        per_od[pair][a] += units
        o, d = pair
        arc = arcs[a]
        if arc.tail != o and not network.is_hub(arc.tail):
            out.append(f"{tag}freight of {pair_key(pair)} leaves non-hub {arc.tail}")
        if arc.head != d and not network.is_hub(arc.head):
            out.append(f"{tag}freight of {pair_key(pair)} enters non-hub {arc.head}")

    pairs = set(scenario.demand) | set(per_od) | set(routing.unserved)
    for pair in sorted(pairs):
        o, d = pair
        q = scenario.demand.get(pair, 0)
        u = routing.unserved.get(pair, 0)
        if not _is_nat(u) or u > q:
            out.append(f"{tag}unserved {pair_key(pair)}={u} outside [0, {q}]")
        served = q - u
        fl = per_od.get(pair, {})
        outflow = sum(fl.get(a.id, 0) for a in network.out_arcs(o))
        inflow_o = sum(fl.get(a.id, 0) for a in network.in_arcs(o))
        if outflow - inflow_o != served:
            out.append(f"{tag}origin balance: outflow of {pair_key(pair)} is {outflow - inflow_o}, expected {served}")
        inflow = sum(fl.get(a.id, 0) for a in network.in_arcs(d))
        outflow_d = sum(fl.get(a.id, 0) for a in network.out_arcs(d))
        if inflow - outflow_d != served:
            out.append(f"{tag}destination balance: inflow of {pair_key(pair)} is {inflow - outflow_d}, expected {served}")
        for h in network.hubs:
            ins = sum(fl.get(a.id, 0) for a in network.in_arcs(h))
            outs = sum(fl.get(a.id, 0) for a in network.out_arcs(h))
            if ins != outs:
                out.append(f"{tag}hub balance: hub {h} unbalanced for {pair_key(pair)}: in {ins}, out {outs}")

    load = defaultdict(int)
    for (_, a), units in routing.flows.items():
        load[a] += units
    for a in set(load) | set(routing.trucks):
        tr = routing.trucks.get(a, 0)
        if not _is_nat(tr):
            out.append(f"{tag}integrality: Tr[{a}]={tr} not a natural number")
        if load[a] > m * tr:
            out.append(f"{tag}truckload: arc {a} carries {load[a]} > m*Tr = {m * tr}")

    for h in network.hubs:
        inbound = sum(load.get(a.id, 0) for a in network.in_arcs(h))
        cap = plan.capacity.get(h, 0)
        if inbound > cap:
            out.append(f"{tag}hub capacity: hub {h} inbound {inbound} > C = {cap}")

    fleet = math.fsum(arcs[a].fleet_cost_rate * scenario_travel_time(arcs[a], scenario.disrupted_hubs,
                                                                      delay_multiplier) * tr
                      for a, tr in routing.trucks.items() if a in arcs)
    if not math.isclose(fleet, routing.fleet_cost, rel_tol=1e-9, abs_tol=1e-9):
        out.append(f"{tag}fleet cost {routing.fleet_cost} disagrees with recomputed {fleet}")

    for pair, path, units in routing.paths:
        prev = pair[0]
        for a in path:
            if a not in arcs or arcs[a].tail != prev:
                out.append(f"{tag}path for {pair_key(pair)} is not contiguous at {a}")
                break
            prev = arcs[a].head
        else:
            if prev != pair[1]:
                out.append(f"{tag}path for {pair_key(pair)} ends at {prev}")
    return out


def check_solution(network, econ, scenarios, plan, routings, delay_multiplier=DEFAULT_DELAY_MULTIPLIER,
                   record=True) -> list[str]:
    """All constraint violations of ``plan`` + one routing per scenario."""
    out = check_plan(plan, econ)
    scenarios = list(scenarios)
    if len(routings) != len(scenarios):
        out.append(f"{len(routings)} routings for {len(scenarios)} scenarios")
    for i, (s, r) in enumerate(zip(scenarios, routings)):
        out += check_routing(network, econ, s, plan, r, delay_multiplier, label=f"scenario {i}")
    if record:
        AUDIT.checked += 1
        AUDIT.violations += len(out)
    return out


def assert_feasible(network, econ, scenarios, plan, routings, delay_multiplier=DEFAULT_DELAY_MULTIPLIER):
    bad = check_solution(network, econ, scenarios, plan, routings, delay_multiplier)
    if bad:
        raise ConstraintViolation(bad)


def recompute_objective(econ, scenarios, plan, routings, overflow_penalty) -> float:
    first = math.fsum(econ.fixed_cost[h] * plan.open[h] + econ.unit_capacity_cost[h] * plan.capacity[h]
                      for h in econ.hubs)
    second = math.fsum(s.weight * (r.fleet_cost + (overflow_penalty or 0.0) * sum(r.unserved.values()))
                       for s, r in zip(scenarios, routings))
    return first + second
