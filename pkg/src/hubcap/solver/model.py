"""Extensive form of the sample-average two-stage deployment model.

Column layout: one open flag and one capacity per hub, then per scenario the
freight flows, truck counts and (optionally) unserved-demand slacks.

Freight flows are aggregated by origin: commodity ``o`` carries everything
shipped from ``o``. Hub conservation, truckload and hub capacity only involve
sums over commodities, so this model is equivalent to per-OD flows; per-OD
flows are recovered afterwards by path decomposition.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import UnreachableDemand
from ..network import DEFAULT_DELAY_MULTIPLIER, HubEconomics, Network, scenario_travel_time
from ..scenarios import Pair, ScenarioSet, pair_key
from .types import truck_count

# branching classes, lowest branched first
PRIO_OPEN, PRIO_CAPACITY, PRIO_TRUCK, PRIO_FLOW = 0, 1, 2, 3


class _Rows:
    def __init__(self):
        self.rows, self.cols, self.vals, self.rhs, self.names = [], [], [], [], []

    def add(self, coefs, rhs, name):
        r = len(self.rhs)
        for j, v in coefs:
            self.rows.append(r)
            self.cols.append(j)
            self.vals.append(v)
        self.rhs.append(rhs)
        self.names.append(name)

    def matrix(self, ncols):
        if not self.rhs:
            return None, None
        A = sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.rhs), ncols))
        return A, np.asarray(self.rhs, dtype=float)


@dataclass
class ModelInstance:
    network: Network
    econ: HubEconomics
    scenarios: ScenarioSet
    overflow_penalty: float | None
    delay_multiplier: float
    hubs: list[str]
    pairs: list[Pair]
    commodity_arcs: dict[str, list[str]]
    x_idx: dict[str, int]
    c_idx: dict[str, int]
    f_idx: list[dict[tuple[str, str], int]]
    tr_idx: list[dict[str, int]]
    u_idx: list[dict[Pair, int]]
    travel: list[dict[str, float]]
    c: np.ndarray
    A_ub: sp.csr_matrix | None
    b_ub: np.ndarray | None
    A_eq: sp.csr_matrix | None
    b_eq: np.ndarray | None
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    priority: np.ndarray
    col_names: list[str]
    ub_names: list[str] = field(default_factory=list)
    eq_names: list[str] = field(default_factory=list)

    @property
    def n_cols(self) -> int:
        return len(self.c)

    @property
    def weights(self) -> list[float]:
        return [s.weight for s in self.scenarios]

    def counts(self) -> dict[str, int]:
        return {
            "open": len(self.x_idx),
            "capacity": len(self.c_idx),
            "flow": sum(len(f) for f in self.f_idx),
            "truck": sum(len(t) for t in self.tr_idx),
            "slack": sum(len(u) for u in self.u_idx),
        }


def _commodity_arcs(network: Network, origin: str, dests: set[str], allowed_hubs=None) -> list[str]:
    """Arcs that can lie on a hub-relay path from ``origin`` to one of ``dests``."""
    fwd = network.relay_reachable(origin, allowed_hubs)
    # backward search from the destinations through hubs only
    back = set(dests)
    stack = list(dests)
    while stack:
        j = stack.pop()
        for a in network.in_arcs(j):
            i = a.tail
            if i in back:
                continue
            if network.is_hub(i) and (allowed_hubs is None or i in allowed_hubs):
                back.add(i)
                stack.append(i)
    keep = []
    for a in network.arcs:
        if a.tail not in fwd or a.head not in back:
            continue
        if a.tail != origin and not network.is_hub(a.tail):
            continue
        if not network.is_hub(a.head) and a.head not in dests:
            continue
        if network.relay_only and a.tail == origin and a.head in dests:
            continue
        keep.append(a.id)
    return keep


def cheapest_path_cost(network: Network, origin: str, destination: str, multiplier=1.0) -> float:
    """Cost of one dedicated truck on the cheapest hub-relay path (Dijkstra)."""
    dist = {origin: 0.0}
    heap = [(0.0, origin)]
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist.get(i, math.inf):
            continue
        if i == destination:
            return d
        if i != origin and not network.is_hub(i):
            continue
        for a in network.out_arcs(i):
            if network.relay_only and i == origin and a.head == destination:
                continue
            nd = d + a.fleet_cost_rate * a.base_travel_time * multiplier
            if nd < dist.get(a.head, math.inf):
                dist[a.head] = nd
                heapq.heappush(heap, (nd, a.head))
    return math.inf


def default_overflow_penalty(network: Network, pairs=None, delay_multiplier=DEFAULT_DELAY_MULTIPLIER) -> float:
    """Ten times the costliest pair's cheapest relay path under full disruption.

    ``pairs=None`` takes every origin-destination pair with a relay path.
    """
    if pairs is None:
        pairs = [(o, d) for o in network.origins for d in network.destinations if network.has_relay_path(o, d)]
    worst = 0.0
    for o, d in pairs:
        c = cheapest_path_cost(network, o, d, delay_multiplier)
        if math.isfinite(c):
            worst = max(worst, c)
    return 10.0 * worst if worst > 0 else 1.0


def build_extensive_form(network: Network, econ: HubEconomics, scenarios: ScenarioSet,
                         overflow_penalty: float | None = None, delay_multiplier=DEFAULT_DELAY_MULTIPLIER,
                         fixed_plan=None, check_reachability=True) -> ModelInstance:
    """Assemble the mixed-integer extensive form.

    ``overflow_penalty=None`` drops the unserved-demand slacks (pure model,
    may be infeasible). With a truckload of 1 the truck variables equal the
    arc loads and are substituted out. ``fixed_plan`` pins the open flags and capacities,
    which turns the model into the second-stage routing problem.
    """
    econ.check_hubs(network)
    hubs = sorted(network.hubs)
    m = econ.truckload
    b = econ.capacity_cap
    pairs = scenarios.pairs
    active_pairs = [p for p in pairs if any(s.demand.get(p, 0) > 0 for s in scenarios)]
    if check_reachability:
        bad = [p for p in active_pairs if not network.has_relay_path(*p)]
        if bad:
            raise UnreachableDemand(bad)

    dests_of: dict[str, set[str]] = {}
    for o, d in active_pairs:
        dests_of.setdefault(o, set()).add(d)
    origins = sorted(dests_of)
    allowed = None
    if fixed_plan is not None:
        allowed = {h for h in hubs if fixed_plan.capacity[h] > 0}
    commodity_arcs = {o: _commodity_arcs(network, o, dests_of[o], allowed) for o in origins}

    c, lb, ub, integ, prio, names = [], [], [], [], [], []

    def col(cost, lo, hi, is_int, pr, name):
        c.append(cost)
        lb.append(lo)
        ub.append(hi)
        integ.append(1 if is_int else 0)
        prio.append(pr)
        names.append(name)
        return len(c) - 1

    x_idx, c_idx = {}, {}
    for h in hubs:
        lo = hi = None
        if fixed_plan is not None:
            lo = hi = fixed_plan.open[h]
        x_idx[h] = col(econ.fixed_cost[h], 0 if lo is None else lo, 1 if hi is None else hi, True, PRIO_OPEN,
                       f"X[{h}]")
    for h in hubs:
        if fixed_plan is not None:
            lo = hi = fixed_plan.capacity[h]
        else:
            lo, hi = 0, b
        c_idx[h] = col(econ.unit_capacity_cost[h], lo, hi, True, PRIO_CAPACITY, f"C[{h}]")

    ub_rows, eq_rows = _Rows(), _Rows()
    f_idx, tr_idx, u_idx, travel = [], [], [], []
    slack = overflow_penalty is not None
    arc_pos = {a.id: i for i, a in enumerate(network.arcs)}
    used_arcs = sorted({a for arcs in commodity_arcs.values() for a in arcs}, key=arc_pos.__getitem__)

    for w, scen in enumerate(scenarios):
        wt = scen.weight
        tt = {a.id: scenario_travel_time(a, scen.disrupted_hubs, delay_multiplier) for a in network.arcs}
        travel.append(tt)
        supply = {o: sum(scen.demand.get((o, d), 0) for d in dests_of[o]) for o in origins}
        total = sum(supply.values())
        fw, tw, uw = {}, {}, {}
        for o in origins:
            for a in commodity_arcs[o]:
                # with m = 1 a truck per unit is exact, so flows carry the fleet cost
                cost = wt * network.arc(a).fleet_cost_rate * tt[a] if m == 1 else 0.0
                fw[(o, a)] = col(cost, 0, supply[o], True, PRIO_FLOW, f"F[{w},{o},{a}]")
        for a in used_arcs if m > 1 else ():
            arc = network.arc(a)
            tw[a] = col(wt * arc.fleet_cost_rate * tt[a], 0, truck_count(total, m), True, PRIO_TRUCK,
                        f"Tr[{w},{a}]")
        if slack:
            for p in active_pairs:
                q = scen.demand.get(p, 0)
                uw[p] = col(wt * overflow_penalty, 0, q, True, PRIO_FLOW, f"U[{w},{pair_key(p)}]")
        f_idx.append(fw)
        tr_idx.append(tw)
        u_idx.append(uw)

        # origin outflow, destination inflow, hub conservation
        for o in origins:
            coefs = [(fw[(o, a.id)], 1.0) for a in network.out_arcs(o) if (o, a.id) in fw]
            coefs += [(uw[(o, d)], 1.0) for d in sorted(dests_of[o]) if (o, d) in uw]
            eq_rows.add(coefs, supply[o], f"out[{w},{o}]")
            for d in sorted(dests_of[o]):
                coefs = [(fw[(o, a.id)], 1.0) for a in network.in_arcs(d) if (o, a.id) in fw]
                if (o, d) in uw:
                    coefs.append((uw[(o, d)], 1.0))
                eq_rows.add(coefs, scen.demand.get((o, d), 0), f"in[{w},{pair_key((o, d))}]")
            for h in hubs:
                coefs = [(fw[(o, a.id)], 1.0) for a in network.out_arcs(h) if (o, a.id) in fw]
                coefs += [(fw[(o, a.id)], -1.0) for a in network.in_arcs(h) if (o, a.id) in fw]
                if coefs:
                    eq_rows.add(coefs, 0.0, f"hub[{w},{o},{h}]")
        # truckload
        for a in tw:
            coefs = [(fw[(o, a)], 1.0) for o in origins if (o, a) in fw]
            coefs.append((tw[a], -float(m)))
            ub_rows.add(coefs, 0.0, f"truck[{w},{a}]")
        # inbound hub throughput
        for h in hubs:
            coefs = [(fw[(o, a.id)], 1.0) for a in network.in_arcs(h) for o in origins if (o, a.id) in fw]
            if coefs:
                coefs.append((c_idx[h], -1.0))
                ub_rows.add(coefs, 0.0, f"cap[{w},{h}]")
    # budget linkage
    for h in hubs:
        ub_rows.add([(c_idx[h], 1.0), (x_idx[h], -float(b))], 0.0, f"link[{h}]")

    n = len(c)
    A_ub, b_ub = ub_rows.matrix(n)
    A_eq, b_eq = eq_rows.matrix(n)
    return ModelInstance(
        network=network, econ=econ, scenarios=scenarios, overflow_penalty=overflow_penalty,
        delay_multiplier=delay_multiplier, hubs=hubs, pairs=active_pairs, commodity_arcs=commodity_arcs,
        x_idx=x_idx, c_idx=c_idx, f_idx=f_idx, tr_idx=tr_idx, u_idx=u_idx, travel=travel,
        c=np.asarray(c, dtype=float), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        lb=np.asarray(lb, dtype=float), ub=np.asarray(ub, dtype=float),
        integrality=np.asarray(integ, dtype=np.int8), priority=np.asarray(prio, dtype=np.int8),
        col_names=names, ub_names=ub_rows.names, eq_names=eq_rows.names,
    )

