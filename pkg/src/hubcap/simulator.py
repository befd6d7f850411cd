"""Daily rollout of a fixed deployment plan.

Each simulated day draws a fresh set of disrupted hubs, routes that day's
demand through the plan's capacities and scores delivery timeliness and
cost. A unit is on time when its path, at that day's travel times, fits the
deadline; unserved overflow counts as late. There is no carry-over between
days.
"""

from __future__ import annotations

import csv
import heapq
import json
import dataclasses
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import HorizonMismatch
from .network import DEFAULT_DELAY_MULTIPLIER, HubEconomics, Network, scenario_travel_time
from .scenarios import Scenario, StressLevel, stream_rng
from .solver.checker import assert_feasible
from .solver.core import solve_second_stage
from .solver.model import default_overflow_penalty
from .solver.types import DeploymentPlan, RoutingSolution, truck_count

DAILY_OPERATIONAL_ONLY = "daily_operational_only"
AMORTIZE_FIXED = "amortize_fixed_over_horizon"


@dataclass
class SimulationConfig:
    horizon_days: int = 90
    deadline_hours: float = 24.0
    delay_multiplier: float = DEFAULT_DELAY_MULTIPLIER
    overflow_penalty: float | None = None
    hub_cost_amortization: str = AMORTIZE_FIXED
    seed: int = 0
    routing: str = "optimal"
    engine: str = "highs"

    def __post_init__(self):
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be >= 1")
        if not self.deadline_hours > 0:
            raise ValueError("deadline_hours must be positive")
        if self.delay_multiplier < 1:
            raise ValueError("delay_multiplier must be >= 1")
        if self.hub_cost_amortization not in (DAILY_OPERATIONAL_ONLY, AMORTIZE_FIXED):
            raise ValueError(f"unknown hub_cost_amortization {self.hub_cost_amortization!r}")
        if self.routing not in ("optimal", "greedy"):
            raise ValueError("routing must be 'optimal' or 'greedy'")


@dataclass
class DayRecord:
    day: int
    demand: int
    on_time: int
    late: int
    unserved: int
    hub_cost: float
    fleet_cost: float
    penalty_cost: float
    disrupted_hubs: tuple[str, ...] = ()

    @property
    def total_cost(self) -> float:
        return self.hub_cost + self.fleet_cost + self.penalty_cost

    @property
    def on_time_rate(self) -> float:
        return self.on_time / self.demand if self.demand else 1.0


@dataclass
class KpiReport:
    on_time_rate: float
    avg_daily_total_cost: float
    avg_hub_cost: float
    avg_fleet_cost: float
    avg_penalty_cost: float
    days: list[DayRecord] = field(default_factory=list)

    @property
    def daily_on_time_rate(self) -> list[float]:
        return [d.on_time_rate for d in self.days]

    @property
    def daily_total_cost(self) -> list[float]:
        return [d.total_cost for d in self.days]

    @classmethod
    def from_days(cls, days: list[DayRecord]) -> "KpiReport":
        days = sorted(days, key=lambda d: d.day)
        demand = sum(d.demand for d in days)
        on_time = sum(d.on_time for d in days)
        n = len(days)
        return cls(
            on_time_rate=on_time / demand if demand else 1.0,
            avg_daily_total_cost=math.fsum(d.total_cost for d in days) / n,
            avg_hub_cost=math.fsum(d.hub_cost for d in days) / n,
            avg_fleet_cost=math.fsum(d.fleet_cost for d in days) / n,
            avg_penalty_cost=math.fsum(d.penalty_cost for d in days) / n,
            days=days,
        )

    def to_dict(self) -> dict:
        return {
            "on_time_rate": self.on_time_rate,
            "avg_daily_total_cost": self.avg_daily_total_cost,
            "avg_hub_cost": self.avg_hub_cost,
            "avg_fleet_cost": self.avg_fleet_cost,
            "avg_penalty_cost": self.avg_penalty_cost,
            "days": [
                {"day": d.day, "demand": d.demand, "on_time": d.on_time, "late": d.late, "unserved": d.unserved,
                 "hub_cost": d.hub_cost, "fleet_cost": d.fleet_cost, "penalty_cost": d.penalty_cost,
                 "total_cost": d.total_cost, "disrupted_hubs": list(d.disrupted_hubs)}
                for d in self.days
            ],
        }


def daily_hub_cost(plan: DeploymentPlan, econ: HubEconomics, config: SimulationConfig) -> float:
    ops = math.fsum(econ.unit_capacity_cost[h] * plan.capacity[h] for h in plan.hubs)
    if config.hub_cost_amortization == AMORTIZE_FIXED:
        ops += math.fsum(econ.fixed_cost[h] * plan.open[h] for h in plan.hubs) / config.horizon_days
    return ops


def draw_disruptions(econ: HubEconomics, hubs, seed: int, day: int) -> frozenset[str]:
    rng = stream_rng(seed, "sim-disruption", day)
    hubs = sorted(hubs)
    u = rng.random(len(hubs))
    return frozenset(h for h, x in zip(hubs, u) if x < econ.disruption_rate[h])


def greedy_routing(plan, network: Network, econ: HubEconomics, scenario: Scenario, overflow_penalty,
                   delay_multiplier) -> RoutingSolution:
    """Myopic routing: largest pairs first, each unit on the fastest path with spare hub capacity."""
    times = {a.id: scenario_travel_time(a, scenario.disrupted_hubs, delay_multiplier) for a in network.arcs}
    spare = dict(plan.capacity)
    paths = []
    unserved = {}

    def fastest(o, d):
        dist, prev = {o: 0.0}, {}
        heap = [(0.0, o)]
        while heap:
            t, v = heapq.heappop(heap)
            if t > dist[v]:
                continue
            if v == d:
                break
            if v != o and not network.is_hub(v):
                continue
            for a in network.out_arcs(v):
                w = a.head
                if network.is_hub(w) and spare.get(w, 0) <= 0:
                    continue
                if network.relay_only and v == o and w == d:
                    continue
                nt = t + times[a.id]
                if nt < dist.get(w, math.inf):
                    dist[w], prev[w] = nt, a.id
                    heapq.heappush(heap, (nt, w))
        if d not in prev:
            return None
        arcs, v = [], d
        while v != o:
            arcs.append(prev[v])
            v = network.arc(prev[v]).tail
        return tuple(reversed(arcs))

    for pair, q in sorted(scenario.demand.items(), key=lambda kv: (-kv[1], kv[0])):
        left = q
        while left > 0:
            path = fastest(*pair)
            if path is None:
                break
            hubs_on = [network.arc(a).head for a in path if network.is_hub(network.arc(a).head)]
            units = min([left] + [spare[h] for h in hubs_on])
            for h in hubs_on:
                spare[h] -= units
            paths.append((pair, path, units))
            left -= units
        unserved[pair] = left

    flows = defaultdict(int)
    for pair, path, u in paths:
        for a in path:
            flows[(pair, a)] += u
    load = defaultdict(int)
    for (_, a), u in flows.items():
        load[a] += u
    trucks = {a: truck_count(v, econ.truckload) for a, v in sorted(load.items())}
    fleet = math.fsum(network.arc(a).fleet_cost_rate * times[a] * t for a, t in trucks.items())
    unserved = {p: u for p, u in unserved.items() if u}
    return RoutingSolution(dict(flows), trucks, unserved, times, paths, fleet,
                           overflow_penalty * sum(unserved.values()), scenario.disrupted_hubs)


def _route(plan, network, econ, scenario, config, cache):
    key = None
    if cache is not None:
        key = (plan.key(), tuple(sorted(scenario.demand.items())), scenario.disrupted_hubs, config.routing,
               config.delay_multiplier, config.overflow_penalty)
        hit = cache.get(key)
        if hit is not None:
            return hit
    if config.routing == "greedy":
        r = greedy_routing(plan, network, econ, scenario, config.overflow_penalty, config.delay_multiplier)
        assert_feasible(network, econ, [scenario], plan, [r], config.delay_multiplier)
    else:
        r = solve_second_stage(plan, network, econ, scenario, config.overflow_penalty, config.delay_multiplier,
                               engine=config.engine)
    if cache is not None:
        cache[key] = r
    return r


def simulate_day(plan, network, econ, demand, disrupted, config: SimulationConfig, day=0,
                 cache=None) -> DayRecord:
    scenario = Scenario({p: q for p, q in demand.items() if q > 0}, disrupted, 1.0)
    routing = _route(plan, network, econ, scenario, config, cache)
    on_time = late = 0
    for _, path, units in routing.paths:
        if routing.path_time(path) <= config.deadline_hours + 1e-9:
            on_time += units
        else:
            late += units
    unserved = routing.total_unserved
    total = scenario.total_demand
    if on_time + late + unserved != total:
        raise AssertionError(f"day {day}: unit accounting broke ({on_time}+{late}+{unserved} != {total})")
    return DayRecord(day, total, on_time, late, unserved, daily_hub_cost(plan, econ, config), routing.fleet_cost,
                     routing.penalty_cost, tuple(sorted(disrupted)))


def resolve_penalty(network: Network, config: SimulationConfig) -> SimulationConfig:
    """Fill in the default overflow penalty, taken over every relay-connected pair."""
    if config.overflow_penalty is not None:
        return config
    penalty = default_overflow_penalty(network, None, config.delay_multiplier)
    return dataclasses.replace(config, overflow_penalty=penalty)


def simulate(plan: DeploymentPlan, network: Network, econ: HubEconomics, daily_demands, config: SimulationConfig,
             disruptions=True, cache=None) -> KpiReport:
    """Roll ``plan`` over ``daily_demands`` (one demand map per day).

    Disruptions are drawn per day from the hubs' rates with a stream that
    depends only on ``(config.seed, day)``, so every plan evaluated with the
    same seed faces the same disrupted days.
    """
    daily_demands = list(daily_demands)
    if len(daily_demands) != config.horizon_days:
        raise HorizonMismatch(config.horizon_days, len(daily_demands))
    plan.validate(econ, network)
    config = resolve_penalty(network, config)
    days = []
    for day, demand in enumerate(daily_demands):
        disrupted = draw_disruptions(econ, network.hubs, config.seed, day) if disruptions else frozenset()
        days.append(simulate_day(plan, network, econ, demand, disrupted, config, day, cache))
    return KpiReport.from_days(days)


def evaluation_regime(level, baseline_demand, daily_demands):
    """Demand series and disruption switch for one evaluation level."""
    level = StressLevel.parse(level)
    demands = list(daily_demands) if level.stochastic_demand else [dict(baseline_demand)] * len(daily_demands)
    return demands, level.disruptions


def run_stress_test(plans: dict, network: Network, econ: HubEconomics, daily_demands, config: SimulationConfig,
                    baseline_demand, levels=tuple(StressLevel), cache=None) -> dict:
    """KPI matrix ``{(level, plan_name): KpiReport}``.

    Levels 1/3 replay ``baseline_demand`` every day, levels 2/4 replay the
    realized ``daily_demands``; levels 3/4 switch disruptions on.
    """
    cache = {} if cache is None else cache
    config = resolve_penalty(network, config)
    out = {}
    for level in levels:
        level = StressLevel.parse(level)
        demands, disrupt = evaluation_regime(level, baseline_demand, daily_demands)
        for name, plan in plans.items():
            out[(level, str(name))] = simulate(plan, network, econ, demands, config, disrupt, cache)
    return out


def kpi_rows(matrix: dict):
    """Flat per-day rows for the KPI CSV."""
    rows = []
    for (level, name), rep in sorted(matrix.items(), key=lambda kv: (int(kv[0][0]), kv[0][1])):
        for d in rep.days:
            rows.append({"level": StressLevel.parse(level).short, "plan": name, "day": d.day,
                         "on_time_rate": d.on_time_rate, "hub_cost": d.hub_cost, "fleet_cost": d.fleet_cost,
                         "penalty_cost": d.penalty_cost, "total_cost": d.total_cost})
    return rows


KPI_COLUMNS = ["level", "plan", "day", "on_time_rate", "hub_cost", "fleet_cost", "penalty_cost", "total_cost"]


def write_kpi_csv(path, matrix):
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=KPI_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in kpi_rows(matrix):
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_kpi_json(path, matrix):
    body = {f"{StressLevel.parse(level).short}|{name}": rep.to_dict()
            for (level, name), rep in sorted(matrix.items(), key=lambda kv: (int(kv[0][0]), kv[0][1]))}
    Path(path).write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")


def mean_on_time(reports) -> float:
    return float(np.mean([r.on_time_rate for r in reports]))
