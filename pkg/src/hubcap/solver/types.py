"""Solution containers for the deployment model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import HubcapError
from ..scenarios import Pair, pair_key, parse_pair_key


def truck_count(total_flow, m) -> int:
    """Fewest trucks of capacity ``m`` that carry ``total_flow`` units."""
    if m < 1:
        raise ValueError("truckload must be >= 1")
    total_flow = int(total_flow)
    return -(-total_flow // int(m)) if total_flow > 0 else 0


@dataclass
class DeploymentPlan:
    """First-stage decision: which hubs open and their daily throughput capacity."""

    open: dict[str, int]
    capacity: dict[str, int]
    name: str = ""

    def __post_init__(self):
        if set(self.open) != set(self.capacity):
            raise ValueError("open and capacity must cover the same hubs")
        self.open = {h: int(v) for h, v in sorted(self.open.items())}
        self.capacity = {h: int(v) for h, v in sorted(self.capacity.items())}
        for h in self.open:
            if self.open[h] not in (0, 1):
                raise ValueError(f"hub {h}: open flag must be 0 or 1")
            if self.capacity[h] < 0:
                raise ValueError(f"hub {h}: capacity must be nonnegative")
            if self.capacity[h] > 0 and not self.open[h]:
                raise ValueError(f"hub {h}: positive capacity on a closed hub")

    @classmethod
    def from_capacities(cls, capacity: dict[str, int], name="") -> "DeploymentPlan":
        return cls({h: int(c > 0) for h, c in capacity.items()}, dict(capacity), name)

    @classmethod
    def closed(cls, hubs, name="") -> "DeploymentPlan":
        return cls({h: 0 for h in hubs}, {h: 0 for h in hubs}, name)

    @property
    def hubs(self) -> list[str]:
        return list(self.open)

    @property
    def active_hubs(self) -> list[str]:
        return [h for h, x in self.open.items() if x]

    @property
    def total_capacity(self) -> int:
        return sum(self.capacity.values())

    def validate(self, econ, network=None):
        if network is not None and set(self.open) != set(network.hubs):
            raise HubcapError(f"plan {self.name!r} does not match the network's hub set")
        for h, c in self.capacity.items():
            if c > econ.capacity_cap * self.open[h]:
                raise HubcapError(f"plan {self.name!r}: hub {h} capacity {c} exceeds cap {econ.capacity_cap}")

    def first_stage_cost(self, econ) -> float:
        return math.fsum(econ.fixed_cost[h] * self.open[h] + econ.unit_capacity_cost[h] * self.capacity[h]
                         for h in self.open)

    def key(self):
        return tuple((h, self.open[h], self.capacity[h]) for h in self.open)

    def to_dict(self) -> dict:
        return {"name": self.name,
                "hubs": {h: {"open": self.open[h], "capacity": self.capacity[h]} for h in self.open}}

    @classmethod
    def from_dict(cls, data) -> "DeploymentPlan":
        hubs = data["hubs"]
        return cls({h: int(v["open"]) for h, v in hubs.items()},
                   {h: int(v["capacity"]) for h, v in hubs.items()}, data.get("name", ""))

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "DeploymentPlan":
        path = Path(path)
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except (KeyError, ValueError, TypeError) as exc:
            raise HubcapError(f"{path}: malformed plan file ({exc})") from exc


@dataclass
class RoutingSolution:
    """Second-stage routing of one scenario.

    ``flows`` maps ``((origin, destination), arc_id)`` to units; ``paths``
    lists the same flow as ``(pair, arc ids, units)`` path bundles.
    """

    flows: dict[tuple[Pair, str], int]
    trucks: dict[str, int]
    unserved: dict[Pair, int]
    travel_time: dict[str, float]
    paths: list[tuple[Pair, tuple[str, ...], int]] = field(default_factory=list)
    fleet_cost: float = 0.0
    penalty_cost: float = 0.0
    disrupted_hubs: frozenset = frozenset()

    @property
    def cost(self) -> float:
        return self.fleet_cost + self.penalty_cost

    def arc_flow(self) -> dict[str, int]:
        out = {}
        for (_, a), units in self.flows.items():
            out[a] = out.get(a, 0) + units
        return out

    @property
    def total_unserved(self) -> int:
        return sum(self.unserved.values())

    def path_time(self, arcs) -> float:
        return math.fsum(self.travel_time[a] for a in arcs)

    def to_dict(self) -> dict:
        return {
            "fleet_cost": self.fleet_cost,
            "penalty_cost": self.penalty_cost,
            "disrupted_hubs": sorted(self.disrupted_hubs),
            "arc_flow": dict(sorted(self.arc_flow().items())),
            "trucks": {a: t for a, t in sorted(self.trucks.items()) if t},
            "unserved": {pair_key(p): u for p, u in sorted(self.unserved.items()) if u},
            "paths": [[pair_key(p), list(arcs), units] for p, arcs, units in self.paths],
        }

    @classmethod
    def from_dict(cls, data, network=None) -> "RoutingSolution":
        paths = [(parse_pair_key(p), tuple(arcs), int(u)) for p, arcs, u in data.get("paths", [])]
        flows = {}
        for p, arcs, u in paths:
            for a in arcs:
                flows[(p, a)] = flows.get((p, a), 0) + u
        return cls(flows, {a: int(t) for a, t in data.get("trucks", {}).items()},
                   {parse_pair_key(k): int(v) for k, v in data.get("unserved", {}).items()},
                   {}, paths, float(data.get("fleet_cost", 0.0)), float(data.get("penalty_cost", 0.0)),
                   frozenset(data.get("disrupted_hubs", ())))


@dataclass
class SolveReport:
    plan: DeploymentPlan
    routings: list[RoutingSolution]
    objective: float
    first_stage_cost: float
    expected_second_stage_cost: float
    optimality_gap: float
    lower_bound: float
    status: str = "optimal"
    engine: str = ""
    node_count: int = 0
    wall_time: float = 0.0
    bound_history: list[float] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)

    @property
    def timed_out(self) -> bool:
        return self.status == "timed_out"

    def to_dict(self, include_paths=False) -> dict:
        # wall time is left out so that reruns write identical files
        scen = []
        for i, r in enumerate(self.routings):
            d = r.to_dict()
            if not include_paths:
                d.pop("paths")
            d["index"] = i
            d["weight"] = self.weights[i] if i < len(self.weights) else None
            scen.append(d)
        return {
            "status": self.status,
            "engine": self.engine,
            "objective": self.objective,
            "first_stage_cost": self.first_stage_cost,
            "expected_second_stage_cost": self.expected_second_stage_cost,
            "optimality_gap": self.optimality_gap,
            "lower_bound": self.lower_bound,
            "node_count": self.node_count,
            "bound_history": self.bound_history,
            "plan": self.plan.to_dict(),
            "scenarios": scen,
        }

    def to_json(self, path, include_paths=False):
        Path(path).write_text(json.dumps(self.to_dict(include_paths), indent=1, sort_keys=True) + "\n")
