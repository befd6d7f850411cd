"""Hyperconnected relay network: nodes, short-haul arcs and hub economics.

Freight moves from origins to destinations through open-access hubs. Every
arc is a short-haul leg whose travel time is capped (5.5 h by default) so a
driver can make a round trip within one shift. A disrupted hub slows down
every arc touching it by a constant multiplier.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DisconnectedDemandPair, DuplicateNodeId, HubcapError, InvalidArc

ORIGIN = "origin"
DESTINATION = "destination"
HUB = "hub"
NODE_KINDS = (ORIGIN, DESTINATION, HUB)

DEFAULT_MAX_LEG_HOURS = 5.5
DEFAULT_SPEED_KMH = 70.0
DEFAULT_DELAY_MULTIPLIER = 3.0
EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    lat: float
    lon: float

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"node {self.id!r}: kind must be one of {NODE_KINDS}, got {self.kind!r}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"node {self.id!r}: latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"node {self.id!r}: longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Arc:
    id: str
    tail: str
    head: str
    base_travel_time: float
    fleet_cost_rate: float

    def __post_init__(self):
        if self.tail == self.head:
            raise InvalidArc(f"arc {self.id!r} is a self-loop")
        if not self.base_travel_time > 0:
            raise InvalidArc(f"arc {self.id!r}: travel time must be positive")
        if self.fleet_cost_rate < 0:
            raise InvalidArc(f"arc {self.id!r}: fleet cost rate must be nonnegative")


def arc_id(tail: str, head: str) -> str:
    return f"{tail}->{head}"


class Network:
    """Immutable directed network with adjacency indexes.

    ``out_arcs(i)`` and ``in_arcs(i)`` return the arcs leaving and entering
    node ``i`` in arc-list order.
    """

    def __init__(self, nodes: Iterable[Node], arcs: Iterable[Arc], *, max_leg_hours=DEFAULT_MAX_LEG_HOURS,
                 relay_only=True):
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.arcs: tuple[Arc, ...] = tuple(arcs)
        self.max_leg_hours = float(max_leg_hours)
        self.relay_only = bool(relay_only)
        self._node = {}
        for n in self.nodes:
            if n.id in self._node:
                raise DuplicateNodeId(n.id)
            self._node[n.id] = n
        self._arc = {}
        self._out = {n.id: [] for n in self.nodes}
        self._in = {n.id: [] for n in self.nodes}
        for a in self.arcs:
            if a.id in self._arc:
                raise InvalidArc(f"duplicate arc id {a.id!r}")
            if a.tail not in self._node or a.head not in self._node:
                raise InvalidArc(f"arc {a.id!r} references an unknown node")
            self._arc[a.id] = a
            self._out[a.tail].append(a)
            self._in[a.head].append(a)
        self._out = {k: tuple(v) for k, v in self._out.items()}
        self._in = {k: tuple(v) for k, v in self._in.items()}

    def node(self, node_id: str) -> Node:
        return self._node[node_id]

    def arc(self, arc_id_: str) -> Arc:
        return self._arc[arc_id_]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node

    def out_arcs(self, node_id: str) -> tuple[Arc, ...]:
        return self._out[node_id]

    def in_arcs(self, node_id: str) -> tuple[Arc, ...]:
        return self._in[node_id]

    def ids(self, kind: str) -> list[str]:
        return [n.id for n in self.nodes if n.kind == kind]

    @property
    def origins(self) -> list[str]:
        return self.ids(ORIGIN)

    @property
    def destinations(self) -> list[str]:
        return self.ids(DESTINATION)

    @property
    def hubs(self) -> list[str]:
        return self.ids(HUB)

    def is_hub(self, node_id: str) -> bool:
        return self._node[node_id].kind == HUB

    def relay_reachable(self, origin: str, allowed_hubs=None) -> set[str]:
        """Nodes reachable from ``origin`` when only hubs may relay freight."""
        seen = {origin}
        queue = deque([origin])
        while queue:
            i = queue.popleft()
            if i != origin and not self.is_hub(i):
                continue
            for a in self._out[i]:
                j = a.head
                if j in seen:
                    continue
                if allowed_hubs is not None and self.is_hub(j) and j not in allowed_hubs:
                    continue
                seen.add(j)
                queue.append(j)
        return seen

    def has_relay_path(self, origin: str, destination: str, allowed_hubs=None) -> bool:
        reach = self.relay_reachable(origin, allowed_hubs)
        if destination not in reach:
            return False
        if self.relay_only:
            # a direct arc alone does not count; some path must pass a hub
            return any(self.is_hub(a.tail) and a.tail in reach for a in self._in[destination])
        return True

    def check_demand_pairs(self, pairs: Iterable[tuple[str, str]]):
        bad = [p for p in set(pairs) if not self.has_relay_path(*p)]
        if bad:
            raise DisconnectedDemandPair(bad)


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _allowed_kinds(tail_kind, head_kind, relay_only):
    if tail_kind == DESTINATION or head_kind == ORIGIN:
        return False
    if tail_kind == ORIGIN and head_kind == DESTINATION:
        return not relay_only
    return True


def build_network(nodes: Iterable[Node], candidate_arcs=None, *, auto_connect=False,
                  max_leg_hours=DEFAULT_MAX_LEG_HOURS, speed=DEFAULT_SPEED_KMH, fleet_cost_rate=1.0,
                  relay_only=True, symmetric=False, demand_pairs=()) -> Network:
    """Build a network keeping only legs within ``max_leg_hours``.

    ``candidate_arcs`` holds ``(tail, head, travel_time_hours, fleet_cost_rate)``
    tuples. With ``symmetric=True`` each tuple is an undirected edge and yields
    both directions. With ``auto_connect=True`` every admissible node pair is a
    candidate whose travel time is the great-circle distance over ``speed``.

    Legs into an origin or out of a destination carry no freight and are
    rejected; origin-to-destination legs are dropped in relay-only mode.
    Raises DisconnectedDemandPair if any pair in ``demand_pairs`` has no
    hub-relay path.
    """
    nodes = list(nodes)
    if not nodes:
        raise HubcapError("network needs at least one node")
    by_id = {}
    for n in nodes:
        if n.id in by_id:
            raise DuplicateNodeId(n.id)
        by_id[n.id] = n

    raw = []
    if auto_connect:
        if not speed > 0:
            raise ValueError("speed must be positive for auto-connect")
        for t in nodes:
            for h in nodes:
                if t.id == h.id or not _allowed_kinds(t.kind, h.kind, relay_only):
                    continue
                hours = haversine_km(t.lat, t.lon, h.lat, h.lon) / speed
                raw.append((t.id, h.id, max(hours, 1e-6), fleet_cost_rate))
    for entry in candidate_arcs or ():
        tail, head, hours, rate = entry
        raw.append((tail, head, float(hours), float(rate)))
        if symmetric:
            raw.append((head, tail, float(hours), float(rate)))

    arcs = []
    seen = set()
    for tail, head, hours, rate in raw:
        if tail not in by_id or head not in by_id:
            raise InvalidArc(f"arc {tail}->{head} references an unknown node")
        tk, hk = by_id[tail].kind, by_id[head].kind
        if tk == DESTINATION or hk == ORIGIN:
            if symmetric:
                continue  # reverse direction of an undirected edge
            raise InvalidArc(f"arc {tail}->{head} leaves a destination or enters an origin")
        if tk == ORIGIN and hk == DESTINATION and relay_only:
            continue
        if hours > max_leg_hours:
            continue
        aid = arc_id(tail, head)
        if aid in seen:
            raise InvalidArc(f"duplicate arc {aid}")
        seen.add(aid)
        arcs.append(Arc(aid, tail, head, hours, rate))

    net = Network(nodes, arcs, max_leg_hours=max_leg_hours, relay_only=relay_only)
    net.check_demand_pairs(demand_pairs)
    return net


def scenario_travel_time(arc: Arc, disrupted_hubs, delay_multiplier=DEFAULT_DELAY_MULTIPLIER) -> float:
    if delay_multiplier < 1:
        raise ValueError("delay_multiplier must be >= 1")
    if arc.tail in disrupted_hubs or arc.head in disrupted_hubs:
        return arc.base_travel_time * delay_multiplier
    return arc.base_travel_time


@dataclass
class HubEconomics:
    """Per-hub cost and risk parameters plus the global truckload and capacity cap."""

    fixed_cost: dict[str, float]
    unit_capacity_cost: dict[str, float]
    disruption_rate: dict[str, float]
    truckload: int = 1
    capacity_cap: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = set(self.fixed_cost)
        if keys != set(self.unit_capacity_cost) or keys != set(self.disruption_rate):
            raise ValueError("fixed_cost, unit_capacity_cost and disruption_rate must cover the same hubs")
        for h in keys:
            if self.fixed_cost[h] < 0 or self.unit_capacity_cost[h] < 0:
                raise ValueError(f"hub {h}: costs must be nonnegative")
            if not 0.0 <= self.disruption_rate[h] <= 1.0:
                raise ValueError(f"hub {h}: disruption rate must lie in [0, 1]")
        if int(self.truckload) != self.truckload or self.truckload < 1:
            raise ValueError("truckload must be an integer >= 1")
        if int(self.capacity_cap) != self.capacity_cap or self.capacity_cap < 0:
            raise ValueError("capacity cap must be an integer >= 0")
        self.truckload = int(self.truckload)
        self.capacity_cap = int(self.capacity_cap)

    @property
    def hubs(self) -> list[str]:
        return sorted(self.fixed_cost)

    @classmethod
    def uniform(cls, hubs, fixed_cost, unit_capacity_cost, disruption_rate=0.0, truckload=1, capacity_cap=0):
        return cls({h: fixed_cost for h in hubs}, {h: unit_capacity_cost for h in hubs},
                   {h: disruption_rate for h in hubs}, truckload, capacity_cap)

    def with_disruption_rates(self, rates: Mapping[str, float] | float) -> "HubEconomics":
        if not isinstance(rates, Mapping):
            rates = {h: float(rates) for h in self.fixed_cost}
        return HubEconomics(dict(self.fixed_cost), dict(self.unit_capacity_cost), dict(rates),
                            self.truckload, self.capacity_cap)

    def check_hubs(self, network: Network):
        if set(self.fixed_cost) != set(network.hubs):
            missing = set(network.hubs) - set(self.fixed_cost)
            extra = set(self.fixed_cost) - set(network.hubs)
            raise HubcapError(f"economics/network hub mismatch: missing {sorted(missing)}, unknown {sorted(extra)}")


# --- CSV I/O ---------------------------------------------------------------

def _rows(path, required):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise HubcapError(f"{path}: missing column(s) {missing}")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def read_nodes_csv(path) -> list[Node]:
    nodes = []
    for lineno, row in _rows(path, ("id", "kind", "lat", "lon")):
        try:
            nodes.append(Node(row["id"].strip(), row["kind"].strip(), float(row["lat"]), float(row["lon"])))
        except ValueError as exc:
            raise HubcapError(f"{path}:{lineno}: {exc}") from exc
    return nodes


def write_nodes_csv(path, nodes):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "kind", "lat", "lon"])
        for n in nodes:
            w.writerow([n.id, n.kind, f"{n.lat:.6f}", f"{n.lon:.6f}"])


def read_arcs_csv(path) -> list[tuple[str, str, float, float]]:
    out = []
    for lineno, row in _rows(path, ("tail", "head", "travel_time_hours", "fleet_cost_rate")):
        try:
            out.append((row["tail"].strip(), row["head"].strip(), float(row["travel_time_hours"]),
                        float(row["fleet_cost_rate"])))
        except ValueError as exc:
            raise HubcapError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_arcs_csv(path, arcs):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tail", "head", "travel_time_hours", "fleet_cost_rate"])
        for a in arcs:
            w.writerow([a.tail, a.head, f"{a.base_travel_time:.6f}", f"{a.fleet_cost_rate:.6f}"])


def read_economics_csv(path, truckload, capacity_cap) -> HubEconomics:
    f, s, p = {}, {}, {}
    for lineno, row in _rows(path, ("hub_id", "fixed_cost", "unit_capacity_cost", "disruption_rate")):
        h = row["hub_id"].strip()
        try:
            f[h] = float(row["fixed_cost"])
            s[h] = float(row["unit_capacity_cost"])
            p[h] = float(row["disruption_rate"])
        except ValueError as exc:
            raise HubcapError(f"{path}:{lineno}: {exc}") from exc
    try:
        return HubEconomics(f, s, p, truckload, capacity_cap)
    except ValueError as exc:
        raise HubcapError(f"{path}: {exc}") from exc


def write_economics_csv(path, econ: HubEconomics):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hub_id", "fixed_cost", "unit_capacity_cost", "disruption_rate"])
        for h in econ.hubs:
            w.writerow([h, repr(float(econ.fixed_cost[h])), repr(float(econ.unit_capacity_cost[h])),
                        repr(float(econ.disruption_rate[h]))])
