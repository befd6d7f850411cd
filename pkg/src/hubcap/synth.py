"""Synthetic relay-network instances.

Hubs sit on a jittered grid inside a box modelled on the US Southeast;
origins and destinations are scattered in the same box and must be within
one leg of some hub. Daily OD demand follows a two-regime Poisson mixture.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedDemandPair, HubcapError
from .network import (DEFAULT_MAX_LEG_HOURS, DEFAULT_SPEED_KMH, HubEconomics, Network, Node, build_network,
                      haversine_km)
from .scenarios import DemandHistory, stream_rng

# lat/lon box of the reference region at 24 hubs
BOX_CENTER = (32.0, -84.5)
BOX_SPAN = (10.0, 14.0)
REFERENCE_HUBS = 24


@dataclass
class SynthParams:
    n_origins: int = 3
    n_hubs: int = 5
    n_destinations: int = 6
    days: int = 30
    seed: int = 10
    mean_daily_total: float = 90.0
    surge_prob: float = 0.25
    surge_factor: float = 1.8
    fixed_cost: float = 1000.0
    unit_capacity_cost: float = 60.0
    disruption_rate: float = 0.1
    fleet_cost_rate: float = 100.0
    truckload: int = 1
    capacity_cap: int = 300
    max_leg_hours: float = DEFAULT_MAX_LEG_HOURS
    speed: float = DEFAULT_SPEED_KMH
    start_date: dt.date = dt.date(2024, 1, 1)


@dataclass
class Instance:
    network: Network
    econ: HubEconomics
    history: DemandHistory
    params: SynthParams


def _box(n_hubs):
    k = max(0.3, math.sqrt(n_hubs / REFERENCE_HUBS))
    (clat, clon), (slat, slon) = BOX_CENTER, BOX_SPAN
    return clat - k * slat / 2, clat + k * slat / 2, clon - k * slon / 2, clon + k * slon / 2


def _hub_grid(rng, n, box):
    lat0, lat1, lon0, lon1 = box
    cols = max(1, round(math.sqrt(n * (lon1 - lon0) / (lat1 - lat0))))
    rows = math.ceil(n / cols)
    cells = [(r, c) for r in range(rows) for c in range(cols)]
    picks = sorted(rng.choice(len(cells), size=n, replace=False)) if len(cells) > n else range(n)
    dlat, dlon = (lat1 - lat0) / rows, (lon1 - lon0) / cols
    out = []
    for i in picks:
        r, c = cells[i]
        lat = lat0 + (r + 0.5 + rng.uniform(-0.25, 0.25)) * dlat
        lon = lon0 + (c + 0.5 + rng.uniform(-0.25, 0.25)) * dlon
        out.append((lat, lon))
    return out


def _near_hub(lat, lon, hubs, reach_km):
    return any(haversine_km(lat, lon, h[0], h[1]) <= reach_km for h in hubs)


def synth_instance(params: SynthParams | None = None, **overrides) -> Instance:
    """Generate a connected instance; deterministic in ``params.seed``."""
    p = params or SynthParams()
    if overrides:
        p = SynthParams(**{**p.__dict__, **overrides})
    if min(p.n_origins, p.n_hubs, p.n_destinations, p.days) < 1:
        raise ValueError("node counts and days must be >= 1")
    reach = p.max_leg_hours * p.speed * 0.95
    box = _box(p.n_hubs)
    lat0, lat1, lon0, lon1 = box

    for attempt in range(200):
        rng = stream_rng(p.seed, "geometry", attempt)
        hubs = _hub_grid(rng, p.n_hubs, box)

        def scatter(count):
            pts = []
            while len(pts) < count:
                lat, lon = rng.uniform(lat0, lat1), rng.uniform(lon0, lon1)
                if _near_hub(lat, lon, hubs, reach):
                    pts.append((lat, lon))
            return pts

        nodes = [Node(f"O{i + 1:02d}", "origin", *xy) for i, xy in enumerate(scatter(p.n_origins))]
        nodes += [Node(f"H{i + 1:02d}", "hub", *xy) for i, xy in enumerate(hubs)]
        nodes += [Node(f"D{i + 1:02d}", "destination", *xy) for i, xy in enumerate(scatter(p.n_destinations))]
        nodes = [Node(n.id, n.kind, round(n.lat, 6), round(n.lon, 6)) for n in nodes]
        pairs = [(o.id, d.id) for o in nodes if o.kind == "origin" for d in nodes if d.kind == "destination"]
        try:
            net = build_network(nodes, auto_connect=True, max_leg_hours=p.max_leg_hours, speed=p.speed,
                                fleet_cost_rate=p.fleet_cost_rate, demand_pairs=pairs)
            break
        except DisconnectedDemandPair:
            continue
    else:
        raise HubcapError("could not generate a connected instance; increase max_leg_hours or hub count")

    rng = stream_rng(p.seed, "economics")
    hub_ids = net.hubs
    econ = HubEconomics(
        {h: round(p.fixed_cost * rng.uniform(0.8, 1.2), 2) for h in hub_ids},
        {h: round(p.unit_capacity_cost * rng.uniform(0.8, 1.2), 2) for h in hub_ids},
        {h: p.disruption_rate for h in hub_ids},
        p.truckload, p.capacity_cap,
    )

    rng = stream_rng(p.seed, "demand")
    rates = rng.lognormal(0.0, 0.5, size=len(pairs))
    rates *= p.mean_daily_total / rates.sum() / (1 + p.surge_prob * (p.surge_factor - 1))
    surge = rng.random((p.days, len(pairs))) < p.surge_prob
    lam = rates[None, :] * np.where(surge, p.surge_factor, 1.0)
    counts = rng.poisson(lam)
    records = []
    for day in range(p.days):
        date = p.start_date + dt.timedelta(days=day)
        for k, (o, d) in enumerate(pairs):
            if counts[day, k]:
                records.append((date, o, d, int(counts[day, k])))
    history = DemandHistory(records, start=p.start_date, days=p.days)
    return Instance(net, econ, history, p)
