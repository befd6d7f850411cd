"""Network metrics of deployment plans and cross-level comparison tables."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .network import Network
from .scenarios import StressLevel
from .solver.types import DeploymentPlan

DEGREE_SCOPES = ("all", "hubs")

METRIC_COLUMNS = ["capacity", "active_hubs", "avg_capacity", "connectivity"]
KPI_COLUMNS = ["on_time_rate", "avg_daily_total_cost", "avg_hub_cost", "avg_fleet_cost", "avg_penalty_cost"]
COMPARISON_COLUMNS = ["plan", "level", *METRIC_COLUMNS, *KPI_COLUMNS, "resilience_slope"]


@dataclass(frozen=True)
class NetworkMetrics:
    total_throughput_capacity: int
    active_hub_count: int
    avg_hub_capacity: float
    hub_connectivity: float
    source: str = "flow"

    def display(self) -> dict:
        """Values rounded the way they are reported (one decimal)."""
        return {
            "capacity": self.total_throughput_capacity,
            "active_hubs": self.active_hub_count,
            "avg_capacity": round(self.avg_hub_capacity, 1),
            "connectivity": round(self.hub_connectivity, 1),
        }


def _neighbours(network: Network, arcs, active: set[str], scope: str) -> dict[str, set[str]]:
    nbrs = {h: set() for h in active}
    for a in arcs:
        t, h = a.tail, a.head
        for u, v in ((t, h), (h, t)):
            if u not in active:
                continue
            if scope == "hubs" and not network.is_hub(v):
                continue
            if network.is_hub(v) and v not in active:
                continue
            nbrs[u].add(v)
    return nbrs


def compute_network_metrics(plan: DeploymentPlan, network: Network, routings=(), degree_scope="all") -> NetworkMetrics:
    """Capacity totals and average active-hub degree.

    Degree counts distinct undirected neighbours over arcs that carry flow in
    at least one routing. Without routings the designed arcs among active
    nodes are used instead. ``degree_scope="hubs"`` counts hub neighbours only.
    """
    if degree_scope not in DEGREE_SCOPES:
        raise ValueError(f"degree_scope must be one of {DEGREE_SCOPES}")
    active = set(plan.active_hubs)
    total = plan.total_capacity
    n = len(active)
    routings = list(routings)
    if routings:
        used = set()
        for r in routings:
            used.update(a for a, v in r.arc_flow().items() if v > 0)
        arcs = [network.arc(a) for a in sorted(used)]
        source = "flow"
    else:
        arcs = list(network.arcs)
        source = "designed"
    nbrs = _neighbours(network, arcs, active, degree_scope)
    conn = sum(len(v) for v in nbrs.values()) / n if n else 0.0
    return NetworkMetrics(total, n, total / n if n else 0.0, conn, source)


def resilience_slope(kpis: dict) -> float:
    """On-time rate at level 1 minus on-time rate at level 4."""
    lv = {StressLevel.parse(k): v for k, v in kpis.items()}
    return lv[StressLevel.L1_deterministic].on_time_rate - lv[StressLevel.L4_integrated].on_time_rate


def compare_plans(reports: dict) -> list[dict]:
    """Flat comparison rows, one per plan and evaluation level.

    ``reports`` maps plan name to ``(NetworkMetrics, {level: KpiReport})``.
    The resilience slope is blank when a plan lacks level 1 or level 4.
    """
    if len(reports) < 2:
        raise ValueError("compare_plans needs at least two plans")
    rows = []
    for name in reports:
        metrics, kpis = reports[name]
        levels = {StressLevel.parse(k): v for k, v in kpis.items()}
        slope = None
        if StressLevel.L1_deterministic in levels and StressLevel.L4_integrated in levels:
            slope = resilience_slope(levels)
        for level in sorted(levels):
            rep = levels[level]
            row = {"plan": str(name), "level": level.short, **metrics.display()}
            for k in KPI_COLUMNS:
                row[k] = getattr(rep, k)
            row["resilience_slope"] = slope
            rows.append(row)
    return rows


def write_comparison_csv(path, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COMPARISON_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row[k] is None else repr(row[k]) if isinstance(row[k], float) else row[k])
                        for k in COMPARISON_COLUMNS})


def write_comparison_json(path, rows):
    Path(path).write_text(json.dumps({"columns": COMPARISON_COLUMNS, "rows": rows}, indent=1) + "\n")
