"""Command-line pipeline.

Subcommands read a flat run config (``--config``) whose keys every flag can
override, and write deterministic files into ``--out``.

Exit codes: 0 success/optimal, 2 time limit hit with an incumbent,
3 infeasible, 64 usage or config error, 65 malformed input data, 74 I/O.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConfigError, HubcapError, Infeasible, TimedOut
from .metrics import compare_plans, compute_network_metrics, write_comparison_csv, write_comparison_json
from .network import build_network, read_arcs_csv, read_economics_csv, read_nodes_csv, write_arcs_csv, \
    write_economics_csv, write_nodes_csv
from .scenarios import DemandHistory, ScenarioSet, StressLevel, build_stress_scenarios, fit_demand_estimator
from .simulator import SimulationConfig, run_stress_test, write_kpi_csv, write_kpi_json
from .solver import build_extensive_form, default_overflow_penalty, solve, write_lp
from .solver.types import DeploymentPlan, RoutingSolution
from .synth import SynthParams, synth_instance

log = logging.getLogger("hubcap")

EXIT_OK, EXIT_TIMEOUT, EXIT_INFEASIBLE = 0, 2, 3
EXIT_USAGE, EXIT_DATA, EXIT_IO = 64, 65, 74


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- loading ---------------------------------------------------------------

class Workspace:
    """Input data named by a run config, loaded once."""

    def __init__(self, cfg: RunConfig):
        cfg.require_files()
        self.cfg = cfg
        nodes = read_nodes_csv(cfg.nodes)
        arcs = read_arcs_csv(cfg.arcs)
        self.econ = read_economics_csv(cfg.economics, cfg.truckload, cfg.capacity_cap)
        self.history = DemandHistory.from_csv(cfg.demand_history)
        try:
            self.network = build_network(nodes, arcs, max_leg_hours=cfg.max_leg_hours,
                                         demand_pairs=self.history.pairs)
        except ValueError as exc:
            raise HubcapError(f"{cfg.arcs}: {exc}") from exc
        self.history.check_nodes(self.network)
        self.econ.check_hubs(self.network)

    @property
    def penalty(self) -> float:
        if self.cfg.overflow_penalty is not None:
            return self.cfg.overflow_penalty
        return default_overflow_penalty(self.network, None, self.cfg.delay_multiplier)

    def estimator(self):
        return fit_demand_estimator(self.history)

    def sim_config(self, seed=None) -> SimulationConfig:
        return SimulationConfig(horizon_days=self.cfg.horizon_days or self.history.days,
                                deadline_hours=self.cfg.deadline_hours, delay_multiplier=self.cfg.delay_multiplier,
                                overflow_penalty=self.penalty, hub_cost_amortization=self.cfg.hub_cost_amortization,
                                seed=self.cfg.seed if seed is None else seed)

    def daily_demands(self):
        days = self.history.daily_demands()
        horizon = self.cfg.horizon_days or len(days)
        # replay the history cyclically when the horizon is longer
        return [days[i % len(days)] for i in range(horizon)]


def _levels(args) -> list[StressLevel]:
    if getattr(args, "level", None) is None:
        return list(StressLevel)
    return [StressLevel.parse(args.level)]


def _scenario_path(out: Path, level: StressLevel) -> Path:
    return out / f"scenarios_{level.short}.json"


def _plan_path(out: Path, level: StressLevel) -> Path:
    return out / f"plan_{level.network_name}.json"


def _report_path(out: Path, level: StressLevel) -> Path:
    return out / f"report_{level.network_name}.json"


def _write_json(path: Path, body):
    path.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")


# --- subcommands -----------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> int:
    # only flags given explicitly override the generator defaults
    given = {k: getattr(args, k) for k in ("truckload", "capacity_cap", "max_leg_hours", "speed", "disruption_rate")}
    given = {k: v for k, v in given.items() if v is not None}
    p = SynthParams(n_origins=args.origins, n_hubs=args.hubs, n_destinations=args.destinations, days=args.days,
                    seed=args.seed if args.seed is not None else SynthParams.seed, **given)
    inst = synth_instance(p)
    out = args.out
    write_nodes_csv(out / "nodes.csv", inst.network.nodes)
    write_arcs_csv(out / "arcs.csv", inst.network.arcs)
    write_economics_csv(out / "economics.csv", inst.econ)
    inst.history.to_csv(out / "demand_history.csv")
    lines = [
        "# synthetic instance",
        f"# origins={p.n_origins} hubs={p.n_hubs} destinations={p.n_destinations} days={p.days} seed={p.seed}",
        "nodes = nodes.csv",
        "arcs = arcs.csv",
        "economics = economics.csv",
        "demand_history = demand_history.csv",
        f"truckload = {p.truckload}",
        f"capacity_cap = {p.capacity_cap}",
        f"max_leg_hours = {p.max_leg_hours}",
        f"speed = {p.speed}",
        f"horizon_days = {p.days}",
    ]
    (out / "run.cfg").write_text("\n".join(lines) + "\n")
    print(f"wrote synthetic instance ({len(inst.network.nodes)} nodes, {len(inst.network.arcs)} arcs) to {out}")
    return EXIT_OK


def cmd_generate(args, cfg: RunConfig, ws: Workspace | None = None) -> int:
    ws = ws or Workspace(cfg)
    est = ws.estimator()
    for level in _levels(args):
        ss = build_stress_scenarios(level, est, ws.econ, cfg.scenario_count, cfg.demand_quantile, cfg.seed)
        ss.to_json(_scenario_path(args.out, level))
        print(f"{level.short}: {len(ss)} scenarios -> {_scenario_path(args.out, level)}")
    return EXIT_OK


def cmd_optimize(args, cfg: RunConfig, ws: Workspace | None = None) -> int:
    ws = ws or Workspace(cfg)
    code = EXIT_OK
    for level in _levels(args):
        src = Path(args.scenarios) if getattr(args, "scenarios", None) else _scenario_path(args.out, level)
        if not src.is_file():
            raise FileNotFoundError(f"{src}: scenario file not found (run 'generate' first)")
        ss = ScenarioSet.from_json(src)
        model = build_extensive_form(ws.network, ws.econ, ss, ws.penalty, cfg.delay_multiplier)
        if getattr(args, "dump_lp", False):
            write_lp(model, args.out / f"model_{level.short}.lp")
        rep = solve(model, gap_tol=cfg.gap_tol, time_limit=cfg.time_limit, seed=cfg.seed, engine=cfg.engine)
        # solve() has already run the independent constraint checker
        rep.plan.name = level.network_name
        rep.plan.to_json(_plan_path(args.out, level))
        rep.to_json(_report_path(args.out, level), include_paths=True)
        act = rep.plan.active_hubs
        print(f"{level.network_name}: status={rep.status} objective={rep.objective:.6f} gap={rep.optimality_gap:.3g} "
              f"active_hubs={len(act)} capacity={rep.plan.total_capacity}")
        if rep.timed_out:
            code = EXIT_TIMEOUT
    return code


def _load_plans(args, out: Path) -> dict[str, DeploymentPlan]:
    files = args.plans or sorted(glob.glob(str(out / "plan_*.json")))
    if not files:
        raise FileNotFoundError(f"{out}: no plan files found (run 'optimize' first or pass --plans)")
    plans = {}
    for f in files:
        plan = DeploymentPlan.from_json(f)
        name = plan.name or Path(f).stem
        plans[name] = plan
    order = {lv.network_name: int(lv) for lv in StressLevel}
    return dict(sorted(plans.items(), key=lambda kv: (order.get(kv[0], 99), kv[0])))


def _simulate(ws: Workspace, plans, levels):
    cfg = ws.cfg
    for name, plan in plans.items():
        plan.validate(ws.econ, ws.network)
    base = ws.estimator().quantile_demand(cfg.demand_quantile)
    return run_stress_test(plans, ws.network, ws.econ, ws.daily_demands(), ws.sim_config(), base, levels)


def cmd_simulate(args, cfg: RunConfig, ws: Workspace | None = None) -> int:
    ws = ws or Workspace(cfg)
    plans = _load_plans(args, args.out)
    matrix = _simulate(ws, plans, _levels(args))
    write_kpi_csv(args.out / "kpi.csv", matrix)
    write_kpi_json(args.out / "kpi.json", matrix)
    for (level, name), rep in sorted(matrix.items(), key=lambda kv: (int(kv[0][0]), kv[0][1])):
        print(f"{level.short} {name}: on_time={rep.on_time_rate:.4f} daily_cost={rep.avg_daily_total_cost:.2f}")
    return EXIT_OK


def _routings_for(out: Path, name: str):
    path = out / f"report_{name}.json"
    if not path.is_file():
        return []
    try:
        data = json.loads(path.read_text())
        return [RoutingSolution.from_dict(s) for s in data["scenarios"]]
    except (KeyError, ValueError, TypeError) as exc:
        raise HubcapError(f"{path}: malformed report file ({exc})") from exc


def _kpi_from_json(path: Path):
    from .simulator import DayRecord, KpiReport

    data = json.loads(path.read_text())
    out = {}
    for key, body in data.items():
        level, name = key.split("|", 1)
        days = [DayRecord(d["day"], d["demand"], d["on_time"], d["late"], d["unserved"], d["hub_cost"],
                          d["fleet_cost"], d["penalty_cost"], tuple(d["disrupted_hubs"])) for d in body["days"]]
        out.setdefault(name, {})[StressLevel.parse(level)] = KpiReport.from_days(days)
    return out


def cmd_metrics(args, cfg: RunConfig, ws: Workspace | None = None, matrix=None) -> int:
    ws = ws or Workspace(cfg)
    plans = _load_plans(args, args.out)
    metrics = {name: compute_network_metrics(plan, ws.network, _routings_for(args.out, name), cfg.degree_scope)
               for name, plan in plans.items()}
    _write_json(args.out / "metrics.json", {n: {**m.display(), "connectivity_source": m.source}
                                            for n, m in metrics.items()})
    for name, m in metrics.items():
        d = m.display()
        print(f"{name}: capacity={d['capacity']} active_hubs={d['active_hubs']} avg_capacity={d['avg_capacity']} "
              f"connectivity={d['connectivity']}")
    if matrix is not None:
        kpis = {}
        for (level, name), rep in matrix.items():
            kpis.setdefault(name, {})[level] = rep
    elif (args.out / "kpi.json").is_file():
        kpis = _kpi_from_json(args.out / "kpi.json")
    else:
        kpis = {}
    both = {n: (metrics[n], kpis[n]) for n in metrics if n in kpis}
    if len(both) >= 2:
        rows = compare_plans(both)
        write_comparison_csv(args.out / "comparison.csv", rows)
        write_comparison_json(args.out / "comparison.json", rows)
    return EXIT_OK


def cmd_stress_test(args, cfg: RunConfig) -> int:
    ws = Workspace(cfg)
    args.level = None
    args.plans = None
    args.scenarios = None
    cmd_generate(args, cfg, ws)
    code = cmd_optimize(args, cfg, ws)
    plans = _load_plans(args, args.out)
    matrix = _simulate(ws, plans, list(StressLevel))
    write_kpi_csv(args.out / "kpi.csv", matrix)
    write_kpi_json(args.out / "kpi.json", matrix)
    cmd_metrics(args, cfg, ws, matrix)
    print(f"stress test written to {args.out}")
    return code


# --- argument parsing ------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="flat key = value run config")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--level", choices=["1", "2", "3", "4"])
    p.add_argument("-v", "--verbose", action="store_true")
    g = p.add_argument_group("run config overrides")
    for flag, typ in (("nodes", Path), ("arcs", Path), ("economics", Path), ("demand-history", Path),
                      ("truckload", int), ("capacity-cap", int), ("max-leg-hours", float), ("speed", float),
                      ("delay-multiplier", float), ("demand-quantile", float), ("scenario-count", int),
                      ("gap-tol", float), ("time-limit", float), ("engine", str), ("horizon-days", int),
                      ("deadline-hours", float), ("overflow-penalty", float), ("hub-cost-amortization", str),
                      ("degree-scope", str)):
        g.add_argument(f"--{flag}", type=typ, dest=flag.replace("-", "_"))


CONFIG_KEYS = ("nodes", "arcs", "economics", "demand_history", "truckload", "capacity_cap", "max_leg_hours",
               "speed", "delay_multiplier", "demand_quantile", "scenario_count", "gap_tol", "time_limit", "engine",
               "horizon_days", "deadline_hours", "overflow_penalty", "hub_cost_amortization", "degree_scope", "seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hubcap", description="Hub capacity deployment under uncertainty")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic instance")
    _common(p)
    p.add_argument("--origins", type=int, default=3)
    p.add_argument("--hubs", type=int, default=5)
    p.add_argument("--destinations", type=int, default=6)
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--disruption-rate", type=float)

    p = sub.add_parser("generate", help="write the stress-level scenario sets")
    _common(p)

    p = sub.add_parser("optimize", help="solve the deployment model for one or all levels")
    _common(p)
    p.add_argument("--scenarios", help="scenario set file (default: OUT/scenarios_L<level>.json)")
    p.add_argument("--dump-lp", action="store_true", help="also write the model in LP format")

    p = sub.add_parser("simulate", help="roll plans forward under each stress level")
    _common(p)
    p.add_argument("--plans", nargs="+", help="plan files (default: OUT/plan_*.json)")

    p = sub.add_parser("metrics", help="network metrics and the comparison table")
    _common(p)
    p.add_argument("--plans", nargs="+", help="plan files (default: OUT/plan_*.json)")

    p = sub.add_parser("stress-test", help="generate, optimize all levels, simulate and compare")
    _common(p)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {k: getattr(args, k, None) for k in CONFIG_KEYS}
    cfg = cfg.updated(**overrides)
    return cfg.validate()


COMMANDS = {"synth": cmd_synth, "generate": cmd_generate, "optimize": cmd_optimize, "simulate": cmd_simulate,
            "metrics": cmd_metrics, "stress-test": cmd_stress_test}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "synth":
            return cmd_synth(args, cfg)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"hubcap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Infeasible as exc:
        print(f"hubcap: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TimedOut as exc:
        print(f"hubcap: timed out: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (HubcapError, ValueError) as exc:
        print(f"hubcap: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"hubcap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
