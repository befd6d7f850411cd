"""Demand and disruption scenario generation.

Daily OD demand is modelled per pair with a univariate Gaussian KDE fitted on
the daily totals of the history (days without orders count as zeros). Hub
disruptions are independent Bernoulli draws with per-hub rates. The four
stress-testing levels combine the two sources in different ways.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import EmptyHistory, HubcapError
from .network import HubEconomics

BANDWIDTH_FLOOR = 1e-3

Pair = tuple[str, str]


def pair_key(pair: Pair) -> str:
    return f"{pair[0]}->{pair[1]}"


def parse_pair_key(key: str) -> Pair:
    o, sep, d = key.partition("->")
    if not sep or not o or not d:
        raise ValueError(f"bad OD key {key!r}; expected 'ORIGIN->DESTINATION'")
    return o, d


def stream_rng(seed: int, *tags) -> np.random.Generator:
    """Independent random stream for ``(seed, *tags)``.

    String tags are hashed with CRC-32, so a stream depends only on its name
    and never on the order in which streams are requested.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for t in tags:
        words.append(zlib.crc32(t.encode()) if isinstance(t, str) else int(t) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


class StressLevel(enum.IntEnum):
    L1_deterministic = 1
    L2_stochastic_demand = 2
    L3_stochastic_disruption = 3
    L4_integrated = 4

    @property
    def stochastic_demand(self) -> bool:
        return self in (StressLevel.L2_stochastic_demand, StressLevel.L4_integrated)

    @property
    def disruptions(self) -> bool:
        return self in (StressLevel.L3_stochastic_disruption, StressLevel.L4_integrated)

    @property
    def short(self) -> str:
        return f"L{int(self)}"

    @property
    def network_name(self) -> str:
        return ("BDN", "SDN", "SDiN", "ISN")[int(self) - 1]

    @classmethod
    def parse(cls, value) -> "StressLevel":
        if isinstance(value, cls):
            return value
        text = str(value).strip()
        if text.upper().startswith("L"):
            text = text[1:]
        try:
            return cls(int(text))
        except ValueError:
            raise ValueError(f"unknown stress level {value!r}; use 1-4") from None


@dataclass
class DemandHistory:
    """Daily order records. ``start``/``days`` fix the horizon used for zero-filling."""

    records: list[tuple[dt.date, str, str, int]]
    start: dt.date | None = None
    days: int | None = None

    def __post_init__(self):
        for date, o, d, q in self.records:
            if q < 0 or int(q) != q:
                raise ValueError(f"{date} {o}->{d}: quantity must be a nonnegative integer")
        if self.records:
            dates = [r[0] for r in self.records]
            if self.start is None:
                self.start = min(dates)
            if self.days is None:
                self.days = (max(dates) - self.start).days + 1
            if min(dates) < self.start or max(dates) >= self.start + dt.timedelta(days=self.days):
                raise ValueError("history records fall outside the declared horizon")

    @property
    def pairs(self) -> list[Pair]:
        return sorted({(o, d) for _, o, d, _ in self.records})

    def daily_matrix(self) -> dict[Pair, np.ndarray]:
        """Per-pair daily totals over the horizon, zero on days without orders."""
        out = defaultdict(lambda: np.zeros(self.days, dtype=np.int64))
        for date, o, d, q in self.records:
            out[(o, d)][(date - self.start).days] += int(q)
        return {p: out[p] for p in sorted(out)}

    def daily_demands(self) -> list[dict[Pair, int]]:
        """One demand map per day of the horizon (zeros omitted)."""
        days = [dict() for _ in range(self.days or 0)]
        for p, series in self.daily_matrix().items():
            for i, q in enumerate(series):
                if q:
                    days[i][p] = int(q)
        return [dict(sorted(d.items())) for d in days]

    def check_nodes(self, network):
        for o, d in self.pairs:
            if not network.has_node(o) or not network.has_node(d):
                raise HubcapError(f"demand pair {o}->{d} references an unknown node")

    @classmethod
    def from_csv(cls, path) -> "DemandHistory":
        path = Path(path)
        records = []
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            need = ("date", "origin", "destination", "quantity")
            missing = [c for c in need if c not in (reader.fieldnames or [])]
            if missing:
                raise HubcapError(f"{path}: missing column(s) {missing}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    q = int(row["quantity"])
                    if q < 0:
                        raise ValueError("negative quantity")
                    records.append((dt.date.fromisoformat(row["date"].strip()), row["origin"].strip(),
                                    row["destination"].strip(), q))
                except ValueError as exc:
                    raise HubcapError(f"{path}:{lineno}: {exc}") from exc
        return cls(records)

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "origin", "destination", "quantity"])
            for date, o, d, q in sorted(self.records):
                w.writerow([date.isoformat(), o, d, q])


def silverman_bandwidth(samples) -> float:
    """0.9 * min(sd, IQR/1.34) * n^(-1/5), floored at ``BANDWIDTH_FLOOR``.

    When the IQR is zero but the spread is not, the standard deviation alone
    is used (the usual fallback of this rule).
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        return BANDWIDTH_FLOOR
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    return max(0.9 * spread * n ** (-0.2), BANDWIDTH_FLOOR)


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


@dataclass
class PairKDE:
    samples: np.ndarray
    bandwidth: float

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValueError("KDE needs at least one sample point")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        picks = self.samples[rng.integers(0, len(self.samples), size=n)]
        draws = picks + rng.normal(0.0, self.bandwidth, size=n)
        return round_half_up(np.maximum(draws, 0.0))


@dataclass
class DemandEstimator:
    kdes: dict[Pair, PairKDE]

    @property
    def pairs(self) -> list[Pair]:
        return sorted(self.kdes)

    def quantile_demand(self, q: float) -> dict[Pair, int]:
        """Per-pair empirical ``q``-quantile of daily demand, rounded half up."""
        if not 0.0 < q < 1.0:
            raise ValueError("demand quantile must lie in (0, 1)")
        return {p: int(round_half_up(np.quantile(self.kdes[p].samples, q))) for p in self.pairs}

    def mean_demand(self) -> dict[Pair, float]:
        return {p: float(np.mean(self.kdes[p].samples)) for p in self.pairs}


def fit_demand_estimator(history: DemandHistory) -> DemandEstimator:
    if not history.records:
        raise EmptyHistory("demand history has no records")
    kdes = {}
    for pair, series in history.daily_matrix().items():
        samples = series.astype(float)
        kdes[pair] = PairKDE(samples, silverman_bandwidth(samples))
    return DemandEstimator(kdes)


def sample_demand_scenarios(estimator: DemandEstimator, n: int, seed: int) -> list[dict[Pair, int]]:
    if n < 1:
        raise ValueError("number of demand scenarios must be >= 1")
    columns = {}
    for pair in estimator.pairs:
        rng = stream_rng(seed, "demand", pair_key(pair))
        columns[pair] = estimator.kdes[pair].sample(rng, n)
    return [{p: int(columns[p][i]) for p in estimator.pairs} for i in range(n)]


def sample_disruption_scenarios(econ: HubEconomics, hubs, n: int, seed: int) -> list[frozenset[str]]:
    if n < 1:
        raise ValueError("number of disruption scenarios must be >= 1")
    hubs = sorted(hubs)
    rng = stream_rng(seed, "disruption")
    rates = np.array([econ.disruption_rate[h] for h in hubs])
    hits = rng.random((n, len(hubs))) < rates
    return [frozenset(h for h, hit in zip(hubs, row) if hit) for row in hits]


@dataclass
class Scenario:
    demand: dict[Pair, int]
    disrupted_hubs: frozenset[str] = frozenset()
    weight: float = 1.0

    def __post_init__(self):
        self.disrupted_hubs = frozenset(self.disrupted_hubs)
        for p, q in self.demand.items():
            if q < 0 or int(q) != q:
                raise ValueError(f"demand for {pair_key(p)} must be a nonnegative integer")

    @property
    def total_demand(self) -> int:
        return int(sum(self.demand.values()))


@dataclass
class ScenarioSet:
    scenarios: list[Scenario]
    level: StressLevel | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __getitem__(self, i):
        return self.scenarios[i]

    @property
    def pairs(self) -> list[Pair]:
        return sorted({p for s in self.scenarios for p, q in s.demand.items()})

    @classmethod
    def uniform(cls, demands, disruptions=None, level=None) -> "ScenarioSet":
        n = len(demands)
        disruptions = disruptions if disruptions is not None else [frozenset()] * n
        if len(disruptions) != n:
            raise ValueError("demand and disruption lists must pair up 1:1")
        return cls([Scenario(dict(q), frozenset(h), 1.0 / n) for q, h in zip(demands, disruptions)], level)

    def to_dict(self) -> dict:
        body = {
            "scenarios": [
                {
                    "demand": {pair_key(p): int(q) for p, q in sorted(s.demand.items())},
                    "disrupted_hubs": sorted(s.disrupted_hubs),
                    "weight": s.weight,
                }
                for s in self.scenarios
            ]
        }
        if self.level is not None:
            body["level"] = int(self.level)
        if self.meta:
            body["meta"] = self.meta
        return body

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioSet":
        scenarios = [
            Scenario({parse_pair_key(k): int(v) for k, v in s["demand"].items()},
                     frozenset(s.get("disrupted_hubs", ())), float(s["weight"]))
            for s in data["scenarios"]
        ]
        level = StressLevel(data["level"]) if data.get("level") is not None else None
        return cls(scenarios, level, dict(data.get("meta", {})))

    @classmethod
    def from_json(cls, path) -> "ScenarioSet":
        path = Path(path)
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except (KeyError, ValueError, TypeError) as exc:
            raise HubcapError(f"{path}: malformed scenario file ({exc})") from exc


def build_stress_scenarios(level, estimator: DemandEstimator, econ: HubEconomics, n: int,
                           demand_quantile: float = 0.7, seed: int = 0, hubs=None) -> ScenarioSet:
    """Scenario set for one stress-testing level; every weight is 1/n."""
    level = StressLevel.parse(level)
    if n < 1:
        raise ValueError("scenario count must be >= 1")
    hubs = sorted(hubs if hubs is not None else econ.hubs)
    if level.stochastic_demand:
        demands = sample_demand_scenarios(estimator, n, seed)
    else:
        fixed = estimator.quantile_demand(demand_quantile)
        demands = [dict(fixed) for _ in range(n)]
    if level.disruptions:
        disruptions = sample_disruption_scenarios(econ, hubs, n, seed)
    else:
        disruptions = [frozenset()] * n
    out = ScenarioSet.uniform(demands, disruptions, level)
    out.meta = {"seed": int(seed), "demand_quantile": float(demand_quantile), "count": n}
    return out
