"""Best-bound branch-and-bound over LP relaxations.

LP relaxations are solved with the HiGHS dual simplex exposed by
``scipy.optimize.linprog``. Branching takes the fractional integer variable
of the lowest priority class (open flags, then capacities, then trucks, then
flows), most fractional first, lowest column index on ties.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..errors import Infeasible, TimedOut

INT_TOL = 1e-6
LP_METHOD = "highs-ds"


@dataclass
class MilpProblem:
    c: np.ndarray
    A_ub: object
    b_ub: np.ndarray | None
    A_eq: object
    b_eq: np.ndarray | None
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    priority: np.ndarray


@dataclass
class BnBResult:
    x: np.ndarray
    objective: float
    bound: float
    gap: float
    status: str
    nodes: int
    bound_history: list[float] = field(default_factory=list)


def solve_lp(prob: MilpProblem, lb, ub):
    res = linprog(prob.c, A_ub=prob.A_ub, b_ub=prob.b_ub, A_eq=prob.A_eq, b_eq=prob.b_eq,
                  bounds=np.column_stack([lb, ub]), method=LP_METHOD)
    if res.status == 2:
        return None, math.inf
    if res.status != 0:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    return res.x, float(res.fun)


def _pick_branch(x, prob: MilpProblem):
    isint = prob.integrality.astype(bool)
    frac = np.abs(x - np.round(x))
    cand = np.flatnonzero(isint & (frac > INT_TOL))
    if cand.size == 0:
        return None
    top = prob.priority[cand].min()
    cand = cand[prob.priority[cand] == top]
    dist = np.abs((x[cand] - np.floor(x[cand])) - 0.5)
    # stable argmin -> lowest column index among the most fractional
    return int(cand[np.argmin(dist)])


def gap_of(incumbent, bound):
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, (incumbent - bound) / max(1.0, abs(incumbent)))


def branch_and_bound(prob: MilpProblem, gap_tol=1e-6, time_limit=None, node_limit=None,
                     abs_tol=1e-9) -> BnBResult:
    """Minimise ``c @ x`` with integrality on ``prob.integrality`` columns.

    Returns the best integral point. Status is ``"optimal"`` once the gap is
    closed to ``gap_tol`` and ``"timed_out"`` if the time or node limit hits
    first with an incumbent in hand. Raises Infeasible or TimedOut otherwise.
    """
    start = time.monotonic()
    isint = prob.integrality.astype(bool)
    counter = itertools.count()
    lb0 = prob.lb.astype(float).copy()
    ub0 = prob.ub.astype(float).copy()

    x, z = solve_lp(prob, lb0, ub0)
    if x is None:
        raise Infeasible("LP relaxation is infeasible")
    heap = [(z, 0, next(counter), lb0, ub0, x)]
    inc_x, inc_z = None, math.inf
    nodes = 0
    history = []
    best_bound = z
    pruned_floor = math.inf
    status = "optimal"

    def tol(ref):
        return max(gap_tol * max(1.0, abs(ref)), abs_tol * max(1.0, abs(ref)))

    while heap:
        open_bound = heap[0][0]
        est = min(open_bound, pruned_floor, inc_z)
        best_bound = max(best_bound, est)
        history.append(best_bound)
        if inc_x is not None and gap_of(inc_z, best_bound) <= gap_tol:
            break
        if time_limit is not None and time.monotonic() - start > time_limit:
            status = "timed_out"
            break
        if node_limit is not None and nodes >= node_limit:
            status = "timed_out"
            break

        z, negdepth, _, lb, ub, x = heapq.heappop(heap)
        nodes += 1
        if z >= inc_z - tol(inc_z):
            pruned_floor = min(pruned_floor, z)
            continue
        j = _pick_branch(x, prob)
        if j is None:
            xr = x.copy()
            xr[isint] = np.round(xr[isint])
            zr = float(prob.c @ xr)
            if zr < inc_z:
                inc_x, inc_z = xr, zr
            continue
        v = x[j]
        for lo, hi in ((lb[j], math.floor(v)), (math.ceil(v), ub[j])):
            if lo > hi:
                continue
            clb, cub = lb.copy(), ub.copy()
            clb[j], cub[j] = lo, hi
            cx, cz = solve_lp(prob, clb, cub)
            if cx is None:
                continue
            if cz >= inc_z - tol(inc_z):
                pruned_floor = min(pruned_floor, cz)
                continue
            heapq.heappush(heap, (cz, negdepth - 1, next(counter), clb, cub, cx))

    if inc_x is None:
        if status == "timed_out":
            raise TimedOut("limit reached before an integral solution was found")
        raise Infeasible("no integral solution exists")
    if not heap:
        best_bound = max(best_bound, min(pruned_floor, inc_z))
        history.append(best_bound)
    best_bound = min(best_bound, inc_z)
    return BnBResult(inc_x, inc_z, best_bound, gap_of(inc_z, best_bound), status, nodes, history)
