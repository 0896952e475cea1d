"""Batch assignment: trip-vehicle selection as a 0/1 program.

Decision variables, in one fixed order that every array in the model
follows:

* x[t,v]  deploy trip t on vehicle v (one per feasibility edge),
* y[r,t]  request r rides on deployed trip t (one per request-trip pair),
* z[r]    reject request r.

Rows: each real vehicle runs at most one trip; each request is served by
exactly one first-mile start or one direct ride or rejected; per candidate
leg, a first mile is deployed exactly as often as that leg's last mile; a
trip is deployed for all of its requests or none.

The solver is a best-first branch and bound over the LP relaxation. Every
relaxation is solved by HiGHS through scipy; branching always picks the
first fractional variable in the fixed order and explores the 1-branch
first, so results are reproducible run to run.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from tirsim.netgraph import RoadGraph, network_distance, travel_time
from tirsim.segments import SegmentKind
from tirsim.tirtv import DROPOFF, DUMMY_VEHICLE_ID, PICKUP, TirtvGraph

_EPS = 1e-9
_INT_TOL = 1e-6


@dataclass
class IlpModel:
    var_names: list[str]
    c: np.ndarray
    a_ub: sparse.csr_matrix
    b_ub: np.ndarray
    a_eq: sparse.csr_matrix
    b_eq: np.ndarray
    x_index: dict[tuple[int, int], int]   # (trip, vehicle) -> column
    y_index: dict[tuple[int, int], int]   # (request, trip) -> column
    z_index: dict[int, int]               # request -> column
    penalties: dict[int, float]
    requests: list[int]
    fm_trips: dict[int, set[int]]
    direct_trips: dict[int, set[int]]
    leg_rows: list[tuple[int, object, tuple[int, ...], tuple[int, ...]]]
    pruned_trips: set[int]

    @property
    def n_vars(self) -> int:
        return len(self.var_names)


def default_penalties(graph: TirtvGraph, g: RoadGraph, factor: float = 10.0) -> dict[int, float]:
    """Rejection prices that make serving a request always preferable.

    Each price is `factor` times the batch's largest edge cost plus the
    rider's door-to-door driving distance, so no bundle of detours in a
    small batch outweighs a rejection.
    """
    cmax = max((e.cost for e in graph.e2.values()), default=0.0)
    cmax = max(cmax, 0.0)
    out: dict[int, float] = {}
    for r in graph.e1:
        direct = None
        for s in graph.segments.values():
            if s.request_id == r and s.kind is SegmentKind.DIRECT:
                direct = network_distance(g, s.pickup_node, s.dropoff_node)
                break
        if direct is None or math.isinf(direct):
            direct = 0.0
        out[r] = factor * (cmax + direct)
    return out


def build_ilp(graph: TirtvGraph, penalties: dict[int, float],
              prune_unservable: bool = True) -> IlpModel:
    """Assemble the program for one batch.

    `prune_unservable` drops trips no vehicle can run before any rows are
    written; their ride variables could only ever be zero, so the optimum
    is unchanged.
    """
    requests = sorted(graph.e1)
    for r in requests:
        if r not in penalties:
            raise ValueError(f"no rejection price for request {r}")

    servable = {t for (t, _v) in graph.e2}
    trips = {t.id: t for t in graph.trips}
    kept = {tid: t for tid, t in trips.items()
            if not prune_unservable or tid in servable}
    pruned = set(trips) - set(kept)

    # segment role lookup per (request, trip)
    fm_trips: dict[int, set[int]] = {r: set() for r in requests}
    lm_trips: dict[int, set[int]] = {r: set() for r in requests}
    direct_trips: dict[int, set[int]] = {r: set() for r in requests}
    fm_by_leg: dict[tuple[int, object], set[int]] = {}
    lm_by_leg: dict[tuple[int, object], set[int]] = {}
    for tid, t in kept.items():
        for sid in t.segment_ids:
            s = graph.segments[sid]
            if s.kind is SegmentKind.DIRECT:
                direct_trips[s.request_id].add(tid)
            elif s.kind is SegmentKind.FIRST_MILE:
                fm_trips[s.request_id].add(tid)
                fm_by_leg.setdefault((s.request_id, s.leg), set()).add(tid)
            else:
                lm_trips[s.request_id].add(tid)
                lm_by_leg.setdefault((s.request_id, s.leg), set()).add(tid)

    var_names: list[str] = []
    cost: list[float] = []
    x_index: dict[tuple[int, int], int] = {}
    for (t, v) in sorted(graph.e2):
        if t not in kept:
            continue
        x_index[(t, v)] = len(var_names)
        var_names.append(f"x_t{t}_v{v}")
        cost.append(graph.e2[(t, v)].cost)
    y_index: dict[tuple[int, int], int] = {}
    for r in requests:
        for t in graph.e1[r]:
            if t not in kept:
                continue
            y_index[(r, t)] = len(var_names)
            var_names.append(f"y_r{r}_t{t}")
            cost.append(0.0)
    z_index: dict[int, int] = {}
    for r in requests:
        z_index[r] = len(var_names)
        var_names.append(f"z_r{r}")
        cost.append(penalties[r])

    n = len(var_names)
    ub_rows: list[tuple[int, int, float]] = []
    b_ub: list[float] = []
    # one trip per real vehicle
    row = 0
    for v in sorted(graph.vehicles):
        cols = [x_index[(t, w)] for (t, w) in x_index if w == v]
        for c in cols:
            ub_rows.append((row, c, 1.0))
        b_ub.append(1.0)
        row += 1

    eq_rows: list[tuple[int, int, float]] = []
    b_eq: list[float] = []
    row = 0
    # serve once or reject: first-mile starts and direct rides count
    for r in requests:
        coeff: dict[int, float] = {}
        for t in fm_trips[r]:
            coeff[y_index[(r, t)]] = coeff.get(y_index[(r, t)], 0.0) + 1.0
        for t in direct_trips[r]:
            coeff[y_index[(r, t)]] = coeff.get(y_index[(r, t)], 0.0) + 1.0
        coeff[z_index[r]] = 1.0
        for col, val in coeff.items():
            eq_rows.append((row, col, val))
        b_eq.append(1.0)
        row += 1
    # per leg: first mile deployed iff last mile deployed
    leg_rows: list[tuple[int, object, tuple[int, ...], tuple[int, ...]]] = []
    leg_keys = sorted(set(fm_by_leg) | set(lm_by_leg),
                      key=lambda k: (k[0], k[1].line_id, k[1].run_id,
                                     k[1].depart_idx, k[1].arrive_idx))
    for key in leg_keys:
        r, leg = key
        fms = tuple(sorted(fm_by_leg.get(key, ())))
        lms = tuple(sorted(lm_by_leg.get(key, ())))
        coeff = {}
        for t in fms:
            coeff[y_index[(r, t)]] = coeff.get(y_index[(r, t)], 0.0) + 1.0
        for t in lms:
            coeff[y_index[(r, t)]] = coeff.get(y_index[(r, t)], 0.0) - 1.0
        for col, val in coeff.items():
            if val != 0.0:
                eq_rows.append((row, col, val))
        b_eq.append(0.0)
        leg_rows.append((r, leg, fms, lms))
        row += 1
    # a deployed trip carries all of its requests
    for r in requests:
        for t in graph.e1[r]:
            if t not in kept:
                continue
            for (tt, v) in x_index:
                if tt == t:
                    eq_rows.append((row, x_index[(tt, v)], 1.0))
            eq_rows.append((row, y_index[(r, t)], -1.0))
            b_eq.append(0.0)
            row += 1

    def to_csr(entries, n_rows):
        if not entries:
            return sparse.csr_matrix((n_rows, n), dtype=float)
        rows, cols, vals = zip(*entries)
        return sparse.csr_matrix(
            sparse.coo_matrix((vals, (rows, cols)), shape=(n_rows, n), dtype=float))

    return IlpModel(
        var_names=var_names,
        c=np.asarray(cost, dtype=float),
        a_ub=to_csr(ub_rows, len(b_ub)),
        b_ub=np.asarray(b_ub, dtype=float),
        a_eq=to_csr(eq_rows, len(b_eq)),
        b_eq=np.asarray(b_eq, dtype=float),
        x_index=x_index, y_index=y_index, z_index=z_index,
        penalties=dict(penalties), requests=requests,
        fm_trips=fm_trips, direct_trips=direct_trips,
        leg_rows=leg_rows, pruned_trips=pruned,
    )


@dataclass
class IlpSolution:
    status: str  # optimal | timeout_incumbent | timeout_fallback
    objective: float
    values: np.ndarray  # 0/1 per variable, canonical order
    nodes: int

    def x(self, model: IlpModel) -> dict[tuple[int, int], int]:
        return {k: int(self.values[i]) for k, i in model.x_index.items()}

    def y(self, model: IlpModel) -> dict[tuple[int, int], int]:
        return {k: int(self.values[i]) for k, i in model.y_index.items()}

    def z(self, model: IlpModel) -> dict[int, int]:
        return {r: int(self.values[i]) for r, i in model.z_index.items()}


def _all_reject(model: IlpModel) -> IlpSolution:
    vals = np.zeros(model.n_vars)
    for r, i in model.z_index.items():
        vals[i] = 1.0
    obj = sum(model.penalties[r] for r in model.requests)
    return IlpSolution(status="timeout_fallback", objective=obj,
                       values=vals, nodes=0)


def solve_ilp(model: IlpModel, time_limit_s: float | None = None) -> IlpSolution:
    """Exact best-first search; rejection of everything is the safety net.

    Nodes are ordered by their parent's relaxation bound. The incumbent is
    replaced only on strict improvement, so among equally good optima the
    first one reached under the fixed branching order wins.
    """
    n = model.n_vars
    if n == 0:
        return IlpSolution(status="optimal", objective=0.0,
                           values=np.zeros(0), nodes=0)
    t0 = time.monotonic()

    def lp(fixed: dict[int, float]):
        bounds = [(fixed.get(i, 0.0), fixed.get(i, 1.0)) for i in range(n)]
        res = linprog(model.c, A_ub=model.a_ub, b_ub=model.b_ub,
                      A_eq=model.a_eq, b_eq=model.b_eq,
                      bounds=bounds, method="highs")
        if res.status != 0:
            return None
        return res.fun, res.x

    incumbent: IlpSolution | None = None
    nodes = 0
    counter = 0
    heap: list[tuple[float, int, dict[int, float]]] = [(-math.inf, counter, {})]
    while heap:
        if time_limit_s is not None and time.monotonic() - t0 > time_limit_s:
            if incumbent is not None:
                return IlpSolution(status="timeout_incumbent",
                                   objective=incumbent.objective,
                                   values=incumbent.values, nodes=nodes)
            return _all_reject(model)
        bound, _, fixed = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent.objective - _EPS:
            continue
        sol = lp(fixed)
        nodes += 1
        if sol is None:
            continue
        obj, xs = sol
        if incumbent is not None and obj >= incumbent.objective - _EPS:
            continue
        frac = None
        for i in range(n):
            if abs(xs[i] - round(xs[i])) > _INT_TOL:
                frac = i
                break
        if frac is None:
            vals = np.rint(xs)
            exact = float(model.c @ vals)
            if incumbent is None or exact < incumbent.objective - _EPS:
                incumbent = IlpSolution(status="optimal", objective=exact,
                                        values=vals, nodes=nodes)
            continue
        for val in (1.0, 0.0):  # the 1-branch first
            counter += 1
            child = dict(fixed)
            child[frac] = val
            heapq.heappush(heap, (obj, counter, child))

    if incumbent is None:
        return _all_reject(model)
    incumbent.nodes = nodes
    return incumbent


@dataclass
class RequestOutcome:
    request_id: int
    served: bool
    mode: str | None            # direct | multimodal | None when rejected
    trip_ids: tuple[int, ...] = ()
    vehicle_ids: tuple[int, ...] = ()
    same_vehicle_both_miles: bool = False


@dataclass
class AssignmentSolution:
    status: str
    objective: float
    outcomes: dict[int, RequestOutcome]
    dispatch: dict[int, int]    # real vehicle -> deployed trip
    deployed: dict[tuple[int, int], object]  # (trip, vehicle) -> route or None
    nodes: int


def extract_assignment(graph: TirtvGraph, model: IlpModel,
                       sol: IlpSolution) -> AssignmentSolution:
    """Read the solved variable vector back into request outcomes and a
    per-vehicle dispatch."""
    xs = sol.x(model)
    ys = sol.y(model)
    trips = {t.id: t for t in graph.trips}

    deployed = {(t, v): graph.e2[(t, v)].route for (t, v), val in xs.items() if val}
    dispatch = {v: t for (t, v) in deployed if v != DUMMY_VEHICLE_ID}

    outcomes: dict[int, RequestOutcome] = {}
    for r in model.requests:
        my_trips = tuple(sorted(t for (rr, t), val in ys.items() if rr == r and val))
        if not my_trips:
            outcomes[r] = RequestOutcome(request_id=r, served=False, mode=None)
            continue
        veh = tuple(sorted(v for (t, v) in deployed if t in my_trips))
        direct = any(t in model.direct_trips[r] for t in my_trips)
        paired = any(r in trips[t].same_leg_requests for t in my_trips)
        outcomes[r] = RequestOutcome(
            request_id=r, served=True,
            mode="direct" if direct else "multimodal",
            trip_ids=my_trips, vehicle_ids=veh,
            same_vehicle_both_miles=paired,
        )
    return AssignmentSolution(status=sol.status, objective=sol.objective,
                              outcomes=outcomes, dispatch=dispatch,
                              deployed=deployed, nodes=sol.nodes)


def validate_solution(graph: TirtvGraph, model: IlpModel, sol: IlpSolution,
                      g: RoadGraph) -> list[str]:
    """Replay every rule against the solved vector; [] means clean.

    Deployed routes are re-walked stop by stop (travel times, waits,
    windows, seat count, distance), so a corrupted certificate is caught
    even when the variable algebra holds.
    """
    errors: list[str] = []
    vals = sol.values
    for i, v in enumerate(vals):
        if abs(v - round(v)) > _INT_TOL or round(v) not in (0, 1):
            errors.append(f"{model.var_names[i]} is not binary: {v}")
    xs = sol.x(model)
    ys = sol.y(model)
    zs = sol.z(model)

    per_vehicle: dict[int, int] = {}
    for (t, v), val in xs.items():
        if val and v != DUMMY_VEHICLE_ID:
            per_vehicle[v] = per_vehicle.get(v, 0) + 1
    for v, cnt in per_vehicle.items():
        if cnt > 1:
            errors.append(f"vehicle {v} runs {cnt} trips")

    for r in model.requests:
        total = sum(ys.get((r, t), 0) for t in model.fm_trips[r])
        total += sum(ys.get((r, t), 0) for t in model.direct_trips[r])
        total += zs[r]
        if total != 1:
            errors.append(f"request {r} served {total} times")
    for r, leg, fms, lms in model.leg_rows:
        lhs = sum(ys.get((r, t), 0) for t in fms) - sum(ys.get((r, t), 0) for t in lms)
        if lhs != 0:
            errors.append(f"request {r} leg {leg.line_id}/{leg.run_id} unbalanced")
    for (r, t), val in ys.items():
        deployed = sum(xs.get((t, v), 0) for v in graph.vehicles) + \
            xs.get((t, DUMMY_VEHICLE_ID), 0)
        if val != deployed:
            errors.append(f"trip {t} deployment disagrees with rider {r}")

    for (t, v), val in xs.items():
        if not val or v == DUMMY_VEHICLE_ID:
            continue
        route = graph.e2[(t, v)].route
        veh = graph.vehicles[v]
        node, now, dist = veh.location, veh.available_time, 0.0
        load = veh.initial_load()
        for stop in route.stops:
            hop = travel_time(g, node, stop.node)
            if math.isinf(hop):
                errors.append(f"trip {t} vehicle {v}: unreachable stop {stop.node}")
                break
            now += hop
            dist += network_distance(g, node, stop.node)
            if stop.kind == PICKUP:
                now = max(now, stop.segment.earliest_pickup)
                if now > stop.segment.latest_pickup + _EPS:
                    errors.append(f"trip {t} vehicle {v}: late pickup of "
                                  f"segment {stop.segment.id}")
                load += 1
                if load > veh.capacity:
                    errors.append(f"trip {t} vehicle {v}: over capacity")
            else:
                if now > stop.segment.dropoff_deadline + _EPS:
                    errors.append(f"trip {t} vehicle {v}: late dropoff of "
                                  f"segment {stop.segment.id}")
                load -= 1
            if abs(now - stop.time) > 1e-6:
                errors.append(f"trip {t} vehicle {v}: certificate time drifts "
                              f"at segment {stop.segment.id}")
            node = stop.node
        else:
            if abs(dist - route.distance) > 1e-6:
                errors.append(f"trip {t} vehicle {v}: certificate distance drifts")

    expect = sum(graph.e2[(t, v)].cost for (t, v), val in xs.items() if val)
    expect += sum(model.penalties[r] for r, val in zs.items() if val)
    if abs(expect - sol.objective) > 1e-6:
        errors.append(f"objective {sol.objective} != recomputed {expect}")
    return errors


def export_lp(model: IlpModel, path: str) -> None:
    """Write the program in LP text format for outside solvers."""
    lines = ["Minimize", " obj:"]
    terms = [f" {model.c[i]:+g} {name}" for i, name in enumerate(model.var_names)]
    lines.extend("  " + t for t in terms)
    lines.append("Subject To")

    def emit(mat, rhs, op, tag):
        csr = mat.tocsr()
        for i in range(csr.shape[0]):
            row = csr.getrow(i)
            parts = [f"{row.data[k]:+g} {model.var_names[row.indices[k]]}"
                     for k in range(len(row.indices))]
            if not parts:
                parts = ["0 " + model.var_names[0]] if model.var_names else ["0"]
            lines.append(f" {tag}{i}: " + " ".join(parts) + f" {op} {rhs[i]:g}")

    emit(model.a_ub, model.b_ub, "<=", "veh")
    emit(model.a_eq, model.b_eq, "=", "eq")
    lines.append("Binary")
    for name in model.var_names:
        lines.append(f" {name}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
