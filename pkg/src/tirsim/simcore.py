"""Rolling-horizon dispatch simulation.

Requests arrive over time and are grouped into batches: a batch fires when
the oldest waiting request has waited one window, when enough requests have
piled up to hit the batch cap, or one window after the previous batch while
rejected-but-retryable requests remain. Vehicle and rider motion is played
forward before each solve, so every batch prices insertions against true
current positions. Committed assignments are final; only rejected requests
return to the pool.

The event log is a list of plain dicts, append-ordered deterministically,
with no wall-clock values. Per-batch wall times go to a separate timing
table so that two runs with the same seed produce byte-identical logs.
"""

from __future__ import annotations

import enum
import heapq
import math
import random
import time
from dataclasses import dataclass

from tirsim.assign import (
    build_ilp,
    default_penalties,
    extract_assignment,
    solve_ilp,
    validate_solution,
)
from tirsim.demand import Request
from tirsim.netgraph import RoadGraph, shortest_path
from tirsim.segments import (
    SegmentKind,
    decompose,
    first_feasible_walk_leg,
)
from tirsim.tirtv import (
    DROPOFF,
    PICKUP,
    VehicleState,
    build_tirtv,
)
from tirsim.transit import CapacityLedger, TransitSchedule, enumerate_legs


class Mode(str, enum.Enum):
    INTEGRATED = "integrated"
    RIDESHARE_ONLY = "rideshare_only"
    MULTIMODAL_ONLY = "multimodal_only"


@dataclass
class SimConfig:
    fleet_size: int
    vehicle_capacity: int = 4
    mode: Mode = Mode.INTEGRATED
    batch_window_s: float = 30.0
    batch_cap: int = 100
    alpha: float = 0.2
    beta_s: float = 1200.0
    walk_speed: float = 1.4
    max_walk_m: float = 400.0
    seed: int = 0
    penalty_factor: float = 10.0
    # trips limited to one rider's own segments: much faster, no pooling
    single_request_per_vehicle: bool = True
    max_trip_size: int = 4
    # insertion search is exhaustive, so refuse to price a vehicle whose
    # route would exceed this many stops; overbooked vehicles shed demand
    # to the rest of the fleet or back to the retry pool
    max_route_stops: int = 10
    # keep only this many earliest-boarding transit legs per rider when
    # building segments; None keeps all of them
    max_legs_per_request: int | None = None
    cost_metric: str = "distance"
    solver_time_limit_s: float | None = None
    # per batch, also solve the door-to-door-only restriction for comparison
    dominance_check: bool = False

    def __post_init__(self):
        if self.fleet_size < 0:
            raise ValueError("fleet_size must be >= 0")
        if self.vehicle_capacity < 1:
            raise ValueError("vehicle_capacity must be >= 1")
        if self.batch_window_s <= 0:
            raise ValueError("batch_window_s must be > 0")
        if self.batch_cap < 1:
            raise ValueError("batch_cap must be >= 1")
        self.mode = Mode(self.mode)


@dataclass
class SimResult:
    events: list[dict]
    timings: list[dict]
    dominance: list[dict]
    vehicles: list[VehicleState]
    n_batches: int


def place_fleet(g: RoadGraph, config: SimConfig) -> list[VehicleState]:
    """Vehicles drawn uniformly over nodes, reproducible from the seed."""
    rng = random.Random(f"{config.seed}:fleet")
    nodes = sorted(g.coords)
    return [
        VehicleState(id=i, capacity=config.vehicle_capacity,
                     location=rng.choice(nodes))
        for i in range(config.fleet_size)
    ]


def _edge_attrs(g: RoadGraph, u: int, w: int) -> tuple[float, float]:
    best = None
    for v, tt, dist in g.adj[u]:
        if v == w and (best is None or (tt, dist) < best):
            best = (tt, dist)
    if best is None:
        raise ValueError(f"no edge {u} -> {w}")
    return best


class _Sim:
    def __init__(self, g: RoadGraph, requests: list[Request], config: SimConfig,
                 schedule: TransitSchedule | None,
                 vehicles: list[VehicleState] | None = None):
        if config.mode is not Mode.RIDESHARE_ONLY and schedule is None:
            raise ValueError(f"mode {config.mode.value} needs a transit schedule")
        seen = set()
        for r in requests:
            if r.id in seen:
                raise ValueError(f"duplicate request id {r.id}")
            seen.add(r.id)
        self.g = g
        self.config = config
        self.schedule = schedule
        self.ledger = CapacityLedger(schedule) if schedule is not None else None
        self.future = sorted(requests, key=lambda r: (r.request_time, r.id))
        self.pending: list[Request] = []
        # (earliest retry time, request): holding pen for riders a batch
        # could not place; retrying before anything changed would just
        # reproduce the same rejection
        self.backlog: list[tuple[float, Request]] = []
        self.vehicles = place_fleet(g, config) if vehicles is None else vehicles
        self.by_vid = {v.id: v for v in self.vehicles}
        self.events: list[dict] = []
        self.timings: list[dict] = []
        self.dominance: list[dict] = []
        self.pq: list[tuple[float, int, dict]] = []
        self._pq_seq = 0
        self.ever_batched: set[int] = set()
        self.now = 0.0
        self.last_batch: float | None = None
        self.n_batches = 0

    # -- event helpers ------------------------------------------------

    def log(self, ev: dict) -> None:
        self.events.append(ev)

    def schedule_event(self, t: float, ev: dict) -> None:
        self._pq_seq += 1
        heapq.heappush(self.pq, (t, self._pq_seq, ev))

    # -- motion -------------------------------------------------------

    def advance(self, to_time: float) -> None:
        for v in self.vehicles:
            self._advance_vehicle(v, to_time)
        while self.pq and self.pq[0][0] <= to_time:
            _t, _seq, ev = heapq.heappop(self.pq)
            self.log(ev)
        self.now = max(self.now, to_time)

    def _advance_vehicle(self, v: VehicleState, to_time: float) -> None:
        while True:
            if v.edge_from is not None:
                if v.available_time > to_time:
                    return
                _tt, dist = _edge_attrs(self.g, v.edge_from, v.location)
                self.log({
                    "type": "drive", "t0": v.edge_entered, "t1": v.available_time,
                    "vehicle": v.id, "from": v.edge_from, "to": v.location,
                    "distance_m": dist,
                    "passengers": sorted(s.request_id for s in v.onboard),
                })
                v.edge_from = None
                v.edge_entered = None
            if not v.plan:
                v.available_time = max(v.available_time, to_time)
                return
            stop = v.plan[0]
            if v.location != stop.node:
                # only depart onto an edge the vehicle would actually enter
                # before the cutoff; otherwise it can still be rerouted from
                # its current node by the next solve
                if v.available_time >= to_time:
                    return
                path = shortest_path(self.g, v.location, stop.node)
                if path is None:
                    raise RuntimeError(
                        f"vehicle {v.id} cannot reach committed stop {stop.node}")
                nxt = path.node_sequence[1]
                tt, _dist = _edge_attrs(self.g, v.location, nxt)
                v.edge_from = v.location
                v.edge_entered = v.available_time
                v.location = nxt
                v.available_time = v.available_time + tt
                continue
            if stop.time > to_time:
                # parked at the stop waiting on a pickup window; keep the
                # pricing clock at the cutoff so nothing departs in the past
                v.available_time = max(v.available_time, to_time)
                return
            self._serve_stop(v, stop)
            v.plan.pop(0)

    def _serve_stop(self, v: VehicleState, stop) -> None:
        seg = stop.segment
        if stop.kind == PICKUP:
            v.onboard.append(seg)
            self.log({"type": "pickup", "t": stop.time, "vehicle": v.id,
                      "request": seg.request_id, "segment": seg.kind.value,
                      "node": stop.node})
        else:
            v.onboard.remove(seg)
            self.log({"type": "dropoff", "t": stop.time, "vehicle": v.id,
                      "request": seg.request_id, "segment": seg.kind.value,
                      "node": stop.node})
            if seg.kind in (SegmentKind.DIRECT, SegmentKind.LAST_MILE):
                mode = "direct" if seg.kind is SegmentKind.DIRECT else "multimodal"
                self.log({"type": "complete", "t": stop.time,
                          "request": seg.request_id, "mode": mode})
        v.available_time = max(v.available_time, stop.time)

    # -- rider-side journeys -------------------------------------------

    def _schedule_leg_events(self, rid: int, leg) -> None:
        self.schedule_event(leg.board_time, {
            "type": "board", "t": leg.board_time, "request": rid,
            "line": leg.line_id, "run": leg.run_id, "node": leg.depart_node})
        self.schedule_event(leg.alight_time, {
            "type": "alight", "t": leg.alight_time, "request": rid,
            "line": leg.line_id, "run": leg.run_id, "node": leg.arrive_node})

    def _schedule_walk(self, rid: int, t0: float, t1: float,
                       a: int, b: int) -> None:
        sp = shortest_path(self.g, a, b)
        self.schedule_event(t1, {
            "type": "walk", "t0": t0, "t1": t1, "request": rid,
            "from": a, "to": b, "distance_m": 0.0 if sp is None else sp.distance})

    def _reserve(self, rid: int, leg) -> None:
        overfull = self.ledger.reserve(leg, force=True)
        if overfull:
            self.log({"type": "seat_violation", "t": self.now, "request": rid,
                      "line": leg.line_id, "run": leg.run_id, "count": overfull})

    def _serve_transit_only(self, r: Request, leg, walk_in_s: float,
                            walk_out_s: float) -> None:
        self._reserve(r.id, leg)
        self.log({"type": "assign", "t": self.now, "request": r.id,
                  "mode": "transit_only", "line": leg.line_id, "run": leg.run_id,
                  "first_mile": "walk", "last_mile": "walk",
                  "vehicles": [], "same_vehicle_both_miles": False})
        self._schedule_walk(r.id, leg.board_time - walk_in_s, leg.board_time,
                            r.origin, leg.depart_node)
        self._schedule_leg_events(r.id, leg)
        done = leg.alight_time + walk_out_s
        self._schedule_walk(r.id, leg.alight_time, done,
                            leg.arrive_node, r.destination)
        self.schedule_event(done, {"type": "complete", "t": done,
                                   "request": r.id, "mode": "transit_only"})

    # -- batching -------------------------------------------------------

    def next_batch_time(self) -> float | None:
        w = self.config.batch_window_s
        cap = self.config.batch_cap
        if not self.pending and not self.backlog and not self.future:
            return None
        eligible_now = sum(1 for retry, _r in self.backlog if retry <= self.now)
        if len(self.pending) + eligible_now >= cap:
            return self.now
        cands = []
        if self.pending:
            cands.append(self.pending[0].request_time + w)
        elif self.future:
            # nothing waiting yet: the window clock starts when the next
            # request lands
            cands.append(self.future[0].request_time + w)
        if self.backlog:
            cands.append(min(retry for retry, _r in self.backlog))
        need = cap - len(self.pending) - len(self.backlog)
        if 0 < need <= len(self.future):
            cands.append(self.future[need - 1].request_time)
        return max(self.now, min(cands))

    def pull_arrivals(self, t: float) -> None:
        while self.future and self.future[0].request_time <= t:
            r = self.future.pop(0)
            self.pending.append(r)
            self.log({"type": "request", "t": r.request_time, "request": r.id,
                      "origin": r.origin, "destination": r.destination,
                      "deadline": r.deadline, "sptt": r.sptt,
                      "direct_m": r.direct_distance})
        self.pending.sort(key=lambda r: (r.request_time, r.id))

    def take_batch(self) -> list[Request]:
        retryable = [r for retry, r in self.backlog if retry <= self.now]
        merged = sorted(retryable + self.pending,
                        key=lambda r: (r.request_time, r.id))
        batch = merged[:self.config.batch_cap]
        chosen = {r.id for r in batch}
        self.backlog = [(retry, r) for retry, r in self.backlog
                        if r.id not in chosen]
        self.pending = [r for r in self.pending if r.id not in chosen]
        return batch

    def run_batch(self, batch: list[Request]) -> None:
        cfg = self.config
        t_start = time.perf_counter()
        ilp_requests: list[Request] = []
        segments = []
        seg_count = 0
        legs_of: dict[int, list] = {}
        for r in batch:
            legs = []
            if cfg.mode is not Mode.RIDESHARE_ONLY:
                legs = enumerate_legs(r, self.schedule, self.g, now=self.now,
                                      ledger=self.ledger)
            direct_viable = (cfg.mode is not Mode.MULTIMODAL_ONLY
                             and self.now + r.sptt <= r.deadline)
            if not legs and not direct_viable:
                reason = ("expired" if r.id in self.ever_batched
                          else "never_feasible")
                self.log({"type": "reject", "t": self.now, "request": r.id,
                          "reason": reason})
                continue
            self.ever_batched.add(r.id)
            if cfg.mode is not Mode.RIDESHARE_ONLY and legs:
                walkable = first_feasible_walk_leg(
                    r, legs, self.g, cfg.walk_speed, cfg.max_walk_m)
                if walkable is not None:
                    leg, w_in, w_out = walkable
                    self._serve_transit_only(r, leg, w_in, w_out)
                    continue
            if cfg.max_legs_per_request is not None:
                legs = legs[:cfg.max_legs_per_request]
            segs = decompose(r, legs, self.g, cfg.walk_speed, cfg.max_walk_m)
            if cfg.mode is Mode.MULTIMODAL_ONLY:
                segs = [s for s in segs if s.kind is not SegmentKind.DIRECT]
            if not segs:
                self.backlog.append((self.now + cfg.batch_window_s, r))
                self.log({"type": "defer", "t": self.now, "request": r.id})
                continue
            for s in segs:
                s.id = seg_count
                seg_count += 1
            segments.extend(segs)
            ilp_requests.append(r)

        if not ilp_requests:
            self.timings.append({
                "batch": self.n_batches, "t": self.now, "n_requests": 0,
                "n_segments": 0, "n_trips": 0, "n_e2": 0,
                "build_s": 0.0, "solve_s": 0.0,
                "total_s": time.perf_counter() - t_start})
            return

        t_build = time.perf_counter()
        graph = build_tirtv(segments, self.vehicles, self.g,
                            metric=cfg.cost_metric,
                            max_trip_size=cfg.max_trip_size,
                            same_request_only=cfg.single_request_per_vehicle,
                            max_route_stops=cfg.max_route_stops)
        penalties = default_penalties(graph, self.g, cfg.penalty_factor)
        model = build_ilp(graph, penalties)
        t_solve = time.perf_counter()
        sol = solve_ilp(model, time_limit_s=cfg.solver_time_limit_s)
        t_done = time.perf_counter()
        errors = validate_solution(graph, model, sol, self.g)
        if errors:
            raise RuntimeError(f"batch {self.n_batches} solution invalid: "
                               + "; ".join(errors[:3]))

        if cfg.dominance_check and cfg.mode is Mode.INTEGRATED:
            restricted = [s for s in segments if s.kind is SegmentKind.DIRECT]
            rg = build_tirtv(restricted, self.vehicles, self.g,
                             metric=cfg.cost_metric,
                             max_trip_size=cfg.max_trip_size,
                             same_request_only=cfg.single_request_per_vehicle,
                             max_route_stops=cfg.max_route_stops)
            rpen = {r: penalties[r] for r in rg.e1}
            # riders with no direct segment this batch count as rejected
            # in the restricted problem, at the same price
            missing = sum(penalties[r.id] for r in ilp_requests
                          if r.id not in rg.e1)
            rsol = solve_ilp(build_ilp(rg, rpen),
                             time_limit_s=cfg.solver_time_limit_s)
            self.dominance.append({
                "batch": self.n_batches, "t": self.now,
                "integrated": sol.objective,
                "restricted": rsol.objective + missing,
            })

        asn = extract_assignment(graph, model, sol)
        by_req = {r.id: r for r in ilp_requests}
        trip_by_id = {t.id: t for t in graph.trips}
        for vid, trip_id in sorted(asn.dispatch.items()):
            route = asn.deployed[(trip_id, vid)]
            self.by_vid[vid].plan = list(route.stops)
        for rid in sorted(asn.outcomes):
            out = asn.outcomes[rid]
            r = by_req[rid]
            if not out.served:
                self.backlog.append((self.now + cfg.batch_window_s, r))
                self.log({"type": "defer", "t": self.now, "request": rid})
                continue
            if out.mode == "direct":
                self.log({"type": "assign", "t": self.now, "request": rid,
                          "mode": "direct", "line": None, "run": None,
                          "first_mile": None, "last_mile": None,
                          "vehicles": list(out.vehicle_ids),
                          "same_vehicle_both_miles": False})
                continue
            # multimodal: find the chosen leg through the deployed segments
            mine = [graph.segments[sid]
                    for t in out.trip_ids
                    for sid in trip_by_id[t].segment_ids
                    if graph.segments[sid].request_id == rid]
            fm = next(s for s in mine if s.kind is SegmentKind.FIRST_MILE)
            lm = next(s for s in mine if s.kind is SegmentKind.LAST_MILE)
            leg = fm.leg
            self._reserve(rid, leg)
            self.log({"type": "assign", "t": self.now, "request": rid,
                      "mode": "multimodal", "line": leg.line_id,
                      "run": leg.run_id,
                      "first_mile": "walk" if fm.empty else "vehicle",
                      "last_mile": "walk" if lm.empty else "vehicle",
                      "vehicles": list(out.vehicle_ids),
                      "same_vehicle_both_miles": out.same_vehicle_both_miles})
            if fm.empty:
                self._schedule_walk(rid, leg.board_time - fm.walk_time_s,
                                    leg.board_time, r.origin, leg.depart_node)
            self._schedule_leg_events(rid, leg)
            if lm.empty:
                done = leg.alight_time + lm.walk_time_s
                self._schedule_walk(rid, leg.alight_time, done,
                                    leg.arrive_node, r.destination)
                self.schedule_event(done, {"type": "complete", "t": done,
                                           "request": rid, "mode": "multimodal"})

        self.timings.append({
            "batch": self.n_batches, "t": self.now,
            "n_requests": len(ilp_requests), "n_segments": len(segments),
            "n_trips": len(graph.trips), "n_e2": len(graph.e2),
            "build_s": t_solve - t_build, "solve_s": t_done - t_solve,
            "total_s": time.perf_counter() - t_start})

    def drain(self) -> None:
        # every committed stop is served exactly at its certified time, so the
        # latest certificate bounds the whole rollout
        horizon = self.now
        for v in self.vehicles:
            if v.edge_from is not None:
                horizon = max(horizon, v.available_time)
            for stop in v.plan:
                horizon = max(horizon, stop.time)
        for t, _seq, _ev in self.pq:
            horizon = max(horizon, t)
        self.advance(horizon)
        if any(v.plan for v in self.vehicles) or self.pq:
            raise RuntimeError("simulation ended with unfinished journeys")

    def run(self) -> SimResult:
        while True:
            t = self.next_batch_time()
            if t is None:
                break
            self.pull_arrivals(t)
            self.advance(t)
            batch = self.take_batch()
            if batch:
                self.run_batch(batch)
            self.last_batch = t
            self.n_batches += 1
        self.drain()
        return SimResult(events=self.events, timings=self.timings,
                         dominance=self.dominance, vehicles=self.vehicles,
                         n_batches=self.n_batches)


def run_simulation(g: RoadGraph, requests: list[Request], config: SimConfig,
                   schedule: TransitSchedule | None = None,
                   vehicles: list[VehicleState] | None = None) -> SimResult:
    """Play the whole demand stream through the dispatch loop.

    `vehicles` overrides the seeded random placement; exact initial
    positions matter for reproducing hand-checked rollouts.
    """
    return _Sim(g, requests, config, schedule, vehicles).run()


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    total_requests: int
    served: int
    rejected: int
    never_feasible: int
    expired: int
    service_rate: float
    service_rate_reachable: float
    n_direct: int
    n_multimodal: int
    n_transit_only: int
    n_same_vehicle_both_miles: int
    n_mm_vehicle_first: int
    n_mm_vehicle_last: int
    n_mm_vehicle_both: int
    mean_journey_s: float
    max_journey_s: float
    fleet_vmt_km: float
    total_vmt_km: float
    everyone_drives_vmt_km: float
    seat_violations: int
    deadline_violations: int
    n_batches: int
    zero_demand: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def compute_metrics(events: list[dict], n_batches: int = 0) -> MetricsReport:
    """Aggregate a finished run's event log.

    Raises on an incomplete log: every request must end served (with a
    completion) or rejected. Total distance counts the fleet plus rejected
    riders driving themselves; the everyone-drives figure is the baseline
    where every rider does.
    """
    requests: dict[int, dict] = {}
    assigns: dict[int, dict] = {}
    completes: dict[int, dict] = {}
    rejects: dict[int, str] = {}
    fleet_m = 0.0
    seat_violations = 0
    for ev in events:
        kind = ev["type"]
        if kind == "request":
            requests[ev["request"]] = ev
        elif kind == "assign":
            if ev["request"] in assigns:
                raise ValueError(f"request {ev['request']} assigned twice")
            assigns[ev["request"]] = ev
        elif kind == "complete":
            if ev["request"] in completes:
                raise ValueError(f"request {ev['request']} completed twice")
            completes[ev["request"]] = ev
        elif kind == "reject":
            rejects[ev["request"]] = ev["reason"]
        elif kind == "drive":
            fleet_m += ev["distance_m"]
        elif kind == "seat_violation":
            seat_violations += ev["count"]

    for rid in requests:
        if rid in assigns and rid in rejects:
            raise ValueError(f"request {rid} both assigned and rejected")
        if rid not in assigns and rid not in rejects:
            raise ValueError(f"request {rid} unresolved at end of log")
    for rid in assigns:
        if rid not in completes:
            raise ValueError(f"request {rid} assigned but never completed")

    served = len(assigns)
    total = len(requests)
    never = sum(1 for v in rejects.values() if v == "never_feasible")
    expired = sum(1 for v in rejects.values() if v == "expired")
    reachable = total - never

    journeys = []
    deadline_violations = 0
    for rid, ev in completes.items():
        journeys.append(ev["t"] - requests[rid]["t"])
        if ev["t"] > requests[rid]["deadline"] + 1e-6:
            deadline_violations += 1

    modes = [ev["mode"] for ev in assigns.values()]
    mm = [ev for ev in assigns.values() if ev["mode"] == "multimodal"]
    rejected_self_m = sum(requests[rid]["direct_m"] for rid in rejects)
    everyone_m = sum(ev["direct_m"] for ev in requests.values())

    return MetricsReport(
        total_requests=total,
        served=served,
        rejected=len(rejects),
        never_feasible=never,
        expired=expired,
        service_rate=served / total if total else 0.0,
        service_rate_reachable=served / reachable if reachable else 0.0,
        n_direct=modes.count("direct"),
        n_multimodal=modes.count("multimodal"),
        n_transit_only=modes.count("transit_only"),
        n_same_vehicle_both_miles=sum(
            1 for ev in mm if ev["same_vehicle_both_miles"]),
        n_mm_vehicle_first=sum(
            1 for ev in mm
            if ev["first_mile"] == "vehicle" and ev["last_mile"] == "walk"),
        n_mm_vehicle_last=sum(
            1 for ev in mm
            if ev["first_mile"] == "walk" and ev["last_mile"] == "vehicle"),
        n_mm_vehicle_both=sum(
            1 for ev in mm
            if ev["first_mile"] == "vehicle" and ev["last_mile"] == "vehicle"),
        mean_journey_s=sum(journeys) / len(journeys) if journeys else 0.0,
        max_journey_s=max(journeys) if journeys else 0.0,
        fleet_vmt_km=fleet_m / 1000.0,
        total_vmt_km=(fleet_m + rejected_self_m) / 1000.0,
        everyone_drives_vmt_km=everyone_m / 1000.0,
        seat_violations=seat_violations,
        deadline_violations=deadline_violations,
        n_batches=n_batches,
        zero_demand=total == 0,
    )


# ---------------------------------------------------------------------------
# Transit coverage sweep
# ---------------------------------------------------------------------------

def transit_reach(schedule: TransitSchedule, g: RoadGraph,
                  requests: list[Request],
                  walk_distances: list[float]) -> list[tuple[float, float]]:
    """Fraction of requests with some directionally usable line whose
    boarding and alighting stops are both within each walk distance.

    Distances are measured along the network (the walking model used
    everywhere else), not as the crow flies. Timetables are ignored: this
    is a coverage statement, not a feasibility one.
    """
    thresholds = []
    for r in requests:
        best = math.inf
        for line in schedule.lines.values():
            n = len(line.stop_nodes)
            d_in = [shortest_path(g, r.origin, node) for node in line.stop_nodes]
            d_out = [shortest_path(g, node, r.destination) for node in line.stop_nodes]
            for i in range(n):
                if d_in[i] is None:
                    continue
                for j in range(i + 1, n):
                    if d_out[j] is None:
                        continue
                    need = max(d_in[i].distance, d_out[j].distance)
                    best = min(best, need)
        thresholds.append(best)
    out = []
    for d in walk_distances:
        covered = sum(1 for t in thresholds if t <= d)
        out.append((d, covered / len(requests) if requests else 0.0))
    return out
