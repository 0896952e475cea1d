"""Fixed-route transit: timetables, candidate-leg enumeration, seat accounting.

A schedule is a set of lines; each line visits an ordered stop list and owns
timetabled runs. A leg is one (line, run, departure stop, arrival stop)
choice for a passenger. Enumeration prunes per line to the stop nearest the
request's origin (by network travel time) and the stop nearest its
destination, then applies exact feasibility checks against the timetable and
the seat ledger.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

from tirsim.netgraph import RoadGraph, travel_time

DEFAULT_SNAP_RADIUS = 500.0  # m, stop-to-road-node binding


class ScheduleError(ValueError):
    """Transit data failed validation."""


class CapacityError(RuntimeError):
    """Attempted to reserve a seat on a full interval."""


class LedgerError(RuntimeError):
    """Attempted to release a seat that was never reserved."""


@dataclass(frozen=True)
class TransitLeg:
    """One boarding option: ride `run_id` of `line_id` from stop index
    `depart_idx` to `arrive_idx` (indices into the line's stop list)."""

    line_id: str
    run_id: str
    depart_idx: int
    arrive_idx: int
    depart_stop: str
    arrive_stop: str
    depart_node: int
    arrive_node: int
    board_time: float
    alight_time: float

    def __post_init__(self):
        if self.depart_idx >= self.arrive_idx:
            raise ValueError("departure stop must precede arrival stop")
        if not self.board_time < self.alight_time:
            raise ValueError("board time must precede alight time")


@dataclass
class TransitRun:
    run_id: str
    line_id: str
    capacity: int
    arrivals: tuple[float, ...]    # per stop, aligned with the line's stop list
    departures: tuple[float, ...]


@dataclass
class TransitLine:
    line_id: str
    stop_ids: tuple[str, ...]
    stop_nodes: tuple[int, ...]
    runs: list[TransitRun] = field(default_factory=list)


@dataclass
class TransitSchedule:
    lines: dict[str, TransitLine]
    stops: dict[str, tuple[float, float, int]]  # stop_id -> (x, y, bound node)

    def run(self, run_id: str) -> TransitRun:
        for line in self.lines.values():
            for r in line.runs:
                if r.run_id == run_id:
                    return r
        raise KeyError(run_id)

    def validate(self) -> None:
        for line in self.lines.values():
            if len(line.stop_ids) < 2:
                raise ScheduleError(f"line {line.line_id} needs at least 2 stops")
            for run in line.runs:
                if run.capacity <= 0:
                    raise ScheduleError(f"run {run.run_id} capacity must be > 0")
                n = len(line.stop_ids)
                if len(run.arrivals) != n or len(run.departures) != n:
                    raise ScheduleError(
                        f"run {run.run_id} has {len(run.arrivals)} stop times, "
                        f"line {line.line_id} has {n} stops")
                prev = -math.inf
                for arr, dep in zip(run.arrivals, run.departures):
                    if arr < prev or dep < arr:
                        raise ScheduleError(f"run {run.run_id} stop times are not increasing")
                    if dep == prev:
                        raise ScheduleError(f"run {run.run_id} stop times are not increasing")
                    prev = dep


# ---------------------------------------------------------------------------
# Loading (GTFS-like subset: stops.txt, routes.txt, trips.txt, stop_times.txt)
# ---------------------------------------------------------------------------

def _read_rows(directory: str, name: str, required: list[str]) -> list[dict[str, str]]:
    path = os.path.join(directory, name)
    if not os.path.exists(path):
        raise ScheduleError(f"missing schedule file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in required if c not in cols]
        if missing:
            raise ScheduleError(f"{name}: missing columns {missing}")
        return list(reader)


def load_schedule(directory: str, g: RoadGraph,
                  snap_radius: float = DEFAULT_SNAP_RADIUS) -> TransitSchedule:
    """Load a schedule directory and bind every stop to its nearest road node.

    Binding uses straight-line distance over node coordinates; a stop farther
    than `snap_radius` from every node is a data error. All runs of a line
    must visit the same ordered stop sequence (model one direction per line).
    """
    stop_rows = _read_rows(directory, "stops.txt", ["stop_id", "x", "y"])
    route_rows = _read_rows(directory, "routes.txt", ["route_id"])
    trip_rows = _read_rows(directory, "trips.txt", ["trip_id", "route_id", "capacity"])
    st_rows = _read_rows(directory, "stop_times.txt",
                         ["trip_id", "stop_sequence", "stop_id", "arrival_s", "departure_s"])

    nodes = sorted(g.coords)
    stops: dict[str, tuple[float, float, int]] = {}
    for row in stop_rows:
        sid = row["stop_id"]
        if sid in stops:
            raise ScheduleError(f"stops.txt: duplicate stop_id {sid}")
        try:
            x, y = float(row["x"]), float(row["y"])
        except ValueError as exc:
            raise ScheduleError(f"stops.txt: bad coordinates for stop {sid}") from exc
        best = None
        for n in nodes:
            nx, ny = g.coords[n]
            d = math.hypot(nx - x, ny - y)
            if best is None or d < best[0]:
                best = (d, n)
        if best is None or best[0] > snap_radius:
            raise ScheduleError(
                f"stops.txt: stop {sid} is farther than {snap_radius} m from every road node")
        stops[sid] = (x, y, best[1])

    route_ids = []
    for row in route_rows:
        rid = row["route_id"]
        if rid in route_ids:
            raise ScheduleError(f"routes.txt: duplicate route_id {rid}")
        route_ids.append(rid)

    # stop_times grouped per trip, ordered by stop_sequence
    per_trip: dict[str, list[tuple[int, str, float, float]]] = {}
    for row in st_rows:
        try:
            seq = int(row["stop_sequence"])
            arr = float(row["arrival_s"])
            dep = float(row["departure_s"])
        except ValueError as exc:
            raise ScheduleError(f"stop_times.txt: bad row for trip {row['trip_id']}") from exc
        if row["stop_id"] not in stops:
            raise ScheduleError(f"stop_times.txt: unknown stop {row['stop_id']}")
        per_trip.setdefault(row["trip_id"], []).append((seq, row["stop_id"], arr, dep))

    lines: dict[str, TransitLine] = {}
    pending_runs: dict[str, list[TransitRun]] = {rid: [] for rid in route_ids}
    for row in trip_rows:
        tid, rid = row["trip_id"], row["route_id"]
        if rid not in pending_runs:
            raise ScheduleError(f"trips.txt: trip {tid} references unknown route {rid}")
        try:
            cap = int(row["capacity"])
        except ValueError as exc:
            raise ScheduleError(f"trips.txt: bad capacity for trip {tid}") from exc
        if tid not in per_trip:
            raise ScheduleError(f"trip {tid} has no stop_times rows")
        entries = sorted(per_trip[tid])
        if len(entries) < 2:
            raise ScheduleError(f"trip {tid} must visit at least 2 stops")
        seq_stops = tuple(e[1] for e in entries)
        run = TransitRun(
            run_id=tid, line_id=rid, capacity=cap,
            arrivals=tuple(e[2] for e in entries),
            departures=tuple(e[3] for e in entries),
        )
        if rid in lines:
            if lines[rid].stop_ids != seq_stops:
                raise ScheduleError(
                    f"trip {tid}: stop sequence differs from other runs of route {rid}; "
                    "model each direction as its own route")
        else:
            lines[rid] = TransitLine(
                line_id=rid,
                stop_ids=seq_stops,
                stop_nodes=tuple(stops[s][2] for s in seq_stops),
            )
        pending_runs[rid].append(run)

    for rid in route_ids:
        if rid not in lines:
            continue  # route with no runs contributes nothing
        runs = sorted(pending_runs[rid], key=lambda r: (r.departures[0], r.run_id))
        lines[rid].runs = runs

    schedule = TransitSchedule(lines={k: lines[k] for k in sorted(lines)}, stops=stops)
    schedule.validate()
    return schedule


# ---------------------------------------------------------------------------
# Seat ledger
# ---------------------------------------------------------------------------

class CapacityLedger:
    """Per-run, per-consecutive-stop-interval seat occupancy.

    Interval i covers travel from stop i to stop i+1 of the run's line. A
    reservation for a leg occupies every interval between its departure and
    arrival stops. `reserve(..., force=True)` admits an over-capacity boarding
    and returns the number of overfull intervals, which the simulator logs as
    violations instead of failing.
    """

    def __init__(self, schedule: TransitSchedule):
        self._cap: dict[str, int] = {}
        self._occ: dict[str, list[int]] = {}
        for line in schedule.lines.values():
            n_int = len(line.stop_ids) - 1
            for run in line.runs:
                self._cap[run.run_id] = run.capacity
                self._occ[run.run_id] = [0] * n_int

    def clone(self) -> "CapacityLedger":
        dup = object.__new__(CapacityLedger)
        dup._cap = dict(self._cap)
        dup._occ = {k: list(v) for k, v in self._occ.items()}
        return dup

    def occupancy(self, run_id: str) -> list[int]:
        return list(self._occ[run_id])

    def free_seats(self, leg: TransitLeg) -> int:
        occ = self._occ[leg.run_id]
        cap = self._cap[leg.run_id]
        return min(cap - occ[i] for i in range(leg.depart_idx, leg.arrive_idx))

    def has_capacity(self, leg: TransitLeg) -> bool:
        return self.free_seats(leg) >= 1

    def reserve(self, leg: TransitLeg, force: bool = False) -> int:
        occ = self._occ[leg.run_id]
        cap = self._cap[leg.run_id]
        overfull = sum(1 for i in range(leg.depart_idx, leg.arrive_idx) if occ[i] + 1 > cap)
        if overfull and not force:
            raise CapacityError(
                f"run {leg.run_id}: no free seat between stops "
                f"{leg.depart_idx} and {leg.arrive_idx}")
        for i in range(leg.depart_idx, leg.arrive_idx):
            occ[i] += 1
        return overfull

    def release(self, leg: TransitLeg) -> None:
        occ = self._occ[leg.run_id]
        for i in range(leg.depart_idx, leg.arrive_idx):
            if occ[i] <= 0:
                raise LedgerError(
                    f"run {leg.run_id}: release without a matching reservation "
                    f"on interval {i}")
        for i in range(leg.depart_idx, leg.arrive_idx):
            occ[i] -= 1


# ---------------------------------------------------------------------------
# Candidate-leg enumeration
# ---------------------------------------------------------------------------

def unpruned_leg_count(schedule: TransitSchedule) -> int:
    """Number of (run, ordered stop pair) combinations before any pruning."""
    total = 0
    for line in schedule.lines.values():
        n = len(line.stop_ids)
        total += len(line.runs) * n * (n - 1)
    return total


def _nearest_stop_idx(g: RoadGraph, line: TransitLine, node: int, outbound: bool) -> int | None:
    """Stop of `line` nearest to `node` by network travel time.

    outbound=True measures node -> stop (an origin reaching its departure
    stop); outbound=False measures stop -> node (an arrival stop reaching the
    destination). Ties pick the smaller stop index.
    """
    best: tuple[float, int] | None = None
    for idx, stop_node in enumerate(line.stop_nodes):
        t = travel_time(g, node, stop_node) if outbound else travel_time(g, stop_node, node)
        if math.isinf(t):
            continue
        if best is None or t < best[0]:
            best = (t, idx)
    return None if best is None else best[1]


def enumerate_legs(request, schedule: TransitSchedule, g: RoadGraph, now: float,
                   ledger: CapacityLedger) -> list[TransitLeg]:
    """Feasible candidate legs for a request at time `now`.

    Per line, the departure stop is the one nearest the origin and the
    arrival stop the one nearest the destination (network travel time, ties
    to the smaller stop index); lines where they coincide or come in the
    wrong order contribute nothing. Each run of the line is kept only if
      (i)  now + lower-bound drive from the origin reaches the stop by its
           departure time,
      (ii) the arrival time plus the lower-bound drive to the destination
           meets the request deadline, and
      (iii) the ledger shows a free seat on every traversed interval.
    All comparisons are closed (<= passes). Result sorted by board time.
    """
    legs: list[TransitLeg] = []
    for line_id in sorted(schedule.lines):
        line = schedule.lines[line_id]
        if not line.runs:
            continue
        d_idx = _nearest_stop_idx(g, line, request.origin, outbound=True)
        a_idx = _nearest_stop_idx(g, line, request.destination, outbound=False)
        if d_idx is None or a_idx is None or d_idx >= a_idx:
            continue
        d_node = line.stop_nodes[d_idx]
        a_node = line.stop_nodes[a_idx]
        first_mile_lb = travel_time(g, request.origin, d_node)
        last_mile_lb = travel_time(g, a_node, request.destination)
        for run in line.runs:
            board = run.departures[d_idx]
            alight = run.arrivals[a_idx]
            if now + first_mile_lb > board:
                continue
            if alight + last_mile_lb > request.deadline:
                continue
            leg = TransitLeg(
                line_id=line.line_id, run_id=run.run_id,
                depart_idx=d_idx, arrive_idx=a_idx,
                depart_stop=line.stop_ids[d_idx], arrive_stop=line.stop_ids[a_idx],
                depart_node=d_node, arrive_node=a_node,
                board_time=board, alight_time=alight,
            )
            if not ledger.has_capacity(leg):
                continue
            legs.append(leg)
    legs.sort(key=lambda b: (b.board_time, b.line_id, b.run_id))
    return legs
