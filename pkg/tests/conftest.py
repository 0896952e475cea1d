"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import itertools

import pytest

from tirsim.netgraph import PathResult, RoadGraph


# ---------------------------------------------------------------------------
# Graph builders
# ---------------------------------------------------------------------------

def make_line_graph(n: int, tt: float = 10.0, dist: float = 100.0,
                    bidirectional: bool = True) -> RoadGraph:
    """Nodes 0..n-1 in a row, consecutive nodes connected."""
    coords = {i: (i * dist, 0.0) for i in range(n)}
    edges = []
    for i in range(n - 1):
        edges.append((i, i + 1, tt, dist))
        if bidirectional:
            edges.append((i + 1, i, tt, dist))
    return RoadGraph(coords, edges)


def make_grid_graph(nx: int, ny: int, spacing: float = 500.0,
                    speed: float = 10.0) -> RoadGraph:
    """nx * ny grid, integer travel times, node id = x * ny + y."""
    coords = {}
    edges = []
    tt = spacing / speed
    for x in range(nx):
        for y in range(ny):
            nid = x * ny + y
            coords[nid] = (x * spacing, y * spacing)
    for x in range(nx):
        for y in range(ny):
            nid = x * ny + y
            if x + 1 < nx:
                other = (x + 1) * ny + y
                edges.append((nid, other, tt, spacing))
                edges.append((other, nid, tt, spacing))
            if y + 1 < ny:
                other = x * ny + (y + 1)
                edges.append((nid, other, tt, spacing))
                edges.append((other, nid, tt, spacing))
    return RoadGraph(coords, edges)


@pytest.fixture
def line5() -> RoadGraph:
    return make_line_graph(5)


@pytest.fixture
def grid33() -> RoadGraph:
    return make_grid_graph(3, 3, spacing=300.0, speed=10.0)


# ---------------------------------------------------------------------------
# Independent shortest-path oracle: exhaustive simple-path enumeration.
# Written against the documented path ordering, not against the Dijkstra code.
# ---------------------------------------------------------------------------

def brute_force_shortest_path(g: RoadGraph, source: int, target: int) -> PathResult | None:
    """Enumerate every simple path and pick the (time, dist, sequence) minimum.

    Only usable on small graphs. Accumulates time/distance left to right so
    float results are comparable bit-for-bit with the implementation.
    """
    best: tuple[float, float, tuple[int, ...]] | None = None

    def extend(node: int, t: float, d: float, seq: tuple[int, ...]) -> None:
        nonlocal best
        if node == target:
            cand = (t, d, seq)
            if best is None or cand < best:
                best = cand
            return
        for v, tt, dist in g.adj[node]:
            if v in seq:
                continue
            extend(v, t + tt, d + dist, seq + (v,))

    extend(source, 0.0, 0.0, (source,))
    if best is None:
        return None
    return PathResult(best[0], best[1], best[2])


def all_simple_paths_count(g: RoadGraph, source: int, target: int) -> int:
    count = 0
    for r in range(1, len(g.coords) + 1):
        for mid in itertools.permutations([n for n in g.nodes if n not in (source, target)],
                                          r - 1):
            seq = (source,) + mid + (target,)
            ok = all(any(v == seq[i + 1] for v, _, _ in g.adj[seq[i]])
                     for i in range(len(seq) - 1))
            if ok:
                count += 1
    return count


# ---------------------------------------------------------------------------
# Schedule builders (in-memory, no files)
# ---------------------------------------------------------------------------

def make_line(line_id: str, stop_nodes: list[int], g: RoadGraph,
              first_departures: list[float], hop_s: float, capacity: int,
              dwell_s: float = 0.0):
    """One-direction line over existing road nodes with evenly timed runs."""
    from tirsim.transit import TransitLine, TransitRun

    stop_ids = tuple(f"{line_id}_{k}" for k in range(len(stop_nodes)))
    runs = []
    for i, t0 in enumerate(first_departures):
        arrivals = []
        departures = []
        t = t0
        for k in range(len(stop_nodes)):
            arrivals.append(t)
            departures.append(t + dwell_s)
            t = t + dwell_s + hop_s
        runs.append(TransitRun(run_id=f"{line_id}_r{i}", line_id=line_id,
                               capacity=capacity, arrivals=tuple(arrivals),
                               departures=tuple(departures)))
    return TransitLine(line_id=line_id, stop_ids=stop_ids,
                       stop_nodes=tuple(stop_nodes), runs=runs)


def make_schedule(lines, g: RoadGraph):
    from tirsim.transit import TransitSchedule

    stops = {}
    for line in lines:
        for sid, node in zip(line.stop_ids, line.stop_nodes):
            x, y = g.coords[node]
            stops[sid] = (x, y, node)
    sched = TransitSchedule(lines={ln.line_id: ln for ln in sorted(lines, key=lambda l: l.line_id)},
                            stops=stops)
    sched.validate()
    return sched


# ---------------------------------------------------------------------------
# Independent leg-enumeration oracle: filter every (line, run, d, a) combo.
# ---------------------------------------------------------------------------

def brute_force_legs(request, schedule, g: RoadGraph, now: float, ledger):
    """Re-derives the candidate leg list from the documented rules.

    Walks all (line, run, depart stop, arrive stop) combinations, keeps the
    per-line nearest-stop pair, then applies the timetable/deadline/seat
    checks directly.
    """
    from tirsim.netgraph import travel_time as tt
    from tirsim.transit import TransitLeg

    out = []
    for line in schedule.lines.values():
        if not line.runs:
            continue
        to_stop = [tt(g, request.origin, node) for node in line.stop_nodes]
        from_stop = [tt(g, node, request.destination) for node in line.stop_nodes]
        finite_to = [(v, i) for i, v in enumerate(to_stop) if v != float("inf")]
        finite_from = [(v, i) for i, v in enumerate(from_stop) if v != float("inf")]
        if not finite_to or not finite_from:
            continue
        d = min(finite_to)[1]
        a = min(finite_from)[1]
        for run in line.runs:
            for di in range(len(line.stop_nodes)):
                for ai in range(len(line.stop_nodes)):
                    if di != d or ai != a or di >= ai:
                        continue
                    board = run.departures[di]
                    alight = run.arrivals[ai]
                    if now + to_stop[di] > board:
                        continue
                    if alight + from_stop[ai] > request.deadline:
                        continue
                    leg = TransitLeg(
                        line_id=line.line_id, run_id=run.run_id,
                        depart_idx=di, arrive_idx=ai,
                        depart_stop=line.stop_ids[di], arrive_stop=line.stop_ids[ai],
                        depart_node=line.stop_nodes[di], arrive_node=line.stop_nodes[ai],
                        board_time=board, alight_time=alight)
                    if ledger.free_seats(leg) < 1:
                        continue
                    out.append(leg)
    out.sort(key=lambda b: (b.board_time, b.line_id, b.run_id))
    return out


# ---------------------------------------------------------------------------
# Hand-built travel segments with explicit windows, for routing tests.
# ---------------------------------------------------------------------------

def direct_segment(sid, rid, origin, dest, earliest, latest, deadline):
    from tirsim.segments import SegmentKind, TravelSegment
    return TravelSegment(
        kind=SegmentKind.DIRECT, request_id=rid, leg=None,
        pickup_node=origin, dropoff_node=dest, earliest_pickup=earliest,
        latest_pickup=latest, dropoff_deadline=deadline, empty=False, id=sid)


def mile_segment(sid, rid, kind, leg, pickup, dropoff, earliest, latest,
                 deadline, empty=False, walk_time_s=None):
    from tirsim.segments import TravelSegment
    return TravelSegment(
        kind=kind, request_id=rid, leg=leg, pickup_node=pickup,
        dropoff_node=dropoff, earliest_pickup=earliest, latest_pickup=latest,
        dropoff_deadline=deadline, empty=empty, walk_time_s=walk_time_s, id=sid)


def make_leg(depart_node, arrive_node, board, alight, line="L", run="L_r0",
             depart_idx=0, arrive_idx=1):
    from tirsim.transit import TransitLeg
    return TransitLeg(
        line_id=line, run_id=run, depart_idx=depart_idx, arrive_idx=arrive_idx,
        depart_stop=f"{line}_{depart_idx}", arrive_stop=f"{line}_{arrive_idx}",
        depart_node=depart_node, arrive_node=arrive_node,
        board_time=board, alight_time=alight)


# ---------------------------------------------------------------------------
# Independent routing oracle: full permutation enumeration.
# ---------------------------------------------------------------------------

def brute_force_pdp(vehicle, new_segments, g, metric="distance"):
    """(best value, feasible orderings) over every stop permutation.

    Simulates each precedence-valid ordering of the vehicle's committed
    stops plus the new segments' pickup/dropoff pairs and keeps the best
    metric value. None when nothing is feasible.
    """
    import itertools as it
    import math

    from tirsim.netgraph import network_distance, travel_time
    from tirsim.tirtv import DROPOFF, PICKUP

    events = [(s.segment, s.kind) for s in vehicle.plan]
    for s in new_segments:
        events.append((s, PICKUP))
        events.append((s, DROPOFF))
    has_pickup = {id(seg) for seg, kind in events if kind == PICKUP}
    load0 = sum(1 for seg, kind in events
                if kind == DROPOFF and id(seg) not in has_pickup)

    best = None
    feasible = 0
    for perm in it.permutations(range(len(events))):
        seen = set()
        valid = True
        for i in perm:
            seg, kind = events[i]
            if kind == PICKUP:
                seen.add(id(seg))
            elif id(seg) in has_pickup and id(seg) not in seen:
                valid = False
                break
        if not valid:
            continue
        node = vehicle.location
        t = vehicle.available_time
        dist = 0.0
        load = load0
        for i in perm:
            seg, kind = events[i]
            target = seg.pickup_node if kind == PICKUP else seg.dropoff_node
            hop = travel_time(g, node, target)
            if math.isinf(hop):
                valid = False
                break
            t += hop
            dist += network_distance(g, node, target)
            if kind == PICKUP:
                t = max(t, seg.earliest_pickup)
                if t > seg.latest_pickup or load + 1 > vehicle.capacity:
                    valid = False
                    break
                load += 1
            else:
                if t > seg.dropoff_deadline:
                    valid = False
                    break
                load -= 1
            node = target
        if not valid:
            continue
        feasible += 1
        val = dist if metric == "distance" else t - vehicle.available_time
        if best is None or val < best:
            best = val
    return best, feasible


# ---------------------------------------------------------------------------
# Independent assignment oracle: enumerate every deployment subset.
# ---------------------------------------------------------------------------

def brute_force_assignment(graph, penalties):
    """Exhaustive optimum over all trip deployments.

    Walks every subset of the feasibility edges, derives ride and rejection
    variables from the deployment, filters by the documented rules, and
    returns {"objective", "max_served", "n_feasible"}. Independent of the
    solver's matrix encoding.
    """
    import itertools as it

    from tirsim.segments import SegmentKind
    from tirsim.tirtv import DUMMY_VEHICLE_ID

    edges = sorted(graph.e2)
    trips = {t.id: t for t in graph.trips}
    requests = sorted(graph.e1)

    def roles(r):
        fm, lm, direct = set(), set(), set()
        legs = {}
        for tid in graph.e1[r]:
            for sid in trips[tid].segment_ids:
                s = graph.segments[sid]
                if s.request_id != r:
                    continue
                if s.kind is SegmentKind.DIRECT:
                    direct.add(tid)
                elif s.kind is SegmentKind.FIRST_MILE:
                    fm.add(tid)
                    legs.setdefault(s.leg, [set(), set()])[0].add(tid)
                else:
                    lm.add(tid)
                    legs.setdefault(s.leg, [set(), set()])[1].add(tid)
        return fm, lm, direct, legs

    role_of = {r: roles(r) for r in requests}

    best = None
    max_served = 0
    n_feasible = 0
    for mask in range(1 << len(edges)):
        chosen = [edges[i] for i in range(len(edges)) if mask >> i & 1]
        per_vehicle = {}
        deployed = {}
        ok = True
        for t, v in chosen:
            if v != DUMMY_VEHICLE_ID:
                per_vehicle[v] = per_vehicle.get(v, 0) + 1
                if per_vehicle[v] > 1:
                    ok = False
                    break
            deployed[t] = deployed.get(t, 0) + 1
            if deployed[t] > 1:
                ok = False
                break
        if not ok:
            continue
        cost = sum(graph.e2[e].cost for e in chosen)
        served = 0
        for r in requests:
            fm, lm, direct, legs = role_of[r]
            starts = sum(1 for t in deployed if t in fm)
            starts += sum(1 for t in deployed if t in direct)
            if starts > 1:
                ok = False
                break
            for leg, (fms, lms) in legs.items():
                f = sum(1 for t in deployed if t in fms)
                l = sum(1 for t in deployed if t in lms)
                if f != l:
                    ok = False
                    break
            if not ok:
                break
            if starts == 1:
                served += 1
            else:
                cost += penalties[r]
        if not ok:
            continue
        n_feasible += 1
        max_served = max(max_served, served)
        if best is None or cost < best - 1e-9:
            best = cost
    return {"objective": best, "max_served": max_served, "n_feasible": n_feasible}


# ---------------------------------------------------------------------------
# Event log replay
# ---------------------------------------------------------------------------

def _min_edge(g, u, w):
    best = None
    for v, tt, dist in g.adj[u]:
        if v == w and (best is None or (tt, dist) < best):
            best = (tt, dist)
    return best


def verify_event_log(events, g, vehicle_capacity, walk_speed=1.4,
                     max_walk=400.0, eps=1e-6):
    """Replay a finished run's event log against the physical constraints.

    Checks, independently of the simulator's own bookkeeping: vehicle motion
    is edge-continuous with correct durations and distances, loads never
    exceed capacity, nobody is picked up before requesting or at the wrong
    node, first-mile dropoffs precede boarding, last-mile pickups follow
    alighting, walks respect the distance cap and walking speed, and every
    completion beats the deadline.
    Returns a list of violation strings, empty when the log is clean.
    """
    errors = []
    requests = {}
    assigns = {}
    boards = {}
    alights = {}
    for ev in events:
        if ev["type"] == "request":
            requests[ev["request"]] = ev
        elif ev["type"] == "assign":
            assigns[ev["request"]] = ev
        elif ev["type"] == "board":
            boards[ev["request"]] = ev
        elif ev["type"] == "alight":
            alights[ev["request"]] = ev

    per_vehicle = {}
    for ev in events:
        if ev["type"] == "drive" or ev["type"] in ("pickup", "dropoff"):
            per_vehicle.setdefault(ev["vehicle"], []).append(ev)

    pick_t = {}
    drop_t = {}
    for vid, evs in per_vehicle.items():
        node = None
        t = None
        onboard = set()
        for ev in evs:
            if ev["type"] == "drive":
                if node is not None and ev["from"] != node:
                    errors.append(f"vehicle {vid} teleported {node} -> {ev['from']}")
                if t is not None and ev["t0"] < t - eps:
                    errors.append(f"vehicle {vid} drives into the past at {ev['t0']}")
                edge = _min_edge(g, ev["from"], ev["to"])
                if edge is None:
                    errors.append(f"vehicle {vid} used missing edge "
                                  f"{ev['from']} -> {ev['to']}")
                else:
                    tt, dist = edge
                    if abs((ev["t1"] - ev["t0"]) - tt) > eps:
                        errors.append(f"vehicle {vid} edge {ev['from']}->{ev['to']} "
                                      f"time {ev['t1'] - ev['t0']} != {tt}")
                    if abs(ev["distance_m"] - dist) > eps:
                        errors.append(f"vehicle {vid} edge distance off")
                if set(ev["passengers"]) != onboard:
                    errors.append(f"vehicle {vid} passenger list {ev['passengers']} "
                                  f"!= onboard {sorted(onboard)}")
                if len(ev["passengers"]) > vehicle_capacity:
                    errors.append(f"vehicle {vid} over capacity")
                node = ev["to"]
                t = ev["t1"]
            else:
                rid = ev["request"]
                if node is not None and ev["node"] != node:
                    errors.append(f"vehicle {vid} serves {rid} at {ev['node']} "
                                  f"but sits at {node}")
                if t is not None and ev["t"] < t - eps:
                    errors.append(f"vehicle {vid} serves {rid} in the past")
                if ev["type"] == "pickup":
                    if rid in onboard:
                        errors.append(f"request {rid} picked up twice")
                    onboard.add(rid)
                    if ev["t"] < requests[rid]["t"] - eps:
                        errors.append(f"request {rid} picked up before requesting")
                    pick_t.setdefault((rid, ev["segment"]), ev["t"])
                else:
                    if rid not in onboard:
                        errors.append(f"request {rid} dropped off while not onboard")
                    onboard.discard(rid)
                    drop_t[(rid, ev["segment"])] = ev["t"]
                    if len(onboard) + 1 > vehicle_capacity:
                        errors.append(f"vehicle {vid} over capacity at stop")
                node = ev["node"]
                t = max(t, ev["t"]) if t is not None else ev["t"]
        if onboard:
            errors.append(f"vehicle {vid} ends with riders {sorted(onboard)}")

    for ev in events:
        if ev["type"] == "walk":
            rid = ev["request"]
            if ev["distance_m"] > max_walk + eps:
                errors.append(f"request {rid} walks {ev['distance_m']} m")
            want = ev["distance_m"] / walk_speed
            if abs((ev["t1"] - ev["t0"]) - want) > eps:
                errors.append(f"request {rid} walk speed off")
            if ev["t0"] < requests[rid]["t"] - eps:
                errors.append(f"request {rid} walks before requesting")

    completes = {}
    for ev in events:
        if ev["type"] == "complete":
            completes[ev["request"]] = ev
    for rid, ev in assigns.items():
        if rid not in completes:
            errors.append(f"request {rid} assigned but never completed")
            continue
        done = completes[rid]
        if done["mode"] != ev["mode"]:
            errors.append(f"request {rid} mode changed en route")
        if done["t"] > requests[rid]["deadline"] + eps:
            errors.append(f"request {rid} finished at {done['t']} past deadline "
                          f"{requests[rid]['deadline']}")
        if ev["mode"] == "multimodal":
            b, a = boards.get(rid), alights.get(rid)
            if b is None or a is None:
                errors.append(f"request {rid} multimodal without board/alight")
                continue
            fm_drop = drop_t.get((rid, "first_mile"))
            lm_pick = pick_t.get((rid, "last_mile"))
            if ev["first_mile"] == "vehicle" and (
                    fm_drop is None or fm_drop > b["t"] + eps):
                errors.append(f"request {rid} misses its boarding")
            if ev["last_mile"] == "vehicle" and (
                    lm_pick is None or lm_pick < a["t"] - eps):
                errors.append(f"request {rid} picked up before alighting")
        if ev["mode"] == "direct":
            if (rid, "direct") not in pick_t:
                errors.append(f"request {rid} direct with no pickup")
    return errors
