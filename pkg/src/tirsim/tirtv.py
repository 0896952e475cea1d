"""Trip construction and vehicle-trip feasibility for shared dispatch.

Builds the batch assignment graph in three layers:

1. Shareability: two travel segments are linked when an idealized vehicle
   (parked at one of the pickups, free at the earlier release, with the
   largest capacity in the fleet) can serve both. This is a necessary
   condition for any real vehicle, so dropping unlinked pairs is safe.
2. Trips: cliques of the shareability graph up to a size cap. Every subset
   of a clique is itself a clique, so the trip list is closed under subsets.
3. Vehicle-trip edges: exact insertion routing against each vehicle's
   committed plan. A size-k trip is only evaluated for a vehicle when all
   of its (k-1)-subsets were feasible for that vehicle.

Walk-only segments never enter these layers; each becomes a singleton trip
carried by the dummy vehicle at zero cost.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from tirsim.netgraph import RoadGraph, network_distance, travel_time
from tirsim.segments import SegmentKind, TravelSegment

DUMMY_VEHICLE_ID = -1

PICKUP = "pickup"
DROPOFF = "dropoff"

_EPS = 1e-9


@dataclass
class RouteStop:
    """One service action on a vehicle's route, with its certified time."""

    segment: TravelSegment
    kind: str  # PICKUP or DROPOFF
    node: int
    time: float


@dataclass(frozen=True)
class PdpRoute:
    """A feasible ordering of stops with totals measured from the
    vehicle's current location and release time."""

    stops: tuple[RouteStop, ...]
    distance: float
    end_time: float


@dataclass
class VehicleState:
    id: int
    capacity: int
    location: int
    available_time: float = 0.0
    plan: list[RouteStop] = field(default_factory=list)
    onboard: list[TravelSegment] = field(default_factory=list)
    # set while traversing an edge; location is then the edge head
    edge_from: int | None = None
    edge_entered: float | None = None

    def committed_events(self) -> list[tuple[TravelSegment, str]]:
        return [(stop.segment, stop.kind) for stop in self.plan]

    def initial_load(self) -> int:
        """Passengers already picked up: dropoff planned, pickup not."""
        picked = {id(s.segment) for s in self.plan if s.kind == PICKUP}
        return sum(1 for s in self.plan
                   if s.kind == DROPOFF and id(s.segment) not in picked)

    def position(self, g: RoadGraph, now: float) -> tuple[float, float]:
        """Coordinates at `now`, interpolated linearly when mid-edge."""
        if (self.edge_from is not None and self.edge_entered is not None
                and self.edge_entered <= now < self.available_time):
            x0, y0 = g.coords[self.edge_from]
            x1, y1 = g.coords[self.location]
            f = (now - self.edge_entered) / (self.available_time - self.edge_entered)
            return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
        return g.coords[self.location]


def _event_key(seg: TravelSegment, kind: str) -> tuple:
    return seg.order_key + (0 if kind == PICKUP else 1,)


def plan_metrics(vehicle: VehicleState, g: RoadGraph) -> tuple[float, float]:
    """(driven distance, completion time) of the committed plan as-is.

    The baseline against which an insertion is priced. An empty plan costs
    nothing and completes at the release time.
    """
    dist = 0.0
    t = vehicle.available_time
    node = vehicle.location
    for stop in vehicle.plan:
        tt = travel_time(g, node, stop.node)
        if math.isinf(tt):
            raise ValueError(f"committed plan of vehicle {vehicle.id} is disconnected")
        t += tt
        dist += network_distance(g, node, stop.node)
        if stop.kind == PICKUP:
            t = max(t, stop.segment.earliest_pickup)
        node = stop.node
    return dist, t


def pdp_route(vehicle: VehicleState, new_segments: list[TravelSegment],
              g: RoadGraph, metric: str = "distance",
              first_feasible: bool = False,
              max_route_stops: int | None = None) -> PdpRoute | None:
    """Best feasible route serving the committed plan plus `new_segments`.

    Exhaustive search over stop interleavings. Committed stops may be
    reordered, but every window is re-certified: pickups wait for their
    earliest time and must not pass the latest, dropoffs must meet their
    deadline, and the running load never exceeds capacity. Returns None when
    no ordering works.

    The search is exponential in the stop count, so `max_route_stops` caps
    the combined committed-plus-new stop total: a longer route is treated as
    infeasible, which reads as "this vehicle is too booked to take the trip".

    Ties on the metric keep the first route found; candidates are expanded
    in a fixed order (request id, segment kind, leg, pickup before dropoff),
    which makes the result independent of input order.
    """
    if metric not in ("distance", "time"):
        raise ValueError(f"unknown metric {metric!r}")
    committed_ids = {id(s.segment) for s in vehicle.plan}
    for s in new_segments:
        if s.empty:
            raise ValueError("walk-only segments do not take a vehicle")
        if id(s) in committed_ids:
            raise ValueError("segment already committed to this vehicle")

    events: list[tuple[TravelSegment, str]] = list(vehicle.committed_events())
    for s in new_segments:
        events.append((s, PICKUP))
        events.append((s, DROPOFF))
    if max_route_stops is not None and len(events) > max_route_stops:
        return None
    events.sort(key=lambda e: _event_key(*e))
    n = len(events)
    full = (1 << n) - 1

    pickup_bit: dict[int, int] = {}
    for i, (seg, kind) in enumerate(events):
        if kind == PICKUP:
            pickup_bit[id(seg)] = 1 << i

    best: list = [None]  # [ (value, stops, distance, end_time) ]

    def value_of(dist: float, t: float) -> float:
        return dist if metric == "distance" else t - vehicle.available_time

    def extend(node: int, t: float, dist: float, load: int, done: int,
               stops: list[RouteStop]) -> bool:
        if done == full:
            val = value_of(dist, t)
            if best[0] is None or val < best[0][0] - _EPS:
                best[0] = (val, tuple(stops), dist, t)
            return first_feasible
        for i in range(n):
            bit = 1 << i
            if done & bit:
                continue
            seg, kind = events[i]
            if kind == DROPOFF:
                pb = pickup_bit.get(id(seg))
                if pb is not None and not (done & pb):
                    continue  # pickup must come first
                target = seg.dropoff_node
            else:
                target = seg.pickup_node
            tt = travel_time(g, node, target)
            if math.isinf(tt):
                continue
            arr = t + tt
            if kind == PICKUP:
                st = max(arr, seg.earliest_pickup)
                if st > seg.latest_pickup:
                    continue
                new_load = load + 1
                if new_load > vehicle.capacity:
                    continue
            else:
                st = arr
                if st > seg.dropoff_deadline:
                    continue
                new_load = load - 1
            d2 = dist + network_distance(g, node, target)
            if best[0] is not None and value_of(d2, st) >= best[0][0] - _EPS:
                continue  # cannot strictly improve the incumbent
            stops.append(RouteStop(segment=seg, kind=kind, node=target, time=st))
            if extend(target, st, d2, new_load, done | bit, stops):
                return True
            stops.pop()
        return False

    extend(vehicle.location, vehicle.available_time, 0.0,
           vehicle.initial_load(), 0, [])
    if best[0] is None:
        return None
    _, stops, dist, end = best[0]
    return PdpRoute(stops=stops, distance=dist, end_time=end)


def insertion_cost(vehicle: VehicleState, new_segments: list[TravelSegment],
                   g: RoadGraph, metric: str = "distance"):
    """(cost, route) of adding the segments, or None when infeasible.

    Cost is the route metric minus the committed plan's metric, so an empty
    plan prices the trip at its full driven distance (or duration).
    """
    route = pdp_route(vehicle, new_segments, g, metric=metric)
    if route is None:
        return None
    prior_dist, prior_end = plan_metrics(vehicle, g)
    if metric == "distance":
        return route.distance - prior_dist, route
    prior_dur = prior_end - vehicle.available_time
    return (route.end_time - vehicle.available_time) - prior_dur, route


def _excluded_pair(a: TravelSegment, b: TravelSegment) -> bool:
    """Mutual exclusivity inside one request.

    No vehicle may carry two first miles, two last miles, or a first and a
    last mile on different legs for the same rider. The one allowed pairing
    is the first and last mile of the same leg.
    """
    if a.request_id != b.request_id:
        return False
    ka, kb = a.kind, b.kind
    if ka == kb and ka in (SegmentKind.FIRST_MILE, SegmentKind.LAST_MILE):
        return True
    if {ka, kb} == {SegmentKind.FIRST_MILE, SegmentKind.LAST_MILE}:
        return a.leg != b.leg
    return False


def _is_same_leg_pair(a: TravelSegment, b: TravelSegment) -> bool:
    return (a.request_id == b.request_id
            and {a.kind, b.kind} == {SegmentKind.FIRST_MILE, SegmentKind.LAST_MILE}
            and a.leg == b.leg)


@dataclass
class ShareabilityGraph:
    segments: dict[int, TravelSegment]
    pairs: set[frozenset[int]]
    same_leg_pairs: set[frozenset[int]]
    sv: dict[tuple[int, int], PdpRoute]  # (segment id, vehicle id) -> route
    stats: dict


def build_shareability(segments: list[TravelSegment], vehicles: list[VehicleState],
                       g: RoadGraph, metric: str = "distance",
                       same_request_only: bool = False,
                       max_route_stops: int | None = None) -> ShareabilityGraph:
    """Pairwise compatibility between non-walk segments, plus per-vehicle
    singleton feasibility.

    `same_request_only` restricts pair testing to segments of one request,
    which is exact when trips are capped to a single rider anyway.
    `max_route_stops` bounds the routing search on busy vehicles.
    """
    by_id: dict[int, TravelSegment] = {}
    for s in segments:
        if s.empty:
            raise ValueError("walk-only segments do not enter the shareability graph")
        if s.id < 0 or s.id in by_id:
            raise ValueError(f"segment id {s.id} missing or duplicated")
        by_id[s.id] = s

    phantom_cap = max((v.capacity for v in vehicles), default=1)
    pairs: set[frozenset[int]] = set()
    same_leg: set[frozenset[int]] = set()
    tested = 0
    ids = sorted(by_id)
    for i, j in itertools.combinations(ids, 2):
        a, b = by_id[i], by_id[j]
        if same_request_only and a.request_id != b.request_id:
            continue
        if _excluded_pair(a, b):
            continue
        tested += 1
        t0 = min(a.earliest_pickup, b.earliest_pickup)
        for start in (a.pickup_node, b.pickup_node):
            ghost = VehicleState(id=-2, capacity=phantom_cap, location=start,
                                 available_time=t0)
            if pdp_route(ghost, [a, b], g, metric=metric, first_feasible=True):
                pairs.add(frozenset((i, j)))
                if _is_same_leg_pair(a, b):
                    same_leg.add(frozenset((i, j)))
                break

    sv: dict[tuple[int, int], PdpRoute] = {}
    for v in sorted(vehicles, key=lambda v: v.id):
        for sid in ids:
            route = pdp_route(v, [by_id[sid]], g, metric=metric,
                              max_route_stops=max_route_stops)
            if route is not None:
                sv[(sid, v.id)] = route

    return ShareabilityGraph(
        segments=by_id, pairs=pairs, same_leg_pairs=same_leg, sv=sv,
        stats={"pairs_tested": tested, "pairs_kept": len(pairs)},
    )


def enumerate_trips(share: ShareabilityGraph, max_trip_size: int = 4) -> list[tuple[int, ...]]:
    """Cliques of the shareability graph as sorted id tuples, singletons
    included, ordered by (size, ids)."""
    if max_trip_size < 1:
        raise ValueError("max_trip_size must be at least 1")
    ids = sorted(share.segments)
    adj = {i: set() for i in ids}
    for p in share.pairs:
        i, j = sorted(p)
        adj[i].add(j)
        adj[j].add(i)

    out: list[tuple[int, ...]] = [(i,) for i in ids]
    frontier = out[:]
    size = 1
    while frontier and size < max_trip_size:
        nxt = []
        for c in frontier:
            for j in sorted(adj[c[-1]]):
                if j <= c[-1]:
                    continue
                if all(j in adj[m] for m in c):
                    nxt.append(c + (j,))
        out.extend(nxt)
        frontier = nxt
        size += 1
    out.sort(key=lambda c: (len(c), c))
    return out


@dataclass(frozen=True)
class Trip:
    id: int
    segment_ids: tuple[int, ...]
    request_ids: frozenset[int]
    all_empty: bool
    # riders whose first and last mile of one leg are both in this trip
    same_leg_requests: frozenset[int] = frozenset()


@dataclass(frozen=True)
class E2Edge:
    cost: float
    route: PdpRoute | None  # None only on dummy-vehicle edges


@dataclass
class TirtvGraph:
    """Batch assignment graph: requests, trips, vehicles and their edges."""

    segments: dict[int, TravelSegment]
    trips: list[Trip]
    e1: dict[int, tuple[int, ...]]        # request id -> trip ids
    e2: dict[tuple[int, int], E2Edge]     # (trip id, vehicle id)
    vehicles: dict[int, VehicleState]
    stats: dict

    def trips_of_vehicle(self, vehicle_id: int) -> list[int]:
        return sorted(t for (t, v) in self.e2 if v == vehicle_id)

    def vehicles_of_trip(self, trip_id: int) -> list[int]:
        return sorted(v for (t, v) in self.e2 if t == trip_id)

    def to_json_dict(self) -> dict:
        return {
            "segments": {
                str(i): {
                    "kind": s.kind.value, "request": s.request_id,
                    "pickup": s.pickup_node, "dropoff": s.dropoff_node,
                    "empty": s.empty,
                }
                for i, s in sorted(self.segments.items())
            },
            "trips": [
                {"id": t.id, "segments": list(t.segment_ids),
                 "requests": sorted(t.request_ids), "all_empty": t.all_empty}
                for t in self.trips
            ],
            "e1": {str(r): list(ts) for r, ts in sorted(self.e1.items())},
            "e2": [
                {"trip": t, "vehicle": v, "cost": e.cost}
                for (t, v), e in sorted(self.e2.items())
            ],
            "stats": self.stats,
        }


def _same_leg_requests(seg_ids: tuple[int, ...],
                       segments: dict[int, TravelSegment]) -> frozenset[int]:
    seen: dict[tuple, set[SegmentKind]] = {}
    for sid in seg_ids:
        s = segments[sid]
        if s.leg is None:
            continue
        seen.setdefault((s.request_id, s.leg), set()).add(s.kind)
    return frozenset(r for (r, _), kinds in seen.items()
                     if {SegmentKind.FIRST_MILE, SegmentKind.LAST_MILE} <= kinds)


def build_tirtv(segments: list[TravelSegment], vehicles: list[VehicleState],
                g: RoadGraph, metric: str = "distance", max_trip_size: int = 4,
                same_request_only: bool = False,
                share: ShareabilityGraph | None = None,
                max_route_stops: int | None = None) -> TirtvGraph:
    """Assemble the full batch graph.

    Walk-only segments become singleton trips on the dummy vehicle at zero
    cost. Vehicle-trip evaluation is subset-monotone per vehicle: a trip is
    priced only after all its one-smaller subsets proved feasible for that
    vehicle, and singleton prices reuse the shareability layer's routes.
    `max_route_stops` keeps the routing search bounded on vehicles that
    already carry long committed plans; capping it never breaks the subset
    rule because adding segments only lengthens the route.
    """
    ids_seen: set[int] = set()
    for s in segments:
        if s.id < 0 or s.id in ids_seen:
            raise ValueError(f"segment id {s.id} missing or duplicated")
        ids_seen.add(s.id)
    veh_ids: set[int] = set()
    for v in vehicles:
        if v.id < 0 or v.id in veh_ids:
            raise ValueError(f"vehicle id {v.id} reserved or duplicated")
        if v.capacity < 1:
            raise ValueError(f"vehicle {v.id} has no seats")
        veh_ids.add(v.id)

    empty_segs = [s for s in segments if s.empty]
    real_segs = [s for s in segments if not s.empty]

    if share is None:
        share = build_shareability(real_segs, vehicles, g, metric=metric,
                                   same_request_only=same_request_only,
                                   max_route_stops=max_route_stops)

    seg_map: dict[int, TravelSegment] = {s.id: s for s in segments}
    # a segment no vehicle can take alone cannot ride in any larger trip
    # either, so cliques grow over serviceable segments only; singletons
    # stay in so the solver still sees the rejection penalty
    serviceable = {sid for sid, _v in share.sv}
    if len(serviceable) < len(share.segments):
        share_for_cliques = ShareabilityGraph(
            segments=share.segments,
            pairs={p for p in share.pairs if all(i in serviceable for i in p)},
            same_leg_pairs=share.same_leg_pairs,
            sv=share.sv, stats=share.stats)
    else:
        share_for_cliques = share
    combos = enumerate_trips(share_for_cliques, max_trip_size) if real_segs else []
    combos = combos + sorted((s.id,) for s in empty_segs)

    trips: list[Trip] = []
    trip_of_combo: dict[tuple[int, ...], int] = {}
    for combo in combos:
        all_empty = all(seg_map[i].empty for i in combo)
        trips.append(Trip(
            id=len(trips), segment_ids=combo,
            request_ids=frozenset(seg_map[i].request_id for i in combo),
            all_empty=all_empty,
            same_leg_requests=_same_leg_requests(combo, seg_map),
        ))
        trip_of_combo[combo] = trips[-1].id

    e2: dict[tuple[int, int], E2Edge] = {}
    evaluated = 0
    pruned = 0
    for t in trips:
        if t.all_empty:
            e2[(t.id, DUMMY_VEHICLE_ID)] = E2Edge(cost=0.0, route=None)

    for v in sorted(vehicles, key=lambda v: v.id):
        prior_dist, prior_end = plan_metrics(v, g)
        prior = prior_dist if metric == "distance" else prior_end - v.available_time
        ok: set[tuple[int, ...]] = set()
        for t in trips:
            if t.all_empty:
                continue
            if len(t.segment_ids) == 1:
                route = share.sv.get((t.segment_ids[0], v.id))
            else:
                subsets_ok = all(
                    tuple(sub) in ok
                    for sub in itertools.combinations(t.segment_ids, len(t.segment_ids) - 1)
                )
                if not subsets_ok:
                    pruned += 1
                    continue
                evaluated += 1
                route = pdp_route(v, [seg_map[i] for i in t.segment_ids], g,
                                  metric=metric,
                                  max_route_stops=max_route_stops)
            if route is None:
                continue
            val = route.distance if metric == "distance" else route.end_time - v.available_time
            e2[(t.id, v.id)] = E2Edge(cost=val - prior, route=route)
            ok.add(t.segment_ids)

    e1: dict[int, tuple[int, ...]] = {}
    tmp: dict[int, list[int]] = {}
    for t in trips:
        for r in t.request_ids:
            tmp.setdefault(r, []).append(t.id)
    for r in sorted(tmp):
        e1[r] = tuple(sorted(tmp[r]))

    stats = dict(share.stats)
    stats.update({
        "trips": len(trips),
        "e2_evaluated": evaluated,
        "e2_pruned_by_subset": pruned,
        "e2_edges": len(e2),
    })
    return TirtvGraph(segments=seg_map, trips=trips, e1=e1, e2=e2,
                      vehicles={v.id: v for v in vehicles}, stats=stats)
