"""Decompose a request into vehicle-servable travel segments.

Each candidate transit leg yields a first-mile segment (origin to the
departure stop) and a last-mile segment (arrival stop to the destination);
the request additionally always yields one direct door-to-door segment. A
mile segment is `empty` when walking covers it: network walk distance within
the walk limit and the walk fits the time window. Empty segments need no
vehicle and are later carried by the dummy vehicle in the assignment graph.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from tirsim.demand import Request
from tirsim.netgraph import RoadGraph, shortest_path
from tirsim.transit import TransitLeg

DEFAULT_MAX_WALK = 400.0  # m


class SegmentKind(enum.Enum):
    FIRST_MILE = "first_mile"
    LAST_MILE = "last_mile"
    DIRECT = "direct"


_KIND_RANK = {SegmentKind.FIRST_MILE: 0, SegmentKind.LAST_MILE: 1, SegmentKind.DIRECT: 2}


@dataclass
class TravelSegment:
    """One pickup/dropoff duty. `id` is assigned by the batch assembler.

    Windows are closed intervals: service may start at any time in
    [earliest_pickup, latest_pickup] and the dropoff must happen at or
    before dropoff_deadline.
    """

    kind: SegmentKind
    request_id: int
    leg: TransitLeg | None
    pickup_node: int
    dropoff_node: int
    earliest_pickup: float
    latest_pickup: float
    dropoff_deadline: float
    empty: bool
    walk_time_s: float | None = None  # set when the mile is walkable
    id: int = field(default=-1, compare=False)

    def __post_init__(self):
        if (self.leg is None) != (self.kind is SegmentKind.DIRECT):
            raise ValueError("mile segments carry a leg; direct segments do not")

    @property
    def order_key(self) -> tuple:
        """Total order independent of batch-local ids (stable across batches)."""
        leg_key = ("", "") if self.leg is None else (self.leg.line_id, self.leg.run_id)
        return (self.request_id, _KIND_RANK[self.kind], leg_key)


def _walk(g: RoadGraph, a: int, b: int, walk_speed: float, max_walk: float):
    """(walkable within max_walk, duration s or None)."""
    sp = shortest_path(g, a, b)
    if sp is None or sp.distance > max_walk:
        return False, None
    return True, sp.distance / walk_speed


def decompose(request: Request, legs: list[TransitLeg], g: RoadGraph,
              walk_speed: float, max_walk: float = DEFAULT_MAX_WALK) -> list[TravelSegment]:
    """Travel segments for one request over its candidate legs.

    Emits one first-mile and one last-mile segment per surviving leg, then
    exactly one direct segment. A leg survives only if each of its miles is
    walkable or drivable inside the window even for an ideal vehicle; when
    one mile fails, its sibling is dropped too. Order: legs in input order
    (first mile, then last mile), direct segment last.
    """
    out: list[TravelSegment] = []
    for leg in legs:
        f_walkable, f_walk_s = _walk(g, request.origin, leg.depart_node, walk_speed, max_walk)
        f_walk_fits = (f_walkable
                       and request.request_time + f_walk_s <= leg.board_time)
        f_drive = shortest_path(g, request.origin, leg.depart_node)
        f_drive_fits = (f_drive is not None
                        and request.request_time + f_drive.travel_time <= leg.board_time)

        l_walkable, l_walk_s = _walk(g, leg.arrive_node, request.destination, walk_speed, max_walk)
        l_walk_fits = (l_walkable
                       and leg.alight_time + l_walk_s <= request.deadline)
        l_drive = shortest_path(g, leg.arrive_node, request.destination)
        l_drive_fits = (l_drive is not None
                        and leg.alight_time + l_drive.travel_time <= request.deadline)

        if not (f_walk_fits or f_drive_fits):
            continue
        if not (l_walk_fits or l_drive_fits):
            continue

        if f_walk_fits:
            f_latest = leg.board_time - f_walk_s
        else:
            f_latest = leg.board_time - f_drive.travel_time
        out.append(TravelSegment(
            kind=SegmentKind.FIRST_MILE, request_id=request.id, leg=leg,
            pickup_node=request.origin, dropoff_node=leg.depart_node,
            earliest_pickup=request.request_time, latest_pickup=f_latest,
            dropoff_deadline=leg.board_time, empty=f_walk_fits,
            walk_time_s=f_walk_s if f_walk_fits else None,
        ))
        if l_walk_fits:
            l_latest = request.deadline - l_walk_s
        else:
            l_latest = request.deadline - l_drive.travel_time
        out.append(TravelSegment(
            kind=SegmentKind.LAST_MILE, request_id=request.id, leg=leg,
            pickup_node=leg.arrive_node, dropoff_node=request.destination,
            earliest_pickup=leg.alight_time, latest_pickup=l_latest,
            dropoff_deadline=request.deadline, empty=l_walk_fits,
            walk_time_s=l_walk_s if l_walk_fits else None,
        ))

    out.append(TravelSegment(
        kind=SegmentKind.DIRECT, request_id=request.id, leg=None,
        pickup_node=request.origin, dropoff_node=request.destination,
        earliest_pickup=request.request_time,
        latest_pickup=request.deadline - request.sptt,
        dropoff_deadline=request.deadline, empty=False,
    ))
    return out


def transit_only_feasible(request: Request, legs: list[TransitLeg], g: RoadGraph,
                          walk_speed: float, max_walk: float = DEFAULT_MAX_WALK) -> bool:
    """True when some leg is reachable by walking on both miles in time.

    Such a request needs no vehicle at all; the simulator serves it at zero
    fleet cost and keeps it out of the assignment problem.
    """
    for leg in legs:
        f_ok, f_s = _walk(g, request.origin, leg.depart_node, walk_speed, max_walk)
        if not f_ok or request.request_time + f_s > leg.board_time:
            continue
        l_ok, l_s = _walk(g, leg.arrive_node, request.destination, walk_speed, max_walk)
        if not l_ok or leg.alight_time + l_s > request.deadline:
            continue
        return True
    return False


def first_feasible_walk_leg(request: Request, legs: list[TransitLeg], g: RoadGraph,
                            walk_speed: float, max_walk: float = DEFAULT_MAX_WALK):
    """Earliest leg walkable on both miles, with (leg, first walk s, last walk s).

    Returns None when the request is not transit-only feasible. Legs are
    assumed sorted by board time, as enumerate_legs returns them.
    """
    for leg in legs:
        f_ok, f_s = _walk(g, request.origin, leg.depart_node, walk_speed, max_walk)
        if not f_ok or request.request_time + f_s > leg.board_time:
            continue
        l_ok, l_s = _walk(g, leg.arrive_node, request.destination, walk_speed, max_walk)
        if not l_ok or leg.alight_time + l_s > request.deadline:
            continue
        return leg, f_s, l_s
    return None
