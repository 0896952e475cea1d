"""Request model, synthetic demand generation, and request CSV round-trip."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass

from tirsim.netgraph import RoadGraph, shortest_path

DEFAULT_ALPHA = 0.2
DEFAULT_BETA = 1200.0  # s
DEFAULT_MIN_TRIP_DISTANCE = 3000.0  # m
MORNING_WINDOW = (21600.0, 28800.0)  # 06:00-08:00
EVENING_WINDOW = (57600.0, 64800.0)  # 16:00-18:00


class DemandError(ValueError):
    """Demand generation or request data failed validation."""


def max_travel_time(sptt: float, alpha: float, beta: float) -> float:
    """Travel-time budget: (1 + alpha) * shortest possible travel time + beta."""
    return (1.0 + alpha) * sptt + beta


@dataclass(frozen=True)
class Request:
    """One trip request. Deadline is anchored at request_time and never moves."""

    id: int
    origin: int
    destination: int
    request_time: float
    sptt: float            # shortest possible travel time, s
    direct_distance: float  # distance along that path, m
    deadline: float

    def __post_init__(self):
        if self.origin == self.destination:
            raise DemandError(f"request {self.id}: origin equals destination")
        if self.deadline < self.request_time + self.sptt:
            raise DemandError(f"request {self.id}: deadline precedes earliest possible arrival")


def make_request(rid: int, origin: int, destination: int, request_time: float,
                 g: RoadGraph, alpha: float = DEFAULT_ALPHA,
                 beta: float = DEFAULT_BETA) -> Request:
    sp = shortest_path(g, origin, destination)
    if sp is None:
        raise DemandError(f"request {rid}: destination {destination} unreachable from {origin}")
    return Request(
        id=rid, origin=origin, destination=destination, request_time=request_time,
        sptt=sp.travel_time, direct_distance=sp.distance,
        deadline=request_time + max_travel_time(sp.travel_time, alpha, beta),
    )


@dataclass
class DemandConfig:
    count: int
    seed: int = 0
    morning: tuple[float, float] = MORNING_WINDOW
    evening: tuple[float, float] = EVENING_WINDOW
    min_trip_distance: float = DEFAULT_MIN_TRIP_DISTANCE
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    max_attempts_per_request: int = 1000


def generate_demand(cfg: DemandConfig, g: RoadGraph) -> list[Request]:
    """Uniform random origin-destination pairs over the graph's nodes.

    Pairs whose network distance falls below cfg.min_trip_distance (or that
    are unreachable) are redrawn, up to a bounded number of attempts. The
    first half of the requests (rounded up) gets request times uniform over
    the morning window, the rest over the evening window. Output is sorted by
    request time and re-numbered 0..n-1, and is identical for a fixed seed.
    """
    if cfg.count < 0:
        raise DemandError(f"count must be >= 0, got {cfg.count}")
    rng = random.Random(cfg.seed)
    nodes = sorted(g.coords)
    if cfg.count and len(nodes) < 2:
        raise DemandError("need at least 2 nodes to generate demand")
    morning_n = cfg.count - cfg.count // 2
    drawn: list[tuple[float, int, int]] = []
    for i in range(cfg.count):
        window = cfg.morning if i < morning_n else cfg.evening
        for _ in range(cfg.max_attempts_per_request):
            origin = rng.choice(nodes)
            dest = rng.choice(nodes)
            if origin == dest:
                continue
            sp = shortest_path(g, origin, dest)
            if sp is None or sp.distance < cfg.min_trip_distance:
                continue
            t = rng.uniform(*window)
            drawn.append((t, origin, dest))
            break
        else:
            raise DemandError(
                f"could not draw a pair with network distance >= {cfg.min_trip_distance} m "
                f"after {cfg.max_attempts_per_request} attempts")
    drawn.sort()
    return [make_request(i, o, d, t, g, cfg.alpha, cfg.beta)
            for i, (t, o, d) in enumerate(drawn)]


# ---------------------------------------------------------------------------
# CSV round-trip: id,origin,destination,request_time_s
# Deadlines are derived data and recomputed on load from the active rule.
# ---------------------------------------------------------------------------

def save_requests_csv(requests: list[Request], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "origin", "destination", "request_time_s"])
        for r in requests:
            writer.writerow([r.id, r.origin, r.destination, repr(r.request_time)])


def load_requests_csv(path: str, g: RoadGraph, alpha: float = DEFAULT_ALPHA,
                      beta: float = DEFAULT_BETA) -> list[Request]:
    out: list[Request] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = ["id", "origin", "destination", "request_time_s"]
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise DemandError(f"{path}: missing columns {missing}")
        for row in reader:
            try:
                rid = int(row["id"])
                origin = int(row["origin"])
                dest = int(row["destination"])
                t = float(row["request_time_s"])
            except ValueError as exc:
                raise DemandError(f"{path}: bad row {row}") from exc
            if origin not in g or dest not in g:
                raise DemandError(f"{path}: request {rid} references unknown nodes")
            out.append(make_request(rid, origin, dest, t, g, alpha, beta))
    out.sort(key=lambda r: (r.request_time, r.id))
    return out
