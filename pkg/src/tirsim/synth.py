"""Synthetic benchmark city: rectangular street grid, two bus corridors.

Everything here is plain data construction. The graph writer and the
schedule writer emit exactly the CSV layouts the loaders in netgraph and
transit read back, so a generated city can round-trip through files or be
used in-process directly.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from tirsim.netgraph import RoadGraph
from tirsim.transit import TransitLine, TransitRun, TransitSchedule


@dataclass(frozen=True)
class CityConfig:
    nx: int = 20
    ny: int = 10
    spacing_m: float = 500.0
    road_speed_mps: float = 10.0
    bus_speed_mps: float = 10.0
    dwell_s: float = 10.0
    headway_s: float = 600.0
    service_start_s: float = 0.0
    service_end_s: float = 14400.0
    seat_capacity: int = 50
    # corridor placement; None puts each line through the middle of the grid
    ew_row: int | None = None
    ns_col: int | None = None
    # corridor extent as inclusive (first, last) grid indices; None spans the
    # whole grid, shorter spans model lines that stop mid-city
    ew_cols: tuple[int, int] | None = None
    ns_rows: tuple[int, int] | None = None

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2x2 nodes")
        if self.spacing_m <= 0 or self.road_speed_mps <= 0 or self.bus_speed_mps <= 0:
            raise ValueError("spacing and speeds must be > 0")
        if self.headway_s <= 0:
            raise ValueError("headway_s must be > 0")
        if self.service_end_s <= self.service_start_s:
            raise ValueError("empty service span")
        if self.ew_row is not None and not 0 <= self.ew_row < self.ny:
            raise ValueError("ew_row outside the grid")
        if self.ns_col is not None and not 0 <= self.ns_col < self.nx:
            raise ValueError("ns_col outside the grid")
        for name, span, hi in (("ew_cols", self.ew_cols, self.nx),
                               ("ns_rows", self.ns_rows, self.ny)):
            if span is None:
                continue
            lo, up = span
            if not (0 <= lo < up < hi):
                raise ValueError(f"{name} must satisfy 0 <= first < last < {hi}")


def grid_graph(nx: int, ny: int, spacing_m: float = 500.0,
               speed_mps: float = 10.0) -> RoadGraph:
    """Bidirectional street grid; node id = column * ny + row."""
    coords = {}
    edges = []
    tt = spacing_m / speed_mps
    for x in range(nx):
        for y in range(ny):
            coords[x * ny + y] = (x * spacing_m, y * spacing_m)
    for x in range(nx):
        for y in range(ny):
            nid = x * ny + y
            if x + 1 < nx:
                other = (x + 1) * ny + y
                edges.append((nid, other, tt, spacing_m))
                edges.append((other, nid, tt, spacing_m))
            if y + 1 < ny:
                other = x * ny + y + 1
                edges.append((nid, other, tt, spacing_m))
                edges.append((other, nid, tt, spacing_m))
    return RoadGraph(coords, edges)


def corridor_nodes(cfg: CityConfig) -> dict[str, list[int]]:
    """Four directed routes: one east-west and one north-south corridor,
    each served in both directions. By default they cross mid-grid and span
    the whole city; ew_row/ns_col shift them, ew_cols/ns_rows shorten them."""
    y_mid = cfg.ny // 2 if cfg.ew_row is None else cfg.ew_row
    x_mid = cfg.nx // 2 if cfg.ns_col is None else cfg.ns_col
    xs = range(cfg.nx) if cfg.ew_cols is None else range(cfg.ew_cols[0], cfg.ew_cols[1] + 1)
    ys = range(cfg.ny) if cfg.ns_rows is None else range(cfg.ns_rows[0], cfg.ns_rows[1] + 1)
    ew = [x * cfg.ny + y_mid for x in xs]
    ns = [x_mid * cfg.ny + y for y in ys]
    return {
        "EW_east": ew,
        "EW_west": list(reversed(ew)),
        "NS_north": ns,
        "NS_south": list(reversed(ns)),
    }


def corridor_schedule(g: RoadGraph, cfg: CityConfig) -> TransitSchedule:
    """Timetable for the two crossing corridors.

    Runs leave the first stop every headway_s across the service span. The
    bus takes spacing/bus_speed between adjacent stops and sits dwell_s at
    each stop; boarding happens at departure, so dwell is the price of every
    intermediate stop.
    """
    lines = {}
    stops: dict[str, tuple[float, float, int]] = {}
    for route_id, nodes in sorted(corridor_nodes(cfg).items()):
        stop_ids = tuple(f"{route_id}_{k}" for k in range(len(nodes)))
        for sid, node in zip(stop_ids, nodes):
            stops[sid] = (g.coords[node][0], g.coords[node][1], node)
        hop = cfg.spacing_m / cfg.bus_speed_mps
        runs = []
        t0 = cfg.service_start_s
        i = 0
        while t0 <= cfg.service_end_s:
            arrivals = []
            departures = []
            t = t0
            for _ in nodes:
                arrivals.append(t)
                departures.append(t + cfg.dwell_s)
                t = t + cfg.dwell_s + hop
            runs.append(TransitRun(
                run_id=f"{route_id}_r{i}", line_id=route_id,
                capacity=cfg.seat_capacity,
                arrivals=tuple(arrivals), departures=tuple(departures)))
            i += 1
            t0 += cfg.headway_s
        lines[route_id] = TransitLine(
            line_id=route_id, stop_ids=stop_ids, stop_nodes=tuple(nodes),
            runs=runs)
    schedule = TransitSchedule(lines=lines, stops=stops)
    schedule.validate()
    return schedule


def build_city(cfg: CityConfig) -> tuple[RoadGraph, TransitSchedule]:
    g = grid_graph(cfg.nx, cfg.ny, cfg.spacing_m, cfg.road_speed_mps)
    return g, corridor_schedule(g, cfg)


# ---------------------------------------------------------------------------
# Writers (inverse of the loaders)
# ---------------------------------------------------------------------------

def write_graph_csv(g: RoadGraph, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "a", "b", "c", "d"])
        for nid in sorted(g.coords):
            x, y = g.coords[nid]
            w.writerow(["node", nid, repr(x), repr(y), ""])
        for u in sorted(g.adj):
            for v, tt, dist in g.adj[u]:
                w.writerow(["edge", u, v, repr(tt), repr(dist)])


def write_schedule_dir(schedule: TransitSchedule, directory: str) -> None:
    """Write stops/routes/trips/stop_times files readable by the schedule
    loader. Floats are emitted with repr so a round trip is exact."""
    os.makedirs(directory, exist_ok=True)

    with open(os.path.join(directory, "stops.txt"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stop_id", "x", "y"])
        for sid in sorted(schedule.stops):
            x, y, _node = schedule.stops[sid]
            w.writerow([sid, repr(x), repr(y)])

    with open(os.path.join(directory, "routes.txt"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["route_id"])
        for line_id in sorted(schedule.lines):
            w.writerow([line_id])

    with open(os.path.join(directory, "trips.txt"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trip_id", "route_id", "capacity"])
        for line_id in sorted(schedule.lines):
            for run in schedule.lines[line_id].runs:
                w.writerow([run.run_id, line_id, run.capacity])

    with open(os.path.join(directory, "stop_times.txt"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trip_id", "stop_sequence", "stop_id", "arrival_s",
                    "departure_s"])
        for line_id in sorted(schedule.lines):
            line = schedule.lines[line_id]
            for run in line.runs:
                for k, sid in enumerate(line.stop_ids):
                    w.writerow([run.run_id, k, sid,
                                repr(run.arrivals[k]), repr(run.departures[k])])
