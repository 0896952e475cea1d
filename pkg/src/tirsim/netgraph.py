"""Road network storage and deterministic shortest-path queries.

The graph is directed, with strictly positive per-edge travel time (seconds)
and distance (meters). Node coordinates are planar meters. Queries minimize
travel time and break ties first by distance, then by lexicographically
smaller node sequence, so repeated runs return bit-identical results.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass

DEFAULT_WALK_SPEED = 1.4  # m/s


class GraphFormatError(ValueError):
    """A graph file violated the documented format. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class PathResult:
    """One shortest path: total travel time (s), total distance (m), node sequence."""

    travel_time: float
    distance: float
    node_sequence: tuple[int, ...]


class RoadGraph:
    """Immutable directed road network.

    Single-source query results are cached per source node after the first
    query, so the graph is safe for concurrent readers once built. Do not
    mutate `coords` or the edge list after construction.
    """

    def __init__(self, coords: dict[int, tuple[float, float]],
                 edges: list[tuple[int, int, float, float]]):
        self.coords = dict(coords)
        self.edges = list(edges)
        self.adj: dict[int, list[tuple[int, float, float]]] = {n: [] for n in self.coords}
        for u, v, tt, dist in self.edges:
            if u not in self.coords or v not in self.coords:
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
            if not (tt > 0 and math.isfinite(tt)):
                raise ValueError(f"edge ({u}, {v}) travel time must be finite and > 0, got {tt}")
            if not (dist > 0 and math.isfinite(dist)):
                raise ValueError(f"edge ({u}, {v}) distance must be finite and > 0, got {dist}")
            self.adj[u].append((v, float(tt), float(dist)))
        for n in self.adj:
            self.adj[n].sort()
        self._sssp_cache: dict[int, dict[int, PathResult]] = {}

    @property
    def nodes(self) -> list[int]:
        return sorted(self.coords)

    def __contains__(self, node: int) -> bool:
        return node in self.coords

    def single_source(self, source: int) -> dict[int, PathResult]:
        """All shortest paths from `source`, computed once and cached."""
        if source not in self.coords:
            raise KeyError(f"unknown node {source}")
        hit = self._sssp_cache.get(source)
        if hit is not None:
            return hit
        settled: dict[int, PathResult] = {}
        # Labels are (time, distance, node_sequence); tuple comparison gives the
        # tie-break order. Positive weights keep every optimal path simple, so
        # extending two labels that end at the same node preserves their order.
        heap: list[tuple[float, float, tuple[int, ...]]] = [(0.0, 0.0, (source,))]
        best: dict[int, tuple[float, float, tuple[int, ...]]] = {source: heap[0]}
        while heap:
            label = heapq.heappop(heap)
            t, d, seq = label
            u = seq[-1]
            if u in settled:
                continue
            settled[u] = PathResult(t, d, seq)
            for v, tt, dist in self.adj[u]:
                if v in settled:
                    continue
                cand = (t + tt, d + dist, seq + (v,))
                cur = best.get(v)
                if cur is None or cand < cur:
                    best[v] = cand
                    heapq.heappush(heap, cand)
        self._sssp_cache[source] = settled
        return settled


def load_graph(path: str) -> RoadGraph:
    """Read a road network from CSV.

    Expected layout: a header line, then `node,<id>,<x>,<y>` and
    `edge,<u>,<v>,<travel_time_s>,<distance_m>` records in any order.
    UTF-8, LF line endings. Every format problem is reported with its
    line number.
    """
    coords: dict[int, tuple[float, float]] = {}
    node_lines: dict[int, int] = {}
    edge_rows: list[tuple[int, list[str]]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise GraphFormatError(1, "empty file, expected a header line")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            kind = row[0].strip()
            if kind == "node":
                if len(row) < 4:
                    raise GraphFormatError(line_no, "node record needs id,x,y")
                try:
                    nid = int(row[1])
                    x, y = float(row[2]), float(row[3])
                except ValueError as exc:
                    raise GraphFormatError(line_no, f"bad node record: {exc}") from exc
                if nid in coords:
                    raise GraphFormatError(
                        line_no, f"duplicate node id {nid} (first seen on line {node_lines[nid]})")
                coords[nid] = (x, y)
                node_lines[nid] = line_no
            elif kind == "edge":
                if len(row) < 5:
                    raise GraphFormatError(line_no, "edge record needs u,v,travel_time_s,distance_m")
                edge_rows.append((line_no, row))
            else:
                raise GraphFormatError(line_no, f"unknown record kind {kind!r}")
    edges: list[tuple[int, int, float, float]] = []
    for line_no, row in edge_rows:
        try:
            u, v = int(row[1]), int(row[2])
            tt, dist = float(row[3]), float(row[4])
        except ValueError as exc:
            raise GraphFormatError(line_no, f"bad edge record: {exc}") from exc
        if u not in coords:
            raise GraphFormatError(line_no, f"edge references unknown node {u}")
        if v not in coords:
            raise GraphFormatError(line_no, f"edge references unknown node {v}")
        if not (tt > 0 and math.isfinite(tt)):
            raise GraphFormatError(line_no, f"travel time must be finite and > 0, got {row[3]}")
        if not (dist > 0 and math.isfinite(dist)):
            raise GraphFormatError(line_no, f"distance must be finite and > 0, got {row[4]}")
        edges.append((u, v, tt, dist))
    return RoadGraph(coords, edges)


def shortest_path(g: RoadGraph, source: int, target: int) -> PathResult | None:
    """Minimum-travel-time path from source to target, or None if unreachable.

    Ties on travel time are broken by smaller distance, then by
    lexicographically smaller node sequence. source == target yields the
    trivial zero path.
    """
    if target not in g.coords:
        raise KeyError(f"unknown node {target}")
    return g.single_source(source).get(target)


def travel_time(g: RoadGraph, source: int, target: int) -> float:
    """Shortest travel time in seconds; +inf when unreachable."""
    res = shortest_path(g, source, target)
    return math.inf if res is None else res.travel_time


def network_distance(g: RoadGraph, source: int, target: int) -> float:
    """Distance in meters along the minimum-travel-time path; +inf when unreachable."""
    res = shortest_path(g, source, target)
    return math.inf if res is None else res.distance


def walk_time(g: RoadGraph, a: int, b: int, walk_speed: float = DEFAULT_WALK_SPEED) -> float:
    """Walking duration over the road network, in seconds.

    Uses the distance of the minimum-travel-time path divided by walk_speed;
    +inf when unreachable.
    """
    if not walk_speed > 0:
        raise ValueError(f"walk_speed must be > 0, got {walk_speed}")
    dist = network_distance(g, a, b)
    return dist / walk_speed
