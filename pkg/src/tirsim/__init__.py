"""tirsim: batch simulation and assignment optimization for transit-integrated ride-sharing."""

from tirsim.assign import (
    AssignmentSolution,
    IlpModel,
    IlpSolution,
    build_ilp,
    default_penalties,
    extract_assignment,
    solve_ilp,
    validate_solution,
)
from tirsim.demand import DemandConfig, Request, generate_demand, make_request
from tirsim.netgraph import PathResult, RoadGraph, load_graph, shortest_path, walk_time
from tirsim.segments import SegmentKind, TravelSegment, decompose
from tirsim.simcore import (
    MetricsReport,
    Mode,
    SimConfig,
    SimResult,
    compute_metrics,
    run_simulation,
    transit_reach,
)
from tirsim.synth import CityConfig, build_city
from tirsim.tirtv import (
    DUMMY_VEHICLE_ID,
    TirtvGraph,
    VehicleState,
    build_shareability,
    build_tirtv,
    insertion_cost,
    pdp_route,
)
from tirsim.transit import CapacityLedger, TransitSchedule, enumerate_legs, load_schedule

__version__ = "0.1.0"

__all__ = [
    "AssignmentSolution",
    "CapacityLedger",
    "CityConfig",
    "DUMMY_VEHICLE_ID",
    "DemandConfig",
    "IlpModel",
    "IlpSolution",
    "MetricsReport",
    "Mode",
    "PathResult",
    "Request",
    "RoadGraph",
    "SegmentKind",
    "SimConfig",
    "SimResult",
    "TirtvGraph",
    "TransitSchedule",
    "TravelSegment",
    "VehicleState",
    "build_city",
    "build_ilp",
    "build_shareability",
    "build_tirtv",
    "compute_metrics",
    "decompose",
    "default_penalties",
    "enumerate_legs",
    "extract_assignment",
    "generate_demand",
    "insertion_cost",
    "load_graph",
    "load_schedule",
    "make_request",
    "pdp_route",
    "run_simulation",
    "shortest_path",
    "solve_ilp",
    "transit_reach",
    "validate_solution",
    "walk_time",
    "__version__",
]
