"""Command-line front end.

Subcommands: simulate, gen-demand, transit-reach, validate-data. A run is
described by an INI config file (every simulation field lives in the
[simulation] section, data locations in [paths]); command-line flags
override the file. Exit codes: 0 success, 1 usage problem, 2 broken or
missing input data, 3 runtime failure inside the engine.

Every simulate run emits a manifest with hashes of all inputs and the full
config snapshot. Runs with the same manifest inputs write byte-identical
metrics CSVs; wall-clock numbers live only in the manifest and the timing
table.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import os
import sys
import time

from tirsim import __version__
from tirsim.demand import (
    DemandConfig,
    DemandError,
    generate_demand,
    load_requests_csv,
    save_requests_csv,
)
from tirsim.netgraph import GraphFormatError, load_graph
from tirsim.segments import transit_only_feasible
from tirsim.simcore import (
    Mode,
    SimConfig,
    compute_metrics,
    run_simulation,
    transit_reach,
)
from tirsim.transit import CapacityLedger, ScheduleError, enumerate_legs, load_schedule

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_SCHEDULE_FILES = ("stops.txt", "routes.txt", "trips.txt", "stop_times.txt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract here reserves 2 for
    # data problems, so usage errors are remapped
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Config file handling
# ---------------------------------------------------------------------------

_SIM_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}


def read_config(path: str | None) -> tuple[dict, dict]:
    """(simulation keys, path keys) from an INI file; both may be empty."""
    sim: dict = {}
    paths: dict = {}
    if path is None:
        return sim, paths
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise DemandError(f"config file not found: {path}")
    for section in cp.sections():
        if section not in ("simulation", "paths"):
            raise UsageError(f"unknown config section [{section}]")
    if cp.has_section("simulation"):
        for key, raw in cp.items("simulation"):
            if key not in _SIM_FIELDS:
                raise UsageError(f"unknown simulation option {key!r}")
            sim[key] = _coerce_sim_value(key, raw)
    if cp.has_section("paths"):
        for key, raw in cp.items("paths"):
            if key not in ("graph", "schedule", "demand", "out"):
                raise UsageError(f"unknown path option {key!r}")
            paths[key] = raw
    return sim, paths


def _coerce_sim_value(key: str, raw: str):
    hint = _SIM_FIELDS[key].type
    raw = raw.strip()
    if key == "mode":
        return raw
    if key == "cost_metric":
        return raw
    if "bool" in hint:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key} wants a boolean, got {raw!r}")
    if raw.lower() in ("none", ""):
        return None
    if "int" in hint and "float" not in hint:
        try:
            return int(raw)
        except ValueError as exc:
            raise UsageError(f"{key} wants an integer, got {raw!r}") from exc
    try:
        return float(raw)
    except ValueError as exc:
        raise UsageError(f"{key} wants a number, got {raw!r}") from exc


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag} wants comma-separated numbers: {text!r}") from exc
    if not vals:
        raise UsageError(f"{flag} is empty")
    return vals


def fleet_for_ratio(ratio: float, n_dispatchable: int) -> int:
    """Vehicles for a per-1000-requests ratio, floored at one vehicle."""
    return max(1, round(ratio * n_dispatchable / 1000.0))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _count_dispatchable(requests, schedule, g, cfg: SimConfig) -> int:
    """Requests that cannot be served by walking plus transit alone; fleet
    ratios scale against these, since the rest never need a vehicle."""
    if schedule is None:
        return len(requests)
    ledger = CapacityLedger(schedule)
    n = 0
    for r in requests:
        legs = enumerate_legs(r, schedule, g, now=r.request_time, ledger=ledger)
        if not transit_only_feasible(r, legs, g, cfg.walk_speed, cfg.max_walk_m):
            n += 1
    return n


def _metrics_row(key: dict, report) -> dict:
    row = dict(key)
    row.update(report.to_dict())
    return row


def _write_metrics_csv(rows: list[dict], path: str) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in (row[k] for k in header)])


def _write_events(events: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev, sort_keys=True))
            fh.write("\n")


def _write_timings(timings: list[dict], path: str) -> None:
    import csv

    cols = ["batch", "t", "n_requests", "n_segments", "n_trips", "n_e2",
            "build_s", "solve_s", "total_s"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in timings:
            writer.writerow([row[c] for c in cols])


def cmd_simulate(args) -> int:
    sim_kv, path_kv = read_config(args.config)
    for key in ("graph", "schedule", "demand", "out"):
        flag = getattr(args, key, None)
        if flag is not None:
            path_kv[key] = flag
    overrides = {
        "mode": args.mode,
        "fleet_size": args.fleet_size,
        "vehicle_capacity": args.capacity,
        "seed": args.seed,
        "batch_window_s": args.batch_window,
        "batch_cap": args.batch_cap,
        "dominance_check": args.dominance_check or None,
    }
    for k, v in overrides.items():
        if v is not None:
            sim_kv[k] = v

    if "graph" not in path_kv:
        raise UsageError("a road graph is required (config [paths] graph= or --graph)")
    if "demand" not in path_kv:
        raise UsageError("a demand file is required (config [paths] demand= or --demand)")
    out_dir = path_kv.get("out", "results")

    g = load_graph(path_kv["graph"])
    schedule = None
    if "schedule" in path_kv:
        schedule = load_schedule(path_kv["schedule"], g)

    sim_kv.setdefault("fleet_size", 0)
    try:
        base = SimConfig(**sim_kv)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad simulation config: {exc}") from exc
    requests = load_requests_csv(path_kv["demand"], g,
                                 alpha=base.alpha, beta=base.beta_s)

    modes = [base.mode]
    if args.modes:
        try:
            modes = [Mode(m.strip()) for m in args.modes.split(",") if m.strip()]
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    for m in modes:
        if m is not Mode.RIDESHARE_ONLY and schedule is None:
            raise UsageError(
                f"mode {m.value} needs a schedule directory ([paths] schedule= or --schedule)")

    fleet_ratios = None
    capacities = [base.vehicle_capacity]
    if args.sweep:
        if not args.sweep.startswith("fleet="):
            raise UsageError("--sweep syntax: fleet=R1,R2,... (per 1000 requests)")
        fleet_ratios = _parse_float_list(args.sweep[len("fleet="):], "--sweep")
    if args.capacities:
        capacities = [int(v) for v in _parse_float_list(args.capacities, "--capacities")]

    n_dispatchable = _count_dispatchable(requests, schedule, g, base)

    os.makedirs(out_dir, exist_ok=True)
    points = []
    if fleet_ratios is None:
        for mode in modes:
            for cap in capacities:
                points.append((mode, None, base.fleet_size, cap))
    else:
        for mode in modes:
            for ratio in fleet_ratios:
                for cap in capacities:
                    points.append((mode, ratio,
                                   fleet_for_ratio(ratio, n_dispatchable), cap))
    if any(fs < 1 for _m, _r, fs, _c in points):
        raise UsageError("fleet_size must be >= 1 (set it in the config or use --sweep)")

    rows = []
    walls = []
    t_all = time.perf_counter()
    multi = len(points) > 1
    for mode, ratio, fleet, cap in points:
        cfg = dataclasses.replace(base, mode=mode, fleet_size=fleet,
                                  vehicle_capacity=cap)
        t0 = time.perf_counter()
        res = run_simulation(g, requests, cfg,
                             schedule=None if mode is Mode.RIDESHARE_ONLY else schedule)
        wall = time.perf_counter() - t0
        report = compute_metrics(res.events, res.n_batches)
        key = {
            "mode": mode.value,
            "fleet_ratio_per_1000": "" if ratio is None else ratio,
            "fleet_size": fleet,
            "vehicle_capacity": cap,
        }
        rows.append(_metrics_row(key, report))
        tag = (f"run_{mode.value}_r{ratio:g}_c{cap}" if ratio is not None
               else f"run_{mode.value}_f{fleet}_c{cap}")
        run_dir = os.path.join(out_dir, tag) if multi else out_dir
        os.makedirs(run_dir, exist_ok=True)
        _write_events(res.events, os.path.join(run_dir, "events.jsonl"))
        _write_timings(res.timings, os.path.join(run_dir, "timings.csv"))
        if res.dominance:
            _write_json(res.dominance, os.path.join(run_dir, "dominance.json"))
        walls.append({"run": tag, "wall_s": wall, "n_batches": res.n_batches})

    _write_metrics_csv(rows, os.path.join(out_dir, "metrics.csv"))
    _write_json(rows, os.path.join(out_dir, "metrics.json"))

    inputs = {"graph": {"path": path_kv["graph"], "sha256": _sha256(path_kv["graph"])},
              "demand": {"path": path_kv["demand"], "sha256": _sha256(path_kv["demand"])}}
    if "schedule" in path_kv:
        inputs["schedule"] = {
            name: {"path": os.path.join(path_kv["schedule"], name),
                   "sha256": _sha256(os.path.join(path_kv["schedule"], name))}
            for name in _SCHEDULE_FILES
        }
    manifest = {
        "artifact_version": __version__,
        "command": "simulate",
        "seed": base.seed,
        "config": {k: (v.value if isinstance(v, Mode) else v)
                   for k, v in dataclasses.asdict(base).items()},
        "sweep": None if fleet_ratios is None else {
            "fleet_ratios_per_1000": fleet_ratios,
            "capacities": capacities,
            "modes": [m.value for m in modes],
        },
        "inputs": inputs,
        "n_requests": len(requests),
        "n_dispatchable": n_dispatchable,
        "wall": {"total_s": time.perf_counter() - t_all, "runs": walls},
    }
    _write_json(manifest, os.path.join(out_dir, "manifest.json"))
    print(f"wrote {len(rows)} metric row(s) to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen-demand
# ---------------------------------------------------------------------------

def cmd_gen_demand(args) -> int:
    g = load_graph(args.graph)
    cfg = DemandConfig(
        count=args.count,
        seed=args.seed,
        morning=tuple(_parse_float_list(args.morning, "--morning")),
        evening=tuple(_parse_float_list(args.evening, "--evening")),
        min_trip_distance=args.min_distance,
        alpha=args.alpha,
        beta=args.beta,
    )
    if len(cfg.morning) != 2 or len(cfg.evening) != 2:
        raise UsageError("--morning/--evening want two numbers: start,end")
    requests = generate_demand(cfg, g)
    save_requests_csv(requests, args.out)
    print(f"wrote {len(requests)} requests to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# transit-reach
# ---------------------------------------------------------------------------

def cmd_transit_reach(args) -> int:
    import csv

    g = load_graph(args.graph)
    schedule = load_schedule(args.schedule, g)
    requests = load_requests_csv(args.demand, g)
    distances = _parse_float_list(args.distances, "--distances")
    table = transit_reach(schedule, g, requests, distances)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["distance_m", "fraction"])
        for d, f in table:
            writer.writerow([repr(d), repr(f)])
    print(f"wrote {len(table)} rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate-data
# ---------------------------------------------------------------------------

def cmd_validate_data(args) -> int:
    g = load_graph(args.graph)
    n_edges = sum(len(v) for v in g.adj.values())
    print(f"graph: {len(g.coords)} nodes, {n_edges} directed edges")
    if args.schedule:
        schedule = load_schedule(args.schedule, g)
        n_runs = sum(len(line.runs) for line in schedule.lines.values())
        print(f"schedule: {len(schedule.lines)} lines, {n_runs} runs, "
              f"{len(schedule.stops)} stops")
    if args.demand:
        requests = load_requests_csv(args.demand, g)
        print(f"demand: {len(requests)} requests")
    print("ok")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tirsim",
                description="Batch dispatch simulation for transit-integrated ride-sharing")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="run one scenario or a sweep")
    ps.add_argument("--config", help="INI file with [simulation] and [paths]")
    ps.add_argument("--graph", help="road graph CSV")
    ps.add_argument("--schedule", help="schedule directory")
    ps.add_argument("--demand", help="requests CSV")
    ps.add_argument("--out", help="output directory (default results)")
    ps.add_argument("--mode", choices=[m.value for m in Mode])
    ps.add_argument("--modes", help="comma list of modes to sweep")
    ps.add_argument("--fleet-size", dest="fleet_size", type=int)
    ps.add_argument("--capacity", type=int)
    ps.add_argument("--capacities", help="comma list of vehicle capacities")
    ps.add_argument("--seed", type=int)
    ps.add_argument("--batch-window", dest="batch_window", type=float)
    ps.add_argument("--batch-cap", dest="batch_cap", type=int)
    ps.add_argument("--sweep", help="fleet=R1,R2,... vehicles per 1000 requests")
    ps.add_argument("--dominance-check", dest="dominance_check",
                    action="store_true")
    ps.set_defaults(func=cmd_simulate)

    pg = sub.add_parser("gen-demand", help="draw a random demand file")
    pg.add_argument("--graph", required=True)
    pg.add_argument("--count", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", required=True)
    pg.add_argument("--morning", default="25200,32400")
    pg.add_argument("--evening", default="57600,64800")
    pg.add_argument("--min-distance", dest="min_distance", type=float,
                    default=1000.0)
    pg.add_argument("--alpha", type=float, default=0.2)
    pg.add_argument("--beta", type=float, default=1200.0)
    pg.set_defaults(func=cmd_gen_demand)

    pr = sub.add_parser("transit-reach",
                        help="fraction of demand coverable by walk + transit")
    pr.add_argument("--graph", required=True)
    pr.add_argument("--schedule", required=True)
    pr.add_argument("--demand", required=True)
    pr.add_argument("--distances", required=True,
                    help="comma list of walk limits in meters")
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_transit_reach)

    pv = sub.add_parser("validate-data", help="load and check input files")
    pv.add_argument("--graph", required=True)
    pv.add_argument("--schedule")
    pv.add_argument("--demand")
    pv.set_defaults(func=cmd_validate_data)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphFormatError, ScheduleError, DemandError, FileNotFoundError,
            NotADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
