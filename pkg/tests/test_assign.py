"""Assignment model build, exact solve, extraction and validation."""

import random

import pytest

from tirsim.assign import (
    build_ilp,
    default_penalties,
    export_lp,
    extract_assignment,
    solve_ilp,
    validate_solution,
)
from tirsim.netgraph import RoadGraph
from tirsim.segments import SegmentKind
from tirsim.tirtv import DUMMY_VEHICLE_ID, VehicleState, build_tirtv

from conftest import (
    brute_force_assignment,
    direct_segment,
    make_grid_graph,
    make_leg,
    make_line_graph,
    mile_segment,
)


@pytest.fixture
def road10():
    return make_line_graph(10)


def batch_fixture(g):
    """Two shareable door-to-door riders plus one walk-and-ride rider."""
    leg = make_leg(1, 8, 400.0, 800.0)
    segs = [
        direct_segment(0, 0, 2, 5, 0.0, 100.0, 200.0),
        direct_segment(1, 1, 3, 5, 0.0, 100.0, 200.0),
        mile_segment(2, 2, SegmentKind.FIRST_MILE, leg, 0, 1, 0.0, 320.0, 400.0,
                     empty=True, walk_time_s=100 / 1.4),
        mile_segment(3, 2, SegmentKind.LAST_MILE, leg, 8, 9, 800.0, 1900.0, 2000.0,
                     empty=True, walk_time_s=100 / 1.4),
    ]
    vehicles = [VehicleState(id=0, capacity=4, location=0),
                VehicleState(id=1, capacity=1, location=9),
                VehicleState(id=2, capacity=4, location=9, available_time=50.0)]
    return build_tirtv(segs, vehicles, g), vehicles


class TestBuild:
    def test_variable_order_and_counts(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        assert model.n_vars == 16
        assert model.var_names[:5] == [
            "x_t0_v0", "x_t0_v1", "x_t1_v0", "x_t1_v1", "x_t2_v0",
        ]
        assert model.var_names[5:7] == ["x_t3_v-1", "x_t4_v-1"]
        assert model.var_names[-3:] == ["z_r0", "z_r1", "z_r2"]
        assert model.a_ub.shape == (3, 16)   # one row per real vehicle
        assert model.a_eq.shape == (10, 16)  # 3 serve + 1 leg + 6 link rows

    def test_default_penalties(self, road10):
        tg, _ = batch_fixture(road10)
        pen = default_penalties(tg, road10)
        # ten times (costliest edge + door-to-door metres); the rider with
        # walk-only segments has no direct segment in this batch
        assert pen == {0: 13000.0, 1: 12000.0, 2: 10000.0}

    def test_two_leg_request_gets_two_balance_rows(self, road10):
        leg1 = make_leg(1, 8, 400.0, 800.0, run="L_r0")
        leg2 = make_leg(1, 8, 700.0, 1100.0, run="L_r1")
        segs = [
            mile_segment(0, 0, SegmentKind.FIRST_MILE, leg1, 0, 1, 0.0, 390.0, 400.0),
            mile_segment(1, 0, SegmentKind.LAST_MILE, leg1, 8, 9, 800.0, 1900.0, 2000.0),
            mile_segment(2, 0, SegmentKind.FIRST_MILE, leg2, 0, 1, 0.0, 690.0, 700.0),
            mile_segment(3, 0, SegmentKind.LAST_MILE, leg2, 8, 9, 1100.0, 1900.0, 2000.0),
            direct_segment(4, 0, 0, 9, 0.0, 1000.0, 2000.0),
        ]
        tg = build_tirtv(segs, [VehicleState(id=0, capacity=4, location=0)], road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        assert len(model.leg_rows) == 2
        assert [row[1].run_id for row in model.leg_rows] == ["L_r0", "L_r1"]
        for _r, _leg, fms, lms in model.leg_rows:
            assert fms and lms

    def test_missing_penalty_raises(self, road10):
        tg, _ = batch_fixture(road10)
        with pytest.raises(ValueError):
            build_ilp(tg, {0: 1.0})

    def test_prune_unservable_drops_hopeless_trips(self, road10):
        segs = [
            direct_segment(0, 0, 2, 5, 0.0, 100.0, 200.0),
            # closes before it opens: no vehicle can ever serve it
            direct_segment(1, 1, 3, 5, earliest=100.0, latest=50.0, deadline=200.0),
        ]
        vehicles = [VehicleState(id=0, capacity=4, location=0)]
        tg = build_tirtv(segs, vehicles, road10)
        pen = default_penalties(tg, road10)
        pruned = build_ilp(tg, pen, prune_unservable=True)
        full = build_ilp(tg, pen, prune_unservable=False)
        assert pruned.pruned_trips and not full.pruned_trips
        assert pruned.n_vars < full.n_vars
        a = solve_ilp(pruned)
        b = solve_ilp(full)
        assert a.objective == b.objective
        assert a.z(pruned)[1] == 1  # the hopeless rider is rejected


class TestSolve:
    def test_shared_ride_plus_walk_only_rider(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model)
        assert sol.status == "optimal"
        assert sol.objective == 500.0
        assert {k for k, v in sol.x(model).items() if v} == {
            (2, 0), (3, DUMMY_VEHICLE_ID), (4, DUMMY_VEHICLE_ID),
        }
        assert sol.z(model) == {0: 0, 1: 0, 2: 0}
        oracle = brute_force_assignment(tg, model.penalties)
        assert sol.objective == oracle["objective"]
        assert oracle["max_served"] == 3

    def test_branching_on_odd_cycle(self):
        # hexagon with a far depot: three pairwise-shareable riders, pair
        # trips cheap enough that the relaxation splits them in half
        coords = {i: (100.0 * i, 0.0) for i in range(6)}
        coords[6] = (300.0, 500.0)
        edges = []
        for i in range(6):
            j = (i + 1) % 6
            edges += [(i, j, 10.0, 100.0), (j, i, 10.0, 100.0)]
        for i in range(6):
            edges += [(6, i, 100.0, 1000.0), (i, 6, 100.0, 1000.0)]
        g = RoadGraph(coords, edges)
        segs = [direct_segment(0, 0, 0, 1, 0.0, 5000.0, 10000.0),
                direct_segment(1, 1, 2, 3, 0.0, 5000.0, 10000.0),
                direct_segment(2, 2, 4, 5, 0.0, 5000.0, 10000.0)]
        vehicles = [VehicleState(id=i, capacity=2, location=6) for i in range(3)]
        tg = build_tirtv(segs, vehicles, g, max_trip_size=2)
        pen = {0: 50000.0, 1: 50000.0, 2: 50000.0}
        model = build_ilp(tg, pen)
        sol = solve_ilp(model)
        assert sol.nodes > 1  # the relaxation alone must not settle this
        assert sol.objective == 2400.0
        assert sol.z(model) == {0: 0, 1: 0, 2: 0}
        assert brute_force_assignment(tg, pen)["objective"] == 2400.0
        assert validate_solution(tg, model, sol, g) == []

    def test_matches_oracle_on_random_instances(self):
        g = make_grid_graph(3, 3, spacing=100.0, speed=10.0)
        nodes = sorted(g.coords)
        rng = random.Random(1717)
        checked = 0
        for _case in range(25):
            segs = []
            for sid in range(rng.choice([2, 3, 4])):
                o, d = rng.sample(nodes, 2)
                e0 = float(rng.randint(0, 50))
                segs.append(direct_segment(sid, sid, o, d, e0,
                                           latest=e0 + rng.randint(30, 150),
                                           deadline=e0 + rng.randint(100, 400)))
            vehicles = [VehicleState(id=i, capacity=rng.choice([1, 2, 4]),
                                     location=rng.choice(nodes),
                                     available_time=float(rng.randint(0, 30)))
                        for i in range(rng.choice([1, 2]))]
            tg = build_tirtv(segs, vehicles, g)
            if len(tg.e2) > 14:
                continue
            pen = default_penalties(tg, g)
            model = build_ilp(tg, pen)
            sol = solve_ilp(model)
            oracle = brute_force_assignment(tg, pen)
            assert sol.objective == pytest.approx(oracle["objective"], abs=1e-6)
            served = sum(1 for v in sol.z(model).values() if not v)
            assert served == oracle["max_served"]
            assert validate_solution(tg, model, sol, g) == []
            checked += 1
        assert checked >= 15

    def test_timeout_returns_all_reject_fallback(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model, time_limit_s=0.0)
        assert sol.status == "timeout_fallback"
        assert sol.z(model) == {0: 1, 1: 1, 2: 1}
        assert sol.objective == sum(model.penalties.values())
        # the fallback is itself a valid (if poor) answer
        assert validate_solution(tg, model, sol, road10) == []

    def test_empty_batch(self, road10):
        tg = build_tirtv([], [], road10)
        model = build_ilp(tg, {})
        sol = solve_ilp(model)
        assert sol.status == "optimal"
        assert sol.objective == 0.0
        asn = extract_assignment(tg, model, sol)
        assert asn.outcomes == {} and asn.dispatch == {}


class TestExtraction:
    def test_outcomes_and_dispatch(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        asn = extract_assignment(tg, model, solve_ilp(model))
        assert asn.outcomes[0].mode == "direct"
        assert asn.outcomes[0].vehicle_ids == (0,)
        assert asn.outcomes[1].mode == "direct"
        assert asn.outcomes[2].mode == "multimodal"
        assert asn.outcomes[2].vehicle_ids == (DUMMY_VEHICLE_ID, DUMMY_VEHICLE_ID)
        assert asn.dispatch == {0: 2}
        assert asn.deployed[(2, 0)] is not None
        assert asn.deployed[(3, DUMMY_VEHICLE_ID)] is None

    def test_same_vehicle_both_miles_flag(self, road10):
        leg = make_leg(1, 8, 400.0, 800.0)
        segs = [
            mile_segment(0, 0, SegmentKind.FIRST_MILE, leg, 0, 1, 0.0, 390.0, 400.0),
            mile_segment(1, 0, SegmentKind.LAST_MILE, leg, 8, 9, 800.0, 1900.0, 2000.0),
        ]
        tg = build_tirtv(segs, [VehicleState(id=0, capacity=4, location=0)], road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model)
        asn = extract_assignment(tg, model, sol)
        out = asn.outcomes[0]
        # one vehicle cannot run two trips, so it must take the paired one
        assert out.served and out.mode == "multimodal"
        assert out.same_vehicle_both_miles
        assert validate_solution(tg, model, sol, road10) == []


class TestValidation:
    def test_clean_solution_passes(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model)
        assert validate_solution(tg, model, sol, road10) == []

    def test_double_dispatch_caught(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model)
        sol.values[model.x_index[(0, 0)]] = 1.0  # vehicle 0 already runs trip 2
        errors = validate_solution(tg, model, sol, road10)
        assert any("runs 2 trips" in e for e in errors)

    def test_unbalanced_leg_caught(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model)
        sol.values[model.x_index[(3, DUMMY_VEHICLE_ID)]] = 0.0
        sol.values[model.y_index[(2, 3)]] = 0.0
        errors = validate_solution(tg, model, sol, road10)
        assert any("unbalanced" in e for e in errors)

    def test_corrupted_certificate_caught(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model)
        route = tg.e2[(2, 0)].route
        route.stops[0].time += 5.0
        errors = validate_solution(tg, model, sol, road10)
        assert any("drifts" in e for e in errors)

    def test_non_binary_caught(self, road10):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        sol = solve_ilp(model)
        sol.values[0] = 0.5
        errors = validate_solution(tg, model, sol, road10)
        assert any("not binary" in e for e in errors)


class TestExport:
    def test_lp_file_round_trip(self, road10, tmp_path):
        tg, _ = batch_fixture(road10)
        model = build_ilp(tg, default_penalties(tg, road10))
        p1 = tmp_path / "a.lp"
        p2 = tmp_path / "b.lp"
        export_lp(model, str(p1))
        export_lp(model, str(p2))
        text = p1.read_text()
        assert text == p2.read_text()
        assert "Minimize" in text and "Subject To" in text and "Binary" in text
        assert "x_t2_v0" in text and "z_r2" in text
        assert text.count("veh") >= 3
