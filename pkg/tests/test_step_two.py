import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import attach_costs, opposite_instance, random_costs
from oracles import sync_optimum
from ecotable.graph import build_graph
from ecotable.network import (
    TRIP_KINDS, Network, Platform, Timetable, Track, Train, arr, check_timetable, dep, enumerate_constraints,
    window,
)
from ecotable.pairing import AlignmentOffsets, Direction, SyncPair
from ecotable.step_one import solve_emt
from ecotable.step_two import build_step_two_lp, misalignment_report, round_timetable, solve_final

PAIRS = [SyncPair("X1", "X2", "A", "B", Direction.RIGHT), SyncPair("Y1", "Y2", "A", "B", Direction.LEFT)]


def setup(rng, offsets=None):
    net, seed = opposite_instance(rng)
    recs = enumerate_constraints(net, seed)
    g = attach_costs(build_graph(net, recs), random_costs(rng, recs))
    emt, _, _ = solve_emt(g, recs)
    if offsets is None:
        offsets = {k: AlignmentOffsets(float(rng.integers(0, 6)), float(rng.integers(0, 6)))
                   for k in [("A", "X1"), ("B", "X2"), ("A", "Y1"), ("B", "Y2")]}
    return net, recs, g, emt, offsets


def oracle_l1(net, recs, emt, pairs, offsets):
    terms = []
    for p in pairs:
        (at, ap), (bt, bp) = p.accelerating, p.braking
        const = offsets[(at, ap)].consume_offset + offsets[(bt, bp)].regen_offset
        terms.append((dep(at, ap), arr(bt, bp), const))
    return sync_optimum(net.events(), recs, net.horizon_m, emt, terms, lambda r: r.kind in TRIP_KINDS)


def test_lattice_oracle():
    rng = np.random.default_rng(99)
    for _ in range(15):
        net, recs, g, emt, off = setup(rng)
        lp2 = build_step_two_lp(g, emt, PAIRS, off)
        res = solve_final(lp2, g, recs)
        assert res.report.total_l1 == pytest.approx(oracle_l1(net, recs, emt, PAIRS, off), abs=1e-7)
        assert res.solution.objective_value == pytest.approx(res.report.total_l1, abs=1e-6)


def test_no_pairs():
    rng = np.random.default_rng(1)
    net, recs, g, emt, off = setup(rng)
    lp2 = build_step_two_lp(g, emt, [], off)
    res = solve_final(lp2, g, recs)
    assert res.solution.objective_value == 0.0
    assert res.report.total_l1 == 0.0
    assert check_timetable(res.exact, recs, net.horizon_m) == []


def test_reachable_alignment_gives_zero():
    rng = np.random.default_rng(4)
    for _ in range(20):
        net, recs, g, emt, off = setup(rng)
        lp2 = build_step_two_lp(g, emt, PAIRS[:1], off)
        if oracle_l1(net, recs, emt, PAIRS[:1], off) == 0:
            res = solve_final(lp2, g, recs)
            assert res.report.total_l1 == pytest.approx(0.0, abs=1e-9)
            assert res.report.aligned_count == 1
            return
    pytest.fail("no alignable instance drawn")


def test_ten_second_gap_is_closed():
    # A departs X1 at 2, B arrives X2 at 12, no offsets; A may dwell up to 12 s at X1
    plats = {"X1": Platform("X1", "X", "1"), "Y1": Platform("Y1", "Y", "1"),
             "Y2": Platform("Y2", "Y", "2"), "X2": Platform("X2", "X", "2")}
    tracks = {"X1-Y1": Track("X1-Y1", "X1", "Y1"), "Y2-X2": Track("Y2-X2", "Y2", "X2")}
    trains = [Train("A", ("X1", "Y1"), ("X1-Y1",)), Train("B", ("Y2", "X2"), ("Y2-X2",))]
    net = Network(plats, tracks, trains, 30, trip_windows={"X1-Y1": window(10, 10), "Y2-X2": window(10, 10)},
                  default_dwell=window(2, 4), train_dwell_windows={("A", "X1"): window(2, 12)},
                  total_travel_windows={"A": window(10, 10), "B": window(10, 10)},
                  opposite_pairs=[("X1", "X2")])
    seed = Timetable({arr("A", "X1"): 0, dep("A", "X1"): 2, arr("A", "Y1"): 12, dep("A", "Y1"): 14,
                      arr("B", "Y2"): 0, dep("B", "Y2"): 2, arr("B", "X2"): 12, dep("B", "X2"): 14})
    recs = enumerate_constraints(net, seed)
    g = attach_costs(build_graph(net, recs), {r.id: -1.0 for r in recs if r.kind in TRIP_KINDS})
    pair = [SyncPair("X1", "X2", "A", "B", Direction.RIGHT)]
    off = {k: AlignmentOffsets(0.0, 0.0) for k in [("A", "X1"), ("B", "X2")]}
    lp2 = build_step_two_lp(g, seed, pair, off)
    assert misalignment_report(lp2, g, seed).total_l1 == 10.0
    res = solve_final(lp2, g, recs)
    assert res.report.total_l1 == 0.0
    assert oracle_l1(net, recs, seed, pair, off) == 0.0


def test_unknown_event():
    rng = np.random.default_rng(2)
    net, recs, g, emt, off = setup(rng)
    with pytest.raises(KeyError):
        build_step_two_lp(g, emt, [SyncPair("X1", "X2", "A", "Z", Direction.RIGHT)], off)


def test_rounding_is_half_up_after_snapping():
    x = np.array([1.4999999999, 2.5, 3.0000004, -0.0000001, 7.5000000001])
    assert list(round_timetable(x)) == [2.0, 3.0, 3.0, 0.0, 8.0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_final_properties(s):
    rng = np.random.default_rng(s)
    net, recs, g, emt, off = setup(rng)
    # non-integer offsets exercise the fractional path
    off = {k: AlignmentOffsets(v.regen_offset + rng.random(), v.consume_offset + rng.random())
           for k, v in off.items()}
    lp2 = build_step_two_lp(g, emt, PAIRS, off)
    assert lp2.n_theta == len(PAIRS)
    res = solve_final(lp2, g, recs)
    rep = res.report
    assert rep.max_theta_gap <= 1e-6
    assert rep.total_l1 <= misalignment_report(lp2, g, emt).total_l1 + 1e-9
    assert rep.aligned_count <= len(PAIRS)
    assert check_timetable(res.exact, recs, net.horizon_m, tol=1e-6) == []
    for k in g.trip_arcs():
        a = g.arcs[k]
        e0, e1 = g.nodes[a.tail].event, g.nodes[a.head].event
        assert res.exact[e1] - res.exact[e0] == pytest.approx(emt[e1] - emt[e0], abs=1e-9)
        if res.rounded is not None:
            assert res.rounded[e1] - res.rounded[e0] == emt[e1] - emt[e0]
    if res.rounded is not None:
        assert check_timetable(res.rounded, recs, net.horizon_m) == []
