import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import attach_costs, chain_network, chain_seed, random_costs, random_instance, tiny_instance
from oracles import emt_optimum
from ecotable.fit import AffineEnergyModel
from ecotable.graph import build_graph
from ecotable.lp import check_integrality
from ecotable.network import (
    TRIP_KINDS, ConstraintKind, arr, check_timetable, dep, enumerate_constraints, window,
)
from ecotable.step_one import (
    InfeasibleError, build_step_one_lp, count_constraints, emt_objective, solve_emt, trip_objective,
)


def costed(net, seed, rng=None, costs=None):
    recs = enumerate_constraints(net, seed)
    g = build_graph(net, recs)
    costs = costs if costs is not None else random_costs(rng, recs)
    return attach_costs(g, costs), recs, costs


def oracle_optimum(net, recs, costs):
    return emt_optimum(net.events(), recs, net.horizon_m, costs)


def test_objective_bookkeeping():
    net = chain_network(2, 1)
    recs = enumerate_constraints(net, chain_seed(net))
    g = build_graph(net, recs)
    (k,) = g.trip_arcs()
    g = g.with_models({k: AffineEnergyModel(-0.2, 50.0, 1.0, 3)})
    obj = trip_objective(g)
    a = g.arcs[k]
    assert obj[a.head] == -0.2 and obj[a.tail] == 0.2
    assert np.count_nonzero(obj) == 2


def test_missing_model():
    net = chain_network(2, 1)
    g = build_graph(net, enumerate_constraints(net, chain_seed(net)))
    with pytest.raises(ValueError, match="no energy model"):
        trip_objective(g)


def test_no_trip_arcs_gives_zero_objective():
    net = chain_network(2, 1)
    recs = [r for r in enumerate_constraints(net, chain_seed(net)) if r.kind is ConstraintKind.DWELL]
    g = build_graph(net, recs)
    assert not trip_objective(g).any()
    tt, lp, sol = solve_emt(g, recs)
    assert sol.objective_value == 0.0
    assert check_timetable(tt, recs, net.horizon_m) == []


def test_single_trip_runs_slowest():
    net = chain_network(2, 1)
    g, recs, _ = costed(net, chain_seed(net), costs={1: -1.0})
    tt, _, _ = solve_emt(g, recs)
    assert tt[arr("T0", "P1")] - tt[dep("T0", "P0")] == 90


def test_binding_total_travel():
    # both trips want to be slow, the total-travel cap forces both to their lower bounds
    net = chain_network(3, 1, total=(100, 60 + 60 + 20))
    seed = chain_seed(net, trip=60, dwell=20)
    recs = enumerate_constraints(net, seed)
    g, recs, _ = costed(net, seed, costs={r.id: -1.0 for r in recs if r.kind in TRIP_KINDS})
    tt, _, _ = solve_emt(g, recs)
    assert tt[arr("T0", "P1")] - tt[dep("T0", "P0")] == 60
    assert tt[arr("T0", "P2")] - tt[dep("T0", "P1")] == 60


def test_infeasible_certificate():
    net = chain_network(3, 1)
    seed = chain_seed(net)
    recs = enumerate_constraints(net, seed)
    recs = [dataclasses.replace(r, window=window(0, 100)) if r.kind is ConstraintKind.TOTAL_TRAVEL else r
            for r in recs]
    g = attach_costs(build_graph(net, recs), {r.id: -1.0 for r in recs if r.kind in TRIP_KINDS})
    with pytest.raises(InfeasibleError):
        solve_emt(g, recs)


def test_constraint_count_convention():
    net = chain_network(3, 2)
    seed = chain_seed(net)
    rng = np.random.default_rng(0)
    g, recs, _ = costed(net, seed, rng)
    lp = build_step_one_lp(g)
    eq = sum(a.lower == a.upper for a in g.arcs)
    assert count_constraints(lp) == len(g.arcs) + eq + g.n_nodes
    assert lp.n_vars == g.n_nodes == 12


def test_three_train_lattice_oracle():
    rng = np.random.default_rng(7)
    for _ in range(5):
        net, seed = tiny_instance(rng, n_trains=3, n_platforms=2, horizon=30)
        g, recs, costs = costed(net, seed, rng)
        tt, _, sol = solve_emt(g, recs)
        assert sol.objective_value == pytest.approx(oracle_optimum(net, recs, costs), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(2, 5))
def test_emt_properties(s, n_trains, n_plat):
    rng = np.random.default_rng(s)
    net, seed = random_instance(rng, n_trains, n_plat)
    g, recs, costs = costed(net, seed, rng)
    tt, lp, sol = solve_emt(g, recs)
    ok, dev = check_integrality(sol)
    assert ok and dev <= 1e-7
    assert tt.is_integral
    assert check_timetable(tt, recs, net.horizon_m, net.events()) == []
    assert emt_objective(g, tt) <= emt_objective(g, seed) + 1e-9
    # the intercepts never move the minimizer
    g_b = g.with_models({k: dataclasses.replace(g.arcs[k].energy_model, b=float(rng.normal(0, 1e4)))
                         for k in g.trip_arcs()})
    tt_b, _, _ = solve_emt(g_b, recs)
    assert tt_b.times == tt.times
