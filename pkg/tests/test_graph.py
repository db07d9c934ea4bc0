import io as stdio

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import chain_network, chain_seed, figure_example, figure_seed, random_instance
from ecotable.graph import CGArc, GraphInfeasibleError, build_graph, incidence_row, write_edge_list
from ecotable.network import ConstraintKind, ConstraintRecord, arr, dep, enumerate_constraints, window
from ecotable.step_one import difference_matrix


def graph_of(net, seed):
    recs = enumerate_constraints(net, seed)
    return build_graph(net, recs), recs


def test_minimal_chain():
    net = chain_network(2, 1)
    g, recs = graph_of(net, chain_seed(net))
    assert [n.event for n in g.nodes] == [arr("T0", "P0"), dep("T0", "P0"), arr("T0", "P1"), dep("T0", "P1")]
    # trip and total travel join the same ordered node pair and merge into one arc
    assert len(g.arcs) == 3
    merged = [a for a in g.arcs if len(a.records) == 2]
    assert len(merged) == 1 and merged[0].is_trip
    kinds = {recs[r].kind for r in merged[0].records}
    assert kinds == {ConstraintKind.TRIP, ConstraintKind.TOTAL_TRAVEL}
    assert (merged[0].lower, merged[0].upper) == (60, 90)


def test_window_intersection():
    net = chain_network(2, 1)
    a, b = arr("T0", "P0"), dep("T0", "P0")
    recs = [ConstraintRecord(ConstraintKind.DWELL, a, b, window(30, 60), 0),
            ConstraintRecord(ConstraintKind.CONNECTION, a, b, window(40, 90), 1)]
    g = build_graph(net, recs)
    assert len(g.arcs) == 1
    assert (g.arcs[0].lower, g.arcs[0].upper, g.arcs[0].records) == (40, 60, (0, 1))


def test_empty_intersection_names_both_records():
    net = chain_network(2, 1)
    a, b = arr("T0", "P0"), dep("T0", "P0")
    recs = [ConstraintRecord(ConstraintKind.DWELL, a, b, window(30, 60), 0),
            ConstraintRecord(ConstraintKind.CONNECTION, a, b, window(70, 90), 1)]
    with pytest.raises(GraphInfeasibleError) as exc:
        build_graph(net, recs)
    assert "#0" in str(exc.value) and "#1" in str(exc.value)


def test_incidence_row():
    assert incidence_row(CGArc(3, 7, 0, 1)) == {7: 1, 3: -1}
    with pytest.raises(ValueError):
        incidence_row(CGArc(2, 2, 0, 1))


def test_two_line_example_topology():
    net = figure_example()
    g, recs = graph_of(net, figure_seed(net))
    assert g.n_nodes == 18
    assert len(g.arcs) == 20
    ev = [(g.nodes[a.tail].event, g.nodes[a.head].event) for a in g.arcs]
    cross = [(e, l) for e, l in ev if e.train != l.train]
    assert sorted((e.platform, l.platform) for e, l in cross) == [("2a", "2b"), ("3a", "3b")]
    assert all(e.kind.value == "arr" and l.kind.value == "dep" for e, l in cross)
    # per-train chains: dwell and trip arcs link consecutive events
    for t in net.trains:
        chain = [x for p in t.path_platforms for x in (arr(t.id, p), dep(t.id, p))]
        idx = [g.node_of(x) for x in chain]
        keys = {a.key for a in g.arcs}
        assert all((u, v) in keys for u, v in zip(idx, idx[1:]))
    assert sum(a.is_trip for a in g.arcs) == 7


def test_deterministic_and_round_trip():
    net = figure_example()
    seed = figure_seed(net)
    g1, recs = graph_of(net, seed)
    g2, _ = graph_of(net, seed)
    assert g1.nodes == g2.nodes and g1.arcs == g2.arcs
    out1, out2 = stdio.StringIO(), stdio.StringIO()
    write_edge_list(g1, out1)
    write_edge_list(g2, out2)
    assert out1.getvalue() == out2.getvalue()
    owner = g1.arc_of_record()
    assert sorted(owner) == [r.id for r in recs]
    for r in recs:
        a = g1.arcs[owner[r.id]]
        assert (g1.nodes[a.tail].event, g1.nodes[a.head].event) == (r.earlier, r.later)
        assert r.window.lower <= a.lower <= a.upper <= r.window.upper


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(2, 5))
def test_graph_invariants(s, n_trains, n_plat):
    net, seed = random_instance(np.random.default_rng(s), n_trains, n_plat)
    g, recs = graph_of(net, seed)
    assert sorted(n.index for n in g.nodes) == list(range(g.n_nodes))
    keys = [a.key for a in g.arcs]
    assert len(set(keys)) == len(keys)
    for a in g.arcs:
        row = incidence_row(a)
        assert sorted(row.values()) == [-1, 1]
        assert a.lower <= a.upper
    x = np.array([seed[n.event] for n in g.nodes])
    tail, head, lo, hi, _ = g.arrays()
    d = x[head] - x[tail]
    assert np.all((lo <= d) & (d <= hi))
    # the constraint matrix sees only differences: a uniform shift is in its kernel
    D = difference_matrix(g)
    assert np.array_equal(D @ x, d)
    assert not np.any(D @ np.ones(g.n_nodes))
