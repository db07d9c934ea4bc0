"""Small hand-made networks for tests."""
from __future__ import annotations

from ecotable.network import (
    ConnectionPair, Crossover, HeadwayPair, Network, Platform, Provenance, Timetable, Track, Train,
    TurnaroundPair, arr, dep, window,
)


def line(platform_ids, line_id="1"):
    return {p: Platform(p, p.rstrip("ab"), line_id) for p in platform_ids}


def chain_network(n_platforms=2, n_trains=1, headway=100, trip=(60, 90), dwell=(20, 40),
                  total=None, horizon=2000, headway_window=(80, 120)):
    """``n_trains`` trains running the same chain P0 -> P1 -> ..., one after another."""
    pids = [f"P{k}" for k in range(n_platforms)]
    plats = line(pids)
    tracks = {f"{a}-{b}": Track(f"{a}-{b}", a, b) for a, b in zip(pids, pids[1:])}
    trains = [Train(f"T{k}", tuple(pids), tuple(tracks)) for k in range(n_trains)]
    hw = window(*headway_window)
    heads = {tid: [HeadwayPair(f"T{k}", f"T{k + 1}", hw, hw) for k in range(n_trains - 1)] for tid in tracks}
    lo = trip[0] * (n_platforms - 1) + dwell[0] * (n_platforms - 2)
    hi = trip[1] * (n_platforms - 1) + dwell[1] * (n_platforms - 2)
    total = total or (lo, hi)
    net = Network(
        platforms=plats, tracks=tracks, trains=trains, horizon_m=horizon,
        headway_pairs={k: v for k, v in heads.items() if v},
        trip_windows={tid: window(*trip) for tid in tracks}, default_dwell=window(*dwell),
        total_travel_windows={t.id: window(*total) for t in trains},
    )
    return net


def chain_seed(net: Network, start=10, headway=100, trip=None, dwell=None) -> Timetable:
    times = {}
    for k, t in enumerate(net.trains):
        clock = start + k * headway
        for q, p in enumerate(t.path_platforms):
            w = net.dwell_window(t.id, p)
            times[arr(t.id, p)] = clock
            clock += dwell if dwell is not None else (w.lower + w.upper) // 2
            times[dep(t.id, p)] = clock
            if q + 1 < len(t.path_platforms):
                tw = net.trip_window(t.id, t.path_tracks[q])
                clock += trip if trip is not None else (tw.lower + tw.upper) // 2
    return Timetable(times, Provenance.SEED)


def figure_example():
    """Two trains on two lines meeting at interchange stations 2 and 3.

    Train 1 runs 1-2-3-4, train 2 runs 5-2-6-3-7; the interchange stations
    have one platform per line ("a" for train 1, "b" for train 2).
    """
    p1 = ["1", "2a", "3a", "4"]
    p2 = ["5", "2b", "6", "3b", "7"]
    plats = {**{p: Platform(p, p.rstrip("ab"), "A") for p in p1}, **{p: Platform(p, p.rstrip("ab"), "B") for p in p2}}
    tracks = {}
    for path in (p1, p2):
        for a, b in zip(path, path[1:]):
            tracks[f"{a}-{b}"] = Track(f"{a}-{b}", a, b)
    t1 = Train("1", tuple(p1), tuple(f"{a}-{b}" for a, b in zip(p1, p1[1:])))
    t2 = Train("2", tuple(p2), tuple(f"{a}-{b}" for a, b in zip(p2, p2[1:])))
    inter = {("2a", "2b"): [ConnectionPair("1", "2", window(0, 300))],
             ("3a", "3b"): [ConnectionPair("1", "2", window(0, 300))]}
    net = Network(
        platforms=plats, tracks=tracks, trains=[t1, t2], horizon_m=3000,
        interchange_pairs=inter, trip_windows={k: window(60, 90) for k in tracks},
        default_dwell=window(20, 40),
        total_travel_windows={"1": window(200, 400), "2": window(250, 600)},
    )
    return net


def figure_seed(net):
    times = {}
    clock = {"1": 100, "2": 200}
    for t in net.trains:
        c = clock[t.id]
        for q, p in enumerate(t.path_platforms):
            times[arr(t.id, p)] = c
            c += 30
            times[dep(t.id, p)] = c
            c += 75
    return Timetable(times)


def turnaround_network():
    """Train A runs X1 -> Y1, turns round over the crossover Y1 -> Y2 and runs on as B: Y2 -> X2."""
    plats = {"X1": Platform("X1", "X", "1"), "Y1": Platform("Y1", "Y", "1"),
             "Y2": Platform("Y2", "Y", "2"), "X2": Platform("X2", "X", "2")}
    tracks = {"X1-Y1": Track("X1-Y1", "X1", "Y1"), "Y2-X2": Track("Y2-X2", "Y2", "X2")}
    trains = [Train("A", ("X1", "Y1"), ("X1-Y1",)), Train("B", ("Y2", "X2"), ("Y2-X2",))]
    xo = Crossover("Y1", "Y2", "Y1-Y2")
    return Network(
        platforms=plats, tracks=tracks, trains=trains, horizon_m=2000,
        crossovers={xo.key: xo}, turnaround_pairs={xo.key: [TurnaroundPair("A", "B", window(50, 70))]},
        opposite_pairs=[("X1", "X2")], trip_windows={k: window(60, 90) for k in tracks},
        default_dwell=window(20, 40), total_travel_windows={"A": window(60, 90), "B": window(60, 90)},
    )


def random_instance(rng, n_trains, n_platforms, slack=5, horizon_pad=50,
                    start=(5, 40), dwell=(1, 30), trip=(30, 90)):
    """Random chain instance whose windows are built around a random integral seed.

    Every window contains the seed difference, so the seed is feasible; window
    widths are at most ``2 * slack``.  Ranges are half-open like ``rng.integers``.
    """
    pids = [f"P{k}" for k in range(n_platforms)]
    plats = line(pids)
    tracks = {f"{a}-{b}": Track(f"{a}-{b}", a, b) for a, b in zip(pids, pids[1:])}
    tids = list(tracks)
    trains = [Train(f"T{k}", tuple(pids), tuple(tids)) for k in range(n_trains)]
    times = {}
    clock0 = 0
    for t in trains:
        clock0 += int(rng.integers(*start))
        c = clock0
        for q, p in enumerate(pids):
            times[arr(t.id, p)] = c
            c += int(rng.integers(*dwell))
            times[dep(t.id, p)] = c
            if q + 1 < n_platforms:
                c += int(rng.integers(*trip))

    def around(d):
        lo = int(rng.integers(0, slack + 1))
        return window(max(0, d - lo), d + int(rng.integers(0, slack + 1)))

    trip_w, dwell_w, total_w = {}, {}, {}
    for t in trains:
        for q, p in enumerate(pids):
            dwell_w[(t.id, p)] = around(times[dep(t.id, p)] - times[arr(t.id, p)])
            if q + 1 < n_platforms:
                trip_w[(t.id, tids[q])] = around(times[arr(t.id, pids[q + 1])] - times[dep(t.id, p)])
        total_w[t.id] = around(times[arr(t.id, pids[-1])] - times[dep(t.id, pids[0])])
    heads = {}
    for tid, tr in tracks.items():
        out = []
        for a, b in zip(trains, trains[1:]):
            dd = times[dep(b.id, tr.from_platform)] - times[dep(a.id, tr.from_platform)]
            da = times[arr(b.id, tr.to_platform)] - times[arr(a.id, tr.to_platform)]
            if dd >= 0 and da >= 0:
                out.append(HeadwayPair(a.id, b.id, around(dd), around(da)))
        if out:
            heads[tid] = out
    horizon = max(times.values()) + horizon_pad
    net = Network(platforms=plats, tracks=tracks, trains=trains, horizon_m=horizon,
                  headway_pairs=heads, train_trip_windows=trip_w, train_dwell_windows=dwell_w,
                  total_travel_windows=total_w)
    return net, Timetable(times, Provenance.SEED)


def tiny_instance(rng, n_trains=2, n_platforms=2, horizon=30):
    """Random instance small enough for exhaustive lattice enumeration (windows of width <= 4)."""
    while True:
        net, seed = random_instance(rng, n_trains, n_platforms, slack=2, horizon_pad=0,
                                    start=(0, 4), dwell=(0, 4), trip=(2, 7))
        if net.horizon_m <= horizon:
            net.horizon_m = int(rng.integers(net.horizon_m, horizon + 1))
            return net, seed


def random_costs(rng, records, low=-5, high=5):
    """Integer energy slope per trip record id."""
    from ecotable.network import TRIP_KINDS

    return {r.id: float(rng.integers(low, high + 1)) for r in records if r.kind in TRIP_KINDS}


def attach_costs(graph, costs):
    from ecotable.fit import AffineEnergyModel

    models = {}
    for k in graph.trip_arcs():
        (rid,) = [r for r in graph.arcs[k].records if r in costs]
        models[k] = AffineEnergyModel(costs[rid], 0.0, 1.0, 2)
    return graph.with_models(models)


def opposite_instance(rng, horizon=30):
    """Train A runs X1 -> Y1 while train B runs Y2 -> X2; X and Y each have one platform per direction.

    Windows are random (width <= 4) around a random seed; 8 events in total.
    """
    plats = {"X1": Platform("X1", "X", "1"), "Y1": Platform("Y1", "Y", "1"),
             "Y2": Platform("Y2", "Y", "2"), "X2": Platform("X2", "X", "2")}
    tracks = {"X1-Y1": Track("X1-Y1", "X1", "Y1"), "Y2-X2": Track("Y2-X2", "Y2", "X2")}
    trains = [Train("A", ("X1", "Y1"), ("X1-Y1",)), Train("B", ("Y2", "X2"), ("Y2-X2",))]
    while True:
        times = {}
        for t in trains:
            c = int(rng.integers(0, 6))
            for q, p in enumerate(t.path_platforms):
                times[arr(t.id, p)] = c
                c += int(rng.integers(0, 5))
                times[dep(t.id, p)] = c
                if q == 0:
                    c += int(rng.integers(2, 9))
        if max(times.values()) <= horizon:
            break

    def around(d):
        return window(max(0, d - int(rng.integers(0, 3))), d + int(rng.integers(0, 3)))

    trip_w, dwell_w, total_w = {}, {}, {}
    for t in trains:
        a, b = t.path_platforms
        for p in (a, b):
            dwell_w[(t.id, p)] = around(times[dep(t.id, p)] - times[arr(t.id, p)])
        trip_w[(t.id, t.path_tracks[0])] = around(times[arr(t.id, b)] - times[dep(t.id, a)])
        total_w[t.id] = window(0, horizon)
    conn = {("Y1", "Y2"): [ConnectionPair("A", "B", around(abs(times[dep("B", "Y2")] - times[arr("A", "Y1")])))]}
    if times[dep("B", "Y2")] < times[arr("A", "Y1")]:
        conn = {}
    net = Network(platforms=plats, tracks=tracks, trains=trains, horizon_m=horizon,
                  interchange_pairs=conn, opposite_pairs=[("X1", "X2"), ("Y1", "Y2")],
                  train_trip_windows=trip_w, train_dwell_windows=dwell_w, total_travel_windows=total_w)
    return net, Timetable(times, Provenance.SEED)
