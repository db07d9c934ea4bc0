"""Test-instance generator: a two-line corridor with turn-arounds at both ends.

Line 1 runs from the first to the last double station; a crossover at its end
turns each train round onto line 2, which starts at an extra turn-around
platform, runs back through every double station and ends at a second
turn-around platform, from where a crossover leads back to the start of
line 1.  With 14 stations the bundled Shanghai line-8 corridor and its
speed-limit table are used; otherwise a synthetic corridor is drawn.

Train labels: ``L1_k`` departs the first platform of line 1 at ``start + k h``.
``L1_k`` turns into ``L2_k``, and ``L2_k`` turns into ``L1_{k+lag}`` where
``lag`` is the smallest shift that leaves a nominal layover at the far end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .network import (
    Crossover, CrossoverHeadway, HeadwayPair, Network, Platform, Provenance, Timetable, Track, Train,
    TurnaroundPair, arr, dep, validate, window,
)
from .profile import ProfileBook, SegmentSpeedLimit, TrainPhysics, load_speed_limits

SHANGHAI_LINE1 = ["GRW", "LXM", "LJB", "SXZ", "ZJD", "YHR", "CSR", "YSS", "JYR", "LZV", "LHR", "PJT", "JYS", "LHS"]
SHANGHAI_TURN_START = "SFM"  # line 2 starts here
SHANGHAI_TURN_END = "PES"  # line 2 ends here
SERVICE_SECONDS = 18 * 3600


def data_path(name: str):
    return resources.files("ecotable") / "data" / name


def bundled_limits() -> dict[str, list[SegmentSpeedLimit]]:
    with resources.as_file(data_path("speed_limits.csv")) as p:
        return load_speed_limits(p)


def default_physics() -> dict[str, TrainPhysics]:
    """Light, average and heavy trains spanning the reported mass range."""
    return {
        "light": TrainPhysics(mass=229370.0, name="light"),
        "average": TrainPhysics(mass=295445.0, name="average"),
        "heavy": TrainPhysics(mass=361520.0, name="heavy"),
    }


@dataclass
class Corridor:
    line1: list[str]  # platform ids
    line2: list[str]
    stations: dict[str, str]  # platform -> station
    cross_end: Crossover  # end of line 1 -> start of line 2
    cross_start: Crossover  # end of line 2 -> start of line 1
    limits: dict[str, list[SegmentSpeedLimit]]
    opposite: list[tuple[str, str]]


def shanghai_corridor() -> Corridor:
    line1 = [s + "1" for s in SHANGHAI_LINE1]
    line2 = [SHANGHAI_TURN_START + "2"] + [s + "2" for s in reversed(SHANGHAI_LINE1)] + [SHANGHAI_TURN_END + "2"]
    stations = {p: p[:-1] for p in line1 + line2}
    # the crossovers reuse the speed limits of the line-1 links they run along
    xe = Crossover(line1[-1], line2[0], f"{line1[-1]}-{SHANGHAI_TURN_START}1")
    xs = Crossover(line2[-1], line1[0], f"{SHANGHAI_TURN_END}1-{line1[0]}")
    return Corridor(line1, line2, stations, xe, xs, bundled_limits(), [(s + "1", s + "2") for s in SHANGHAI_LINE1])


def synthetic_corridor(n_stations: int, rng: np.random.Generator) -> Corridor:
    if n_stations < 2:
        raise ValueError("a corridor needs at least 2 stations")
    names = [f"S{k:02d}" for k in range(n_stations)]
    line1 = [s + "1" for s in names]
    line2 = ["TA2"] + [s + "2" for s in reversed(names)] + ["TB2"]
    stations = {p: p[:-1] for p in line1 + line2}
    limits: dict[str, list[SegmentSpeedLimit]] = {}

    def link(key: str, length: float, kmh: tuple[int, ...]):
        cuts = np.sort(rng.uniform(0.15, 0.85, size=len(kmh) - 1)) * length
        edges = np.round(np.concatenate([[0.0], cuts, [length]]), 1)
        limits[key] = [SegmentSpeedLimit(key, float(a), float(b), float(v)) for a, b, v in zip(edges, edges[1:], kmh)]

    for a, b in zip(line1, line1[1:]):
        length = float(np.round(rng.uniform(700, 2600), 1))
        link(f"{a}-{b}", length, (60, int(rng.choice([70, 80])), 60))
    for a, b in zip(line2, line2[1:]):
        if a == "TA2" or b == "TB2":
            link(f"{a}-{b}", float(np.round(rng.uniform(700, 1400), 1)), (60, 70))
        else:
            back = f"{b[:-1]}1-{a[:-1]}1"  # same stretch, other direction
            L = limits[back][-1].end_m * float(rng.uniform(0.995, 1.005))
            link(f"{a}-{b}", float(np.round(L, 1)), (60, int(rng.choice([70, 80])), 60))
    xe = Crossover(line1[-1], line2[0], f"X-{line1[-1]}-{line2[0]}")
    xs = Crossover(line2[-1], line1[0], f"X-{line2[-1]}-{line1[0]}")
    link(xe.link_id, 900.0, (45, 55))
    link(xs.link_id, 800.0, (45, 55))
    return Corridor(line1, line2, stations, xe, xs, limits, [(s + "1", s + "2") for s in names])


class GenerationError(ValueError):
    pass


@dataclass
class Instance:
    network: Network
    seed: Timetable
    limits: dict[str, list[SegmentSpeedLimit]]
    physics: dict[str, TrainPhysics]
    headway: int


def generate_instance(
    stations: int = 14,
    trains: int = 100,
    headway: int = 180,
    seed: int = 0,
    physics: str = "average",
    dwell: int = 30,
    dwell_window: tuple[int, int] = (20, 50),
    trip_slack: int = 10,
    travel_slack: int = 60,
    start: int = 300,
    margin: int = 600,
    book: ProfileBook | None = None,
) -> Instance:
    """Network plus feasible seed timetable; deterministic in ``seed``."""
    if stations < 1 or trains < 1:
        raise GenerationError("stations and trains must be at least 1")
    if headway < 3:
        raise GenerationError("headway must be at least 3 s")
    rng = np.random.default_rng(seed)
    cor = shanghai_corridor() if stations == 14 else synthetic_corridor(stations, rng)
    phys = default_physics()
    if physics not in phys:
        raise GenerationError(f"unknown physics class {physics!r}")
    if not dwell_window[0] <= dwell <= dwell_window[1]:
        raise GenerationError("nominal dwell outside its window")
    book = book or ProfileBook(cor.limits, phys)
    h = int(headway)
    slack = min(60, h // 3)

    def seed_trip(link: str) -> int:
        return math.ceil(book.min_time(link, physics) - 1e-9) + trip_slack + int(rng.integers(0, 4))

    platforms: dict[str, Platform] = {}
    for p in cor.line1:
        platforms[p] = Platform(p, cor.stations[p], "1")
    for p in cor.line2:
        platforms[p] = Platform(p, cor.stations[p], "2")
    tracks: dict[str, Track] = {}
    trip_seed: dict[str, int] = {}
    for line in (cor.line1, cor.line2):
        for a, b in zip(line, line[1:]):
            tid = f"{a}-{b}"
            if tid not in cor.limits:
                raise GenerationError(f"no speed limits for {tid}")
            tracks[tid] = Track(tid, a, b)
            trip_seed[tid] = seed_trip(tid)
    x_end, x_start = cor.cross_end, cor.cross_start
    xs_end, xs_start = seed_trip(x_end.link_id), seed_trip(x_start.link_id)

    n1, n2 = (trains + 1) // 2, trains // 2
    times: dict = {}
    total_travel = {}

    def run(label: str, line: list[str], first_arrival: int, first_dwell: int) -> int:
        """Seed times along ``line``; returns arrival at its last platform."""
        t = first_arrival
        for k, p in enumerate(line):
            times[arr(label, p)] = t
            t += first_dwell if k == 0 else dwell
            times[dep(label, p)] = t
            if k + 1 < len(line):
                t += trip_seed[f"{p}-{line[k + 1]}"]
        return times[arr(label, line[-1])]

    def travel(line):
        return sum(trip_seed[f"{a}-{b}"] for a, b in zip(line, line[1:])) + dwell * (len(line) - 2)

    R1, R2 = travel(cor.line1), travel(cor.line2)
    first_dep = max(start, dwell)
    for k in range(n1):
        run(f"L1_{k}", cor.line1, first_dep + k * h - dwell, dwell)
    for k in range(n2):
        a0 = times[dep(f"L1_{k}", cor.line1[-1])] + xs_end
        run(f"L2_{k}", cor.line2, a0, dwell)
    # lag: L2_k turns into L1_{k+lag} with a layover of at least the nominal dwell
    lag = None
    layover = dwell
    if n2:
        x0 = times[arr("L2_0", cor.line2[-1])]
        lag = max(0, math.ceil((x0 + dwell + xs_start + dwell - first_dep) / h))
        layover = first_dep + lag * h - dwell - xs_start - x0
        assert layover >= dwell
    train_dwell = {}
    turn_start = []
    for k in range(n2):
        j = k + (lag or 0)
        if j < n1:
            lbl = f"L2_{k}"
            times[dep(lbl, cor.line2[-1])] = times[arr(lbl, cor.line2[-1])] + layover
            train_dwell[(lbl, cor.line2[-1])] = window(max(dwell_window[0], layover - 10), layover + 20)
            turn_start.append((lbl, f"L1_{j}"))

    trains_out: list[Train] = []
    order = sorted([(f"L1_{k}", cor.line1) for k in range(n1)] + [(f"L2_{k}", cor.line2) for k in range(n2)],
                   key=lambda x: (times[dep(x[0], x[1][0])], x[0]))
    for lbl, line in order:
        trains_out.append(Train(lbl, tuple(line), tuple(f"{a}-{b}" for a, b in zip(line, line[1:])), physics))
        R = R1 if line is cor.line1 else R2
        total_travel[lbl] = window(R - travel_slack, R + travel_slack)

    turnaround = {x_end.key: [], x_start.key: []}
    xw_end = window(xs_end - trip_slack, xs_end + trip_slack)
    xw_start = window(xs_start - trip_slack, xs_start + trip_slack)
    for k in range(n2):
        turnaround[x_end.key].append(TurnaroundPair(f"L1_{k}", f"L2_{k}", xw_end))
    for a, b in turn_start:
        turnaround[x_start.key].append(TurnaroundPair(a, b, xw_start))
    hw = window(h - slack, h + slack)
    headways: dict[str, list[HeadwayPair]] = {}
    for line, n, tag in ((cor.line1, n1, "L1"), (cor.line2, n2, "L2")):
        for a, b in zip(line, line[1:]):
            headways[f"{a}-{b}"] = [HeadwayPair(f"{tag}_{k}", f"{tag}_{k + 1}", hw, hw) for k in range(n - 1)]
    xheads = {}
    for key, pairs in turnaround.items():
        xheads[key] = [CrossoverHeadway((p.train, p.next_train), (q.train, q.next_train), hw, hw)
                       for p, q in zip(pairs, pairs[1:])]
    trip_windows = {tid: window(s - trip_slack, s + trip_slack) for tid, s in trip_seed.items()}
    horizon = max(times.values()) + margin
    net = Network(
        platforms=platforms, tracks=tracks, trains=trains_out, horizon_m=int(horizon),
        crossovers={x_end.key: x_end, x_start.key: x_start},
        turnaround_pairs={k: v for k, v in turnaround.items() if v},
        opposite_pairs=list(cor.opposite), headway_pairs={k: v for k, v in headways.items() if v},
        crossover_headways={k: v for k, v in xheads.items() if v},
        trip_windows=trip_windows, train_dwell_windows=train_dwell,
        default_dwell=window(*dwell_window), total_travel_windows=total_travel,
        name=f"corridor-{stations}st-{trains}tr-h{h}-s{seed}",
    )
    bad = validate(net)
    if bad:
        raise GenerationError(f"generated network is invalid: {bad[0]}")
    return Instance(net, Timetable(times, Provenance.SEED), cor.limits, phys, h)
