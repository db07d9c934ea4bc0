"""Railway topology, service data and the timetable constraint families.

A :class:`Network` carries the physical layout (platforms, tracks, crossovers),
the trains with their platform paths, and the time windows of every
constraint instance.  :func:`enumerate_constraints` turns it, together with a
feasible seed timetable that fixes train order, into a flat list of
:class:`ConstraintRecord`, each of the form ``lower <= later - earlier <= upper``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class EventKind(str, enum.Enum):
    ARRIVAL = "arr"
    DEPARTURE = "dep"


@dataclass(frozen=True, order=True)
class EventRef:
    train: str
    platform: str
    kind: EventKind

    def __str__(self) -> str:
        return f"{self.kind.value}({self.train}@{self.platform})"


def arr(train: str, platform: str) -> EventRef:
    return EventRef(train, platform, EventKind.ARRIVAL)


def dep(train: str, platform: str) -> EventRef:
    return EventRef(train, platform, EventKind.DEPARTURE)


@dataclass(frozen=True)
class Platform:
    id: str
    station: str
    line: str


@dataclass(frozen=True)
class Track:
    id: str
    from_platform: str
    to_platform: str


@dataclass(frozen=True)
class TimeWindow:
    lower: int
    upper: int

    def __iter__(self):
        return iter((self.lower, self.upper))

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def intersect(self, other: "TimeWindow") -> "TimeWindow | None":
        lo, hi = max(self.lower, other.lower), min(self.upper, other.upper)
        return TimeWindow(lo, hi) if lo <= hi else None


def window(lo: int, hi: int) -> TimeWindow:
    return TimeWindow(int(lo), int(hi))


@dataclass(frozen=True)
class Train:
    id: str
    path_platforms: tuple[str, ...]
    path_tracks: tuple[str, ...]
    physics: str = "default"


@dataclass(frozen=True)
class Crossover:
    """Turn-around link from the last platform of one line to the first of another.

    ``link`` names the speed-limit profile used to simulate the run over it.
    """

    from_platform: str
    to_platform: str
    link: str | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.from_platform, self.to_platform)

    @property
    def link_id(self) -> str:
        return self.link or f"{self.from_platform}-{self.to_platform}"


@dataclass(frozen=True)
class TurnaroundPair:
    """(t, t') in B_ij: t leaves platform i, reaches platform j relabelled as t'."""

    train: str
    next_train: str
    window: TimeWindow


@dataclass(frozen=True)
class ConnectionPair:
    """(t, t') in C_ij: t arrives at i, t' departs from j."""

    train: str
    next_train: str
    window: TimeWindow


@dataclass(frozen=True)
class HeadwayPair:
    """Two trains that run a track successively; order comes from the seed."""

    train_a: str
    train_b: str
    departure: TimeWindow
    arrival: TimeWindow


@dataclass(frozen=True)
class CrossoverHeadway:
    """Quartet ((t1, t1'), (t2, t2')) of consecutive turn-arounds on one crossover."""

    first: tuple[str, str]
    second: tuple[str, str]
    departure: TimeWindow
    arrival: TimeWindow


class ConstraintKind(str, enum.Enum):
    TRIP = "TripTime"
    CROSSOVER_TRIP = "CrossoverTrip"
    DWELL = "Dwell"
    CONNECTION = "Connection"
    HEADWAY_DEPARTURE = "HeadwayDeparture"
    HEADWAY_ARRIVAL = "HeadwayArrival"
    CROSSOVER_HEADWAY_DEPARTURE = "CrossoverHeadwayDeparture"
    CROSSOVER_HEADWAY_ARRIVAL = "CrossoverHeadwayArrival"
    TOTAL_TRAVEL = "TotalTravel"


TRIP_KINDS = (ConstraintKind.TRIP, ConstraintKind.CROSSOVER_TRIP)


@dataclass(frozen=True)
class ConstraintRecord:
    kind: ConstraintKind
    earlier: EventRef
    later: EventRef
    window: TimeWindow
    id: int = -1
    link: str | None = None  # track or crossover link for trip records

    def describe(self) -> str:
        return (f"#{self.id} {self.kind.value} {self.earlier} -> {self.later} "
                f"[{self.window.lower}, {self.window.upper}]")


@dataclass
class Network:
    platforms: dict[str, Platform]
    tracks: dict[str, Track]
    trains: list[Train]
    horizon_m: int
    crossovers: dict[tuple[str, str], Crossover] = field(default_factory=dict)
    turnaround_pairs: dict[tuple[str, str], list[TurnaroundPair]] = field(default_factory=dict)
    interchange_pairs: dict[tuple[str, str], list[ConnectionPair]] = field(default_factory=dict)
    opposite_pairs: list[tuple[str, str]] = field(default_factory=list)
    headway_pairs: dict[str, list[HeadwayPair]] = field(default_factory=dict)
    crossover_headways: dict[tuple[str, str], list[CrossoverHeadway]] = field(default_factory=dict)
    # windows: per-train overrides win over per-track / per-platform defaults
    trip_windows: dict[str, TimeWindow] = field(default_factory=dict)
    train_trip_windows: dict[tuple[str, str], TimeWindow] = field(default_factory=dict)
    dwell_windows: dict[str, TimeWindow] = field(default_factory=dict)
    train_dwell_windows: dict[tuple[str, str], TimeWindow] = field(default_factory=dict)
    default_dwell: TimeWindow | None = None
    total_travel_windows: dict[str, TimeWindow] = field(default_factory=dict)
    name: str = "network"

    def __post_init__(self):
        self._train_index = {t.id: t for t in self.trains}

    def train(self, train_id: str) -> Train:
        return self._train_index[train_id]

    def has_train(self, train_id: str) -> bool:
        return train_id in self._train_index

    @property
    def train_ids(self) -> list[str]:
        return [t.id for t in self.trains]

    def trip_window(self, train: str, track: str) -> TimeWindow | None:
        return self.train_trip_windows.get((train, track)) or self.trip_windows.get(track)

    def dwell_window(self, train: str, platform: str) -> TimeWindow | None:
        return (self.train_dwell_windows.get((train, platform))
                or self.dwell_windows.get(platform) or self.default_dwell)

    def events(self) -> list[EventRef]:
        """Every event in graph order: trains in input order, path order, arrival first."""
        out = []
        for t in self.trains:
            for p in t.path_platforms:
                out.append(arr(t.id, p))
                out.append(dep(t.id, p))
        return out

    def trains_by_platform(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for t in self.trains:
            for p in t.path_platforms:
                out.setdefault(p, []).append(t.id)
        return out

    def trip_link(self, train: Train, k: int) -> str:
        return train.path_tracks[k]


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def _check_window(w: TimeWindow | None, what: str, out: list[Violation]) -> None:
    if w is None:
        out.append(Violation("missing window", what))
        return
    if w.lower > w.upper:
        out.append(Violation("window lower>upper", f"{what} [{w.lower}, {w.upper}]"))
    if w.lower < 0:
        out.append(Violation("negative window", f"{what} [{w.lower}, {w.upper}]"))


def validate(network: Network) -> list[Violation]:
    """Every broken structural invariant of ``network``; empty means valid."""
    out: list[Violation] = []
    P = network.platforms
    for pid, p in P.items():
        if pid != p.id:
            out.append(Violation("platform id mismatch", f"{pid} vs {p.id}"))
    if network.horizon_m <= 0:
        out.append(Violation("horizon", f"horizon_m must be positive, got {network.horizon_m}"))

    seen_pairs: set[tuple[str, str]] = set()
    for tid, tr in network.tracks.items():
        if tid != tr.id:
            out.append(Violation("track id mismatch", f"{tid} vs {tr.id}"))
        if tr.from_platform not in P or tr.to_platform not in P:
            out.append(Violation("unknown platform", f"track {tid}"))
            continue
        if tr.from_platform == tr.to_platform:
            out.append(Violation("self loop", f"track {tid}"))
        if P[tr.from_platform].station == P[tr.to_platform].station:
            out.append(Violation("opposite track", f"track {tid} joins platforms of one station"))
        key = (tr.from_platform, tr.to_platform)
        if key in seen_pairs:
            out.append(Violation("duplicate track", f"{key}"))
        seen_pairs.add(key)
        if tid in network.trip_windows:
            _check_window(network.trip_windows[tid], f"trip window of track {tid}", out)

    for pid, w in network.dwell_windows.items():
        _check_window(w, f"dwell window at {pid}", out)
    if network.default_dwell is not None:
        _check_window(network.default_dwell, "default dwell window", out)

    ids = [t.id for t in network.trains]
    if len(set(ids)) != len(ids):
        out.append(Violation("duplicate train", "train ids are not unique"))
    for t in network.trains:
        if len(t.path_platforms) < 2 or len(t.path_tracks) != len(t.path_platforms) - 1:
            out.append(Violation("path length", f"train {t.id}: {len(t.path_platforms)} platforms, "
                                                f"{len(t.path_tracks)} tracks"))
        unknown = [p for p in t.path_platforms if p not in P]
        if unknown:
            out.append(Violation("unknown platform", f"train {t.id}: {unknown}"))
            continue
        for k, tid in enumerate(t.path_tracks):
            tr = network.tracks.get(tid)
            if tr is None:
                out.append(Violation("unknown track", f"train {t.id}: {tid}"))
                continue
            if k + 1 >= len(t.path_platforms):
                break
            if (tr.from_platform, tr.to_platform) != (t.path_platforms[k], t.path_platforms[k + 1]):
                out.append(Violation("path discontinuity",
                                     f"train {t.id}: track {tid} does not join "
                                     f"{t.path_platforms[k]} -> {t.path_platforms[k + 1]}"))
            elif (t.id, tid) in network.train_trip_windows or tid not in network.trip_windows:
                # shared per-track windows are checked once, with the tracks
                _check_window(network.trip_window(t.id, tid), f"trip window of {t.id} on {tid}", out)
        for p in t.path_platforms:
            if (t.id, p) in network.train_dwell_windows or network.dwell_window(t.id, p) is None:
                _check_window(network.dwell_window(t.id, p), f"dwell window of {t.id} at {p}", out)
        if t.id in network.total_travel_windows:
            _check_window(network.total_travel_windows[t.id], f"total travel window of {t.id}", out)
        else:
            out.append(Violation("missing window", f"total travel window of {t.id}"))

    def known(train_id: str, ctx: str) -> bool:
        if not network.has_train(train_id):
            out.append(Violation("unknown train", f"{ctx}: {train_id}"))
            return False
        return True

    for key, xo in network.crossovers.items():
        i, j = key
        if key != xo.key:
            out.append(Violation("crossover key mismatch", f"{key}"))
        if i not in P or j not in P:
            out.append(Violation("unknown platform", f"crossover {key}"))
        elif P[i].line == P[j].line:
            out.append(Violation("crossover line", f"crossover {key} stays on line {P[i].line}"))
    for key, pairs in network.turnaround_pairs.items():
        if key not in network.crossovers:
            out.append(Violation("unknown crossover", f"turn-around pairs on {key}"))
        i, j = key
        for bp in pairs:
            _check_window(bp.window, f"crossover trip {bp.train}->{bp.next_train} on {key}", out)
            if known(bp.train, f"crossover {key}") and network.train(bp.train).path_platforms[-1] != i:
                out.append(Violation("turn-around endpoint", f"{bp.train} does not end at {i}"))
            if known(bp.next_train, f"crossover {key}") and network.train(bp.next_train).path_platforms[0] != j:
                out.append(Violation("turn-around endpoint", f"{bp.next_train} does not start at {j}"))
    for key, pairs in network.interchange_pairs.items():
        i, j = key
        if i not in P or j not in P:
            out.append(Violation("unknown platform", f"interchange {key}"))
            continue
        for cp in pairs:
            _check_window(cp.window, f"connection {cp.train}->{cp.next_train} at {key}", out)
            if known(cp.train, f"interchange {key}") and i not in network.train(cp.train).path_platforms:
                out.append(Violation("connection platform", f"{cp.train} does not visit {i}"))
            if known(cp.next_train, f"interchange {key}") and j not in network.train(cp.next_train).path_platforms:
                out.append(Violation("connection platform", f"{cp.next_train} does not visit {j}"))
    for i, j in network.opposite_pairs:
        if i not in P or j not in P:
            out.append(Violation("unknown platform", f"opposite pair {(i, j)}"))
        elif P[i].station != P[j].station or P[i].line == P[j].line:
            out.append(Violation("opposite pair", f"{(i, j)} are not opposite platforms of one station"))
    for tid, pairs in network.headway_pairs.items():
        if tid not in network.tracks:
            out.append(Violation("unknown track", f"headway pairs on {tid}"))
            continue
        for hp in pairs:
            _check_window(hp.departure, f"departure headway {hp.train_a},{hp.train_b} on {tid}", out)
            _check_window(hp.arrival, f"arrival headway {hp.train_a},{hp.train_b} on {tid}", out)
            for t in (hp.train_a, hp.train_b):
                if known(t, f"headway on {tid}") and tid not in network.train(t).path_tracks:
                    out.append(Violation("headway track", f"{t} does not run on {tid}"))
    for key, quartets in network.crossover_headways.items():
        pairs = {(bp.train, bp.next_train) for bp in network.turnaround_pairs.get(key, [])}
        for q in quartets:
            _check_window(q.departure, f"crossover headway departure on {key}", out)
            _check_window(q.arrival, f"crossover headway arrival on {key}", out)
            for pair in (q.first, q.second):
                if tuple(pair) not in pairs:
                    out.append(Violation("crossover headway", f"{pair} is not a turn-around pair of {key}"))
    return out


# ---------------------------------------------------------------------------
# demand


def headway_from_demand(demand: float, capacity: float, utilization: float) -> float:
    """Headway in seconds that serves ``demand`` passengers per hour."""
    if demand <= 0 or capacity <= 0:
        raise ValueError("demand and capacity must be positive")
    if not 0 < utilization <= 1:
        raise ValueError("utilization must lie in (0, 1]")
    return 3600.0 * capacity * utilization / demand


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# ---------------------------------------------------------------------------
# timetables


class Provenance(str, enum.Enum):
    SEED = "seed"
    EMT = "emt"
    FINAL = "final"


@dataclass
class Timetable:
    times: dict[EventRef, float]
    provenance: Provenance = Provenance.SEED

    def __getitem__(self, ev: EventRef) -> float:
        return self.times[ev]

    def __contains__(self, ev: EventRef) -> bool:
        return ev in self.times

    def __len__(self) -> int:
        return len(self.times)

    def arrival(self, train: str, platform: str) -> float:
        return self.times[arr(train, platform)]

    def departure(self, train: str, platform: str) -> float:
        return self.times[dep(train, platform)]

    @property
    def is_integral(self) -> bool:
        return all(float(v).is_integer() for v in self.times.values())

    def as_int(self) -> "Timetable":
        """Same times as ints; raises if any is fractional."""
        out = {}
        for ev, v in self.times.items():
            if not float(v).is_integer():
                raise ValueError(f"{ev} has fractional time {v}")
            out[ev] = int(v)
        return Timetable(out, self.provenance)


class InfeasibleTimetableError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        first = violations[0] if violations else "no violations"
        super().__init__(f"{len(violations)} violated constraint(s); first: {first}")


def check_timetable(
    timetable: Timetable,
    records: Iterable[ConstraintRecord],
    horizon_m: int,
    events: Iterable[EventRef] | None = None,
    tol: float = 0.0,
) -> list[Violation]:
    """Every violated window or domain bound.  Integer data is compared exactly."""
    out: list[Violation] = []
    times = timetable.times
    if events is not None:
        for ev in events:
            if ev not in times:
                out.append(Violation("missing event", str(ev)))
    for ev, v in times.items():
        if v < -tol or v > horizon_m + tol:
            out.append(Violation("domain", f"{ev} = {v} outside [0, {horizon_m}]"))
    for rec in records:
        try:
            diff = times[rec.later] - times[rec.earlier]
        except KeyError as exc:
            out.append(Violation("missing event", f"{exc.args[0]} in {rec.describe()}"))
            continue
        if diff < rec.window.lower - tol or diff > rec.window.upper + tol:
            out.append(Violation("window", f"{rec.describe()} has difference {diff}"))
    return out


def checked_timetable(times: Mapping[EventRef, float], records, horizon_m: int,
                      provenance: Provenance, events=None) -> Timetable:
    tt = Timetable(dict(times), provenance)
    bad = check_timetable(tt, records, horizon_m, events)
    if bad:
        raise InfeasibleTimetableError(bad)
    return tt


# ---------------------------------------------------------------------------
# constraint enumeration


class InfeasibleSeedError(ValueError):
    def __init__(self, record: ConstraintRecord, value: float | None):
        self.record = record
        self.value = value
        super().__init__(f"seed timetable violates {record.describe()} (difference {value})")


def _ordered(seed: Timetable, a: EventRef, b: EventRef, a_first: bool) -> tuple[EventRef, EventRef]:
    ta, tb = seed[a], seed[b]
    if ta < tb or (ta == tb and a_first):
        return a, b
    return b, a


def enumerate_constraints(network: Network, seed: Timetable) -> list[ConstraintRecord]:
    """One record per constraint instance, in a fixed order.

    Order: per train (dwell at each platform, trip per track, total travel),
    then crossover trips, connections, track headways and crossover headways.
    Headway pairs are oriented by the seed departure order.
    """
    recs: list[ConstraintRecord] = []

    def add(kind, earlier, later, w, link=None):
        if w is None:
            raise ValueError(f"no {kind.value} window for {earlier} -> {later}")
        recs.append(ConstraintRecord(kind, earlier, later, w, len(recs), link))

    order = {t.id: k for k, t in enumerate(network.trains)}
    for t in network.trains:
        path = t.path_platforms
        for k, p in enumerate(path):
            add(ConstraintKind.DWELL, arr(t.id, p), dep(t.id, p), network.dwell_window(t.id, p))
            if k + 1 < len(path):
                tid = t.path_tracks[k]
                add(ConstraintKind.TRIP, dep(t.id, p), arr(t.id, path[k + 1]),
                    network.trip_window(t.id, tid), link=tid)
        add(ConstraintKind.TOTAL_TRAVEL, dep(t.id, path[0]), arr(t.id, path[-1]),
            network.total_travel_windows.get(t.id))
    for (i, j), pairs in network.turnaround_pairs.items():
        link = network.crossovers[(i, j)].link_id
        for bp in pairs:
            add(ConstraintKind.CROSSOVER_TRIP, dep(bp.train, i), arr(bp.next_train, j), bp.window, link=link)
    for (i, j), pairs in network.interchange_pairs.items():
        for cp in pairs:
            add(ConstraintKind.CONNECTION, arr(cp.train, i), dep(cp.next_train, j), cp.window)
    for tid, pairs in network.headway_pairs.items():
        tr = network.tracks[tid]
        i, j = tr.from_platform, tr.to_platform
        for hp in pairs:
            a, b = hp.train_a, hp.train_b
            first, second = _ordered(seed, dep(a, i), dep(b, i), order[a] < order[b])
            t1, t2 = first.train, second.train
            add(ConstraintKind.HEADWAY_DEPARTURE, dep(t1, i), dep(t2, i), hp.departure)
            add(ConstraintKind.HEADWAY_ARRIVAL, arr(t1, j), arr(t2, j), hp.arrival)
    for (i, j), quartets in network.crossover_headways.items():
        for q in quartets:
            (a, a2), (b, b2) = q.first, q.second
            first, _ = _ordered(seed, dep(a, i), dep(b, i), order[a] < order[b])
            if first.train != a:
                (a, a2), (b, b2) = (b, b2), (a, a2)
            add(ConstraintKind.CROSSOVER_HEADWAY_DEPARTURE, dep(a, i), dep(b, i), q.departure)
            add(ConstraintKind.CROSSOVER_HEADWAY_ARRIVAL, arr(a2, j), arr(b2, j), q.arrival)

    for rec in recs:
        try:
            diff = seed[rec.later] - seed[rec.earlier]
        except KeyError:
            raise InfeasibleSeedError(rec, None) from None
        if not rec.window.contains(diff):
            raise InfeasibleSeedError(rec, diff)
    for ev, v in seed.times.items():
        if not 0 <= v <= network.horizon_m:
            raise ValueError(f"seed event {ev} = {v} outside [0, {network.horizon_m}]")
    return recs
