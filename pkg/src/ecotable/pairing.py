"""Suitable train pairs for regenerative-energy synchronization.

For an opposite platform pair (i, j) and a train t dwelling at i, the partner
is the train at j whose dwell midpoint is closest in time, looking right
(partner later, ``0 <= diff <= r``) and left (partner earlier,
``0 < -diff <= r``).  Right pairs align t's departure with the partner's
arrival; left pairs align the partner's departure with t's arrival.

Alignment points come from the 1/e rectangle of each power pulse: the
interval where power stays above peak/e, whose midpoint stands in for the
pulse.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import ConstraintGraph
from .network import EventRef, Network, Timetable, arr, dep


class Direction(str, enum.Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class SyncPair:
    platform_i: str
    platform_j: str
    train_t: str
    partner: str
    direction: Direction

    @property
    def accelerating(self) -> tuple[str, str]:
        """(train, platform) whose departure is aligned."""
        if self.direction is Direction.RIGHT:
            return self.train_t, self.platform_i
        return self.partner, self.platform_j

    @property
    def braking(self) -> tuple[str, str]:
        """(train, platform) whose arrival is aligned."""
        if self.direction is Direction.RIGHT:
            return self.partner, self.platform_j
        return self.train_t, self.platform_i


@dataclass(frozen=True)
class PowerRectangle:
    peak: float
    t_start: float
    t_end: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.t_start + self.t_end)

    @property
    def width(self) -> float:
        return self.t_end - self.t_start

    @property
    def area(self) -> float:
        return self.peak * self.width


@dataclass(frozen=True)
class AlignmentOffsets:
    regen_offset: float  # alignment point this long before arrival
    consume_offset: float  # alignment point this long after departure


def rectangle_of(samples) -> PowerRectangle:
    """1/e rectangle of a sampled power pulse given as (time, power) rows."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("empty power graph")
    t, p = data[:, 0], data[:, 1]
    peak = float(p.max())
    if not peak > 0:
        raise ValueError("power graph has no positive power")
    thr = peak / math.e
    above = np.flatnonzero(p >= thr)
    i0, i1 = int(above[0]), int(above[-1])

    def cross(a: int, b: int) -> float:
        # time where the segment a-b meets the threshold
        pa, pb = p[a], p[b]
        if pa == pb:
            return float(t[b])
        return float(t[a] + (thr - pa) * (t[b] - t[a]) / (pb - pa))

    t0 = cross(i0 - 1, i0) if i0 > 0 else float(t[0])
    t1 = cross(i1, i1 + 1) if i1 + 1 < t.size else float(t[-1])
    return PowerRectangle(peak, t0, t1)


@dataclass(frozen=True)
class TripRef:
    arc: int
    link: str
    physics: str
    departure: EventRef
    arrival: EventRef


class TripIndex:
    """Incoming and outgoing trip arcs of every (train, platform)."""

    def __init__(self, network: Network, graph: ConstraintGraph):
        self.incoming: dict[tuple[str, str], TripRef] = {}
        self.outgoing: dict[tuple[str, str], TripRef] = {}
        for k in graph.trip_arcs():
            a = graph.arcs[k]
            d, r = graph.nodes[a.tail].event, graph.nodes[a.head].event
            ref = TripRef(k, a.link, network.train(d.train).physics, d, r)
            self.outgoing[(d.train, d.platform)] = ref
            self.incoming[(r.train, r.platform)] = ref
        self.arcs = {ref.arc: ref for ref in self.outgoing.values()}

    def eligible(self, train: str, platform: str) -> bool:
        return (train, platform) in self.incoming and (train, platform) in self.outgoing

    def trains_by_platform(self, network: Network) -> dict[str, list[str]]:
        """Trains that both arrive by a trip and leave by a trip at each platform."""
        out: dict[str, list[str]] = {}
        for t in network.trains:
            for p in t.path_platforms:
                if self.eligible(t.id, p):
                    out.setdefault(p, []).append(t.id)
        return out

    def trip_time(self, ref: TripRef, tt: Timetable) -> float:
        return tt[ref.arrival] - tt[ref.departure]


def _doubled_midpoint(tt: Timetable, train: str, platform: str):
    # a + d is exact for integer (and most float) timetables
    return tt[arr(train, platform)] + tt[dep(train, platform)]


def closest_partners(
    emt: Timetable,
    omega,
    trains_by_platform: dict[str, list[str]],
    r: float = 120.0,
) -> tuple[list[SyncPair], list[SyncPair]]:
    """(right pairs, left pairs).  Ties go right, then to the earlier-listed train."""
    if r <= 0:
        raise ValueError("r must be positive")
    right: list[SyncPair] = []
    left: list[SyncPair] = []
    r2 = 2 * r
    for i, j in omega:
        cands = trains_by_platform.get(j, [])
        if not cands:
            continue
        mj = np.array([_doubled_midpoint(emt, t, j) for t in cands])
        for t in trains_by_platform.get(i, []):
            diff = mj - _doubled_midpoint(emt, t, i)
            best_r = best_l = None
            ok = (diff >= 0) & (diff <= r2)
            if ok.any():
                k = int(np.flatnonzero(ok)[np.argmin(diff[ok])])
                best_r = (diff[k], cands[k])
            ok = (diff < 0) & (-diff <= r2)
            if ok.any():
                k = int(np.flatnonzero(ok)[np.argmin(-diff[ok])])
                best_l = (-diff[k], cands[k])
            if best_r is not None and (best_l is None or best_r[0] <= best_l[0]):
                right.append(SyncPair(i, j, t, best_r[1], Direction.RIGHT))
            elif best_l is not None:
                left.append(SyncPair(i, j, t, best_l[1], Direction.LEFT))
    return right, left


def compute_offsets(emt: Timetable, index: TripIndex, profile_of, keys) -> dict[tuple[str, str], AlignmentOffsets]:
    """Offsets for each (train, platform) in ``keys``.

    ``profile_of(ref, trip_time)`` returns the simulated profile of a trip.
    """
    out = {}
    for key in keys:
        if key in out:
            continue
        try:
            tin, tout = index.incoming[key], index.outgoing[key]
        except KeyError:
            raise KeyError(f"no incoming/outgoing trip profile for {key}") from None
        pin = profile_of(tin, index.trip_time(tin, emt))
        pout = profile_of(tout, index.trip_time(tout, emt))
        regen = rectangle_of(pin.arrival_pulse())
        cons = rectangle_of(pout.departure_pulse())
        out[key] = AlignmentOffsets(pin.duration - regen.midpoint, cons.midpoint)
    return out


def offset_keys(pairs) -> list[tuple[str, str]]:
    keys = []
    for p in pairs:
        keys.append((p.train_t, p.platform_i))
        keys.append((p.partner, p.platform_j))
    return keys


def write_pairs_csv(pairs, offsets, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "t", "partner", "direction", "nabla", "triangle"])
        for p in pairs:
            bt, bp = p.braking
            at, ap = p.accelerating
            w.writerow([p.platform_i, p.platform_j, p.train_t, p.partner, p.direction.value,
                        f"{offsets[(bt, bp)].regen_offset:.4f}", f"{offsets[(at, ap)].consume_offset:.4f}"])
