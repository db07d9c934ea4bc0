"""Four-phase train run simulator (max accel, speed hold, coast, max brake).

The run is integrated on a fine distance grid, where each cell has constant
acceleration, then resampled every 0.1 s in time.  For a hold speed ``v_h`` the
profile is the pointwise minimum of

* the forward curve: full traction from standstill, capped by ``v_h`` and by
  the speed-limit ceiling (which already contains the braking curves in front
  of every limit drop and of the stopping point), and
* the terminal curve: coast backwards from the point where the stopping brake
  curve reaches the coast-end speed ``v_e``, then brake.

``v_e`` is tied to ``v_h`` by ``v_e = max(v_h - KAPPA (v_top - v_h), RHO v_h)`` so
that the minimum-time run (``v_h = v_top``) has no coast and slower runs coast
longer.  Both curves grow with ``v_h``, so the trip time is monotone in ``v_h``
and the hold speed for a requested trip time is found by root bracketing.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numba as nb
import numpy as np
from scipy.optimize import brentq

G = 9.80665
KAPPA = 0.5
RHO = 0.25
MIN_HOLD = 0.5  # m/s; slower holds are rejected as unrealistic
MIN_COAST = -0.01  # coasting never gains speed, even downhill

ACCEL, HOLD, COAST, BRAKE = 0, 1, 2, 3
PHASE_NAMES = ("accel", "hold", "coast", "brake")


@dataclass(frozen=True)
class TrainPhysics:
    mass: float = 295445.0
    davis_a0: float = 0.0105
    davis_a1: float = 0.00115
    davis_a2: float = 0.000121
    max_accel: float = 1.04
    coast_decel: float = -0.2
    max_brake_decel: float = -0.8
    eta_elec_to_kin: float = 0.9
    eta_kin_to_regen: float = 0.76
    transmission_loss: float = 0.1
    name: str = "average"

    def __post_init__(self):
        if self.mass <= 0 or self.max_accel <= 0:
            raise ValueError("mass and max_accel must be positive")
        if not self.max_brake_decel < self.coast_decel < 0:
            raise ValueError("need max_brake_decel < coast_decel < 0")
        for f in ("eta_elec_to_kin", "eta_kin_to_regen"):
            if not 0 < getattr(self, f) <= 1:
                raise ValueError(f"{f} must lie in (0, 1]")
        if not 0 <= self.transmission_loss < 1:
            raise ValueError("transmission_loss must lie in [0, 1)")
        if min(self.davis_a0, self.davis_a1, self.davis_a2) < 0:
            raise ValueError("Davis coefficients must be nonnegative")

    def resistance(self, v):
        return self.davis_a0 + self.davis_a1 * v + self.davis_a2 * v * v

    @property
    def frictionless(self) -> "TrainPhysics":
        return replace(self, davis_a0=0.0, davis_a1=0.0, davis_a2=0.0)


@dataclass(frozen=True)
class SegmentSpeedLimit:
    track: str
    start_m: float
    end_m: float
    limit: float  # km/h
    grade_deg: float = 0.0  # positive = uphill

    @property
    def limit_ms(self) -> float:
        return self.limit / 3.6


class InfeasibleTripError(ValueError):
    def __init__(self, trip_time: float, minimum: float):
        self.trip_time = trip_time
        self.minimum = minimum
        super().__init__(f"trip time {trip_time:.3f} s is below the minimum {minimum:.3f} s")


class TripTooLongError(ValueError):
    pass


def check_limits(limits: Sequence[SegmentSpeedLimit], track_length: float | None = None) -> list[SegmentSpeedLimit]:
    segs = sorted(limits, key=lambda s: s.start_m)
    if not segs:
        raise ValueError("no speed-limit segments")
    if abs(segs[0].start_m) > 1e-9:
        raise ValueError(f"{segs[0].track}: segments must start at 0")
    for a, b in zip(segs, segs[1:]):
        if abs(a.end_m - b.start_m) > 1e-6:
            raise ValueError(f"{a.track}: gap or overlap at {a.end_m} m")
    for s in segs:
        if s.end_m <= s.start_m or s.limit <= 0:
            raise ValueError(f"{s.track}: bad segment {s}")
    if track_length is not None and abs(segs[-1].end_m - track_length) > 1e-6:
        raise ValueError(f"{segs[0].track}: segments end at {segs[-1].end_m}, track is {track_length} m")
    return segs


@dataclass
class LinkGeometry:
    """Distance grid of one link: nodes ``s``, node limits, per-cell grade and step."""

    s: np.ndarray
    vlim: np.ndarray
    grade_acc: np.ndarray  # g sin(theta) per cell
    seg_limit: np.ndarray  # limit of the segment holding each cell, m/s

    @property
    def length(self) -> float:
        return float(self.s[-1])

    @property
    def ds(self) -> np.ndarray:
        return np.diff(self.s)

    @classmethod
    def from_limits(cls, limits: Sequence[SegmentSpeedLimit], track_length: float | None = None,
                    ds: float = 0.5) -> "LinkGeometry":
        segs = check_limits(limits, track_length)
        pts = [np.zeros(1)]
        grade, seglim = [], []
        for sg in segs:
            n = max(1, math.ceil((sg.end_m - sg.start_m) / ds))
            pts.append(np.linspace(sg.start_m, sg.end_m, n + 1)[1:])
            grade.append(np.full(n, G * math.sin(math.radians(sg.grade_deg))))
            seglim.append(np.full(n, sg.limit_ms))
        s = np.concatenate(pts)
        seg_limit = np.concatenate(seglim)
        vlim = np.empty(s.size)
        vlim[0] = seg_limit[0]
        vlim[-1] = seg_limit[-1]
        vlim[1:-1] = np.minimum(seg_limit[:-1], seg_limit[1:])
        return cls(s, vlim, np.concatenate(grade), seg_limit)

    @classmethod
    def flat(cls, length: float, limit_kmh: float, ds: float = 0.5) -> "LinkGeometry":
        return cls.from_limits([SegmentSpeedLimit("flat", 0.0, length, limit_kmh)], length, ds)


@nb.njit(cache=True)
def _forward(cap, ds, grade_acc, amax, a0, a1, a2):
    n = ds.size
    v = np.empty(n + 1)
    v[0] = 0.0
    for k in range(n):
        vk = v[k]
        a = amax - (a0 + a1 * vk + a2 * vk * vk) - grade_acc[k]
        v2 = vk * vk + 2.0 * a * ds[k]
        vn = math.sqrt(v2) if v2 > 0.0 else 0.0
        if vn > cap[k + 1]:
            vn = cap[k + 1]
        v[k + 1] = vn
    return v


def _ceiling(geom: LinkGeometry, brake: float) -> np.ndarray:
    """Speed-limit envelope including braking curves ahead of drops and the stop."""
    c = geom.vlim.copy()
    c[-1] = 0.0
    two_b_ds = 2.0 * brake * geom.ds
    for k in range(c.size - 2, -1, -1):
        reach = math.sqrt(c[k + 1] * c[k + 1] + two_b_ds[k])
        if reach < c[k]:
            c[k] = reach
    return c


@dataclass
class _Run:
    v: np.ndarray
    phase: np.ndarray  # per cell
    dt: np.ndarray  # per cell

    @property
    def duration(self) -> float:
        return float(self.dt.sum())


class _Planner:
    """Profiles of one link for one train, parametrized by hold speed."""

    def __init__(self, geom: LinkGeometry, physics: TrainPhysics):
        self.geom = geom
        self.phys = physics
        b = self.brake = -physics.max_brake_decel
        self.ceiling = _ceiling(geom, b)
        ds = geom.ds
        L = geom.length
        self.stop_curve = np.sqrt(np.maximum(2.0 * b * (L - geom.s), 0.0))
        cnet = np.minimum(physics.coast_decel - geom.grade_acc, MIN_COAST)
        self.coast_gain = -2.0 * cnet * ds  # v^2 gained per cell going backwards
        self.top = self._forward(np.inf)
        self.v_top = float(self.top.max())

    def _forward(self, v_hold: float) -> np.ndarray:
        p = self.phys
        cap = np.minimum(self.ceiling, v_hold)
        return _forward(cap, self.geom.ds, self.geom.grade_acc, p.max_accel,
                        p.davis_a0, p.davis_a1, p.davis_a2)

    def coast_end_speed(self, v_hold: float) -> float:
        return max(v_hold - KAPPA * (self.v_top - v_hold), RHO * v_hold)

    def run(self, v_hold: float) -> _Run:
        F = self.top if v_hold >= self.v_top else self._forward(v_hold)
        ve = self.coast_end_speed(v_hold)
        B = self.stop_curve
        e = int(np.flatnonzero(B >= ve)[-1]) if B[0] >= ve else 0
        T = B.copy()
        if e > 0:
            # brakes start exactly where the stop curve meets v_e, usually inside cell e;
            # keeping that point off the grid makes the run time continuous in v_hold
            s_brake = self.geom.length - ve * ve / (2.0 * self.brake)
            part = self.coast_gain[e] * max(0.0, min(1.0, (s_brake - self.geom.s[e]) / self.geom.ds[e]))
            gain = np.concatenate([np.cumsum(self.coast_gain[:e][::-1])[::-1], [0.0]]) + part
            T[: e + 1] = np.sqrt(ve * ve + gain)
        use_T = T < F
        v = np.where(use_T, T, F)
        v[0] = 0.0
        v[-1] = 0.0
        ds = self.geom.ds
        a = (v[1:] ** 2 - v[:-1] ** 2) / (2.0 * ds)
        phase = np.where(a > 1e-6, ACCEL, np.where(a < -1e-6, BRAKE, HOLD)).astype(np.int8)
        cell_T = use_T[1:]  # cell ends on the terminal curve
        before_e = np.arange(ds.size) < e
        phase[cell_T & before_e] = COAST
        phase[cell_T & ~before_e] = BRAKE
        with np.errstate(divide="ignore"):
            dt = 2.0 * ds / (v[:-1] + v[1:])
        return _Run(v, phase, dt)

    def duration(self, v_hold: float) -> float:
        return self.run(v_hold).duration

    @property
    def min_time(self) -> float:
        return self.duration(self.v_top)


@dataclass
class PowerGraph:
    t: np.ndarray
    consumption: np.ndarray  # electrical power drawn, W
    regeneration: np.ndarray  # regenerated electrical power before transmission, W

    @property
    def consumption_samples(self) -> np.ndarray:
        return np.column_stack([self.t, self.consumption])

    @property
    def regeneration_samples(self) -> np.ndarray:
        return np.column_stack([self.t, self.regeneration])

    @property
    def peak_consumption(self) -> float:
        return float(self.consumption.max(initial=0.0))

    @property
    def peak_regeneration(self) -> float:
        return float(self.regeneration.max(initial=0.0))


@dataclass
class SpeedProfile:
    """Sampled run.  Arrays share one time axis; a phase change is sampled twice
    (left and right limit) so that power jumps integrate exactly."""

    trip_time: float
    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    accel: np.ndarray  # net acceleration
    traction: np.ndarray  # applied specific force u (m/s^2)
    phase: np.ndarray
    mass: float
    power: PowerGraph
    v_hold: float
    runs: list[tuple[int, float, float]] = field(default_factory=list)  # (phase, t0, t1)

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    @property
    def samples(self) -> np.ndarray:
        """(time, position, speed, net accel, consumed power) rows."""
        return np.column_stack([self.t, self.s, self.v, self.accel, self.power.consumption])

    @property
    def phase_boundaries(self) -> dict[str, tuple[float, float] | None]:
        out: dict[str, tuple[float, float] | None] = {}
        for p, name in enumerate(PHASE_NAMES):
            r = [(a, b) for q, a, b in self.runs if q == p]
            out[name] = (r[0][0], r[-1][1]) if r else None
        return out

    def phase_duration(self, phase: int) -> float:
        return sum(b - a for q, a, b in self.runs if q == phase)

    def _window(self, t0: float, t1: float, values: np.ndarray) -> np.ndarray:
        m = (self.t >= t0) & (self.t <= t1)
        return np.column_stack([self.t[m], values[m]])

    def departure_pulse(self) -> np.ndarray:
        """Consumption samples of the first acceleration run."""
        r = next((run for run in self.runs if run[0] == ACCEL), None)
        if r is None:
            raise ValueError("profile has no acceleration phase")
        return self._window(r[1], r[2], self.power.consumption)

    def arrival_pulse(self) -> np.ndarray:
        """Regeneration samples of the final braking run."""
        r = next((run for run in reversed(self.runs) if run[0] == BRAKE), None)
        if r is None:
            raise ValueError("profile has no braking phase")
        return self._window(r[1], r[2], self.power.regeneration)

    def final_brake_run(self) -> tuple[float, float]:
        r = next(run for run in reversed(self.runs) if run[0] == BRAKE)
        return r[1], r[2]

    def first_accel_run(self) -> tuple[float, float]:
        r = next(run for run in self.runs if run[0] == ACCEL)
        return r[1], r[2]


def _sample(planner: _Planner, run: _Run, trip_time: float, v_hold: float, dt: float) -> SpeedProfile:
    geom, phys = planner.geom, planner.phys
    v = run.v
    n = run.dt.size
    tn = np.concatenate([[0.0], np.cumsum(run.dt)])
    T = float(tn[-1])
    a_cell = (v[1:] - v[:-1]) / run.dt  # constant accel per cell
    u_cell = np.where(run.phase == COAST, 0.0, a_cell + phys.resistance(v[:-1]) + geom.grade_acc)

    # phase runs in cell index space
    change = np.flatnonzero(np.diff(run.phase)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [n]])
    runs = [(int(run.phase[a]), float(tn[a]), float(tn[b])) for a, b in zip(starts, ends)]

    grid = np.arange(0.0, T, dt)
    # power jumps wherever the phase or the traction changes abruptly (speed caps, grade changes)
    jumps = np.flatnonzero(np.abs(np.diff(u_cell)) > 1e-3) + 1
    bounds = tn[np.union1d(change, jumps)]
    times = np.sort(np.concatenate([grid, bounds, bounds, [T]]))
    # duplicated boundary times: first copy belongs to the cell on the left
    k = np.searchsorted(tn, times, side="right") - 1
    dup = np.zeros(times.size, bool)
    dup[1:] = times[1:] == times[:-1]
    left = np.zeros(times.size, bool)
    left[:-1] = dup[1:]
    k = np.where(left, k - 1, k)
    k = np.clip(k, 0, n - 1)
    tau = times - tn[k]
    ak = a_cell[k]
    vs = np.clip(v[k] + ak * tau, np.minimum(v[k], v[k + 1]), np.maximum(v[k], v[k + 1]))
    ss = np.minimum(geom.s[k] + v[k] * tau + 0.5 * ak * tau * tau, geom.s[k + 1])
    vs[0] = 0.0
    vs[-1] = 0.0
    ss[-1] = geom.length
    ss = np.maximum.accumulate(ss)
    uk = u_cell[k]
    ph = run.phase[k]
    pc = phys.mass * np.maximum(uk, 0.0) * vs / phys.eta_elec_to_kin
    pr = np.where(ph == BRAKE, phys.eta_kin_to_regen * phys.mass * np.maximum(-uk, 0.0) * vs, 0.0)
    pc = np.where(ph == COAST, 0.0, pc)
    return SpeedProfile(trip_time, times, ss, vs, ak, uk, ph, phys.mass, PowerGraph(times, pc, pr),
                        v_hold, runs)


def _planner(track_length, limits, physics) -> _Planner:
    geom = limits if isinstance(limits, LinkGeometry) else LinkGeometry.from_limits(limits, track_length)
    return _Planner(geom, physics)


def minimal_trip_time(track_length: float | None, limits, physics: TrainPhysics) -> float:
    return _planner(track_length, limits, physics).min_time


def _solve(planner: _Planner, trip_time: float, dt: float, tol: float) -> SpeedProfile:
    t_min = planner.min_time
    if trip_time < t_min - tol:
        raise InfeasibleTripError(trip_time, t_min)
    if trip_time <= t_min + tol:
        v_hold = planner.v_top
    else:
        slow = planner.duration(MIN_HOLD)
        if trip_time > slow:
            raise TripTooLongError(f"trip time {trip_time:.1f} s needs a hold speed below {MIN_HOLD} m/s")
        v_hold = brentq(lambda vh: planner.duration(vh) - trip_time, MIN_HOLD, planner.v_top,
                        xtol=1e-9, rtol=1e-12)
    return _sample(planner, planner.run(v_hold), trip_time, v_hold, dt)


def simulate_profile(track_length: float | None, limits, physics: TrainPhysics, trip_time: float,
                     dt: float = 0.1, tol: float = 1e-3) -> SpeedProfile:
    """Four-phase run over one link lasting ``trip_time`` seconds.

    ``limits`` is a list of :class:`SegmentSpeedLimit` or a prepared
    :class:`LinkGeometry`.  Raises :class:`InfeasibleTripError` (carrying the
    minimum) when the link cannot be run that fast.
    """
    return _solve(_planner(track_length, limits, physics), trip_time, dt, tol)


def _trapz(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def energy_of_profile(profile: SpeedProfile, physics: TrainPhysics | None = None) -> tuple[float, float]:
    """(consumed, regenerated) energy in J; regenerated is before transmission loss."""
    pg = profile.power
    return _trapz(pg.consumption, pg.t), _trapz(pg.regeneration, pg.t)


def sample_energy_curve(track_length, limits, physics: TrainPhysics, window, step: float = 1.0,
                        dt: float = 0.1, check: bool = True) -> list[tuple[float, float]]:
    lower, upper = window
    planner = _planner(track_length, limits, physics)
    if lower < planner.min_time - 1e-3:
        raise InfeasibleTripError(lower, planner.min_time)
    n = int(math.floor((upper - lower) / step + 1e-9))
    out = []
    for k in range(n + 1):
        T = lower + k * step
        consumed, _ = energy_of_profile(_solve(planner, T, dt, 1e-3))
        out.append((float(T), consumed))
    if check:
        for (t1, e1), (t2, e2) in zip(out, out[1:]):
            if e2 > e1 * 1.001:
                raise RuntimeError(f"energy curve not monotone: E({t1})={e1:.1f} < E({t2})={e2:.1f}")
    return out


def write_power_csv(profile: SpeedProfile, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "consumption_w", "regeneration_w"])
        for row in zip(profile.t, profile.power.consumption, profile.power.regeneration):
            w.writerow([f"{x:.6g}" for x in row])


class ProfileBook:
    """Cache of simulated profiles keyed by (link, physics name, trip time)."""

    def __init__(self, limits: dict[str, list[SegmentSpeedLimit]], physics: dict[str, TrainPhysics],
                 dt: float = 0.1, ds: float = 0.5):
        self.limits = limits
        self.physics = physics
        self.dt = dt
        self.ds = ds
        self._planners: dict[tuple[str, str], _Planner] = {}
        self._profiles: dict[tuple[str, str, float], SpeedProfile] = {}
        self._curves: dict[tuple, list[tuple[float, float]]] = {}

    def planner(self, link: str, physics: str) -> _Planner:
        key = (link, physics)
        p = self._planners.get(key)
        if p is None:
            if link not in self.limits:
                raise KeyError(f"no speed limits for link {link!r}")
            if physics not in self.physics:
                raise KeyError(f"unknown physics {physics!r}")
            geom = LinkGeometry.from_limits(self.limits[link], ds=self.ds)
            p = self._planners[key] = _Planner(geom, self.physics[physics])
        return p

    def min_time(self, link: str, physics: str) -> float:
        return self.planner(link, physics).min_time

    def profile(self, link: str, physics: str, trip_time: float) -> SpeedProfile:
        key = (link, physics, round(float(trip_time), 6))
        p = self._profiles.get(key)
        if p is None:
            p = self._profiles[key] = _solve(self.planner(link, physics), key[2], self.dt, 1e-3)
        return p

    def energy(self, link: str, physics: str, trip_time: float) -> float:
        return energy_of_profile(self.profile(link, physics, trip_time))[0]

    def curve(self, link: str, physics: str, lower: int, upper: int, step: float = 1.0):
        key = (link, physics, lower, upper, step)
        c = self._curves.get(key)
        if c is None:
            n = int(math.floor((upper - lower) / step + 1e-9))
            c = [(float(lower + k * step), self.energy(link, physics, lower + k * step)) for k in range(n + 1)]
            self._curves[key] = c
        return c


def load_speed_limits(path: str | Path) -> dict[str, list[SegmentSpeedLimit]]:
    out: dict[str, list[SegmentSpeedLimit]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            seg = SegmentSpeedLimit(row["origin_destination"], float(row["start_m"]), float(row["end_m"]),
                                    float(row["limit_kmh"]), float(row.get("grade_deg") or 0.0))
            out.setdefault(seg.track, []).append(seg)
    for k, segs in out.items():
        out[k] = check_limits(segs)
    return out


def link_lengths(limits: dict[str, Iterable[SegmentSpeedLimit]]) -> dict[str, float]:
    return {k: max(s.end_m for s in segs) for k, segs in limits.items()}
