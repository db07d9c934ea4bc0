"""File formats: network and physics JSON, timetable CSV.

Network JSON layout (all times integer seconds, windows as ``[lower, upper]``)::

    {
      "name": "...", "horizon_m": 64800,
      "platforms": [{"id": "GRW1", "station": "GRW", "line": "1"}, ...],
      "tracks": [{"id": "GRW1-LXM1", "from": "GRW1", "to": "LXM1", "trip_window": [..]}, ...],
      "crossovers": [{"from": "LHS1", "to": "SFM2", "link": "LHS1-SFM1"}, ...],
      "default_dwell": [20, 50],
      "dwell_windows": {"GRW1": [20, 45]},
      "trains": [{"id": "L1_0", "path": [...], "tracks": [...], "physics": "average",
                  "total_travel": [..], "trip_windows": {track: [..]},
                  "dwell_windows": {platform: [..]}}, ...],
      "turnaround_pairs": [{"from": i, "to": j, "train": t, "next": t2, "window": [..]}],
      "interchange_pairs": [{"from": i, "to": j, "train": t, "next": t2, "window": [..]}],
      "opposite_pairs": [["GRW1", "GRW2"], ...],
      "headway_pairs": [{"track": id, "a": t, "b": t2, "departure": [..], "arrival": [..]}],
      "crossover_headways": [{"from": i, "to": j, "first": [t1, t1b], "second": [t2, t2b],
                              "departure": [..], "arrival": [..]}]
    }

Timetable CSV columns: ``train,platform,arrival_s,departure_s``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, fields
from pathlib import Path

from .network import (
    ConnectionPair, Crossover, CrossoverHeadway, HeadwayPair, Network, Platform, Provenance,
    Timetable, Track, Train, TurnaroundPair, arr, dep, window,
)
from .profile import SegmentSpeedLimit, TrainPhysics


class InputError(ValueError):
    """Malformed or missing input file."""


def _w(pair) -> "window":
    if pair is None:
        return None
    lo, hi = pair
    if int(lo) != lo or int(hi) != hi:
        raise InputError(f"window bounds must be integers, got {pair}")
    return window(int(lo), int(hi))


def _wl(w) -> list[int] | None:
    return None if w is None else [w.lower, w.upper]


def _read_json(path: str | Path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def network_from_dict(d: dict) -> Network:
    try:
        platforms = {p["id"]: Platform(p["id"], p["station"], str(p["line"])) for p in d["platforms"]}
        tracks = {t["id"]: Track(t["id"], t["from"], t["to"]) for t in d["tracks"]}
        trip_windows = {t["id"]: _w(t["trip_window"]) for t in d["tracks"] if t.get("trip_window")}
        trains, ttw, tdw, total = [], {}, {}, {}
        for t in d["trains"]:
            trains.append(Train(t["id"], tuple(t["path"]), tuple(t["tracks"]), t.get("physics", "default")))
            for k, w in (t.get("trip_windows") or {}).items():
                ttw[(t["id"], k)] = _w(w)
            for k, w in (t.get("dwell_windows") or {}).items():
                tdw[(t["id"], k)] = _w(w)
            if t.get("total_travel") is not None:
                total[t["id"]] = _w(t["total_travel"])
        crossovers = {}
        for c in d.get("crossovers", []):
            xo = Crossover(c["from"], c["to"], c.get("link"))
            crossovers[xo.key] = xo
        turn: dict = {}
        for b in d.get("turnaround_pairs", []):
            turn.setdefault((b["from"], b["to"]), []).append(TurnaroundPair(b["train"], b["next"], _w(b["window"])))
        inter: dict = {}
        for c in d.get("interchange_pairs", []):
            inter.setdefault((c["from"], c["to"]), []).append(ConnectionPair(c["train"], c["next"], _w(c["window"])))
        heads: dict = {}
        for h in d.get("headway_pairs", []):
            heads.setdefault(h["track"], []).append(
                HeadwayPair(h["a"], h["b"], _w(h["departure"]), _w(h["arrival"])))
        xheads: dict = {}
        for h in d.get("crossover_headways", []):
            xheads.setdefault((h["from"], h["to"]), []).append(
                CrossoverHeadway(tuple(h["first"]), tuple(h["second"]), _w(h["departure"]), _w(h["arrival"])))
        return Network(
            platforms=platforms, tracks=tracks, trains=trains, horizon_m=int(d["horizon_m"]),
            crossovers=crossovers, turnaround_pairs=turn, interchange_pairs=inter,
            opposite_pairs=[tuple(p) for p in d.get("opposite_pairs", [])],
            headway_pairs=heads, crossover_headways=xheads,
            trip_windows=trip_windows, train_trip_windows=ttw,
            dwell_windows={k: _w(v) for k, v in (d.get("dwell_windows") or {}).items()},
            train_dwell_windows=tdw, default_dwell=_w(d.get("default_dwell")),
            total_travel_windows=total, name=d.get("name", "network"),
        )
    except KeyError as exc:
        raise InputError(f"network file is missing field {exc.args[0]!r}") from None


def network_to_dict(net: Network) -> dict:
    trains = []
    for t in net.trains:
        trains.append({
            "id": t.id, "path": list(t.path_platforms), "tracks": list(t.path_tracks), "physics": t.physics,
            "total_travel": _wl(net.total_travel_windows.get(t.id)),
            "trip_windows": {k: _wl(w) for (tid, k), w in net.train_trip_windows.items() if tid == t.id},
            "dwell_windows": {k: _wl(w) for (tid, k), w in net.train_dwell_windows.items() if tid == t.id},
        })
    return {
        "name": net.name,
        "horizon_m": net.horizon_m,
        "platforms": [{"id": p.id, "station": p.station, "line": p.line} for p in net.platforms.values()],
        "tracks": [{"id": t.id, "from": t.from_platform, "to": t.to_platform,
                    "trip_window": _wl(net.trip_windows.get(t.id))} for t in net.tracks.values()],
        "crossovers": [{"from": x.from_platform, "to": x.to_platform, "link": x.link}
                       for x in net.crossovers.values()],
        "default_dwell": _wl(net.default_dwell),
        "dwell_windows": {k: _wl(w) for k, w in net.dwell_windows.items()},
        "trains": trains,
        "turnaround_pairs": [{"from": i, "to": j, "train": b.train, "next": b.next_train, "window": _wl(b.window)}
                             for (i, j), bs in net.turnaround_pairs.items() for b in bs],
        "interchange_pairs": [{"from": i, "to": j, "train": c.train, "next": c.next_train, "window": _wl(c.window)}
                              for (i, j), cs in net.interchange_pairs.items() for c in cs],
        "opposite_pairs": [list(p) for p in net.opposite_pairs],
        "headway_pairs": [{"track": k, "a": h.train_a, "b": h.train_b,
                           "departure": _wl(h.departure), "arrival": _wl(h.arrival)}
                          for k, hs in net.headway_pairs.items() for h in hs],
        "crossover_headways": [{"from": i, "to": j, "first": list(q.first), "second": list(q.second),
                                "departure": _wl(q.departure), "arrival": _wl(q.arrival)}
                               for (i, j), qs in net.crossover_headways.items() for q in qs],
    }


def load_network(path: str | Path) -> Network:
    return network_from_dict(_read_json(path))


def save_network(net: Network, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, indent=1)
        fh.write("\n")


_PHYSICS_FIELDS = {f.name for f in fields(TrainPhysics)}


def load_physics(path: str | Path) -> dict[str, TrainPhysics]:
    d = _read_json(path)
    out = {}
    for name, params in d.items():
        unknown = set(params) - _PHYSICS_FIELDS
        if unknown:
            raise InputError(f"{path}: unknown physics fields {sorted(unknown)} in {name!r}")
        try:
            out[name] = TrainPhysics(**{**params, "name": name})
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: physics {name!r}: {exc}") from None
    return out


def save_physics(physics: dict[str, TrainPhysics], path: str | Path) -> None:
    d = {}
    for name, p in physics.items():
        params = asdict(p)
        params.pop("name")
        d[name] = params
    with open(path, "w") as fh:
        json.dump(d, fh, indent=1)
        fh.write("\n")


def load_limits(path: str | Path) -> dict[str, list[SegmentSpeedLimit]]:
    from .profile import load_speed_limits

    try:
        return load_speed_limits(path)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def save_limits(limits: dict[str, list[SegmentSpeedLimit]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        grades = any(s.grade_deg for segs in limits.values() for s in segs)
        w.writerow(["origin_destination", "start_m", "end_m", "limit_kmh"] + (["grade_deg"] if grades else []))
        for segs in limits.values():
            for s in segs:
                w.writerow([s.track, repr(s.start_m), repr(s.end_m), _fmt(s.limit)]
                           + ([repr(s.grade_deg)] if grades else []))


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def write_timetable(net: Network, tt: Timetable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["train", "platform", "arrival_s", "departure_s"])
        for t in net.trains:
            for p in t.path_platforms:
                w.writerow([t.id, p, _fmt(tt[arr(t.id, p)]), _fmt(tt[dep(t.id, p)])])


def read_timetable(path: str | Path, provenance: Provenance = Provenance.SEED) -> Timetable:
    times = {}
    try:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                a, d = float(row["arrival_s"]), float(row["departure_s"])
                times[arr(row["train"], row["platform"])] = int(a) if a.is_integer() else a
                times[dep(row["train"], row["platform"])] = int(d) if d.is_integer() else d
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: bad timetable row ({exc})") from None
    return Timetable(times, provenance)
