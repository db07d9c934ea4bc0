"""Effective energy: traction energy left to the substations after regeneration.

For a pair, the accelerating train's trip consumption ``P_c`` and the braking
train's delivered regeneration ``P_d`` (after transmission loss) are placed on
the timetable clock.  Over their overlap the substation supplies
``(P_c - P_d)^+``; outside it, all of ``P_c``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import Timetable
from .pairing import SyncPair, TripIndex
from .profile import ProfileBook, SpeedProfile, energy_of_profile

KWH = 3.6e6


def _trapz(y, x) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def effective_energy(p_cons: SpeedProfile, t_dep: float, p_regen: SpeedProfile, t_arr: float,
                     transmission_loss: float) -> tuple[float, float]:
    """(effective, standalone consumption) for one accelerating/braking couple.

    ``p_cons`` starts at ``t_dep``; ``p_regen`` ends at ``t_arr``.
    """
    tc = p_cons.power.t + t_dep
    pc = p_cons.power.consumption
    tr = p_regen.power.t + (t_arr - p_regen.duration)
    pd = p_regen.power.regeneration * (1.0 - transmission_loss)
    standalone = _trapz(pc, tc)
    lo, hi = max(tc[0], tr[0]), min(tc[-1], tr[-1])
    if hi <= lo or not pd.any():
        return standalone, standalone
    inside = tr[(tr > tc[0]) & (tr < tc[-1])]
    grid = np.union1d(tc, inside)
    pcg = np.interp(grid, tc, pc)
    pdg = np.interp(grid, tr, pd, left=0.0, right=0.0)
    # the regeneration window starts and ends with a step: give each edge a zero twin
    for edge, after in ((tr[-1], 1), (tr[0], 0)):
        if tc[0] < edge < tc[-1]:
            k = int(np.searchsorted(grid, edge)) + after
            grid = np.insert(grid, k, edge)
            pcg = np.insert(pcg, k, np.interp(edge, tc, pc))
            pdg = np.insert(pdg, k, 0.0)
    return _trapz(np.maximum(pcg - pdg, 0.0), grid), standalone


def pulse_effective_energy(t, pc, pd) -> float:
    """Same clamp-and-integrate on raw pulses sampled on one grid."""
    return _trapz(np.maximum(np.asarray(pc) - np.asarray(pd), 0.0), np.asarray(t))


class EnergyModel:
    """Profiles of the trips of a timetable, via the trip index and a profile book."""

    def __init__(self, index: TripIndex, book: ProfileBook):
        self.index = index
        self.book = book

    def profile(self, ref, trip_time: float) -> SpeedProfile:
        return self.book.profile(ref.link, ref.physics, trip_time)

    def loss(self, ref) -> float:
        return self.book.physics[ref.physics].transmission_loss

    def pair(self, pair: SyncPair, tt: Timetable) -> tuple[float, float]:
        at, ap = pair.accelerating
        bt, bp = pair.braking
        try:
            out = self.index.outgoing[(at, ap)]
            inc = self.index.incoming[(bt, bp)]
        except KeyError as exc:
            raise KeyError(f"no trip profile for {exc.args[0]}") from None
        pc = self.profile(out, self.index.trip_time(out, tt))
        pr = self.profile(inc, self.index.trip_time(inc, tt))
        return effective_energy(pc, tt[out.departure], pr, tt[inc.arrival], self.loss(inc))

    def consumed_total(self, tt: Timetable) -> float:
        """Traction energy of every trip, before any regeneration credit."""
        return sum(energy_of_profile(self.profile(ref, self.index.trip_time(ref, tt)))[0]
                   for ref in self.index.arcs.values())


def effective_energy_of_pair(pair: SyncPair, timetable: Timetable, model: EnergyModel) -> float:
    return model.pair(pair, timetable)[0]


@dataclass
class EffectiveEnergyReport:
    pairs: list[SyncPair]
    before: np.ndarray
    after: np.ndarray
    standalone_before: np.ndarray
    standalone_after: np.ndarray

    @property
    def per_pair(self) -> dict[SyncPair, float]:
        return dict(zip(self.pairs, self.after))

    @property
    def baseline_total(self) -> float:
        return float(self.before.sum())

    @property
    def total_effective(self) -> float:
        return float(self.after.sum())

    @property
    def reduction_fraction(self) -> float:
        b = self.baseline_total
        return 0.0 if b == 0 else 1.0 - self.total_effective / b

    def summary(self) -> dict:
        return {
            "pairs": len(self.pairs),
            "baseline_effective_kwh": round(self.baseline_total / KWH, 6),
            "final_effective_kwh": round(self.total_effective / KWH, 6),
            "baseline_consumption_kwh": round(float(self.standalone_before.sum()) / KWH, 6),
            "final_consumption_kwh": round(float(self.standalone_after.sum()) / KWH, 6),
            "reduction_fraction": round(self.reduction_fraction, 8),
        }


def compare(before: Timetable, after: Timetable, pairs, model: EnergyModel) -> EffectiveEnergyReport:
    pairs = list(pairs)
    b = np.array([model.pair(p, before) for p in pairs]).reshape(-1, 2)
    a = np.array([model.pair(p, after) for p in pairs]).reshape(-1, 2)
    return EffectiveEnergyReport(pairs, b[:, 0], a[:, 0], b[:, 1], a[:, 1])


def write_energy_csv(report: EffectiveEnergyReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "t", "partner", "direction", "before_j", "after_j", "delta_j"])
        for p, x, y in zip(report.pairs, report.before, report.after):
            w.writerow([p.platform_i, p.platform_j, p.train_t, p.partner, p.direction.value,
                        f"{x:.1f}", f"{y:.1f}", f"{y - x:.1f}"])


def write_energy_json(report: EffectiveEnergyReport, path: str | Path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump({**report.summary(), **(extra or {})}, fh, indent=1, sort_keys=True)
        fh.write("\n")
