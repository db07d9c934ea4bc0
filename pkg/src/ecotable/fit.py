"""Affine least-squares energy model per trip arc."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .graph import ConstraintGraph


@dataclass(frozen=True)
class AffineEnergyModel:
    c: float  # J/s
    b: float  # J
    r_squared: float
    n_samples: int

    @property
    def increasing(self) -> bool:
        """Positive slope; unexpected for energy-vs-trip-time data."""
        return self.c > 0

    def __call__(self, trip_time):
        return self.c * np.asarray(trip_time) + self.b


class DegenerateDesignError(ValueError):
    pass


def fit_affine(samples: Sequence[tuple[float, float]]) -> AffineEnergyModel:
    """Closed-form least squares of energy = c * trip_time + b."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DegenerateDesignError("need at least two samples")
    t, e = data[:, 0], data[:, 1]
    # centring keeps the 2x2 normal equations well conditioned
    tm, em = t.mean(), e.mean()
    dt, de = t - tm, e - em
    sxx = float(dt @ dt)
    if sxx <= 1e-12 * max(1.0, float(t @ t)):
        raise DegenerateDesignError("all trip times are equal")
    c = float(dt @ de) / sxx
    b = em - c * tm
    ss_tot = float(de @ de)
    resid = de - c * dt
    ss_res = float(resid @ resid)
    if ss_tot <= 1e-24 * max(1.0, float(e @ e)):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return AffineEnergyModel(c, float(b), r2, int(t.size))


@dataclass(frozen=True)
class FitSummary:
    mean_r_squared: float
    std_r_squared: float
    n_trips: int
    n_increasing: int


def summarize(models: Sequence[AffineEnergyModel]) -> FitSummary:
    r2 = np.array([m.r_squared for m in models])
    if r2.size == 0:
        return FitSummary(float("nan"), float("nan"), 0, 0)
    return FitSummary(float(r2.mean()), float(r2.std()), int(r2.size),
                      sum(m.increasing for m in models))


def fit_all_trips(
    graph: ConstraintGraph,
    curves: Mapping[int, Sequence[tuple[float, float]]] | Callable[[int], Sequence[tuple[float, float]]],
) -> tuple[ConstraintGraph, FitSummary]:
    """Attach a fitted model to every trip arc.

    ``curves`` maps arc index to its (trip_time, energy) samples, or is a
    callable returning them.
    """
    models: dict[int, AffineEnergyModel] = {}
    cache: dict[int, AffineEnergyModel] = {}
    for k in graph.trip_arcs():
        if callable(curves):
            samples = curves(k)
        else:
            if k not in curves:
                a = graph.arcs[k]
                raise KeyError(f"no energy curve for trip arc {k} "
                               f"({graph.nodes[a.tail].event} -> {graph.nodes[a.head].event})")
            samples = curves[k]
        key = id(samples)
        m = cache.get(key)
        if m is None:
            m = cache[key] = fit_affine(samples)
        models[k] = m
    return graph.with_models(models), summarize(list(models.values()))


def write_fit_csv(graph: ConstraintGraph, summary: FitSummary, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arc", "from", "to", "link", "lower", "upper", "c", "b", "r_squared", "n_samples"])
        for k in graph.trip_arcs():
            a = graph.arcs[k]
            m = a.energy_model
            w.writerow([k, graph.nodes[a.tail].event, graph.nodes[a.head].event, a.link, a.lower, a.upper,
                        repr(m.c), repr(m.b), f"{m.r_squared:.6f}", m.n_samples])
        w.writerow([])
        w.writerow(["mean_r_squared", f"{summary.mean_r_squared:.6f}"])
        w.writerow(["std_r_squared", f"{summary.std_r_squared:.6f}"])
        w.writerow(["n_trips", summary.n_trips])
