"""Constraint graph: one node per event time, one windowed arc per constraint.

Every arc (i, j, l, u) stands for ``l <= x_j - x_i <= u``.  Records that land on
the same ordered node pair are merged into a single arc whose window is the
intersection of theirs; the arc remembers every source record id.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TextIO

import numpy as np

from .network import TRIP_KINDS, ConstraintRecord, EventRef, Network


@dataclass(frozen=True)
class CGNode:
    index: int
    event: EventRef


@dataclass(frozen=True)
class CGArc:
    tail: int  # "from" node
    head: int  # "to" node
    lower: int
    upper: int
    is_trip: bool = False
    records: tuple[int, ...] = ()
    link: str | None = None
    energy_model: object | None = None  # AffineEnergyModel once fitted

    @property
    def key(self) -> tuple[int, int]:
        return (self.tail, self.head)


class GraphInfeasibleError(ValueError):
    def __init__(self, first: ConstraintRecord | str, second: ConstraintRecord):
        self.first, self.second = first, second
        a = first.describe() if isinstance(first, ConstraintRecord) else first
        super().__init__(f"empty window intersection between {a} and {second.describe()}")


@dataclass
class ConstraintGraph:
    nodes: list[CGNode]
    arcs: list[CGArc]
    horizon_m: int
    index: dict[EventRef, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.index:
            self.index = {n.event: n.index for n in self.nodes}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def node_of(self, ev: EventRef) -> int:
        return self.index[ev]

    def trip_arcs(self) -> list[int]:
        return [k for k, a in enumerate(self.arcs) if a.is_trip]

    def arrays(self):
        """(tail, head, lower, upper, is_trip) as numpy arrays."""
        tail = np.fromiter((a.tail for a in self.arcs), np.int64, len(self.arcs))
        head = np.fromiter((a.head for a in self.arcs), np.int64, len(self.arcs))
        lo = np.fromiter((a.lower for a in self.arcs), np.int64, len(self.arcs))
        hi = np.fromiter((a.upper for a in self.arcs), np.int64, len(self.arcs))
        trip = np.fromiter((a.is_trip for a in self.arcs), bool, len(self.arcs))
        return tail, head, lo, hi, trip

    def with_models(self, models: dict[int, object]) -> "ConstraintGraph":
        arcs = [replace(a, energy_model=models[k]) if k in models else a
                for k, a in enumerate(self.arcs)]
        return ConstraintGraph(self.nodes, arcs, self.horizon_m, self.index)

    def arc_of_record(self) -> dict[int, int]:
        return {r: k for k, a in enumerate(self.arcs) for r in a.records}


def build_graph(network: Network, records: list[ConstraintRecord]) -> ConstraintGraph:
    nodes = [CGNode(k, ev) for k, ev in enumerate(network.events())]
    index = {n.event: n.index for n in nodes}
    arcs: list[CGArc] = []
    where: dict[tuple[int, int], int] = {}
    first_rec: dict[tuple[int, int], ConstraintRecord] = {}
    for rec in records:
        if rec.earlier == rec.later:
            raise ValueError(f"record links an event to itself: {rec.describe()}")
        try:
            key = (index[rec.earlier], index[rec.later])
        except KeyError as exc:
            raise ValueError(f"{rec.describe()} refers to unknown event {exc.args[0]}") from None
        trip = rec.kind in TRIP_KINDS
        k = where.get(key)
        if k is None:
            where[key] = len(arcs)
            first_rec[key] = rec
            arcs.append(CGArc(key[0], key[1], rec.window.lower, rec.window.upper, trip,
                              (rec.id,), rec.link if trip else None))
            continue
        a = arcs[k]
        lo, hi = max(a.lower, rec.window.lower), min(a.upper, rec.window.upper)
        if lo > hi:
            raise GraphInfeasibleError(first_rec[key], rec)
        arcs[k] = replace(a, lower=lo, upper=hi, is_trip=a.is_trip or trip,
                          records=a.records + (rec.id,),
                          link=a.link if a.is_trip else (rec.link if trip else None))
    return ConstraintGraph(nodes, arcs, network.horizon_m, index)


def incidence_row(arc: CGArc) -> dict[int, int]:
    if arc.tail == arc.head:
        raise ValueError("arc is a self loop")
    return {arc.head: 1, arc.tail: -1}


def write_edge_list(graph: ConstraintGraph, out: TextIO) -> None:
    out.write("from,to,l,u,is_trip\n")
    for a in graph.arcs:
        out.write(f"{a.tail},{a.head},{a.lower},{a.upper},{int(a.is_trip)}\n")
