"""Second LP: keep EMT trip times, pull alignment points together.

Each pair contributes one variable theta and two rows ``theta >= +-y`` where
``y`` is the gap between the accelerating train's alignment point
(departure + triangle) and the braking train's (arrival - nabla).  Minimizing
the sum of thetas minimizes the l1 norm of the misalignment vector, the
convex stand-in for counting misaligned pairs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import ConstraintGraph
from .lp import LpProblem, LpStatus, SolverFailure, solve
from .network import Provenance, Timetable, arr, check_timetable, dep
from .pairing import SyncPair
from .step_one import difference_matrix, timetable_from_x


@dataclass
class StepTwoLp:
    problem: LpProblem
    n_events: int
    pairs: list[SyncPair]
    acc_node: np.ndarray  # departure node per pair
    brk_node: np.ndarray  # arrival node per pair
    const: np.ndarray  # triangle + nabla per pair
    n_trip_rows: int

    @property
    def n_theta(self) -> int:
        return len(self.pairs)

    def misalignment(self, x: np.ndarray) -> np.ndarray:
        return x[self.acc_node] - x[self.brk_node] + self.const


@dataclass
class SyncReport:
    pairs: list[SyncPair]
    misalignment: np.ndarray  # |y| per pair
    total_l1: float
    aligned_count: int
    objective: float
    max_theta_gap: float

    def rows(self):
        for p, m in zip(self.pairs, self.misalignment):
            yield p, float(m)


def build_step_two_lp(graph: ConstraintGraph, emt: Timetable, pairs, offsets) -> StepTwoLp:
    """``pairs`` is an iterable of SyncPair (right and left together)."""
    pairs = list(pairs)
    n = graph.n_nodes
    x_emt = np.array([emt[node.event] for node in graph.nodes], dtype=float)
    tail, head, lo, hi, trip = graph.arrays()
    lo = lo.astype(float)
    hi = hi.astype(float)
    fixed = x_emt[head[trip]] - x_emt[tail[trip]]
    lo[trip] = fixed
    hi[trip] = fixed
    D = difference_matrix(graph)

    acc = np.empty(len(pairs), np.int64)
    brk = np.empty(len(pairs), np.int64)
    const = np.empty(len(pairs))
    for q, p in enumerate(pairs):
        at, ap = p.accelerating
        bt, bp = p.braking
        try:
            acc[q] = graph.node_of(dep(at, ap))
            brk[q] = graph.node_of(arr(bt, bp))
            const[q] = offsets[(at, ap)].consume_offset + offsets[(bt, bp)].regen_offset
        except KeyError as exc:
            raise KeyError(f"pair {p} refers to {exc.args[0]} which is not in the graph/offsets") from None
    k = len(pairs)
    # theta - d + a >= c   and   theta + d - a >= -c
    q = np.arange(k)
    rows = np.concatenate([q, q, q, k + q, k + q, k + q])
    cols = np.concatenate([n + q, acc, brk, n + q, acc, brk])
    vals = np.concatenate([np.ones(k), -np.ones(k), np.ones(k), np.ones(k), np.ones(k), -np.ones(k)])
    T = sp.csr_matrix((vals, (rows, cols)), shape=(2 * k, n + k))
    A = sp.vstack([sp.hstack([D, sp.csr_matrix((D.shape[0], k))]), T], format="csr")
    problem = LpProblem(
        var_lo=np.zeros(n + k),
        var_hi=np.concatenate([np.full(n, float(graph.horizon_m)), np.full(k, np.inf)]),
        A=A,
        row_lo=np.concatenate([lo, const, -const]),
        row_hi=np.concatenate([hi, np.full(2 * k, np.inf)]),
        objective=np.concatenate([np.zeros(n), np.ones(k)]),
    )
    return StepTwoLp(problem, n, pairs, acc, brk, const, int(trip.sum()))


def round_timetable(x: np.ndarray) -> np.ndarray:
    snapped = np.round(x * 1e6) / 1e6
    return np.floor(snapped + 0.5)


@dataclass
class FinalResult:
    exact: Timetable
    rounded: Timetable | None
    rounding_violations: list = field(default_factory=list)
    report: SyncReport | None = None
    report_rounded: SyncReport | None = None
    solution: object = None


def _report(lp: StepTwoLp, x: np.ndarray, theta: np.ndarray | None, objective: float) -> SyncReport:
    y = np.abs(lp.misalignment(x))
    gap = float(np.max(theta - y, initial=0.0)) if theta is not None else 0.0
    return SyncReport(lp.pairs, y, float(y.sum()), int(np.sum(y <= 1e-6)), objective, gap)


def misalignment_report(lp: StepTwoLp, graph: ConstraintGraph, tt: Timetable) -> SyncReport:
    x = np.array([tt[node.event] for node in graph.nodes], dtype=float)
    y = np.abs(lp.misalignment(x))
    return SyncReport(lp.pairs, y, float(y.sum()), int(np.sum(y <= 1e-6)), float(y.sum()), 0.0)


def solve_final(lp: StepTwoLp, graph: ConstraintGraph, records=None, backend: str = "simplex",
                **options) -> FinalResult:
    sol = solve(lp.problem, backend=backend, **options)
    if sol.status is not LpStatus.OPTIMAL:
        # the EMT is feasible for this LP, so anything else is a bug
        raise SolverFailure(f"step-two LP ended with status {sol.status.name}")
    x = sol.x[: lp.n_events]
    theta = sol.x[lp.n_events:]
    report = _report(lp, x, theta, float(sol.objective_value))
    exact = timetable_from_x(graph, x, Provenance.FINAL)
    xr = round_timetable(x)
    rounded = timetable_from_x(graph, xr, Provenance.FINAL)
    if records is not None:
        bad = check_timetable(rounded, records, graph.horizon_m)
    else:
        from .step_one import verify_on_graph

        bad = verify_on_graph(graph, xr)
    tail, head, _, _, trip = graph.arrays()
    moved = np.flatnonzero((xr[head[trip]] - xr[tail[trip]]) != np.round(lp.problem.row_lo[: len(trip)][trip]))
    if moved.size:
        bad = list(bad) + [f"rounding changed {moved.size} trip time(s)"]
    res = FinalResult(exact, None if bad else rounded, list(bad), report, None, sol)
    if not bad:
        res.report_rounded = _report(lp, xr, None, float(np.abs(lp.misalignment(xr)).sum()))
    return res


def write_sync_csv(report: SyncReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "t", "partner", "direction", "misalignment_s"])
        for p, m in report.rows():
            w.writerow([p.platform_i, p.platform_j, p.train_t, p.partner, p.direction.value, f"{m:.6f}"])
        w.writerow([])
        w.writerow(["total_l1", f"{report.total_l1:.6f}"])
        w.writerow(["aligned_count", report.aligned_count])
        w.writerow(["pairs", len(report.pairs)])
