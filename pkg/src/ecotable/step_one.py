"""Energy-minimizing timetable: the difference-constraint LP over the graph."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import ConstraintGraph
from .lp import LpProblem, LpSolution, LpStatus, SolverFailure, check_integrality, solve
from .network import Provenance, Timetable, check_timetable


class InfeasibleError(RuntimeError):
    def __init__(self, message: str, certificate=None):
        self.certificate = certificate
        super().__init__(message)


class IntegralityError(SolverFailure):
    pass


def difference_matrix(graph: ConstraintGraph) -> sp.csr_matrix:
    tail, head, _, _, _ = graph.arrays()
    m = tail.size
    rows = np.repeat(np.arange(m), 2)
    cols = np.column_stack([head, tail]).ravel()
    vals = np.tile([1.0, -1.0], m)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, graph.n_nodes))


def trip_objective(graph: ConstraintGraph) -> np.ndarray:
    """Node k gets sum of c over trip arcs into k minus sum over arcs out of k."""
    obj = np.zeros(graph.n_nodes)
    for k in graph.trip_arcs():
        a = graph.arcs[k]
        if a.energy_model is None:
            raise ValueError(f"trip arc {k} has no energy model")
        c = a.energy_model.c
        obj[a.head] += c
        obj[a.tail] -= c
    return obj


def build_step_one_lp(graph: ConstraintGraph) -> LpProblem:
    _, _, lo, hi, _ = graph.arrays()
    n = graph.n_nodes
    names = [str(node.event) for node in graph.nodes]
    return LpProblem(
        var_lo=np.zeros(n), var_hi=np.full(n, float(graph.horizon_m)),
        A=difference_matrix(graph), row_lo=lo.astype(float), row_hi=hi.astype(float),
        objective=trip_objective(graph), var_names=names,
    )


def count_constraints(problem: LpProblem) -> int:
    """Inequality count used when reporting instance sizes.

    Each row counts once, an equality row twice (it is two inequalities), and a
    variable boxed in [0, m] counts once as its domain constraint.
    """
    eq = int(np.sum(problem.row_lo == problem.row_hi))
    boxed = int(np.sum(np.isfinite(problem.var_hi)))
    return problem.n_rows + eq + boxed


def _snap(x: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    ok, dev = check_integrality(LpSolution(LpStatus.OPTIMAL, x, 0.0), tol)
    if not ok:
        raise IntegralityError(f"vertex solution is not integral (deviation {dev:.3g})")
    return np.floor(x + 0.5)


def timetable_from_x(graph: ConstraintGraph, x, provenance: Provenance) -> Timetable:
    return Timetable({node.event: (int(v) if float(v).is_integer() else float(v))
                      for node, v in zip(graph.nodes, x)}, provenance)


def solve_emt(graph: ConstraintGraph, records=None, backend: str = "simplex", **options):
    """Integral EMT; returns (timetable, lp, solution).

    ``records`` (the constraint records behind the graph) are used for the
    final exact re-check; without them the arcs are checked instead.
    """
    lp = build_step_one_lp(graph)
    sol = solve(lp, backend=backend, **options)
    if sol.status is LpStatus.INFEASIBLE:
        raise InfeasibleError(f"step-one LP infeasible (certificate {sol.certificate_kind} "
                              f"{sol.certificate})", sol.certificate)
    if sol.status is not LpStatus.OPTIMAL:
        raise SolverFailure(f"step-one LP ended with status {sol.status.name}")
    x = _snap(sol.x)
    tt = timetable_from_x(graph, x, Provenance.EMT)
    bad = verify_on_graph(graph, x) if records is None else check_timetable(tt, records, graph.horizon_m)
    if bad:
        raise SolverFailure(f"EMT violates {len(bad)} constraint(s); first: {bad[0]}")
    return tt, lp, sol


def verify_on_graph(graph: ConstraintGraph, x: np.ndarray) -> list[str]:
    tail, head, lo, hi, _ = graph.arrays()
    d = x[head] - x[tail]
    out = [f"arc {k}: {d[k]} not in [{lo[k]}, {hi[k]}]" for k in np.flatnonzero((d < lo) | (d > hi))]
    out += [f"node {k}: {x[k]} outside [0, {graph.horizon_m}]"
            for k in np.flatnonzero((x < 0) | (x > graph.horizon_m))]
    return out


def emt_objective(graph: ConstraintGraph, timetable: Timetable) -> float:
    x = np.array([timetable[node.event] for node in graph.nodes], dtype=float)
    return float(trip_objective(graph) @ x)
