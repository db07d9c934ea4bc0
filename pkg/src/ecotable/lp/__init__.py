"""Sparse bounded-variable LP solving.

The bundled dual simplex is the reference backend.  ``backend="highs"``
routes through :func:`scipy.optimize.linprog` for cross-checks only; it does
not promise vertex solutions.
"""
from __future__ import annotations

import numpy as np

from .problem import INF, LpProblem, LpSolution, LpStatus, SolverFailure, check_integrality
from .simplex import solve_simplex
from .textio import dump_lp, load_lp, write_lp

__all__ = [
    "INF",
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "SolverFailure",
    "check_integrality",
    "dump_lp",
    "load_lp",
    "solve",
    "write_lp",
]


def _solve_highs(problem: LpProblem, **_) -> LpSolution:
    import scipy.sparse as sp
    from scipy.optimize import linprog

    A = problem.A.tocsr()
    fin_hi = np.isfinite(problem.row_hi)
    fin_lo = np.isfinite(problem.row_lo)
    A_ub = sp.vstack([A[fin_hi], -A[fin_lo]], format="csr")
    b_ub = np.concatenate([problem.row_hi[fin_hi], -problem.row_lo[fin_lo]])
    bounds = [
        (None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
        for lo, hi in zip(problem.var_lo, problem.var_hi)
    ]
    kw = dict(A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
              bounds=bounds, method="highs")
    res = linprog(problem.objective, **kw)
    if res.status == 2 and linprog(np.zeros(problem.n_vars), **kw).status == 0:
        # HiGHS may say "infeasible" for "infeasible or unbounded"
        res.status = 3
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, np.zeros(problem.n_vars), np.nan, is_vertex=False)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, np.zeros(problem.n_vars), -np.inf, is_vertex=False)
    if res.status != 0:
        raise SolverFailure(res.message)
    return LpSolution(LpStatus.OPTIMAL, res.x, float(res.fun), is_vertex=False,
                      iterations=int(getattr(res, "nit", 0)))


_BACKENDS = {"simplex": solve_simplex, "highs": _solve_highs}


def solve(problem: LpProblem, backend: str = "simplex", **options) -> LpSolution:
    """Solve ``problem``; ``options`` are passed to the backend."""
    try:
        impl = _BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}") from None
    return impl(problem, **options)
