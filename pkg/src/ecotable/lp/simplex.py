"""Bounded-variable revised dual simplex.

Internal standard form: columns are the structural variables followed by one
slack per row, ``[A  -I] z = 0`` with every column boxed.  Infinite bounds are
replaced by artificial ones far outside the data range; a finished solve that
still leans on an artificial bound with nonzero reduced cost is reported as
unbounded.  Because every column is boxed, the all-slack basis with each
structural at the bound matching its cost sign is dual feasible, so the solve
needs no phase one.

Most columns of a timetable LP have zero cost, so the dual is massively
degenerate and long runs of zero dual steps are the norm.  The costs are
therefore perturbed by small deterministic amounts before the first pass; once
that pass is optimal the true costs come back, nonbasic columns whose reduced
cost now has the wrong sign flip to their other bound, and the dual simplex
carries on from there.

Pricing is dual steepest edge; the ratio test flips bounds (long-step) unless
the solver is stalling on degenerate pivots, in which case Bland's
smallest-index rule takes over until the dual objective moves again.  The
basis inverse is a sparse LU (SuperLU) followed by a product-form eta file,
refactored periodically.  The inner loops live in :mod:`._kernels`.
"""
from __future__ import annotations

import logging
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels as _k
from ._kernels import AT_LOWER, AT_UPPER, BASIC
from .problem import LpProblem, LpSolution, LpStatus, SolverFailure

log = logging.getLogger(__name__)

PRIMAL_TOL = 1e-7
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-12
# consecutive degenerate pivots before switching to Bland: at least this many,
# and never fewer than the number of columns.  Long harmless stalls are common
# when most costs are zero, and Bland's rule crawls through them.
BLAND_AFTER = 1000
# relative size of the cost perturbation (costs are scaled to max |c| = 1)
PERTURB = 1e-6


class _Basis:
    """LU of the basis matrix plus a product-form eta file."""

    def __init__(self, full: sp.csc_matrix, basis: np.ndarray, eta_capacity: int):
        B = full[:, basis].tocsc()
        try:
            lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:  # exactly singular
            raise SolverFailure(f"singular basis: {exc}") from exc
        L = sp.tril(lu.L, -1, format="csc")
        U = lu.U.tocsc()
        self.Ud = U.diagonal().copy()
        if np.any(self.Ud == 0.0):
            raise SolverFailure("singular basis: zero pivot in U")
        U = sp.triu(U, 1, format="csc")
        LR, UR = L.tocsr(), U.tocsr()
        idx = lambda M: M.indices.astype(np.int64)
        ptr = lambda M: M.indptr.astype(np.int64)
        self.lcsc = (ptr(L), idx(L), L.data)
        self.ucsc = (ptr(U), idx(U), U.data)
        self.lcsr = (ptr(LR), idx(LR), LR.data)
        self.ucsr = (ptr(UR), idx(UR), UR.data)
        self.perm_r = lu.perm_r.astype(np.int64)
        self.perm_c = lu.perm_c.astype(np.int64)
        m = len(basis)
        self.er = np.zeros(eta_capacity, np.int64)
        self.eptr = np.zeros(eta_capacity + 1, np.int64)
        self.epiv = np.zeros(eta_capacity)
        self.eidx = np.zeros(max(16, 4 * m), np.int64)
        self.eval = np.zeros(self.eidx.size)
        self.n_eta = 0

    def ftran(self, b: np.ndarray) -> np.ndarray:
        v = _k.lu_solve(*self.lcsc, *self.ucsc, self.Ud, self.perm_r, self.perm_c, b)
        if self.n_eta:
            _k.eta_ftran(v, self.er, self.eptr, self.eidx, self.eval, self.epiv, self.n_eta)
        return v

    def btran(self, b: np.ndarray) -> np.ndarray:
        u = np.array(b, dtype=float)
        if self.n_eta:
            _k.eta_btran(u, self.er, self.eptr, self.eidx, self.eval, self.epiv, self.n_eta)
        return _k.lu_solve_t(*self.lcsr, *self.ucsr, self.Ud, self.perm_r, self.perm_c, u)

    def push(self, r: int, col: np.ndarray) -> None:
        nz = np.flatnonzero(col)
        nz = nz[nz != r]
        e = self.n_eta
        start = self.eptr[e]
        stop = start + nz.size
        if stop > self.eidx.size:
            grow = max(stop, 2 * self.eidx.size)
            self.eidx = np.resize(self.eidx, grow)
            self.eval = np.resize(self.eval, grow)
        self.eidx[start:stop] = nz
        self.eval[start:stop] = col[nz]
        self.er[e] = r
        self.epiv[e] = col[r]
        self.eptr[e + 1] = stop
        self.n_eta = e + 1


class DualSimplex:
    def __init__(
        self,
        problem: LpProblem,
        max_iter: int | None = None,
        refactor_every: int = 200,
        time_limit: float | None = None,
        bland_after: int | None = None,
        perturb: bool = True,
    ):
        problem.check()
        self.problem = problem
        A = problem.A.tocsr(copy=True)
        A.sum_duplicates()
        A.eliminate_zeros()
        n, m = problem.n_vars, problem.n_rows
        self.n, self.m = n, m

        c = np.asarray(problem.objective, float)
        self.cost_scale = float(np.max(np.abs(c), initial=0.0)) or 1.0
        self.c_true = np.concatenate([c / self.cost_scale, np.zeros(m)])
        self.c = self.c_true

        lo = np.concatenate([problem.var_lo, problem.row_lo]).astype(float)
        hi = np.concatenate([problem.var_hi, problem.row_hi]).astype(float)
        finite = np.abs(np.concatenate([lo, hi]))
        finite = finite[np.isfinite(finite)]
        big = max(1e6, 100.0 * float(np.max(finite, initial=0.0)))
        row_l1 = np.asarray(abs(A).sum(axis=1)).ravel()
        art = np.concatenate([np.full(n, big), 2.0 * big * np.maximum(row_l1, 1.0)])
        self.art_lo = ~np.isfinite(lo)
        self.art_hi = ~np.isfinite(hi)
        lo[self.art_lo] = -art[self.art_lo]
        hi[self.art_hi] = art[self.art_hi]
        self.lo, self.hi = lo, hi
        self.fixed = (hi - lo) <= 0.0
        self.bland_after = bland_after if bland_after is not None else max(BLAND_AFTER, n + m)

        self.A = A
        self.Arow = (A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data.astype(float))
        self.full = sp.hstack([A, -sp.identity(m, format="csr")], format="csc")
        self.fullcol = (self.full.indptr.astype(np.int64), self.full.indices.astype(np.int64),
                        self.full.data.astype(float))
        self.fullT = self.full.T.tocsr()
        self.max_iter = max_iter if max_iter is not None else 50 * (n + m) + 1000
        self.refactor_every = refactor_every
        self.time_limit = time_limit
        self.perturb = perturb

    # -- bookkeeping -----------------------------------------------------
    def _init_state(self) -> None:
        n, m = self.n, self.m
        self.c = self.c_true
        self.basis = np.arange(n, n + m)
        self.status = np.full(n + m, AT_LOWER, dtype=np.int8)
        self.status[self.basis] = BASIC
        upper = np.zeros(n + m, bool)
        upper[:n] = self.c[:n] < 0
        self.status[upper] = AT_UPPER
        self.z = np.where(self.status == AT_UPPER, self.hi, self.lo)
        self.perturbed = self.perturb
        if self.perturb:
            # push each nonbasic cost further into its feasible side; basic slacks get a random sign
            rng = np.random.default_rng(0)
            xi = PERTURB * (1.0 + np.abs(self.c)) * rng.uniform(0.5, 1.0, n + m)
            sign = np.where(self.status == AT_UPPER, -1.0, 1.0)
            sign[self.basis] = rng.choice([-1.0, 1.0], m)
            xi[self.fixed] = 0.0
            self.c = self.c + sign * xi
        self.weights = np.ones(m)
        self._work = np.zeros(n)
        self._refactor()

    def _refactor(self) -> None:
        self.B = _Basis(self.full, self.basis, self.refactor_every + 1)
        self._recompute_primal()
        self._recompute_dual()

    def _recompute_primal(self) -> None:
        zn = self.z.copy()
        zn[self.basis] = 0.0
        rhs = -(self.full @ zn)
        self.xB = self.B.ftran(rhs)

    def _recompute_dual(self) -> None:
        y = self.B.btran(self.c[self.basis])
        d = self.c - self.fullT @ y
        d[self.basis] = 0.0
        self.d = d
        # restore dual feasibility lost to round-off by flipping to the other bound
        bad_lo = (self.status == AT_LOWER) & (d < -DUAL_TOL) & ~self.fixed
        bad_hi = (self.status == AT_UPPER) & (d > DUAL_TOL) & ~self.fixed
        if bad_lo.any() or bad_hi.any():
            self.status[bad_lo] = AT_UPPER
            self.status[bad_hi] = AT_LOWER
            flip = bad_lo | bad_hi
            self.z[flip] = np.where(self.status[flip] == AT_UPPER, self.hi[flip], self.lo[flip])
            self._recompute_primal()

    # -- main loop ---------------------------------------------------------
    def solve(self) -> LpSolution:
        t0 = time.perf_counter()
        self._init_state()
        degenerate_run = 0
        self.n_bland = 0
        self.n_degenerate = 0
        self.max_run = 0
        it = 0
        since_refactor = 0
        lo, hi = self.lo, self.hi
        n, m = self.n, self.m
        status, fixed = self.status, self.fixed
        while True:
            if it >= self.max_iter:
                raise SolverFailure(f"iteration limit {self.max_iter} reached")
            if self.time_limit is not None and time.perf_counter() - t0 > self.time_limit:
                raise SolverFailure("time limit reached")
            basis = self.basis
            bland = degenerate_run >= self.bland_after
            self.n_bland += bland
            r, to_lower, delta0 = _k.price(self.xB, basis, lo, hi, self.weights, bland, PRIMAL_TOL)
            if r < 0:
                if since_refactor:
                    # confirm optimality on a fresh factorization
                    self._refactor()
                    since_refactor = 0
                    continue
                if self.perturbed:
                    log.debug("perturbed pass optimal after %d iterations", it)
                    self.perturbed = False
                    self.c = self.c_true
                    self._recompute_dual()
                    degenerate_run = 0
                    continue
                break
            leave = int(basis[r])

            e_r = np.zeros(m)
            e_r[r] = 1.0
            rho = self.B.btran(e_r)
            idx, alpha = _k.pivot_row(rho, *self.Arow, n, status, self._work, PIVOT_TOL)
            alpha_t = alpha if to_lower else -alpha

            q, step, flips, infeasible = _k.ratio_test(
                idx, alpha_t, status, fixed, self.d, lo, hi, delta0, bland, PIVOT_TOL)
            if infeasible:
                return self._finish(LpStatus.INFEASIBLE, it, t0, certificate=leave)
            alpha_rq = float(alpha[np.flatnonzero(idx == q)[0]])

            if step <= DEGENERATE_STEP:
                degenerate_run += 1
                self.n_degenerate += 1
                self.max_run = max(self.max_run, degenerate_run)
            else:
                degenerate_run = 0

            # dual update
            if step > 0.0:
                _k.dual_update(idx, alpha_t, self.d, step)
            self.d[q] = 0.0
            self.d[leave] = step if to_lower else -step

            # bound flips
            if flips.size:
                new_up = status[flips] == AT_LOWER
                delta = np.where(new_up, hi[flips] - lo[flips], lo[flips] - hi[flips])
                status[flips] = np.where(new_up, AT_UPPER, AT_LOWER)
                self.z[flips] = np.where(new_up, hi[flips], lo[flips])
                aF = _k.scatter_columns(*self.fullcol, flips, delta, m)
                self.xB -= self.B.ftran(aF)

            col = _k.scatter_columns(*self.fullcol, np.array([q]), np.ones(1), m)
            alpha_q = self.B.ftran(col)
            piv = alpha_q[r]
            if abs(piv) < PIVOT_TOL or abs(piv - alpha_rq) > 1e-6 * (1.0 + abs(piv)):
                if since_refactor == 0:
                    raise SolverFailure(f"unstable pivot {piv:g} vs {alpha_rq:g} at iteration {it}")
                log.debug("pivot mismatch at iteration %d, refactoring", it)
                self._refactor()
                since_refactor = 0
                continue

            bound = lo[leave] if to_lower else hi[leave]
            theta = (self.xB[r] - bound) / piv
            _k.primal_step(self.xB, alpha_q, theta)
            enter_val = self.z[q] + theta

            # dual steepest edge weights
            if not bland:
                tau = self.B.ftran(rho)
                _k.dse_update(self.weights, alpha_q, tau, r, piv, _k.sq_norm(rho))

            status[leave] = AT_LOWER if to_lower else AT_UPPER
            self.z[leave] = bound
            status[q] = BASIC
            basis[r] = q
            self.xB[r] = enter_val
            self.B.push(r, alpha_q)
            it += 1
            since_refactor += 1
            if since_refactor >= self.refactor_every:
                self._refactor()
                since_refactor = 0
                if it % (10 * self.refactor_every) == 0:
                    log.debug("iteration %d: %.1f s, LU nnz %d, degenerate %d", it, time.perf_counter() - t0,
                              self.B.lcsc[1].size + self.B.ucsc[1].size, self.n_degenerate)
        self.z[self.basis] = self.xB
        return self._finish(LpStatus.OPTIMAL, it, t0)

    def _finish(self, status: LpStatus, it: int, t0: float, certificate: int | None = None) -> LpSolution:
        n = self.n
        x = self.z[:n].copy()
        info = {"seconds": time.perf_counter() - t0, "bland_iterations": self.n_bland,
                "degenerate_iterations": self.n_degenerate,
                "longest_degenerate_run": self.max_run}
        kind = None
        if certificate is not None:
            kind = "variable" if certificate < n else "row"
            certificate = certificate if certificate < n else certificate - n
        if status is LpStatus.OPTIMAL:
            on_art = ((self.status == AT_LOWER) & self.art_lo) | ((self.status == AT_UPPER) & self.art_hi)
            ray = np.flatnonzero(on_art & (np.abs(self.d) > DUAL_TOL))
            if ray.size:
                j = int(ray[0])
                return LpSolution(
                    LpStatus.UNBOUNDED, x, -np.inf, is_vertex=False,
                    certificate=j if j < n else j - n,
                    certificate_kind="variable" if j < n else "row",
                    iterations=it, info=info,
                )
            viol = self.problem.max_violation(x)
            info["max_violation"] = viol
            if viol > 1e-6:
                raise SolverFailure(f"final point violates constraints by {viol:g}")
            obj = float(np.asarray(self.problem.objective, float) @ x)
            return LpSolution(status, x, obj, is_vertex=True, iterations=it, info=info)
        return LpSolution(status, x, np.nan, is_vertex=False, certificate=certificate,
                          certificate_kind=kind, iterations=it, info=info)


def _drop_empty_rows(problem: LpProblem) -> tuple[LpProblem, LpSolution | None]:
    nnz = np.diff(problem.A.tocsr().indptr)
    empty = nnz == 0
    if not empty.any():
        return problem, None
    bad = np.flatnonzero(empty & ((problem.row_lo > 1e-9) | (problem.row_hi < -1e-9)))
    if bad.size:
        sol = LpSolution(LpStatus.INFEASIBLE, np.zeros(problem.n_vars), np.nan, is_vertex=False,
                         certificate=int(bad[0]), certificate_kind="row")
        return problem, sol
    keep = ~empty
    reduced = LpProblem(
        var_lo=problem.var_lo, var_hi=problem.var_hi, A=problem.A.tocsr()[keep],
        row_lo=problem.row_lo[keep], row_hi=problem.row_hi[keep], objective=problem.objective,
    )
    return reduced, None


def solve_simplex(problem: LpProblem, **options) -> LpSolution:
    problem.check()
    reduced, early = _drop_empty_rows(problem)
    if early is not None:
        return early
    if reduced.n_vars == 0:
        return LpSolution(LpStatus.OPTIMAL, np.zeros(0), 0.0)
    sol = DualSimplex(reduced, **options).solve()
    if sol.certificate_kind == "row" and reduced is not problem:
        kept = np.flatnonzero(np.diff(problem.A.tocsr().indptr) != 0)
        sol.certificate = int(kept[sol.certificate])
    return sol
