"""Compiled inner loops of the dual simplex.

Triangular solves skip zero pivots, so a right-hand side that stays sparse
through the solve (the usual case for difference-constraint bases) costs
little more than a pass over the vector.
"""
from __future__ import annotations

import numba as nb
import numpy as np

AT_LOWER = 1
AT_UPPER = 2
BASIC = 0


@nb.njit(cache=True)
def lu_solve(Lp, Li, Lx, Up, Ui, Ux, Ud, perm_r, perm_c, b):
    """x with B x = b, where Pr B Pc = L U (L strictly lower, U strictly upper + Ud)."""
    m = b.size
    w = np.empty(m)
    for i in range(m):
        w[perm_r[i]] = b[i]
    for j in range(m):
        wj = w[j]
        if wj != 0.0:
            for k in range(Lp[j], Lp[j + 1]):
                w[Li[k]] -= Lx[k] * wj
    for j in range(m - 1, -1, -1):
        wj = w[j]
        if wj != 0.0:
            wj /= Ud[j]
            w[j] = wj
            for k in range(Up[j], Up[j + 1]):
                w[Ui[k]] -= Ux[k] * wj
    x = np.empty(m)
    for i in range(m):
        x[i] = w[perm_c[i]]
    return x


@nb.njit(cache=True)
def lu_solve_t(LRp, LRj, LRx, URp, URj, URx, Ud, perm_r, perm_c, b):
    """x with B^T x = b.  ``LR*``/``UR*`` are the row-major copies of L and U."""
    m = b.size
    v = np.empty(m)
    for i in range(m):
        v[perm_c[i]] = b[i]
    for j in range(m):
        vj = v[j]
        if vj != 0.0:
            vj /= Ud[j]
            v[j] = vj
            for k in range(URp[j], URp[j + 1]):
                v[URj[k]] -= URx[k] * vj
    for j in range(m - 1, -1, -1):
        vj = v[j]
        if vj != 0.0:
            for k in range(LRp[j], LRp[j + 1]):
                v[LRj[k]] -= LRx[k] * vj
    x = np.empty(m)
    for i in range(m):
        x[i] = v[perm_r[i]]
    return x


@nb.njit(cache=True)
def eta_ftran(v, er, eptr, eidx, eval_, epiv, n_eta):
    for e in range(n_eta):
        r = er[e]
        vr = v[r] / epiv[e]
        if vr != 0.0:
            for k in range(eptr[e], eptr[e + 1]):
                v[eidx[k]] -= eval_[k] * vr
        v[r] = vr


@nb.njit(cache=True)
def eta_btran(u, er, eptr, eidx, eval_, epiv, n_eta):
    for e in range(n_eta - 1, -1, -1):
        r = er[e]
        s = u[r]
        for k in range(eptr[e], eptr[e + 1]):
            s -= eval_[k] * u[eidx[k]]
        u[r] = s / epiv[e]


@nb.njit(cache=True)
def price(xB, basis, lo, hi, weights, bland, tol):
    """Leaving row: largest infeasibility^2/weight, or smallest basic index under Bland.

    Returns (row, to_lower, violation); row is -1 when primal feasible.
    """
    m = xB.size
    best = -1
    best_score = -1.0
    best_var = 1 << 62
    to_lower = False
    viol_r = 0.0
    for i in range(m):
        j = basis[i]
        below = lo[j] - xB[i]
        above = xB[i] - hi[j]
        v = below if below > above else above
        if v > tol:
            if bland:
                if j < best_var:
                    best_var = j
                    best = i
                    to_lower = below > above
                    viol_r = v
            else:
                s = v * v / weights[i]
                if s > best_score:
                    best_score = s
                    best = i
                    to_lower = below > above
                    viol_r = v
    return best, to_lower, viol_r


@nb.njit(cache=True)
def pivot_row(rho, Ap, Aj, Ax, n, status, work, tol):
    """Nonzeros of rho^T [A -I] over nonbasic columns: (indices, values)."""
    m = rho.size
    touched = np.empty(n, np.int64)
    nt = 0
    for i in range(m):
        ri = rho[i]
        if ri != 0.0:
            for k in range(Ap[i], Ap[i + 1]):
                j = Aj[k]
                if work[j] == 0.0:
                    touched[nt] = j
                    nt += 1
                    v = ri * Ax[k]
                    work[j] = v if v != 0.0 else 1e-300
                else:
                    work[j] += ri * Ax[k]
                    if work[j] == 0.0:
                        work[j] = 1e-300  # keep it marked
    cnt = 0
    for t in range(nt):
        j = touched[t]
        if status[j] != BASIC and abs(work[j]) > tol:
            cnt += 1
    for i in range(m):
        if rho[i] != 0.0 and status[n + i] != BASIC and abs(rho[i]) > tol:
            cnt += 1
    idx = np.empty(cnt, np.int64)
    val = np.empty(cnt)
    c = 0
    for t in range(nt):
        j = touched[t]
        if status[j] != BASIC and abs(work[j]) > tol:
            idx[c] = j
            val[c] = work[j]
            c += 1
        work[j] = 0.0
    for i in range(m):
        if rho[i] != 0.0 and status[n + i] != BASIC and abs(rho[i]) > tol:
            idx[c] = n + i
            val[c] = -rho[i]
            c += 1
    return idx, val


@nb.njit(cache=True)
def ratio_test(idx, alpha_t, status, fixed, d, lo, hi, delta0, bland, tol):
    """Dual ratio test with bound flipping.

    Returns (q, step, flips, infeasible).  ``q`` is -1 when no column can enter.
    """
    nc = 0
    for t in range(idx.size):
        j = idx[t]
        if fixed[j]:
            continue
        a = alpha_t[t]
        if (status[j] == AT_LOWER and a < -tol) or (status[j] == AT_UPPER and a > tol):
            nc += 1
    empty = np.empty(0, np.int64)
    if nc == 0:
        return -1, 0.0, empty, True
    cand = np.empty(nc, np.int64)
    ratios = np.empty(nc)
    absa = np.empty(nc)
    c = 0
    for t in range(idx.size):
        j = idx[t]
        if fixed[j]:
            continue
        a = alpha_t[t]
        if status[j] == AT_LOWER and a < -tol:
            r = d[j] if d[j] > 0.0 else 0.0
        elif status[j] == AT_UPPER and a > tol:
            r = -d[j] if d[j] < 0.0 else 0.0
        else:
            continue
        cand[c] = j
        absa[c] = abs(a)
        ratios[c] = r / abs(a)
        c += 1
    if bland:
        rmin = ratios.min()
        q = 1 << 62
        step = 0.0
        for t in range(nc):
            if ratios[t] <= rmin + 1e-12 * (1.0 + rmin) and cand[t] < q:
                q = cand[t]
                step = ratios[t]
        return q, step, empty, False
    order = np.argsort(ratios, kind="mergesort")
    acc = 0.0
    k = 0
    while k < nc:
        t = order[k]
        acc += absa[t] * (hi[cand[t]] - lo[cand[t]])
        if acc >= delta0:
            break
        k += 1
    if k >= nc:
        return -1, 0.0, empty, True
    rk = ratios[order[k]]
    pick = order[k]
    best = absa[pick]
    for s in range(k + 1, nc):
        t = order[s]
        if ratios[t] > rk + 1e-9 * (1.0 + rk):
            break
        if absa[t] > best:
            best = absa[t]
            pick = t
    flips = np.empty(k, np.int64)
    nf = 0
    for s in range(k):
        t = order[s]
        if t != pick:
            flips[nf] = cand[t]
            nf += 1
    return cand[pick], ratios[pick], flips[:nf], False


@nb.njit(cache=True)
def dual_update(idx, alpha_t, d, step):
    for t in range(idx.size):
        d[idx[t]] += step * alpha_t[t]


@nb.njit(cache=True)
def scatter_columns(Cp, Ci, Cx, cols, coefs, m):
    """Dense sum_k coefs[k] * column cols[k] of a CSC matrix."""
    out = np.zeros(m)
    for t in range(cols.size):
        j = cols[t]
        ck = coefs[t]
        for k in range(Cp[j], Cp[j + 1]):
            out[Ci[k]] += Cx[k] * ck
    return out


@nb.njit(cache=True)
def primal_step(xB, alpha_q, theta):
    for i in range(xB.size):
        a = alpha_q[i]
        if a != 0.0:
            xB[i] -= theta * a


@nb.njit(cache=True)
def dse_update(weights, alpha_q, tau, r, piv, w_r):
    for i in range(weights.size):
        a = alpha_q[i]
        if a != 0.0:
            ratio = a / piv
            w = weights[i] - 2.0 * ratio * tau[i] + ratio * ratio * w_r
            weights[i] = w if w > 1e-8 else 1e-8
    w = w_r / (piv * piv)
    weights[r] = w if w > 1e-8 else 1e-8


@nb.njit(cache=True)
def sq_norm(v):
    s = 0.0
    for i in range(v.size):
        s += v[i] * v[i]
    return s
