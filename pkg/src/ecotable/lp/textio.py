"""Plain-text dump of an LpProblem for cross-checking with external solvers.

Layout (whitespace separated, ``inf``/``-inf`` for infinite bounds)::

    LP <n_vars> <n_rows>
    BOUNDS
    <j> <lo> <hi>
    ROWS
    <i> <lo> <hi> <j>:<coef> <j>:<coef> ...
    OBJECTIVE
    <j> <coef>
    END
"""
from __future__ import annotations

from pathlib import Path
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .problem import LpProblem


def _num(v: float) -> str:
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return repr(float(v))


def write_lp(problem: LpProblem, out: TextIO) -> None:
    A = problem.A.tocsr()
    out.write(f"LP {problem.n_vars} {problem.n_rows}\nBOUNDS\n")
    for j in range(problem.n_vars):
        out.write(f"{j} {_num(problem.var_lo[j])} {_num(problem.var_hi[j])}\n")
    out.write("ROWS\n")
    for i in range(problem.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        terms = " ".join(f"{j}:{_num(v)}" for j, v in zip(A.indices[lo:hi], A.data[lo:hi]))
        out.write(f"{i} {_num(problem.row_lo[i])} {_num(problem.row_hi[i])} {terms}\n")
    out.write("OBJECTIVE\n")
    for j in np.flatnonzero(problem.objective):
        out.write(f"{j} {_num(problem.objective[j])}\n")
    out.write("END\n")


def dump_lp(problem: LpProblem, path: str | Path) -> None:
    with open(path, "w") as fh:
        write_lp(problem, fh)


def load_lp(path: str | Path) -> LpProblem:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    header = lines[0]
    if header[0] != "LP":
        raise ValueError("not an LP dump")
    n, m = int(header[1]), int(header[2])
    lo = np.zeros(n)
    hi = np.zeros(n)
    rlo = np.zeros(m)
    rhi = np.zeros(m)
    c = np.zeros(n)
    rows, cols, vals = [], [], []
    section = None
    for parts in lines[1:]:
        if parts[0] in ("BOUNDS", "ROWS", "OBJECTIVE", "END"):
            section = parts[0]
            continue
        if section == "BOUNDS":
            j = int(parts[0])
            lo[j], hi[j] = float(parts[1]), float(parts[2])
        elif section == "ROWS":
            i = int(parts[0])
            rlo[i], rhi[i] = float(parts[1]), float(parts[2])
            for term in parts[3:]:
                j, v = term.split(":")
                rows.append(i)
                cols.append(int(j))
                vals.append(float(v))
        elif section == "OBJECTIVE":
            c[int(parts[0])] = float(parts[1])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    return LpProblem(var_lo=lo, var_hi=hi, A=A, row_lo=rlo, row_hi=rhi, objective=c)
