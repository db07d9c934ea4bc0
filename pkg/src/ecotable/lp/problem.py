"""LP data types shared by the simplex solver and the model builders."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

INF = np.inf


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SolverFailure(RuntimeError):
    """Raised when the simplex cannot finish (iteration cap, singular basis)."""


@dataclass
class LpProblem:
    """minimize c.x  s.t.  row_lo <= A x <= row_hi,  var_lo <= x <= var_hi.

    ``A`` is stored as CSR; infinite bounds use ``numpy.inf``.
    """

    var_lo: np.ndarray
    var_hi: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    objective: np.ndarray
    var_names: list[str] | None = None
    row_names: list[str] | None = None

    @property
    def n_vars(self) -> int:
        return len(self.var_lo)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_rows(
        cls,
        n_vars: int,
        rows: Iterable[tuple[Mapping[int, float], float, float]],
        objective: Mapping[int, float] | Sequence[float],
        var_lo: Sequence[float] | float = 0.0,
        var_hi: Sequence[float] | float = INF,
    ) -> "LpProblem":
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        lo: list[float] = []
        hi: list[float] = []
        for coefs, rlo, rhi in rows:
            for j, v in coefs.items():
                indices.append(j)
                data.append(v)
            indptr.append(len(indices))
            lo.append(rlo)
            hi.append(rhi)
        A = sp.csr_matrix(
            (np.asarray(data, float), np.asarray(indices, np.int64), np.asarray(indptr, np.int64)),
            shape=(len(lo), n_vars),
        )
        if isinstance(objective, Mapping):
            c = np.zeros(n_vars)
            for j, v in objective.items():
                c[j] += v
        else:
            c = np.asarray(objective, float)
        return cls(
            var_lo=np.broadcast_to(np.asarray(var_lo, float), (n_vars,)).copy(),
            var_hi=np.broadcast_to(np.asarray(var_hi, float), (n_vars,)).copy(),
            A=A,
            row_lo=np.asarray(lo, float),
            row_hi=np.asarray(hi, float),
            objective=c,
        )

    def check(self) -> None:
        if self.A.shape != (len(self.row_lo), self.n_vars):
            raise ValueError("constraint matrix shape does not match bounds")
        if len(self.objective) != self.n_vars or len(self.var_hi) != self.n_vars:
            raise ValueError("objective/bounds length mismatch")
        if np.any(self.var_lo > self.var_hi):
            j = int(np.flatnonzero(self.var_lo > self.var_hi)[0])
            raise ValueError(f"variable {j} has lo > hi")
        if np.any(self.row_lo > self.row_hi):
            i = int(np.flatnonzero(self.row_lo > self.row_hi)[0])
            raise ValueError(f"row {i} has lo > hi")
        if not np.all(np.isfinite(self.A.data)):
            raise ValueError("non-finite coefficient in constraint matrix")

    def max_violation(self, x: np.ndarray) -> float:
        ax = self.A @ x
        viol = [
            np.max(self.var_lo - x, initial=0.0),
            np.max(x - self.var_hi, initial=0.0),
            np.max(self.row_lo - ax, initial=0.0),
            np.max(ax - self.row_hi, initial=0.0),
        ]
        return float(max(viol))


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective_value: float
    is_vertex: bool = True
    certificate: int | None = None
    certificate_kind: str | None = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def check_integrality(solution: LpSolution, tol: float = 1e-7) -> tuple[bool, float]:
    """Return (all components within ``tol`` of an integer, max deviation)."""
    if solution.status is not LpStatus.OPTIMAL:
        raise ValueError("integrality is only defined for optimal solutions")
    x = np.asarray(solution.x, float)
    if x.size == 0:
        return True, 0.0
    dev = float(np.max(np.abs(x - np.round(x))))
    return dev <= tol, dev
